"""Trajectory dataset persistence.

One header line `TAKSIE-DATA v1 obs_dim=16 act_dim=4`, then one text record
per trajectory: `task|success|command|obs_hex|act_hex` with float payloads as
hex-encoded little-endian 64-bit floats.  Round trips are bit exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .scripted import Trajectory
from .world import ACT_DIM, OBS_DIM

HEADER = f"TAKSIE-DATA v1 obs_dim={OBS_DIM} act_dim={ACT_DIM}"


class DatasetError(ValueError):
    pass


def _to_hex(arr: np.ndarray) -> str:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes().hex()


def _from_hex(payload: str, width: int, line_no: int, what: str) -> np.ndarray:
    try:
        raw = bytes.fromhex(payload)
    except ValueError as e:
        raise DatasetError(f"line {line_no}: bad hex in {what}: {e}") from e
    if len(raw) % (8 * width) != 0:
        raise DatasetError(f"line {line_no}: truncated {what} payload")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(-1, width)


def dataset_write(trajectories: list[Trajectory], path: str | Path) -> None:
    lines = [HEADER]
    for i, traj in enumerate(trajectories):
        if len(traj.actions) != len(traj.observations) - 1:
            raise DatasetError(f"trajectory {i}: {len(traj.actions)} actions for "
                               f"{len(traj.observations)} observations")
        lines.append("|".join([
            traj.task_id, str(int(traj.success)), traj.command,
            _to_hex(traj.observations), _to_hex(traj.actions),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def dataset_read(path: str | Path) -> list[Trajectory]:
    text = Path(path).read_text()
    lines = text.split("\n")
    if not lines or lines[0] != HEADER:
        raise DatasetError(f"line 1: expected header {HEADER!r}")
    out: list[Trajectory] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("|")
        if len(fields) != 5:
            raise DatasetError(
                f"line {line_no}: record {line_no - 1} has {len(fields)} fields, expected 5")
        task_id, success_s, command, obs_hex, act_hex = fields
        obs = _from_hex(obs_hex, OBS_DIM, line_no, "observation")
        acts = _from_hex(act_hex, ACT_DIM, line_no, "action") if act_hex else \
            np.zeros((0, ACT_DIM))
        if len(acts) != len(obs) - 1:
            raise DatasetError(f"line {line_no}: {len(acts)} actions for {len(obs)} "
                               "observations")
        out.append(Trajectory(task_id, command, obs, acts, success_s == "1"))
    return out
