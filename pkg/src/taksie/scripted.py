"""Scripted demonstration planners.

Each task is a short waypoint program (approach, align, grasp or actuate,
complete).  Per-segment step size scales with `speed_scale` and every step
carries +/-20% multiplicative jitter, emulating demonstrations collected at
different teleoperation speeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import world
from .rng import Rng, derive
from .tasks import Task, get_task
from .world import (BOX_POS, RED, SWITCH_POS, WorldState, drawer_handle,
                    slider_handle)

BASE_STEP = 0.024
WAYPOINT_TOL = 0.015
MAX_DEMO_STEPS = 300
GRIP_OPEN, GRIP_CLOSE = -1.0, 1.0


class DemoError(RuntimeError):
    pass


@dataclass
class Trajectory:
    task_id: str
    command: str
    observations: np.ndarray      # (N, 16)
    actions: np.ndarray           # (N-1, 4)
    success: bool

    def __len__(self) -> int:
        return len(self.observations)


@dataclass(frozen=True)
class _Waypoint:
    target: np.ndarray
    grip: float
    dwell: int = 0                # extra steps held at the target


def _above(p: np.ndarray, dz: float = 0.12) -> np.ndarray:
    return np.array([p[0], p[1], min(1.0, p[2] + dz)])


def plan_waypoints(task: Task, state: WorldState) -> list[_Waypoint]:
    tid = task.id
    if tid in ("open_drawer", "close_drawer"):
        handle = drawer_handle(state.drawer)
        target_q = 0.95 if tid == "open_drawer" else 0.05
        out = drawer_handle(target_q)
        return [
            _Waypoint(_above(handle), GRIP_OPEN),
            _Waypoint(handle, GRIP_OPEN),
            _Waypoint(handle, GRIP_CLOSE, dwell=1),
            _Waypoint(out, GRIP_CLOSE),
            _Waypoint(out, GRIP_OPEN, dwell=1),
        ]
    if tid in ("slide_left", "slide_right"):
        handle = slider_handle(state.slider)
        target_q = 0.05 if tid == "slide_left" else 0.95
        out = slider_handle(target_q)
        return [
            _Waypoint(_above(handle), GRIP_OPEN),
            _Waypoint(handle, GRIP_OPEN),
            _Waypoint(handle, GRIP_CLOSE, dwell=1),
            _Waypoint(out, GRIP_CLOSE),
            _Waypoint(out, GRIP_OPEN, dwell=1),
        ]
    if tid in ("light_on", "light_off"):
        staging = SWITCH_POS + np.array([0.14, 0.0, 0.0])
        return [
            _Waypoint(staging, GRIP_OPEN),
            _Waypoint(staging, GRIP_CLOSE, dwell=1),
            _Waypoint(SWITCH_POS.copy(), GRIP_CLOSE),
        ]
    if tid in ("push_red_left", "push_red_right"):
        block = state.blocks[RED].copy()
        sgn = -1.0 if tid == "push_red_left" else 1.0
        dest = np.array([state.ref_block_x[RED] + sgn * 0.2, block[1], 0.02])
        plan: list[_Waypoint] = []
        if state.held != RED:
            grasp = np.array([block[0], block[1], 0.02])
            plan += [
                _Waypoint(_above(grasp), GRIP_OPEN),
                _Waypoint(grasp, GRIP_OPEN),
                _Waypoint(grasp, GRIP_CLOSE, dwell=1),
            ]
        plan += [
            _Waypoint(dest, GRIP_CLOSE),
            _Waypoint(dest, GRIP_OPEN, dwell=1),
        ]
        return plan
    if tid == "lift_red":
        block = state.blocks[RED].copy()
        top = np.array([block[0], block[1], 0.55])
        plan = []
        if state.held != RED:
            grasp = np.array([block[0], block[1], 0.02])
            plan += [
                _Waypoint(_above(grasp), GRIP_OPEN),
                _Waypoint(grasp, GRIP_OPEN),
                _Waypoint(grasp, GRIP_CLOSE, dwell=1),
            ]
        plan += [_Waypoint(top, GRIP_CLOSE, dwell=1)]
        return plan
    if tid == "place_red_in_box":
        block = state.blocks[RED].copy()
        carry_z = 0.15
        above_box = np.array([BOX_POS[0], BOX_POS[1], carry_z])
        in_box = np.array([BOX_POS[0], BOX_POS[1], 0.02])
        plan = []
        if state.held != RED:
            grasp = np.array([block[0], block[1], 0.02])
            plan += [
                _Waypoint(_above(grasp), GRIP_OPEN),
                _Waypoint(grasp, GRIP_OPEN),
                _Waypoint(grasp, GRIP_CLOSE, dwell=1),
            ]
        plan += [
            _Waypoint(np.array([block[0], block[1], carry_z]), GRIP_CLOSE),
            _Waypoint(above_box, GRIP_CLOSE),
            _Waypoint(in_box, GRIP_CLOSE),
            _Waypoint(in_box, GRIP_OPEN, dwell=1),
        ]
        return plan
    raise ValueError(f"unknown task id {tid!r}")  # pragma: no cover


def rollout_plan(task: Task, state: WorldState, jitter_rng: Rng,
                 speed_scale: float) -> tuple[list[np.ndarray], list[np.ndarray], WorldState]:
    """Drive the waypoint plan from `state`; returns (observations, actions, final)."""
    observations = [state.observe()]
    actions: list[np.ndarray] = []
    for wp in plan_waypoints(task, state):
        dwell_left = wp.dwell
        while True:
            if len(actions) >= MAX_DEMO_STEPS:
                raise DemoError(f"{task.id}: planner exceeded {MAX_DEMO_STEPS} steps")
            offset = wp.target - state.grip_pos
            dist = float(np.linalg.norm(offset))
            if dist <= WAYPOINT_TOL:
                if dwell_left <= 0:
                    break
                dwell_left -= 1
                delta = np.zeros(3)
            else:
                step_len = BASE_STEP * speed_scale * (0.8 + 0.4 * jitter_rng.uniform())
                delta = offset * min(1.0, step_len / dist)
            action = np.array([delta[0], delta[1], delta[2], wp.grip])
            state = world.step(state, action)
            observations.append(state.observe())
            actions.append(np.clip(action, [-0.05] * 3 + [-1.0], [0.05] * 3 + [1.0]))
    return observations, actions, state


def scripted_demo(task: Task | str, seed: int, speed_scale: float = 1.0) -> Trajectory:
    """Deterministic scripted demonstration ending in task success."""
    task = task if isinstance(task, Task) else get_task(task)
    if not 0.5 <= speed_scale <= 2.0:
        raise ValueError(f"speed_scale {speed_scale} outside [0.5, 2.0]")
    state = world.reset(task, seed)
    jitter_rng = Rng(derive(seed, "demo-jitter", task.id))
    observations, actions, final = rollout_plan(task, state, jitter_rng, speed_scale)
    if not world.success(task, final):
        raise DemoError(f"{task.id}: scripted demo did not reach success")
    return Trajectory(task.id, task.command, np.asarray(observations),
                      np.asarray(actions), True)
