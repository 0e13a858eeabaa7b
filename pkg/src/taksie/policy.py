"""Goal-conditioned diffusion behavior cloning.

Training samples hindsight windows from demonstrations (final state repeated
`k_delta` times with zero actions), targets the first four actions of each
window as one normalized 16-dim chunk, and denoises it conditioned on the
window's start and goal observations.  At rollout a chunk is denoised every
step and the overlapping predictions are ensembled dimension-wise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .diffusion import (DiffusionSchedule, ddim_step, ddim_timesteps, q_sample,
                        time_embedding)
from .nn import Adam, ParameterSet, init_mlp, mlp_backward, mlp_forward
from .rng import Rng
from .scripted import Trajectory
from .text import TEXT_DIM, encode_text
from .world import ACT_DIM, OBS_DIM

CHUNK = 4
CHUNK_DIM = CHUNK * ACT_DIM
TEMB_DIM = 32
POLICY_WIDTHS = [CHUNK_DIM + OBS_DIM + OBS_DIM + TEMB_DIM, 256, 256, 256, CHUNK_DIM]
ACTION_SCALE = np.array([0.05, 0.05, 0.05, 1.0])
TRAINED_VERSION = 2


def _norm_obs(obs: np.ndarray) -> np.ndarray:
    return 2.0 * np.asarray(obs, dtype=np.float64) - 1.0


def norm_actions(chunk: np.ndarray) -> np.ndarray:
    return (chunk / ACTION_SCALE).reshape(*chunk.shape[:-2], CHUNK_DIM)


def denorm_actions(flat: np.ndarray) -> np.ndarray:
    chunk = np.asarray(flat).reshape(*np.shape(flat)[:-1], CHUNK, ACT_DIM)
    return np.clip(chunk * ACTION_SCALE, -ACTION_SCALE, ACTION_SCALE)


@dataclass
class WindowSample:
    start_obs: np.ndarray
    goal_obs: np.ndarray
    chunk: np.ndarray        # (4, 4) raw action units, zero-padded past the end


def sample_window(traj: Trajectory, k_min: int, k_max: int, k_delta: int,
                  rng: Rng) -> WindowSample:
    """One hindsight window: length first (uniform), then a uniform start.

    The trajectory is virtually extended by repeating its final state
    `k_delta` times with zero actions before sampling.
    """
    n_steps = len(traj.actions) + k_delta
    if n_steps < k_min:
        raise ValueError(f"trajectory with {len(traj.actions)} steps is shorter "
                         f"than k_min={k_min}")
    length = rng.integers(k_min, min(k_max, n_steps) + 1)
    start = rng.integers(0, n_steps - length + 1)
    last_obs = len(traj.observations) - 1
    goal = traj.observations[min(start + length, last_obs)]
    chunk = np.zeros((CHUNK, ACT_DIM))
    for i in range(CHUNK):
        if start + i < len(traj.actions):
            chunk[i] = traj.actions[start + i]
    return WindowSample(traj.observations[min(start, last_obs)].copy(),
                        goal.copy(), chunk)


@dataclass
class _WindowTable:
    obs: np.ndarray            # (sum_frames, 16)
    acts: np.ndarray           # (sum_steps_real, 4) concatenated
    obs_offset: np.ndarray
    act_offset: np.ndarray
    n_real_acts: np.ndarray
    n_ext_steps: np.ndarray
    goal_vec: np.ndarray | None   # (n_traj, 16) text goals for the lcbc variant
    skipped: int


def _build_window_table(trajectories: list[Trajectory], k_min: int, k_delta: int,
                        goal_mode: str, text_params: ParameterSet | None) -> _WindowTable:
    kept, goal_rows, skipped = [], [], 0
    for traj in trajectories:
        if len(traj.actions) + k_delta < k_min:
            skipped += 1
            continue
        kept.append(traj)
        if goal_mode == "text":
            goal_rows.append(encode_text(text_params, traj.command))
    if not kept:
        raise ValueError("no trajectory long enough for the window sampler")
    obs_off, act_off = [], []
    obs_all, act_all = [], []
    to, ta = 0, 0
    for traj in kept:
        obs_off.append(to)
        act_off.append(ta)
        obs_all.append(traj.observations)
        act_all.append(traj.actions)
        to += len(traj.observations)
        ta += len(traj.actions)
    return _WindowTable(
        np.concatenate(obs_all), np.concatenate(act_all),
        np.asarray(obs_off), np.asarray(act_off),
        np.asarray([len(t.actions) for t in kept]),
        np.asarray([len(t.actions) + k_delta for t in kept]),
        np.asarray(goal_rows) if goal_mode == "text" else None,
        skipped)


def _sample_window_batch(table: _WindowTable, rng: Rng, batch: int,
                         k_min: int, k_max: int):
    n_traj = len(table.obs_offset)
    ti = rng.integers(0, n_traj, (batch,))
    hi = np.minimum(k_max, table.n_ext_steps[ti])
    length = k_min + (rng.uniform((batch,)) * (hi - k_min + 1)).astype(np.int64)
    start = (rng.uniform((batch,)) * (table.n_ext_steps[ti] - length + 1)).astype(np.int64)
    last = table.n_real_acts[ti]          # index of final observation
    start_obs = table.obs[table.obs_offset[ti] + np.minimum(start, last)]
    goal_obs = table.obs[table.obs_offset[ti] + np.minimum(start + length, last)]
    chunk = np.zeros((batch, CHUNK, ACT_DIM))
    for i in range(CHUNK):
        real = start + i < table.n_real_acts[ti]
        idx = table.act_offset[ti] + np.minimum(start + i, table.n_real_acts[ti] - 1)
        chunk[:, i] = np.where(real[:, None], table.acts[idx], 0.0)
    return ti, start_obs, goal_obs, chunk, length


def _policy_loss_and_grads(params: ParameterSet, schedule: DiffusionSchedule,
                           cond_start: np.ndarray, cond_goal: np.ndarray,
                           chunk: np.ndarray, t: np.ndarray, eps: np.ndarray,
                           compute_grads: bool = True):
    x0 = norm_actions(chunk)
    x_t = q_sample(schedule, x0, t, eps)
    temb = time_embedding(t.astype(np.float64), TEMB_DIM)
    inp = np.concatenate([x_t, cond_start, cond_goal, temb], axis=1)
    eps_hat = mlp_forward(params, inp)
    resid = eps_hat - eps
    loss = float((resid**2).mean())
    if not compute_grads:
        return loss, None
    grads, _ = mlp_backward(params, inp, 2.0 * resid / resid.size)
    return loss, grads.entries


def train_policy(trajectories: list[Trajectory], schedule: DiffusionSchedule,
                 steps: int = 30000, batch: int = 128, lr: float = 1e-3,
                 k_min: int = 4, k_max: int = 20, k_delta: int = 3,
                 seed: int = 0, heldout_frac: float = 0.1,
                 goal_mode: str = "obs", text_params: ParameterSet | None = None,
                 log_every: int = 1000):
    """Train the action denoiser; returns (params, curve, (held0, held1), skipped)."""
    if goal_mode not in ("obs", "text"):
        raise ValueError(f"goal_mode must be 'obs' or 'text', got {goal_mode!r}")
    if goal_mode == "text" and text_params is None:
        raise ValueError("text goal mode requires trained text parameters")
    if not trajectories:
        raise ValueError("dataset is empty")
    from .encoder import heldout_split
    train, held = heldout_split(trajectories, heldout_frac)
    table = _build_window_table(train, k_min, k_delta, goal_mode, text_params)
    held_table = _build_window_table(held, k_min, k_delta, goal_mode, text_params)

    rng = Rng(seed)
    params = init_mlp(rng.split("init"), POLICY_WIDTHS)

    def conds(tbl, ti, start_obs, goal_obs):
        start = _norm_obs(start_obs)
        if goal_mode == "text":
            return start, tbl.goal_vec[ti]
        return start, _norm_obs(goal_obs)

    def make_batch(tbl, brng, size):
        ti, start_obs, goal_obs, chunk, _ = _sample_window_batch(
            tbl, brng, size, k_min, k_max)
        cond_start, cond_goal = conds(tbl, ti, start_obs, goal_obs)
        t = brng.integers(1, schedule.t_train + 1, (size,))
        eps = brng.normal((size, CHUNK_DIM))
        return cond_start, cond_goal, chunk, t, eps

    held_batch = make_batch(held_table, rng.split("held"), 512)
    initial_held, _ = _policy_loss_and_grads(params, schedule, *held_batch,
                                             compute_grads=False)
    opt = Adam(lr=lr)
    batch_rng = rng.split("batches")
    curve: list[tuple[int, float]] = []
    for step_i in range(steps):
        b = make_batch(table, batch_rng, batch)
        loss, grads = _policy_loss_and_grads(params, schedule, *b)
        if not np.isfinite(loss):
            raise RuntimeError(f"policy training diverged at step {step_i}")
        if step_i % log_every == 0:
            curve.append((step_i, loss))
        opt.step(params.entries, grads)
    final_held, _ = _policy_loss_and_grads(params, schedule, *held_batch,
                                           compute_grads=False)
    curve.append((steps, final_held))
    params.version = TRAINED_VERSION
    return params, curve, (initial_held, final_held), table.skipped


# ---------------------------------------------------------------------------
# Rollout-time chunk denoising and temporal ensembling.
# ---------------------------------------------------------------------------

def denoise_chunks(params: ParameterSet, schedule: DiffusionSchedule,
                   obs: np.ndarray, goal_vec: np.ndarray, noise: np.ndarray,
                   ddim_steps: int = 20, goal_is_obs: bool = True) -> np.ndarray:
    """Denoise (N, 16) action chunks for N episodes in one batch."""
    if params.version < TRAINED_VERSION:
        raise ValueError("policy parameters are untrained")
    cond_start = _norm_obs(np.atleast_2d(obs))
    goal_vec = np.atleast_2d(goal_vec)
    cond_goal = _norm_obs(goal_vec) if goal_is_obs else goal_vec
    x = np.atleast_2d(noise).astype(np.float64).copy()
    N = len(x)
    for t, t_next in ddim_timesteps(schedule.t_train, ddim_steps):
        temb = np.tile(time_embedding(np.asarray(float(t)), TEMB_DIM), (N, 1))
        inp = np.concatenate([x, cond_start, cond_goal, temb], axis=1)
        x = ddim_step(schedule, x, mlp_forward(params, inp), t, t_next)
    return x


@dataclass
class ActionBuffer:
    """Ring of the last four predicted chunks with their emission ticks."""

    entries: deque = field(default_factory=lambda: deque(maxlen=CHUNK))

    def push(self, tick: int, chunk: np.ndarray) -> None:
        self.entries.append((tick, np.asarray(chunk)))

    def emit(self, tick: int) -> np.ndarray:
        """Dimension-wise mean of buffered predictions aligned to `tick`."""
        aligned = [chunk[tick - t0] for t0, chunk in self.entries
                   if 0 <= tick - t0 < CHUNK]
        if not aligned:
            raise ValueError(f"no buffered prediction covers tick {tick}")
        return np.mean(aligned, axis=0)


def policy_act(params: ParameterSet, schedule: DiffusionSchedule,
               obs: np.ndarray, goal_vec: np.ndarray, buffer: ActionBuffer,
               tick: int, rng: Rng, ddim_steps: int = 20,
               goal_is_obs: bool = True) -> np.ndarray:
    """Predict a chunk, push it, and emit the ensembled action for `tick`."""
    noise = rng.normal((CHUNK_DIM,))
    flat = denoise_chunks(params, schedule, obs, goal_vec, noise[None, :],
                          ddim_steps, goal_is_obs)[0]
    buffer.push(tick, denorm_actions(flat))
    action = buffer.emit(tick)
    return np.clip(action, -ACTION_SCALE, ACTION_SCALE)
