"""Denoising-diffusion primitives shared by the subgoal generator and the
action policy: a linear-beta schedule, the forward noising process, the
deterministic DDIM update, dual classifier-free guidance, and sinusoidal
timestep embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DiffusionSchedule:
    t_train: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02
    alpha_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.t_train < 1:
            raise ValueError(f"t_train must be >= 1, got {self.t_train}")
        betas = np.linspace(self.beta_start, self.beta_end, self.t_train)
        if not (np.all(betas > 0) and np.all(betas < 1)):
            raise ValueError("betas must lie strictly inside (0, 1)")
        # alpha_bar[t] for t in 0..t_train; alpha_bar[0] = 1 (no noise).
        bars = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        object.__setattr__(self, "alpha_bar", bars)

    def bar(self, t) -> np.ndarray:
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.t_train):
            raise ValueError(f"timestep {t} outside [0, {self.t_train}]")
        return self.alpha_bar[t]


def q_sample(schedule: DiffusionSchedule, x0: np.ndarray, t,
             eps: np.ndarray) -> np.ndarray:
    """Forward process: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > schedule.t_train):
        raise ValueError(f"timestep {t} outside [1, {schedule.t_train}]")
    abar = schedule.alpha_bar[t]
    if np.ndim(x0) == 2 and np.ndim(abar) == 1:
        abar = abar[:, None]
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def ddim_step(schedule: DiffusionSchedule, x_t: np.ndarray, eps_hat: np.ndarray,
              t: int, t_next: int) -> np.ndarray:
    """Deterministic (eta = 0) DDIM update from t to t_next < t."""
    if not t > t_next >= 0:
        raise ValueError(f"need t > t_next >= 0, got {t} -> {t_next}")
    abar_t = float(schedule.bar(t))
    abar_n = float(schedule.bar(t_next))
    if abar_t == 0.0:
        raise ValueError(f"alpha_bar({t}) is zero")
    x0_hat = (x_t - np.sqrt(1.0 - abar_t) * eps_hat) / np.sqrt(abar_t)
    return np.sqrt(abar_n) * x0_hat + np.sqrt(1.0 - abar_n) * eps_hat


def ddim_timesteps(t_train: int, n_steps: int) -> list[tuple[int, int]]:
    """Even-stride sampling subsequence as (t, t_next) pairs ending at 0."""
    if not 1 <= n_steps <= t_train:
        raise ValueError(f"n_steps must be in [1, {t_train}], got {n_steps}")
    if t_train % n_steps != 0:
        raise ValueError(f"{n_steps} sampling steps do not evenly divide "
                         f"t_train={t_train}")
    stride = t_train // n_steps
    ts = list(range(t_train, 0, -stride))
    return list(zip(ts, ts[1:] + [0]))


def cfg_combine(eps_uu: np.ndarray, eps_iu: np.ndarray, eps_it: np.ndarray,
                scale_image: float, scale_text: float) -> np.ndarray:
    """Dual classifier-free guidance.

    eps_uu: no image, negative/null text; eps_iu: image, negative/null text;
    eps_it: image and text.  Unit scales collapse to the fully conditioned
    prediction.
    """
    if not (eps_uu.shape == eps_iu.shape == eps_it.shape):
        raise ValueError("guidance branches must share one shape")
    return eps_uu + scale_image * (eps_iu - eps_uu) + scale_text * (eps_it - eps_iu)


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps; shape (..., dim)."""
    if dim % 2 != 0:
        raise ValueError(f"embedding dim must be even, got {dim}")
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = t[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)
