"""Conditional diffusion subgoal generator.

A denoising MLP predicts the noise on a (normalized) next-subgoal
observation, conditioned on the current observation, the command embedding,
and the recurrent progress embedding.  Training samples (segment, target)
pairs from ground-truth subgoal plans and cotrains the denoiser, the
progress-encoder GRU, and the text table under independent text/image
condition dropout.  Sampling runs deterministic DDIM with dual
classifier-free guidance; antonym commands fill the negative text branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import (DiffusionSchedule, cfg_combine, ddim_step,
                        ddim_timesteps, q_sample, time_embedding)
from .encoder import embed
from .nn import (Adam, ParameterSet, gru_cell_cached, gru_backward_step,
                 init_gru, init_mlp, mlp_backward, mlp_forward,
                 zero_grads_like)
from .progress import HIDDEN_DIM
from .rng import Rng
from .scripted import Trajectory
from .tasks import antonym
from .text import (NULL_ID, TEXT_DIM, encode_text, init_text_params,
                   null_embedding, token_ids)
from .world import OBS_DIM

TEMB_DIM = 16
DENOISER_WIDTHS = [OBS_DIM + OBS_DIM + TEXT_DIM + HIDDEN_DIM + TEMB_DIM,
                   256, 256, 256, OBS_DIM]
TRAINED_VERSION = 2


def norm_obs(obs: np.ndarray) -> np.ndarray:
    """Map observations from [0, 1] to the diffusion data range [-1, 1]."""
    return 2.0 * np.asarray(obs, dtype=np.float64) - 1.0


def denorm_obs(x: np.ndarray) -> np.ndarray:
    return np.clip((np.asarray(x) + 1.0) / 2.0, 0.0, 1.0)


@dataclass
class ConditionBundle:
    current_obs: np.ndarray        # (16,) normalized; zeros when dropped
    text_emb: np.ndarray           # (16,)
    neg_text_emb: np.ndarray       # (16,)
    progress_h: np.ndarray         # (32,)
    drop_text: bool = False
    drop_image: bool = False


@dataclass(frozen=True)
class GuidanceParams:
    scale_image: float = 2.5
    scale_text: float = 2.5
    ddim_steps: int = 50

    def __post_init__(self):
        if self.scale_image < 0 or self.scale_text < 0:
            raise ValueError("guidance scales must be nonnegative")


def init_generator(rng: Rng):
    """Fresh (denoiser, gru, text) parameter sets."""
    return (init_mlp(rng.split("denoiser"), DENOISER_WIDTHS),
            init_gru(rng.split("gru"), TEXT_DIM, HIDDEN_DIM),
            init_text_params(rng.split("text")))


def _assemble(x_t: np.ndarray, cur: np.ndarray, text: np.ndarray,
              h: np.ndarray, temb: np.ndarray) -> np.ndarray:
    return np.concatenate([x_t, cur, text, h, temb], axis=-1)


def denoiser_forward(gen_params: ParameterSet, x_t: np.ndarray, t: int,
                     conds: ConditionBundle) -> np.ndarray:
    """Single noise prediction; drop flags substitute zeros / the null text."""
    cur = np.zeros(OBS_DIM) if conds.drop_image else conds.current_obs
    text = conds.neg_text_emb if conds.drop_text else conds.text_emb
    temb = time_embedding(np.asarray(float(t)), TEMB_DIM)
    return mlp_forward(gen_params, _assemble(x_t, cur, text, conds.progress_h, temb))


# ---------------------------------------------------------------------------
# Training.
# ---------------------------------------------------------------------------

@dataclass
class _PairTable:
    """Flattened (trajectory, subgoal-index) training pairs."""

    obs: np.ndarray              # (sum_frames, 16) normalized observations
    traj_offset: np.ndarray      # (n_traj,)
    n_pairs_per_traj: np.ndarray
    pair_offset: np.ndarray      # (n_traj,)
    pair_lo: np.ndarray          # segment start frame (global index)
    pair_hi: np.ndarray          # segment end = subgoal frame (global index)
    pair_target: np.ndarray      # subgoal frame (global index)
    prefix: np.ndarray           # (n_pairs, max_len, 16) achieved-subgoal embeddings
    prefix_len: np.ndarray       # (n_pairs,)
    pool_rows: np.ndarray        # (n_traj, vocab) mean-pool row per trajectory
    n_traj: int = field(init=False)

    def __post_init__(self):
        self.n_traj = len(self.traj_offset)


def build_pair_table(trajectories: list[Trajectory], plans: list[list[int]],
                     encoder_params: ParameterSet, vocab_size: int) -> _PairTable:
    if len(plans) != len(trajectories):
        raise ValueError(f"{len(trajectories)} trajectories but {len(plans)} plans")
    obs_norm, offsets = [], []
    embs = []
    total = 0
    for traj in trajectories:
        offsets.append(total)
        obs_norm.append(norm_obs(traj.observations))
        embs.append(embed(encoder_params, traj.observations))
        total += len(traj.observations)
    obs_all = np.concatenate(obs_norm)
    offsets = np.asarray(offsets)

    lo, hi, target, plens, prefixes = [], [], [], [], []
    n_pairs, pair_off = [], []
    for ti, (traj, plan) in enumerate(zip(trajectories, plans)):
        if not plan:
            raise ValueError(f"trajectory {ti} has an empty subgoal plan")
        if plan[-1] != len(traj.observations) - 1:
            raise ValueError(f"trajectory {ti}: plan does not end at the final frame")
        pair_off.append(len(lo))
        n_pairs.append(len(plan))
        bounds = [0] + list(plan)
        for j in range(1, len(bounds)):
            lo.append(offsets[ti] + bounds[j - 1])
            hi.append(offsets[ti] + bounds[j])
            target.append(offsets[ti] + bounds[j])
            prefix_frames = [0] + bounds[1:j]
            prefixes.append(embs[ti][prefix_frames])
            plens.append(len(prefix_frames))

    max_len = max(plens)
    prefix_arr = np.zeros((len(prefixes), max_len, prefixes[0].shape[1]))
    for i, p in enumerate(prefixes):
        prefix_arr[i, :len(p)] = p

    pool = np.zeros((len(trajectories), vocab_size))
    for ti, traj in enumerate(trajectories):
        ids = token_ids(traj.command)
        for tok in ids:
            pool[ti, tok] += 1.0 / len(ids)

    return _PairTable(obs_all, offsets, np.asarray(n_pairs), np.asarray(pair_off),
                      np.asarray(lo), np.asarray(hi), np.asarray(target),
                      prefix_arr, np.asarray(plens), pool)


def _fold_progress_batch(gru_params: ParameterSet, prefix: np.ndarray,
                         plen: np.ndarray):
    """Masked GRU fold over padded prefixes; returns (h, caches)."""
    B, L, _ = prefix.shape
    h = np.zeros((B, HIDDEN_DIM))
    caches = []
    for s in range(L):
        active = (plen > s)[:, None]
        h_new, cache = gru_cell_cached(gru_params, h, prefix[:, s])
        caches.append((cache, active))
        h = np.where(active, h_new, h)
    return h, caches


def _fold_progress_backward(gru_params: ParameterSet, caches, d_h: np.ndarray,
                            grads: dict[str, np.ndarray]) -> None:
    for cache, active in reversed(caches):
        d_cell = d_h * active
        d_prev, _ = gru_backward_step(gru_params, cache, d_cell, grads)
        d_h = np.where(active, d_prev, d_h)


def _sample_training_batch(table: _PairTable, rng: Rng, batch: int,
                           schedule: DiffusionSchedule,
                           text_dropout: float, image_dropout: float):
    ti = rng.integers(0, table.n_traj, (batch,))
    j = (rng.uniform((batch,)) * table.n_pairs_per_traj[ti]).astype(np.int64)
    p = table.pair_offset[ti] + j
    span = table.pair_hi[p] - table.pair_lo[p]
    cur_idx = table.pair_lo[p] + (rng.uniform((batch,)) * span).astype(np.int64)
    x0 = table.obs[table.pair_target[p]]
    cur = table.obs[cur_idx]
    drop_text = rng.uniform((batch,)) < text_dropout
    drop_image = rng.uniform((batch,)) < image_dropout
    t = rng.integers(1, schedule.t_train + 1, (batch,))
    eps = rng.normal((batch, OBS_DIM))
    return ti, p, x0, cur, drop_text, drop_image, t, eps


def _gen_loss_and_grads(gen_params: ParameterSet, gru_params: ParameterSet,
                        text_params: ParameterSet, table: _PairTable,
                        sample, schedule: DiffusionSchedule,
                        compute_grads: bool = True):
    ti, p, x0, cur, drop_text, drop_image, t, eps = sample
    B = len(ti)
    x_t = q_sample(schedule, x0, t, eps)
    cur_in = np.where(drop_image[:, None], 0.0, cur)

    pool = table.pool_rows[ti].copy()
    pool[drop_text] = 0.0
    pool[drop_text, NULL_ID] = 1.0
    text_emb = pool @ text_params["table"]

    h, caches = _fold_progress_batch(gru_params, table.prefix[p], table.prefix_len[p])
    temb = time_embedding(t.astype(np.float64), TEMB_DIM)
    inp = np.concatenate([x_t, cur_in, text_emb, h, temb], axis=1)
    eps_hat = mlp_forward(gen_params, inp)
    resid = eps_hat - eps
    loss = float((resid**2).mean())
    if not compute_grads:
        return loss, None

    d_out = 2.0 * resid / resid.size
    gen_grads, d_inp = mlp_backward(gen_params, inp, d_out)
    o1 = OBS_DIM
    o2 = o1 + OBS_DIM
    o3 = o2 + TEXT_DIM
    o4 = o3 + HIDDEN_DIM
    d_text = d_inp[:, o2:o3]
    d_h = d_inp[:, o3:o4]

    text_grads = {"table": pool.T @ d_text}
    gru_grads = zero_grads_like(gru_params)
    _fold_progress_backward(gru_params, caches, d_h, gru_grads)
    return loss, (gen_grads.entries, gru_grads, text_grads)


def train_generator(trajectories: list[Trajectory], plans: list[list[int]],
                    encoder_params: ParameterSet, schedule: DiffusionSchedule,
                    steps: int = 30000, batch: int = 128, lr: float = 1e-3,
                    text_dropout: float = 0.1, image_dropout: float = 0.1,
                    seed: int = 0, heldout_frac: float = 0.1,
                    log_every: int = 1000):
    """Cotrain denoiser + progress GRU + text table on subgoal prediction.

    Returns (gen, gru, text) parameter sets (version 2 marks them trained),
    the training-loss curve, and the held-out loss before and after.
    """
    from .encoder import heldout_split
    train, held = heldout_split(list(zip(trajectories, plans)), heldout_frac)
    train_trajs, train_plans = [t for t, _ in train], [p for _, p in train]
    held_trajs, held_plans = [t for t, _ in held], [p for _, p in held]

    rng = Rng(seed)
    gen, gru, text = init_generator(rng.split("init"))
    vocab = text["table"].shape[0]
    table = build_pair_table(train_trajs, train_plans, encoder_params, vocab)
    held_table = build_pair_table(held_trajs, held_plans, encoder_params, vocab)
    held_sample = _sample_training_batch(held_table, rng.split("held"), 512,
                                         schedule, text_dropout, image_dropout)

    def held_loss():
        loss, _ = _gen_loss_and_grads(gen, gru, text, held_table, held_sample,
                                      schedule, compute_grads=False)
        return loss

    initial_held = held_loss()
    opt = Adam(lr=lr)
    params = {f"gen/{k}": v for k, v in gen.entries.items()}
    params |= {f"gru/{k}": v for k, v in gru.entries.items()}
    params |= {f"text/{k}": v for k, v in text.entries.items()}
    batch_rng = rng.split("batches")
    curve: list[tuple[int, float]] = []
    for step_i in range(steps):
        sample = _sample_training_batch(table, batch_rng, batch, schedule,
                                        text_dropout, image_dropout)
        loss, grads = _gen_loss_and_grads(gen, gru, text, table, sample, schedule)
        if not np.isfinite(loss):
            raise RuntimeError(f"generator training diverged at step {step_i}")
        if step_i % log_every == 0:
            curve.append((step_i, loss))
        gen_g, gru_g, text_g = grads
        flat = {f"gen/{k}": v for k, v in gen_g.items()}
        flat |= {f"gru/{k}": v for k, v in gru_g.items()}
        flat |= {f"text/{k}": v for k, v in text_g.items()}
        opt.step(params, flat)
    final_held = held_loss()
    curve.append((steps, final_held))
    gen.version = gru.version = text.version = TRAINED_VERSION
    return gen, gru, text, curve, (initial_held, final_held)


# ---------------------------------------------------------------------------
# Sampling.
# ---------------------------------------------------------------------------

def generate_subgoals_batch(gen_params: ParameterSet, schedule: DiffusionSchedule,
                            current_obs: np.ndarray, text_emb: np.ndarray,
                            neg_text_emb: np.ndarray, h: np.ndarray,
                            noise: np.ndarray, guidance: GuidanceParams) -> np.ndarray:
    """Vectorized DDIM sampling with dual guidance for N conditions.

    Per step three denoiser branches run as one batch: (no image, negative
    text), (image, negative text), (image, text).  Returns observations
    clamped to [0, 1]^16.
    """
    if gen_params.version < TRAINED_VERSION:
        raise ValueError("generator parameters are untrained")
    cur = norm_obs(np.atleast_2d(current_obs))
    text_emb = np.atleast_2d(text_emb)
    neg_text_emb = np.atleast_2d(neg_text_emb)
    h = np.atleast_2d(h)
    x = np.atleast_2d(noise).astype(np.float64).copy()
    N = len(x)
    zeros_img = np.zeros_like(cur)
    for t, t_next in ddim_timesteps(schedule.t_train, guidance.ddim_steps):
        temb = np.tile(time_embedding(np.asarray(float(t)), TEMB_DIM), (N, 1))
        inp = np.concatenate([
            np.concatenate([x, zeros_img, neg_text_emb, h, temb], axis=1),
            np.concatenate([x, cur, neg_text_emb, h, temb], axis=1),
            np.concatenate([x, cur, text_emb, h, temb], axis=1),
        ])
        out = mlp_forward(gen_params, inp)
        eps = cfg_combine(out[:N], out[N:2 * N], out[2 * N:],
                          guidance.scale_image, guidance.scale_text)
        x = ddim_step(schedule, x, eps, t, t_next)
    return denorm_obs(np.clip(x, -1.0, 1.0))


def generate_subgoal(gen_params: ParameterSet, text_params: ParameterSet,
                     schedule: DiffusionSchedule, current_obs: np.ndarray,
                     command: str, h: np.ndarray, guidance: GuidanceParams,
                     seed: int, use_null_negative: bool = False) -> np.ndarray:
    """Generate the next subgoal observation for one episode state."""
    text_emb = encode_text(text_params, command)
    neg = antonym(command)
    if use_null_negative or not neg:
        neg_emb = null_embedding(text_params)
    else:
        neg_emb = encode_text(text_params, neg)
    noise = Rng(seed).normal((OBS_DIM,))
    out = generate_subgoals_batch(gen_params, schedule, current_obs, text_emb,
                                  neg_emb, h, noise[None, :], guidance)
    return out[0]
