"""Time-contrastive observation encoder.

A small MLP trained with InfoNCE so that embedding distance tracks temporal
task progress: anchors attract frames at most 3 steps away and repel frames
at least 10 steps away (or frames from other trajectories).  Similarity is
negative L2 distance over a temperature.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import Adam, ParameterSet, init_mlp, mlp_backward, mlp_forward
from .rng import Rng
from .scripted import Trajectory

EMB_DIM = 16
ENCODER_WIDTHS = [16, 64, 64, EMB_DIM]
POS_WINDOW = 3
NEG_GAP = 10
_DIST_EPS = 1e-12  # smooths the L2 distance gradient at coincident embeddings


def init_encoder(rng: Rng) -> ParameterSet:
    return init_mlp(rng, ENCODER_WIDTHS)


def embed(encoder_params: ParameterSet, obs: np.ndarray) -> np.ndarray:
    """Map one observation (16,) or a batch (N, 16) to embeddings."""
    return mlp_forward(encoder_params, obs)


def progress_curve(encoder_params: ParameterSet, observations: np.ndarray) -> np.ndarray:
    """Embedding distance of every frame to the final frame; last entry 0."""
    obs = np.asarray(observations, dtype=np.float64)
    if len(obs) < 2:
        raise ValueError(f"trajectory must have >= 2 frames, got {len(obs)}")
    z = embed(encoder_params, obs)
    return np.linalg.norm(z - z[-1], axis=1)


def export_progress_csv(path: str | Path, curve: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame_index", "distance"])
        for i, d in enumerate(curve):
            writer.writerow([i, repr(float(d))])


@dataclass
class TCBatch:
    anchors: np.ndarray        # (B, 16) observations
    positives: np.ndarray      # (B, 16)
    negatives: np.ndarray      # (B, K, 16)
    neg_mask: np.ndarray       # (B, K) bool; False entries are padding


def time_contrastive_loss(encoder_params: ParameterSet, batch: TCBatch,
                          tau: float):
    """InfoNCE over embedding distances.

    loss_i = -log( e^{s(a,p)} / (e^{s(a,p)} + sum_k e^{s(a,n_k)}) ) with
    s(u, v) = -||u - v||_2 / tau, averaged over anchors.  Anchors without any
    negative contribute 0.  Returns (loss, grads, n_without_negatives).
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    B, K = batch.negatives.shape[:2]
    stacked = np.concatenate([batch.anchors, batch.positives,
                              batch.negatives.reshape(B * K, -1)])
    z = mlp_forward(encoder_params, stacked)
    za, zp = z[:B], z[B:2 * B]
    zn = z[2 * B:].reshape(B, K, EMB_DIM)

    diff_p = za - zp                                   # (B, E)
    dist_p = np.sqrt((diff_p**2).sum(axis=1) + _DIST_EPS)
    diff_n = za[:, None, :] - zn                       # (B, K, E)
    dist_n = np.sqrt((diff_n**2).sum(axis=2) + _DIST_EPS)

    # log(1 + sum_k e^{(d_p - d_k)/tau}) computed stably.
    logits = (dist_p[:, None] - dist_n) / tau          # (B, K)
    logits = np.where(batch.neg_mask, logits, -np.inf)
    mx = np.maximum(logits.max(axis=1), 0.0)  # max(-inf, 0) = 0 when no negatives
    sum_exp = np.exp(-mx) + np.where(batch.neg_mask,
                                     np.exp(logits - mx[:, None]), 0.0).sum(axis=1)
    losses = mx + np.log(sum_exp)
    loss = float(losses.mean())

    # d loss_i / d logit_k = softmax weight of negative k.
    w = np.where(batch.neg_mask, np.exp(logits - mx[:, None]), 0.0) / sum_exp[:, None]
    d_dist_p = w.sum(axis=1) / (tau * B)               # (B,)
    d_dist_n = -w / (tau * B)                          # (B, K)

    gz = np.zeros_like(z)
    unit_p = diff_p / dist_p[:, None]
    gz[:B] += d_dist_p[:, None] * unit_p
    gz[B:2 * B] -= d_dist_p[:, None] * unit_p
    unit_n = diff_n / dist_n[:, :, None]
    contrib = d_dist_n[:, :, None] * unit_n
    gz[:B] += contrib.sum(axis=1)
    gz[2 * B:] = -contrib.reshape(B * K, EMB_DIM)

    grads, _ = mlp_backward(encoder_params, stacked, gz)
    n_without = int((~batch.neg_mask.any(axis=1)).sum())
    return loss, grads, n_without


def sample_tc_batch(rng: Rng, trajectories: list[Trajectory], batch_size: int,
                    n_neg: int = 16) -> TCBatch:
    anchors = np.empty((batch_size, 16))
    positives = np.empty((batch_size, 16))
    negatives = np.empty((batch_size, n_neg, 16))
    mask = np.ones((batch_size, n_neg), dtype=bool)
    n_traj = len(trajectories)
    for b in range(batch_size):
        ti = rng.integers(0, n_traj)
        obs = trajectories[ti].observations
        n = len(obs)
        i = rng.integers(0, n - 1)
        j = i + rng.integers(1, min(POS_WINDOW, n - 1 - i) + 1)
        anchors[b], positives[b] = obs[i], obs[j]
        for k in range(n_neg):
            for _ in range(20):
                tj = rng.integers(0, n_traj)
                fj = rng.integers(0, len(trajectories[tj].observations))
                if tj != ti or abs(fj - i) >= NEG_GAP:
                    negatives[b, k] = trajectories[tj].observations[fj]
                    break
            else:
                negatives[b, k] = 0.0
                mask[b, k] = False
    return TCBatch(anchors, positives, negatives, mask)


def heldout_split(trajectories: list[Trajectory], frac: float = 0.1):
    """Deterministic train/held-out split by trajectory index."""
    n_held = max(1, int(round(len(trajectories) * frac)))
    step = max(1, len(trajectories) // n_held)
    held_idx = set(range(step - 1, len(trajectories), step))
    train = [t for i, t in enumerate(trajectories) if i not in held_idx]
    held = [t for i, t in enumerate(trajectories) if i in held_idx]
    return train, held


def train_repr(trajectories: list[Trajectory], steps: int = 5000,
               batch_size: int = 64, tau: float = 0.1, lr: float = 1e-3,
               seed: int = 0, heldout_frac: float = 0.1,
               log_every: int = 250):
    """Train the encoder; returns (params, loss_curve, heldout_before_after)."""
    if len(trajectories) < 10:
        raise ValueError(f"need >= 10 trajectories, got {len(trajectories)}")
    train, held = heldout_split(trajectories, heldout_frac)
    rng = Rng(seed)
    params = init_encoder(rng.split("init"))
    opt = Adam(lr=lr)
    held_batch = sample_tc_batch(rng.split("heldout"), held, 256)

    def held_loss(ps):
        loss, _, _ = time_contrastive_loss(ps, held_batch, tau)
        return loss

    initial_held = held_loss(params)
    curve: list[tuple[int, float]] = []
    batch_rng = rng.split("batches")
    for step_i in range(steps):
        batch = sample_tc_batch(batch_rng, train, batch_size)
        loss, grads, _ = time_contrastive_loss(params, batch, tau)
        if not np.isfinite(loss):
            raise RuntimeError(f"representation training diverged at step {step_i}")
        if step_i % log_every == 0:
            curve.append((step_i, loss))
        opt.step(params.entries, grads.entries)
    final_held = held_loss(params)
    curve.append((steps, final_held))
    return params, curve, (initial_held, final_held)


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman rank correlation with average ranks for ties."""
    def ranks(v):
        v = np.asarray(v, dtype=np.float64)
        order = np.argsort(v, kind="stable")
        r = np.empty(len(v))
        r[order] = np.arange(len(v), dtype=np.float64)
        # average the ranks of tied values
        uniq, inv, counts = np.unique(v, return_inverse=True, return_counts=True)
        sums = np.zeros(len(uniq))
        np.add.at(sums, inv, r)
        return sums[inv] / counts[inv]

    rx, ry = ranks(x), ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = np.sqrt((rx**2).sum() * (ry**2).sum())
    if denom == 0:
        return 0.0
    return float((rx * ry).sum() / denom)


def progress_spearman(encoder_params: ParameterSet,
                      trajectories: list[Trajectory]) -> np.ndarray:
    """Per-trajectory Spearman(frame index, distance-to-final)."""
    out = []
    for traj in trajectories:
        curve = progress_curve(encoder_params, traj.observations)
        out.append(spearman(np.arange(len(curve)), curve))
    return np.asarray(out)
