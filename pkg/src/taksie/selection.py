"""Ground-truth subgoal selection from demonstrations.

Pipeline: embedding-distance curve -> LOWESS smoothing -> normalized slopes
-> threshold scan with a minimum inter-subgoal interval.  A fixed-interval
selector provides the baseline strategy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import ceil
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SelectionParams:
    smooth_frac: float = 0.167
    delta1: float = 0.0
    delta2: float = 0.0
    min_interval: int = 7

    def __post_init__(self):
        if not 0.0 < self.smooth_frac <= 1.0:
            raise ValueError(f"smooth_frac must be in (0, 1], got {self.smooth_frac}")
        if self.min_interval < 1:
            raise ValueError(f"min_interval must be >= 1, got {self.min_interval}")


def effective_frac(frac: float, n: int) -> float:
    """Short curves fall back to a window of two points rather than failing."""
    if frac * n < 2.0:
        return min(1.0, 2.0 / n)
    return frac


def lowess_smooth(series: np.ndarray, frac: float) -> np.ndarray:
    """Locally weighted linear regression over evenly spaced points.

    Per point, the ceil(frac*n) nearest neighbours enter a weighted linear
    fit with tricube weights w = (1 - (|dx|/dx_max)^3)^3, and the fit is
    evaluated at the point itself.  No robustifying iterations.
    """
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1 or len(y) < 3:
        raise ValueError(f"series must be 1-d with length >= 3, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    n = len(y)
    k = ceil(frac * n)
    if k < 2:
        raise ValueError(f"frac*n must be >= 2, got {frac} * {n}")
    k = min(k, n)
    x = np.arange(n, dtype=np.float64)
    out = np.empty(n)
    for i in range(n):
        d = np.abs(x - x[i])
        dmax = np.sort(d)[k - 1]
        w = np.clip(d / dmax, 0.0, 1.0) if dmax > 0 else (d == 0).astype(float)
        w = (1.0 - w**3) ** 3
        sw = w.sum()
        # Centered weighted least squares; the intercept is the fit at x[i].
        u = x - x[i]
        swu = (w * u).sum()
        swuu = (w * u * u).sum()
        swy = (w * y).sum()
        swuy = (w * u * y).sum()
        det = sw * swuu - swu * swu
        if abs(det) < 1e-12 * max(sw * swuu, 1e-300):
            out[i] = swy / sw
        else:
            out[i] = (swuu * swy - swu * swuy) / det
    return out


def slopes(series: np.ndarray) -> np.ndarray:
    """Per-frame slope: central differences inside, one-sided at the ends,
    scaled by 1/max|slope| so values lie in [-1, 1] (all-zero stays zero)."""
    y = np.asarray(series, dtype=np.float64)
    if len(y) < 2:
        raise ValueError(f"series length must be >= 2, got {len(y)}")
    s = np.empty(len(y))
    s[0] = y[1] - y[0]
    s[-1] = y[-1] - y[-2]
    if len(y) > 2:
        s[1:-1] = (y[2:] - y[:-2]) / 2.0
    m = np.max(np.abs(s))
    return s / m if m > 0 else s


def select_subgoals(curve: np.ndarray, params: SelectionParams) -> list[int]:
    """Pick subgoal frames from a smoothed distance curve.

    A frame qualifies where the slope just before it is at/above delta1 (no
    progress yet) and the slope just after is strictly below delta2 (clear
    progress), at least `min_interval` frames from the previous pick and from
    the final frame.  The final frame is always appended.
    """
    y = np.asarray(curve, dtype=np.float64)
    n = len(y)
    if n < 2:
        raise ValueError(f"curve length must be >= 2, got {n}")
    d = params.min_interval
    picked: list[int] = []
    if n >= 3:
        slope = slopes(y)
        last = None
        for i in range(1, n - 1):
            if slope[i - 1] < params.delta1 or slope[i + 1] >= params.delta2:
                continue
            if last is not None and i - last < d:
                continue
            if (n - 1) - i < d:
                continue
            picked.append(i)
            last = i
    picked.append(n - 1)
    return picked


def fixed_interval_select(length: int, interval: int) -> list[int]:
    """Baseline: every `interval` frames plus the final frame, deduplicated."""
    if interval < 1:
        raise ValueError(f"interval must be >= 1, got {interval}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    picks = list(range(interval, length - 1, interval))
    if not picks or picks[-1] != length - 1:
        picks.append(length - 1)
    return picks


def plan_subgoals(raw_curve: np.ndarray, params: SelectionParams) -> list[int]:
    """Full selection: smooth the raw distance curve, then threshold-scan."""
    n = len(raw_curve)
    if n < 3:
        return [n - 1]
    smoothed = lowess_smooth(raw_curve, effective_frac(params.smooth_frac, n))
    return select_subgoals(smoothed, params)


def write_selection_csv(path: str | Path, rows: list[dict]) -> None:
    """Per-frame dump: trajectory, frame, raw distance, smoothed, slope, selected."""
    fields = ["trajectory", "frame", "distance", "smoothed", "slope", "selected"]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def selection_rows(traj_index: int, raw_curve: np.ndarray,
                   params: SelectionParams) -> tuple[list[dict], list[int]]:
    n = len(raw_curve)
    if n < 3:
        smoothed = np.asarray(raw_curve, dtype=np.float64)
        slope = slopes(smoothed) if n >= 2 else np.zeros(n)
        picks = [n - 1]
    else:
        smoothed = lowess_smooth(raw_curve, effective_frac(params.smooth_frac, n))
        slope = slopes(smoothed)
        picks = select_subgoals(smoothed, params)
    pick_set = set(picks)
    rows = [{"trajectory": traj_index, "frame": i,
             "distance": repr(float(raw_curve[i])),
             "smoothed": repr(float(smoothed[i])),
             "slope": repr(float(slope[i])),
             "selected": int(i in pick_set)} for i in range(n)]
    return rows, picks
