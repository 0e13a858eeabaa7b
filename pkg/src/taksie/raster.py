"""Debug rasterizer: 32x32 grayscale PGM snapshots of an observation."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .world import (BOX_POS, DRAWER_X, DRAWER_Y0, DRAWER_TRAVEL, DRAWER_Z,
                    SLIDER_X0, SLIDER_TRAVEL, SLIDER_Y, SWITCH_POS)

SIZE = 32


def _px(v: float) -> int:
    return int(np.clip(round(v * (SIZE - 1)), 0, SIZE - 1))


def _stamp(img: np.ndarray, x: float, y: float, half: int, value: int) -> None:
    cx, cy = _px(x), _px(1.0 - y)
    img[max(0, cy - half):cy + half + 1, max(0, cx - half):cx + half + 1] = value


def render_pgm(obs: np.ndarray) -> bytes:
    """Render a 16-dim observation as a binary (P5) PGM image."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (16,):
        raise ValueError(f"expected a 16-dim observation, got shape {obs.shape}")
    img = np.full((SIZE, SIZE), 16, dtype=np.uint8)
    gx, gy, gz, grip, drawer, slider, light = obs[:7]
    blocks = obs[7:16].reshape(3, 3)

    _stamp(img, BOX_POS[0], BOX_POS[1], 2, 48)
    _stamp(img, SWITCH_POS[0], SWITCH_POS[1], 1, 250 if light >= 0.5 else 40)
    _stamp(img, DRAWER_X, DRAWER_Y0 + DRAWER_TRAVEL * drawer, 1, 60)
    _stamp(img, SLIDER_X0 + SLIDER_TRAVEL * slider, SLIDER_Y, 1, 70)
    for i, shade in enumerate((90, 140, 190)):
        _stamp(img, blocks[i, 0], blocks[i, 1], 1, shade + int(40 * blocks[i, 2]))
    # Gripper last so it reads on top; brightness tracks height, dot marks closed.
    _stamp(img, gx, gy, 1, 200 + int(55 * gz))
    if grip >= 0.5:
        img[_px(1.0 - gy), _px(gx)] = 128
    return f"P5\n{SIZE} {SIZE}\n255\n".encode() + img.tobytes()


def save_pgm(obs: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(render_pgm(obs))
