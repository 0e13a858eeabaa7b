"""Counter-based deterministic RNG.

Every stochastic site in the repo draws from an `Rng` seeded through
`derive`, so a run is fully determined by the master seed.  The generator is
splitmix64 applied to a running counter; uniforms come from the top 53 bits
and normals from a Box-Muller transform of uniform pairs.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4B7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = float(2.0**-53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive(seed: int, *parts: object) -> int:
    """Derive an independent substream seed from `seed` and a label path."""
    label = "/".join(str(p) for p in parts)
    h = hashlib.blake2b(label.encode("utf-8"), digest_size=8,
                        key=int(seed).to_bytes(8, "little", signed=False))
    return int.from_bytes(h.digest(), "little")


class Rng:
    """Seeded counter-based stream: same seed + call sequence, same output."""

    def __init__(self, seed: int):
        self.seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.counter = 0

    def _words(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return _mix(self.seed + idx * _GAMMA)

    def uniform(self, shape: int | tuple[int, ...] = ()) -> np.ndarray:
        """Uniform draws in [0, 1)."""
        n = int(np.prod(shape)) if shape != () else 1
        out = (self._words(n) >> np.uint64(11)).astype(np.float64) * _U53
        return out.reshape(shape) if shape != () else out[0]

    def normal(self, shape: int | tuple[int, ...] = ()) -> np.ndarray:
        """Standard-normal draws via Box-Muller on uniform pairs."""
        n = int(np.prod(shape)) if shape != () else 1
        m = (n + 1) // 2
        w = self._words(2 * m)
        # u1 in (0, 1] so the log is finite; u2 in [0, 1).
        u1 = ((w[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53
        u2 = (w[m:] >> np.uint64(11)).astype(np.float64) * _U53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return out.reshape(shape) if shape != () else out[0]

    def integers(self, low: int, high: int, shape: int | tuple[int, ...] = ()) -> np.ndarray:
        """Uniform integers in [low, high)."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        u = self.uniform(shape if shape != () else (1,))
        out = (np.floor(u * (high - low)).astype(np.int64) + low)
        return out.reshape(shape) if shape != () else int(out[0])

    def choice(self, n: int) -> int:
        return self.integers(0, n)

    def uniform_range(self, lo: float, hi: float, shape: int | tuple[int, ...] = ()):
        return lo + (hi - lo) * self.uniform(shape)

    def split(self, *parts: object) -> "Rng":
        """Independent child stream keyed by a label path."""
        return Rng(derive(int(self.seed), *parts))
