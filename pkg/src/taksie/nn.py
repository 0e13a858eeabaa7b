"""Dense-math substrate: parameter sets, MLP and GRU forward/backward passes,
and an Adam optimizer.

Everything trainable in the repo flows through this module.  All math is
float64; forward passes are pure functions of (params, input); backward
passes are exact for the composed affine+ReLU (or gated-tanh) graphs and are
cross-checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import Rng


@dataclass
class ParameterSet:
    """Named, shaped arrays of trainable weights with a version header."""

    entries: dict[str, np.ndarray]
    version: int = 1

    def copy(self) -> "ParameterSet":
        return ParameterSet({k: v.copy() for k, v in self.entries.items()}, self.version)

    def validate(self) -> None:
        if self.version < 1:
            raise ValueError(f"parameter set version must be >= 1, got {self.version}")
        for name, arr in self.entries.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter {name!r} contains non-finite values")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]


def merge_prefixed(**groups: ParameterSet) -> dict[str, np.ndarray]:
    """Flatten several parameter sets into one dict with `group/name` keys."""
    out: dict[str, np.ndarray] = {}
    for prefix, ps in groups.items():
        for name, arr in ps.entries.items():
            out[f"{prefix}/{name}"] = arr
    return out


# ---------------------------------------------------------------------------
# MLP: affine layers, ReLU hidden activations, identity output.
# ---------------------------------------------------------------------------

def init_mlp(rng: Rng, widths: list[int], version: int = 1) -> ParameterSet:
    """Glorot-uniform init: W ~ U(-a, a) with a = sqrt(6/(fan_in+fan_out))."""
    entries: dict[str, np.ndarray] = {}
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        entries[f"W{i}"] = rng.uniform_range(-a, a, (fan_in, fan_out))
        entries[f"b{i}"] = np.zeros(fan_out)
    return ParameterSet(entries, version)


def _num_layers(params: ParameterSet) -> int:
    n = sum(1 for k in params.entries if k.startswith("W"))
    if n == 0:
        raise ValueError("parameter set holds no affine layers")
    return n


def _check_input(params: ParameterSet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    fan_in = params["W0"].shape[0]
    if x.shape[-1] != fan_in:
        raise ValueError(
            f"input shape {x.shape} does not match first layer input {(fan_in,)}")
    return x


def mlp_forward(params: ParameterSet, x: np.ndarray) -> np.ndarray:
    """Forward pass through affine+ReLU layers (identity on the last layer).

    Accepts a single vector or a (batch, dim) matrix.
    """
    out, _ = mlp_forward_cached(params, x)
    return out


def mlp_forward_cached(params: ParameterSet, x: np.ndarray):
    x = _check_input(params, x)
    single = x.ndim == 1
    h = x[None, :] if single else x
    n = _num_layers(params)
    cache = [h]
    for i in range(n):
        h = h @ params[f"W{i}"] + params[f"b{i}"]
        if i < n - 1:
            h = np.maximum(h, 0.0)
        cache.append(h)
    return (h[0] if single else h), cache


def mlp_backward(params: ParameterSet, x: np.ndarray, upstream: np.ndarray):
    """Exact gradients of the MLP w.r.t. parameters and input.

    `upstream` is dLoss/dOutput with the same shape as the forward output.
    Returns (param_grads, input_grad).
    """
    _, cache = mlp_forward_cached(params, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    if not np.all(np.isfinite(upstream)):
        raise ValueError("upstream gradient contains non-finite values")
    single = upstream.ndim == 1
    g = upstream[None, :] if single else upstream
    n = _num_layers(params)
    if g.shape != cache[-1].shape:
        raise ValueError(
            f"upstream gradient shape {upstream.shape} does not match "
            f"forward output shape {cache[-1].shape if not single else cache[-1].shape[1:]}")
    grads: dict[str, np.ndarray] = {}
    for i in range(n - 1, -1, -1):
        h_in = cache[i]
        grads[f"W{i}"] = h_in.T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        g = g @ params[f"W{i}"].T
        if i > 0:
            g = g * (cache[i] > 0)
    input_grad = g[0] if single else g
    return ParameterSet(grads, params.version), input_grad


# ---------------------------------------------------------------------------
# Gated recurrent cell.
#   z = sigmoid([x;h] Wz + bz), r = sigmoid([x;h] Wr + br)
#   hcand = tanh([x; r*h] Wh + bh), h' = (1-z)*h + z*hcand
# ---------------------------------------------------------------------------

def init_gru(rng: Rng, input_dim: int, hidden_dim: int, version: int = 1) -> ParameterSet:
    entries: dict[str, np.ndarray] = {}
    cat = input_dim + hidden_dim
    a = np.sqrt(6.0 / (cat + hidden_dim))
    for gate in ("z", "r", "h"):
        entries[f"W{gate}"] = rng.uniform_range(-a, a, (cat, hidden_dim))
        entries[f"b{gate}"] = np.zeros(hidden_dim)
    return ParameterSet(entries, version)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def gru_cell(params: ParameterSet, h_prev: np.ndarray, x: np.ndarray) -> np.ndarray:
    h_new, _ = gru_cell_cached(params, h_prev, x)
    return h_new


def gru_cell_cached(params: ParameterSet, h_prev: np.ndarray, x: np.ndarray):
    h_prev = np.asarray(h_prev, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    hidden = params["Wz"].shape[1]
    input_dim = params["Wz"].shape[0] - hidden
    if h_prev.shape[-1] != hidden:
        raise ValueError(f"hidden state dim {h_prev.shape[-1]} != {hidden}")
    if x.shape[-1] != input_dim:
        raise ValueError(f"input dim {x.shape[-1]} != {input_dim}")
    single = x.ndim == 1
    if single:
        h_prev, x = h_prev[None, :], x[None, :]
    xh = np.concatenate([x, h_prev], axis=1)
    z = _sigmoid(xh @ params["Wz"] + params["bz"])
    r = _sigmoid(xh @ params["Wr"] + params["br"])
    xrh = np.concatenate([x, r * h_prev], axis=1)
    hcand = np.tanh(xrh @ params["Wh"] + params["bh"])
    h_new = (1.0 - z) * h_prev + z * hcand
    cache = (h_prev, x, xh, z, r, xrh, hcand)
    return (h_new[0] if single else h_new), cache


def gru_backward_step(params: ParameterSet, cache, d_h_new: np.ndarray,
                      grads: dict[str, np.ndarray]):
    """Backward through one cell; accumulates into `grads` in place.

    Returns (d_h_prev, d_x) for continuing backpropagation through time.
    """
    h_prev, x, xh, z, r, xrh, hcand = cache
    input_dim = x.shape[1]
    g = d_h_new
    dz = g * (hcand - h_prev)
    dhcand = g * z
    dh_prev = g * (1.0 - z)

    da_h = dhcand * (1.0 - hcand * hcand)
    grads["Wh"] += xrh.T @ da_h
    grads["bh"] += da_h.sum(axis=0)
    dxrh = da_h @ params["Wh"].T
    dx = dxrh[:, :input_dim].copy()
    dr = dxrh[:, input_dim:] * h_prev
    dh_prev = dh_prev + dxrh[:, input_dim:] * r

    da_z = dz * z * (1.0 - z)
    da_r = dr * r * (1.0 - r)
    grads["Wz"] += xh.T @ da_z
    grads["bz"] += da_z.sum(axis=0)
    grads["Wr"] += xh.T @ da_r
    grads["br"] += da_r.sum(axis=0)
    dxh = da_z @ params["Wz"].T + da_r @ params["Wr"].T
    dx += dxh[:, :input_dim]
    dh_prev = dh_prev + dxh[:, input_dim:]
    return dh_prev, dx


def zero_grads_like(params: ParameterSet) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.entries.items()}


# ---------------------------------------------------------------------------
# Adam.  Classic form: p -= lr * mhat / (sqrt(vhat) + eps).
# ---------------------------------------------------------------------------

@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    rejected: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Apply one bias-corrected update in place.

        A non-finite gradient rejects the whole step: parameters and moments
        stay untouched and the rejection is counted.
        """
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        for name, g in grads.items():
            if params[name].shape != g.shape:
                raise ValueError(f"gradient shape mismatch for {name!r}: "
                                 f"{g.shape} vs {params[name].shape}")
            if not np.all(np.isfinite(g)):
                self.rejected += 1
                return
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
