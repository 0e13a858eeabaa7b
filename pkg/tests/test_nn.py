import numpy as np
import pytest

from taksie.nn import (Adam, ParameterSet, gru_cell, gru_cell_cached,
                       gru_backward_step, init_gru, init_mlp, mlp_backward,
                       mlp_forward, zero_grads_like)
from taksie.rng import Rng


def _naive_mlp(params, x):
    """Triple-loop matmul oracle."""
    n = sum(1 for k in params.entries if k.startswith("W"))
    h = list(map(float, x))
    for layer in range(n):
        W, b = params[f"W{layer}"], params[f"b{layer}"]
        out = []
        for j in range(W.shape[1]):
            acc = float(b[j])
            for i in range(W.shape[0]):
                acc += h[i] * float(W[i, j])
            out.append(acc)
        if layer < n - 1:
            out = [max(v, 0.0) for v in out]
        h = out
    return np.array(h)


def finite_diff(fn, params: ParameterSet, rng: Rng, n_coords: int = 100, h: float = 1e-5):
    """Central finite differences of scalar `fn(params)` on random coordinates.

    Returns list of (analytic, numeric) pairs supplied by the caller through
    `fn`, which must return (loss, grads_dict).
    """
    _, grads = fn(params)
    pairs = []
    names = sorted(grads)
    for _ in range(n_coords):
        name = names[rng.integers(0, len(names))]
        arr = params.entries[name]
        flat = rng.integers(0, arr.size)
        idx = np.unravel_index(flat, arr.shape) if arr.shape else ()
        orig = arr[idx]
        arr[idx] = orig + h
        lp, _ = fn(params)
        arr[idx] = orig - h
        lm, _ = fn(params)
        arr[idx] = orig
        pairs.append((float(grads[name][idx]), (lp - lm) / (2 * h)))
    return pairs


def assert_grads_close(pairs, rel_tol=1e-4):
    # The 1e-6 floor absorbs central-difference cancellation noise (~1e-11)
    # at coordinates whose true gradient vanishes.
    for analytic, numeric in pairs:
        scale = max(abs(analytic), abs(numeric), 1e-6)
        assert abs(analytic - numeric) / scale <= rel_tol, (analytic, numeric)


# ---------------------------------------------------------------------------
# MLP forward
# ---------------------------------------------------------------------------

def test_identity_weights_pass_nonnegative_input_through():
    params = ParameterSet({"W0": np.eye(4), "b0": np.zeros(4),
                           "W1": np.eye(4), "b1": np.zeros(4)})
    x = np.array([0.5, 0.0, 2.0, 1.25])
    assert np.array_equal(mlp_forward(params, x), x)


def test_zero_weights_collapse_to_bias():
    b = np.array([1.0, -2.0])
    params = ParameterSet({"W0": np.zeros((3, 5)), "b0": np.ones(5),
                           "W1": np.zeros((5, 2)), "b1": b})
    assert np.array_equal(mlp_forward(params, np.array([3.0, -1.0, 7.0])), b)


def test_forward_matches_naive_matmul_oracle():
    rng = Rng(11)
    params = init_mlp(rng, [4, 8, 2])
    x = rng.normal((4,))
    got = mlp_forward(params, x)
    want = _naive_mlp(params, x)
    assert np.max(np.abs(got - want)) <= 1e-12


def test_forward_rejects_shape_mismatch_naming_both():
    params = init_mlp(Rng(0), [4, 3])
    with pytest.raises(ValueError, match=r"\(3,\).*\(4,\)"):
        mlp_forward(params, np.zeros(3))


def test_forward_is_pure():
    params = init_mlp(Rng(5), [6, 16, 6])
    x = Rng(6).normal((6,))
    assert np.array_equal(mlp_forward(params, x), mlp_forward(params, x))


# ---------------------------------------------------------------------------
# MLP backward
# ---------------------------------------------------------------------------

def test_zero_upstream_gives_zero_grads():
    params = init_mlp(Rng(1), [3, 5, 2])
    grads, dx = mlp_backward(params, np.ones(3), np.zeros(2))
    assert all(np.all(g == 0) for g in grads.entries.values())
    assert np.all(dx == 0)


def test_single_linear_layer_closed_form():
    rng = Rng(2)
    params = init_mlp(rng, [3, 4])
    x, g = rng.normal((3,)), rng.normal((4,))
    grads, dx = mlp_backward(params, x, g)
    assert np.allclose(grads["W0"], np.outer(x, g), atol=1e-15)
    assert np.allclose(grads["b0"], g, atol=1e-15)
    assert np.allclose(dx, params["W0"] @ g, atol=1e-15)


def test_backward_rejects_nonfinite_upstream():
    params = init_mlp(Rng(3), [2, 2])
    with pytest.raises(ValueError, match="non-finite"):
        mlp_backward(params, np.ones(2), np.array([np.nan, 0.0]))


def test_backward_matches_finite_differences():
    rng = Rng(13)
    params = init_mlp(rng, [4, 8, 8, 2])
    x = rng.normal((4,))
    target = rng.normal((2,))

    def loss(ps):
        out = mlp_forward(ps, x)
        l = 0.5 * np.sum((out - target) ** 2)
        grads, _ = mlp_backward(ps, x, out - target)
        return l, grads.entries

    assert_grads_close(finite_diff(loss, params, Rng(99), n_coords=120))


# ---------------------------------------------------------------------------
# GRU cell
# ---------------------------------------------------------------------------

def _zero_gru(input_dim=4, hidden=6):
    cat = input_dim + hidden
    return ParameterSet({f"W{g}": np.zeros((cat, hidden)) for g in "zrh"}
                        | {f"b{g}": np.zeros(hidden) for g in "zrh"})


def test_gru_zero_weights_halve_hidden_state():
    params = _zero_gru()
    h = np.array([0.2, -0.4, 0.6, 0.0, 1.0, -1.0])
    out = gru_cell(params, h, np.ones(4))
    assert np.allclose(out, 0.5 * h, atol=1e-15)


def test_gru_zero_hidden_zero_weights_stays_zero():
    params = _zero_gru()
    assert np.allclose(gru_cell(params, np.zeros(6), np.ones(4)), 0.0)


def test_gru_bounded_when_hidden_bounded():
    rng = Rng(21)
    params = init_gru(rng, 4, 6)
    h = rng.uniform_range(-0.99, 0.99, (6,))
    for _ in range(50):
        h = gru_cell(params, h, rng.normal((4,)))
        assert np.all(np.abs(h) < 1.0)


def test_gru_rejects_dim_mismatch():
    params = init_gru(Rng(0), 4, 6)
    with pytest.raises(ValueError, match="dim"):
        gru_cell(params, np.zeros(5), np.zeros(4))
    with pytest.raises(ValueError, match="dim"):
        gru_cell(params, np.zeros(6), np.zeros(3))


def test_gru_backward_matches_finite_differences():
    rng = Rng(31)
    params = init_gru(rng, 4, 6)
    h0, x = rng.normal((6,)), rng.normal((4,))
    target = rng.normal((6,))

    def loss(ps):
        h_new, cache = gru_cell_cached(ps, h0, x)
        l = 0.5 * np.sum((h_new - target) ** 2)
        grads = zero_grads_like(ps)
        gru_backward_step(ps, cache, (h_new - target)[None, :], grads)
        return l, grads

    assert_grads_close(finite_diff(loss, params, Rng(77), n_coords=120))


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_zero_gradient_leaves_params_unchanged():
    p = {"w": np.array([1.0, -2.0, 3.0])}
    opt = Adam(lr=0.1)
    opt.step(p, {"w": np.zeros(3)})
    assert np.array_equal(p["w"], [1.0, -2.0, 3.0])


def test_adam_first_step_magnitude():
    p = {"w": np.array([0.0])}
    Adam(lr=1e-3, eps=1e-8).step(p, {"w": np.array([1.0])})
    assert abs(p["w"][0] + 1e-3) < 1e-9


def test_adam_matches_scalar_recurrence():
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    grads = [1.0, -0.5, 0.25, 2.0, -1.0, 0.1, 0.0, -0.3, 0.7, 1.5]
    p = {"w": np.array([0.4])}
    opt = Adam(lr=lr, beta1=b1, beta2=b2, eps=eps)

    # Independent scalar recurrence (pure python floats).
    theta, m, v = 0.4, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        opt.step(p, {"w": np.array([g])})
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        theta -= lr * mhat / (vhat**0.5 + eps)
        assert abs(p["w"][0] - theta) <= 1e-12


def test_adam_rejects_nonfinite_gradient():
    p = {"w": np.array([1.0])}
    opt = Adam()
    opt.step(p, {"w": np.array([np.inf])})
    assert p["w"][0] == 1.0
    assert opt.t == 0
    assert opt.rejected == 1
    opt.step(p, {"w": np.array([1.0])})
    assert opt.t == 1
