import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taksie.selection import (SelectionParams, effective_frac,
                              fixed_interval_select, lowess_smooth,
                              plan_subgoals, select_subgoals, slopes)


def brute_force_lowess(y, frac):
    """Independent per-point weighted-least-squares oracle (numpy.polyfit)."""
    from math import ceil
    n = len(y)
    x = np.arange(n, dtype=float)
    k = min(ceil(frac * n), n)
    out = np.empty(n)
    for i in range(n):
        d = np.abs(x - x[i])
        dmax = np.sort(d)[k - 1]
        w = (1 - np.clip(d / dmax, 0, 1) ** 3) ** 3 if dmax > 0 else (d == 0).astype(float)
        keep = w > 0
        if keep.sum() == 1:
            out[i] = y[keep][0]
            continue
        coeffs = np.polyfit(x[keep], np.asarray(y)[keep], 1, w=np.sqrt(w[keep]))
        out[i] = np.polyval(coeffs, x[i])
    return out


# ---------------------------------------------------------------------------
# lowess_smooth
# ---------------------------------------------------------------------------

def test_constant_series_is_fixed_point():
    y = np.full(30, 4.2)
    assert np.allclose(lowess_smooth(y, 0.2), y, atol=1e-12)


def test_linear_series_is_reproduced():
    y = np.linspace(2.0, -3.0, 25)
    assert np.max(np.abs(lowess_smooth(y, 0.3) - y)) <= 1e-9


def test_noisy_quadratic_matches_wls_oracle():
    rng = np.random.default_rng(0)
    x = np.arange(50, dtype=float)
    y = 0.01 * (x - 25) ** 2 + rng.normal(0, 0.3, size=50)
    got = lowess_smooth(y, 0.167)
    want = brute_force_lowess(y, 0.167)
    assert np.max(np.abs(got - want)) <= 1e-9


def test_lowess_rejects_nonfinite():
    with pytest.raises(ValueError, match="non-finite"):
        lowess_smooth(np.array([1.0, np.nan, 2.0, 3.0]), 0.5)


def test_lowess_rejects_tiny_window():
    with pytest.raises(ValueError, match="frac"):
        lowess_smooth(np.ones(10), 0.05)


def test_effective_frac_fallback():
    assert effective_frac(0.167, 10) == pytest.approx(0.2)
    assert effective_frac(0.167, 100) == 0.167
    assert effective_frac(0.9, 2) == 1.0


# ---------------------------------------------------------------------------
# slopes
# ---------------------------------------------------------------------------

def test_slopes_constant_series_all_zero():
    assert np.array_equal(slopes(np.full(10, 3.0)), np.zeros(10))


def test_slopes_uniform_descent_scales_to_minus_one():
    y = -np.arange(12, dtype=float)
    assert np.allclose(slopes(y), -1.0)


def test_slopes_match_difference_oracle():
    rng = np.random.default_rng(1)
    y = rng.normal(size=40)
    raw = np.empty(40)
    raw[0] = y[1] - y[0]
    raw[-1] = y[-1] - y[-2]
    for i in range(1, 39):
        raw[i] = (y[i + 1] - y[i - 1]) / 2
    assert np.allclose(slopes(y), raw / np.abs(raw).max(), atol=1e-15)


# ---------------------------------------------------------------------------
# select_subgoals
# ---------------------------------------------------------------------------

def test_strictly_decreasing_curve_selects_only_final():
    y = np.linspace(5.0, 0.0, 30)
    sm = lowess_smooth(y, 0.167)
    assert select_subgoals(sm, SelectionParams(min_interval=3)) == [29]


def test_plateau_then_descent_selects_shoulder_and_final():
    y = np.concatenate([np.ones(10), np.linspace(1.0, 0.0, 10)])
    sm = lowess_smooth(y, 0.167)
    picks = select_subgoals(sm, SelectionParams(min_interval=3))
    assert picks[-1] == 19
    assert len(picks) == 2
    assert 8 <= picks[0] <= 12


def test_interval_equal_to_length_selects_only_final():
    y = np.concatenate([np.ones(10), np.linspace(1.0, 0.0, 10)])
    sm = lowess_smooth(y, 0.167)
    assert select_subgoals(sm, SelectionParams(min_interval=20)) == [19]


def test_select_rejects_tiny_curve():
    with pytest.raises(ValueError, match="length"):
        select_subgoals(np.array([1.0]), SelectionParams())


def test_plan_invariants_on_structured_curves():
    rng = np.random.default_rng(7)
    params = SelectionParams()
    for _ in range(50):
        n = int(rng.integers(10, 120))
        y = np.maximum(np.cumsum(rng.normal(-0.5, 1.0, size=n))[::-1], 0)
        picks = plan_subgoals(y, params)
        assert picks[-1] == n - 1
        assert all(b - a >= params.min_interval for a, b in zip(picks, picks[1:]))
        assert picks == sorted(set(picks))
        assert 0 not in picks or n == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.5, 2.0, 10.0, 123.0]))
def test_selection_invariant_to_positive_scaling(seed, scale):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(12, 80))
    y = np.abs(np.cumsum(rng.normal(-0.3, 1.0, size=n))[::-1]) + 0.1
    params = SelectionParams(min_interval=4)
    assert plan_subgoals(y, params) == plan_subgoals(scale * y, params)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_threshold_monotonicity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(15, 100))
    y = np.maximum(np.cumsum(rng.normal(-0.5, 1.0, size=n))[::-1], 0)
    grid = [(0.001, -0.001), (0.002, -0.002), (0.01, -0.01), (0.02, -0.02)]
    counts = [len(plan_subgoals(y, SelectionParams(0.167, d1, d2, 4)))
              for d1, d2 in grid]
    assert all(a >= b for a, b in zip(counts, counts[1:])), counts


# ---------------------------------------------------------------------------
# fixed_interval_select
# ---------------------------------------------------------------------------

def test_fixed_interval_examples():
    assert fixed_interval_select(20, 10) == [10, 19]
    assert fixed_interval_select(5, 10) == [4]
    assert fixed_interval_select(33, 16) == [16, 32]


def test_fixed_interval_no_duplicate_final():
    assert fixed_interval_select(21, 10) == [10, 20]
    assert fixed_interval_select(11, 10) == [10]


def test_fixed_interval_rejects_bad_interval():
    with pytest.raises(ValueError, match="interval"):
        fixed_interval_select(10, 0)
