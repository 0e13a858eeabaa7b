import numpy as np

from taksie.rng import Rng, derive


def test_same_seed_same_stream():
    a, b = Rng(1234), Rng(1234)
    assert np.array_equal(a.uniform((100,)), b.uniform((100,)))
    assert np.array_equal(a.normal((7, 3)), b.normal((7, 3)))
    assert np.array_equal(a.integers(0, 50, (20,)), b.integers(0, 50, (20,)))


def test_different_seeds_differ():
    assert not np.array_equal(Rng(1).uniform((64,)), Rng(2).uniform((64,)))


def test_uniform_range():
    u = Rng(7).uniform((100_000,))
    assert np.all(u >= 0.0) and np.all(u < 1.0)


def test_normal_moments():
    z = Rng(42).normal((100_000,))
    assert abs(z.mean()) < 0.02
    assert abs(z.var() - 1.0) < 0.05


def test_integers_cover_range():
    v = Rng(3).integers(2, 7, (10_000,))
    assert set(np.unique(v)) == {2, 3, 4, 5, 6}


def test_derive_is_stable_and_label_sensitive():
    assert derive(5, "a", 1) == derive(5, "a", 1)
    assert derive(5, "a", 1) != derive(5, "a", 2)
    assert derive(5, "a") != derive(6, "a")


def test_split_streams_independent():
    r = Rng(9)
    assert not np.array_equal(r.split("x").uniform((16,)), r.split("y").uniform((16,)))
