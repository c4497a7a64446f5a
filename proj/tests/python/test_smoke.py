import math

import pytest

import starparadox as sp


def test_pattern_probs_sum_and_star():
    p = sp.pattern_probs(0.1, 0.05)
    assert math.isclose(sum(p), 1.0, abs_tol=1e-15)
    q = sp.star_probs(0.1)
    assert q == pytest.approx([(1 + 3 * math.exp(-0.4)) / 4] + [(1 - math.exp(-0.4)) / 4] * 3)


def test_band_contains_star_value():
    lo, hi = sp.band_interval(0.1)
    z = 4 * sp.star_probs(0.1)[0] - 1
    assert lo < z < hi
    assert lo == pytest.approx(3 * math.exp(-0.8))


def test_prior_round_trip_and_errors():
    assert sp.normalize_prior("power:0.5") == "power:0.5"
    with pytest.raises(ValueError):
        sp.normalize_prior("nonsense:1")


def test_uniform_h_closed_form():
    # H(z, s) = -log(1 - s/z) for T_i uniform on [0, 1], inside the unsaturated range
    z, s = 1.5, 1e-3
    assert sp.h_function("uniform:1.0", z, s) == pytest.approx(-math.log1p(-s / z), rel=1e-9)


def test_posterior_is_deterministic_and_normalized():
    counts = sp.simulate_counts(0.1, 1000, 7)
    assert sum(counts) == 1000
    a, _ = sp.posterior_probs("uniform:1.0", counts, samples=20000, seed=3)
    b, _ = sp.posterior_probs("uniform:1.0", counts, samples=20000, seed=3, jobs=2)
    assert a == b
    assert sum(a) == pytest.approx(1.0)


def test_uniform_moment_curve():
    rows = sp.moment_curve("uniform01", [1.0, 2.0, 4.0])
    for t, m, m1, r in rows:
        assert m == pytest.approx(1 / (t + 1))
        assert r == pytest.approx(1 / (t + 2))


def test_wilson():
    lo, hi = sp.wilson_interval(5, 10)
    assert lo == pytest.approx(0.2366, abs=1e-4)
    assert hi == pytest.approx(0.7634, abs=1e-4)
