import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubebound.errors import InputError
from tubebound.montecarlo import (
    clopper_pearson,
    compare_bound,
    default_threads,
    estimate_probability,
    estimate_probability_grid,
    random_system,
    sample_uniform_ball_many,
)
from tubebound.polycore import parse_system

CIRCLE = parse_system("vars: 2\nx0^2 + x1^2 - 1")
LINE = parse_system("vars: 2\nx0")


def _contains(est, p):
    return est.ci_low <= p <= est.ci_high


def _strip_fraction(a, r=1.0):
    """Fraction of the disk of radius r within distance a of a diameter."""
    return 2 * (a * math.sqrt(r * r - a * a) + r * r * math.asin(a / r)) / (math.pi * r * r)


# ---------------------------------------------------------------- ball sampler

@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_ball_sampler_moments(n):
    rng = np.random.default_rng(n)
    c = np.arange(n, dtype=float)
    X = sample_uniform_ball_many(n, c, 2.0, 200_000, rng)
    r = np.linalg.norm(X - c, axis=1)
    assert np.all(r <= 2.0)
    np.testing.assert_allclose(X.mean(axis=0), c, atol=0.02)
    # radius has density n r^(n-1) / sigma^n, so P(r <= sigma / 2) = 2^-n
    assert np.mean(r <= 1.0) == pytest.approx(2.0 ** -n, abs=4 * math.sqrt(2.0 ** -n / 200_000) + 1e-4)


def test_ball_sampler_rejects_bad_radius():
    with pytest.raises(InputError):
        sample_uniform_ball_many(2, [0, 0], 0.0, 10, np.random.default_rng(0))


# ---------------------------------------------------------------- intervals

def test_clopper_pearson_edges():
    assert clopper_pearson(0, 100)[0] == 0.0
    assert clopper_pearson(100, 100)[1] == 1.0
    lo, hi = clopper_pearson(0, 100, 0.95)
    # closed form for zero hits
    assert hi == pytest.approx(1 - 0.025 ** (1 / 100), rel=1e-10)
    with pytest.raises(InputError):
        clopper_pearson(1, 10, 1.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2000), st.data())
def test_clopper_pearson_brackets_the_point_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = clopper_pearson(k, n, 0.99)
    assert 0 <= lo <= k / n <= hi <= 1
    lo95, hi95 = clopper_pearson(k, n, 0.95)
    assert lo <= lo95 and hi95 <= hi


# ---------------------------------------------------------------- estimator

def test_circle_annulus():
    est = estimate_probability(CIRCLE, [0, 0], 2.0, 0.1, 200_000, seed=1)
    # annulus 0.9 <= |x| <= 1.1 over the disk of radius 2
    assert _contains(est, 0.1)
    assert est.nonconverged == 0


def test_line_strip():
    est = estimate_probability(LINE, [0, 0], 1.0, 0.1, 200_000, seed=2)
    assert _contains(est, _strip_fraction(0.1))


def test_whole_ball_is_covered():
    est = estimate_probability(CIRCLE, [0, 0], 1.0, 3.0, 5000, seed=0)
    assert est.estimate == 1.0 and est.hits == 5000 and est.ci_high == 1.0


def test_far_variety_is_missed():
    far = parse_system("vars: 2\nx0 - 10")
    est = estimate_probability(far, [0, 0], 1.0, 0.5, 5000, seed=0)
    assert est.hits == 0 and est.projected == 0


def test_grid_matches_single_radius_runs():
    grid = estimate_probability_grid(CIRCLE, [0.3, 0], 1.5, [0.05, 0.2], 30_000, seed=9,
                                     chunk_size=7000)
    for g in grid:
        single = estimate_probability(CIRCLE, [0.3, 0], 1.5, g.epsilon, 30_000, seed=9, chunk_size=7000)
        assert single.hits == g.hits
    assert grid[0].hits <= grid[1].hits


def test_threads_do_not_change_results():
    sys = parse_system("vars: 3\nx0^2 + x1^2 + x2^2 - 1\nx0 + x1 + x2^2 - 0.2")
    runs = [estimate_probability(sys, [0, 0, 0], 1.5, 0.1, 40_000, seed=11, chunk_size=5000, threads=t)
            for t in (1, 2, 8)]
    assert len({(r.hits, r.nonconverged, r.projected) for r in runs}) == 1


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("TUBEBOUND_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("TUBEBOUND_THREADS", "zero")
    with pytest.raises(InputError):
        default_threads()
    monkeypatch.delenv("TUBEBOUND_THREADS")
    assert default_threads() == 1


def test_interval_width_scales_like_inverse_root():
    a = estimate_probability(CIRCLE, [0, 0], 2.0, 0.1, 50_000, seed=5)
    b = estimate_probability(CIRCLE, [0, 0], 2.0, 0.1, 100_000, seed=5)
    ratio = (b.ci_high - b.ci_low) / (a.ci_high - a.ci_low)
    assert ratio == pytest.approx(1 / math.sqrt(2), rel=0.2)


@pytest.mark.parametrize("kwargs", [
    dict(sigma=0.0), dict(epsilon=-1.0), dict(samples=0), dict(center=[0, 0, 0]),
    dict(chunk_size=0), dict(threads=0), dict(ci_level=1.0),
])
def test_estimator_validation(kwargs):
    args = dict(sys=CIRCLE, center=[0, 0], sigma=1.0, epsilon=0.1, samples=10)
    args.update(kwargs)
    with pytest.raises(InputError):
        estimate_probability(**args)


# ---------------------------------------------------------------- comparison

def test_compare_line_is_dominated():
    (cmp,) = compare_bound(LINE, [0, 0], 1.0, 0.1, 20_000, seed=0)
    assert cmp.dominated_affine and cmp.dominated_homogeneous
    assert cmp.homogeneous.total <= cmp.affine.total
    assert cmp.dominated and cmp.margin > 0
    assert cmp.warnings == ()


def test_compare_off_center_has_no_homogeneous_bound():
    (cmp,) = compare_bound(LINE, [0.2, 0], 1.0, 0.1, 5000, seed=0)
    assert cmp.homogeneous is None and cmp.dominated_homogeneous is None


def test_compare_flags_singular_points():
    cross = parse_system("vars: 2\nx0 x1")
    (cmp,) = compare_bound(cross, [0, 0], 1.0, 0.1, 5000, seed=0)
    assert any("linearly dependent" in w for w in cmp.warnings)


def test_compare_dict_round_trip():
    recs = compare_bound(CIRCLE, [0, 0], 2.0, [0.05, 0.1], 5000, seed=0)
    assert [r.estimate.epsilon for r in recs] == [0.05, 0.1]
    d = recs[0].to_dict()
    assert d["estimate"]["samples"] == 5000
    assert d["affine"]["total"] == pytest.approx(recs[0].affine.total)


# ---------------------------------------------------------------- random systems

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.data())
def test_random_system_shape(seed, n, data):
    s = data.draw(st.integers(1, n))
    D = data.draw(st.integers(1, 3))
    homog = data.draw(st.booleans())
    sys = random_system(np.random.default_rng(seed), n, s, D, homog)
    assert (sys.n, sys.s, sys.D) == (n, s, D)
    assert all(p.degree == D for p in sys.polys)
    if homog:
        assert sys.homogeneous


def test_random_system_validation():
    with pytest.raises(InputError):
        random_system(np.random.default_rng(0), 2, 3, 2)
    with pytest.raises(InputError):
        random_system(np.random.default_rng(0), 2, 1, 0)
