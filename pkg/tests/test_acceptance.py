"""End-to-end acceptance checks; each test records a PASS/FAIL line for the terminal summary."""

import itertools
import math

import numpy as np
import pytest

from tubebound.bounds import bezout_gauss_degree, corollary_asymptotic
from tubebound.cli import main
from tubebound.curvature import (
    Ball,
    crofton_check,
    curvature_integrals,
    gauss_degree_empirical,
    sample_implicit_surface,
    trace_implicit_curve,
    tube_upper_bound_from_K,
    tube_volume_quadrature,
)
from tubebound.geomconst import ball_volume, sphere_area
from tubebound.montecarlo import compare_bound, estimate_probability, hypothesis_warnings, random_system
from tubebound.polycore import parse_system
from tubebound.reference import sphere_tube_volume
from tubebound.variety import ProjectionOptions, project_many

CIRCLE = parse_system("vars: 2\nx0^2 + x1^2 - 1")
CIRCLE3 = parse_system("vars: 3\nx0^2 + x1^2 - 1\nx2")
SPHERE = parse_system("vars: 3\nx0^2 + x1^2 + x2^2 - 1")
ELLIPSE = parse_system("vars: 2\n0.25 x0^2 + x1^2 - 1")
LINE = parse_system("vars: 2\nx0")


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_closed_forms(acceptance):
    worst = 0.0
    for n, eps in itertools.product((2, 3, 4), (0.01, 0.1)):
        exact = ball_volume(n) * ((1 + eps) ** n - (1 - eps) ** n)
        worst = max(worst, _rel(sphere_tube_volume(n - 1, n, eps), exact))
    for n, eps in itertools.product((1, 2, 3, 4), (0.01, 0.1)):
        worst = max(worst, _rel(sphere_tube_volume(0, n, eps), 2 * eps ** n * ball_volume(n)))
    for eps in (0.01, 0.1):
        worst = max(worst, _rel(sphere_tube_volume(1, 3, eps), 2 * math.pi ** 2 * eps ** 2))
    ok = acceptance(1, "closed-form tube volumes", worst <= 1e-12, f"max rel err {worst:.1e}")
    assert ok


def test_sphere_quadrature(acceptance):
    patches = {
        (1, 2): trace_implicit_curve(CIRCLE, box=([-2, -2], [2, 2])),
        (1, 3): trace_implicit_curve(CIRCLE3, box=([-2] * 3, [2] * 3)),
        (2, 3): sample_implicit_surface(SPHERE, box=([-1.5] * 3, [1.5] * 3)),
    }
    worst = 0.0
    odd = 0.0
    for (m, n), patch in patches.items():
        s = n - m
        rep = curvature_integrals(patch)
        for i in range(m + 1):
            closed = 2 * sphere_area(m) * sphere_area(s + i - 1) / sphere_area(i) * math.comb(m, i)
            worst = max(worst, _rel(rep.absolute_K[i], closed))
            if i % 2 == 0:
                worst = max(worst, _rel(rep.signed_K[i], closed))
            else:
                odd = max(odd, abs(rep.signed_K[i]) / closed)
        if m == 2:
            gb = _rel(rep.signed_K[2], 8 * math.pi)
    ok = worst <= 0.01 and gb <= 0.01 and odd <= 0.01
    acceptance(2, "curvature quadrature on spheres", ok,
               f"max rel err {worst:.1e}, Gauss-Bonnet {gb:.1e}, odd signed {odd:.1e}")
    assert ok


def test_tube_integrand(acceptance):
    patch = trace_implicit_curve(CIRCLE, box=([-2, -2], [2, 2]))
    rep = curvature_integrals(patch)
    at = _rel(tube_volume_quadrature(patch, 0.1), 4 * math.pi * 0.1)
    grid = [0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 0.9, 1.0, 1.5, 3.0]
    below = all(tube_volume_quadrature(patch, e) <= tube_upper_bound_from_K(rep, 1, e) * (1 + 1e-12)
                for e in grid)
    ok = at <= 0.005 and below
    acceptance(3, "tube quadrature on the circle", ok,
               f"rel err {at:.1e} at eps=0.1, below upper bound at {len(grid)} radii: {below}")
    assert ok


@pytest.mark.slow
def test_monte_carlo_oracles(acceptance):
    circle = estimate_probability(CIRCLE, [0, 0], 2.0, 0.1, 1_000_000, seed=7)
    a = 0.1
    strip = 2 * (a * math.sqrt(1 - a * a) + math.asin(a)) / math.pi
    line = estimate_probability(LINE, [0, 0], 1.0, 0.1, 1_000_000, seed=8)
    ok = circle.ci_low <= 0.1 <= circle.ci_high and line.ci_low <= strip <= line.ci_high
    acceptance(4, "Monte Carlo oracles", ok,
               f"circle [{circle.ci_low:.5f}, {circle.ci_high:.5f}] vs 0.1, "
               f"line [{line.ci_low:.5f}, {line.ci_high:.5f}] vs {strip:.5f}")
    assert ok


# (n, s, D, homogeneous); homogeneous systems of degree > 1 are singular at the origin
DOMINANCE_CONFIGS = [
    (1, 1, 1, False), (1, 1, 2, False), (1, 1, 3, False), (2, 1, 1, False), (2, 2, 1, False),
    (2, 2, 2, False), (2, 2, 3, False), (3, 2, 1, False), (3, 1, 1, False), (2, 1, 2, False),
    (3, 2, 2, False), (1, 1, 1, True), (2, 1, 1, True), (2, 2, 1, True), (3, 1, 1, True),
    (3, 2, 1, True),
]


def _meets_ball(sys, center, radius, rng):
    X = center + rng.uniform(-radius, radius, (256, sys.n))
    _, Y, _, conv = project_many(sys, X, ProjectionOptions(starts=1))
    return bool(np.any(conv & (np.linalg.norm(Y - center, axis=1) < radius)))


@pytest.mark.slow
def test_dominance_suite(acceptance):
    sigma = 2.0
    rng = np.random.default_rng(2024)
    systems = checks = 0
    violations = []
    for k in itertools.count():
        if systems >= 60:
            break
        n, s, D, homog = DOMINANCE_CONFIGS[k % len(DOMINANCE_CONFIGS)]
        sys = random_system(rng, n, s, D, homog)
        center = np.zeros(n) if homog else rng.uniform(-0.5, 0.5, n)
        if not _meets_ball(sys, center, sigma, rng) or hypothesis_warnings(sys, center, sigma + 0.1):
            continue
        systems += 1
        for c in compare_bound(sys, center, sigma, [0.05, 0.1], 100_000, seed=k):
            if c.affine.total < 1:
                checks += 1
                if not c.dominated_affine:
                    violations.append((k, "affine", c.estimate.epsilon))
            if c.homogeneous is not None and c.homogeneous.total < 1:
                checks += 1
                if not c.dominated_homogeneous:
                    violations.append((k, "homogeneous", c.estimate.epsilon))
    ok = systems >= 50 and checks > 0 and not violations
    acceptance(5, "bound dominance on random systems", ok,
               f"{systems} systems, {checks} checks with bound < 1, {len(violations)} violations")
    assert ok, violations


@pytest.mark.slow
def test_small_eps_slope(acceptance):
    eps = 0.01
    circle = parse_system("vars: 2\nx0^2 + x1^2 - 0.25")
    sphere = parse_system("vars: 3\nx0^2 + x1^2 + x2^2 - 0.25")
    p2 = estimate_probability(circle, [0, 0], 1.0, eps, 10_000_000, seed=1).estimate
    p3 = estimate_probability(sphere, [0, 0, 0], 1.0, eps, 10_000_000, seed=2).estimate
    # both varieties have volume pi
    want2 = corollary_asymptotic(2, 1, math.pi, 1.0)
    want3 = corollary_asymptotic(3, 1, math.pi, 1.0)
    r2 = _rel(p2 / eps, want2)
    r3 = _rel(p3 / eps, want3)
    ok = r2 <= 0.05 and r3 <= 0.05
    acceptance(6, "small-eps slope", ok,
               f"circle {p2 / eps:.4f} vs {want2:.4f}, sphere {p3 / eps:.4f} vs {want3:.4f}")
    assert ok


def test_crofton(acceptance):
    patch = trace_implicit_curve(CIRCLE, box=([-2, -2], [2, 2]))
    details = []
    ok = True
    # the default ball is tangent to the circle; the wider one gives a non-trivial spread
    for radius in (None, 1.5):
        res = crofton_check(patch, 0, num_flats=100_000, seed=11, radius=radius)
        rel = _rel(res.rhs_estimate, 4 * math.pi)
        consistent = abs(res.rhs_estimate - res.lhs) <= res.ci_halfwidth + 1e-9 * res.lhs
        ok = ok and rel <= 0.02 and consistent and _rel(res.lhs, 4 * math.pi) <= 1e-9
        details.append(f"R={res.radius:g}: rel err {rel:.1e}, half-width {res.ci_halfwidth:.3f}")
    acceptance(7, "Crofton on the unit circle", ok, "; ".join(details))
    assert ok


def test_degree_ordering(acceptance):
    circle = trace_implicit_curve(CIRCLE, box=([-2, -2], [2, 2]))
    ellipse = trace_implicit_curve(ELLIPSE, box=([-3, -3], [3, 3]))
    line = trace_implicit_curve(LINE, region=Ball((0.0, 0.0), 1.0))
    g = [gauss_degree_empirical(p, 64, seed=0) for p in (circle, ellipse, line)]
    ok = g == [2, 2, 1] and bezout_gauss_degree(2, 2) == 16 and bezout_gauss_degree(2, 1) == 4
    acceptance(8, "Gauss degree below Bezout", ok, f"circle {g[0]}, ellipse {g[1]}, line {g[2]}")
    assert ok


SEEDED_COMMANDS = [
    ["estimate", "--system", "vars: 2; x0^2 + x1^2 - 1", "--sigma", "2", "--eps-grid", "0.02", "0.2", "3",
     "--samples", "40000", "--chunk-size", "4096", "--seed", "5"],
    ["compare", "--system", "vars: 3; x0^2 + x1^2 + x2^2 - 1; x0 + x1 - 0.3", "--eps", "0.1",
     "--samples", "30000", "--chunk-size", "3000", "--seed", "6"],
    ["report", "--system", "vars: 2; 0.25 x0^2 + x1^2 - 1", "--sigma", "2.5", "--eps", "0.05",
     "--samples", "20000", "--chunk-size", "2500", "--seed", "7"],
    ["crofton", "--system", "vars: 2; x0^2 + x1^2 - 0.25", "--flats", "20000", "--radius", "1", "--seed", "8"],
    ["curvature", "--system", "vars: 2; x0^4 + x1^4 - x0^2 + 0.6 x1^2 - 0.5 x0 - 0.2", "--eps", "0.1",
     "--seed", "9"],
]


def test_determinism_across_threads(acceptance, tmp_path):
    differing = []
    for argv in SEEDED_COMMANDS:
        outputs = set()
        for threads in (1, 2, 8):
            out = tmp_path / f"{argv[0]}-{threads}.json"
            assert main(argv + ["--threads", str(threads), "--output", str(out)]) == 0
            outputs.add(out.read_bytes())
        if len(outputs) != 1:
            differing.append(argv[0])
    ok = not differing
    acceptance(9, "byte-identical reports for 1, 2 and 8 threads", ok,
               f"{len(SEEDED_COMMANDS)} commands" + (f", differing: {differing}" if differing else ""))
    assert ok
