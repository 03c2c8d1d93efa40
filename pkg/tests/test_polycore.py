import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubebound.errors import InputError, PolyParseError
from tubebound.polycore import (
    MultiPoly,
    PolySystem,
    evaluate,
    gradient,
    hessian,
    load_system,
    parse_system,
    parse_system_document,
    real_roots_batched,
    serialize_system,
    system_to_document,
)

CIRCLE = "vars: 2\nx0^2 + x1^2 - 1"


def poly(text, n):
    return parse_system(f"vars: {n}\n{text}").polys[0]


def test_evaluate_examples():
    f = poly("x0^2 + x1^2 - 1", 2)
    assert evaluate(f, [1, 0]) == 0
    assert evaluate(f, [2, 0]) == 3
    assert evaluate(poly("x0*x1", 2), [3, -2]) == -6


def test_gradient_examples():
    np.testing.assert_array_equal(gradient(poly("x0^2 + x1^2 - 1", 2), [1, 0]), [2, 0])
    np.testing.assert_array_equal(gradient(poly("x0 x1", 2), [3, -2]), [-2, 3])
    const = MultiPoly(2, ((5.0, (0, 0)),))
    np.testing.assert_array_equal(gradient(const, [0.3, 0.7]), [0, 0])


def test_hessian_examples():
    np.testing.assert_array_equal(hessian(poly("x0^2 + x1^2 - 1", 2), [0.4, -3]), 2 * np.eye(2))
    np.testing.assert_array_equal(hessian(poly("3 x0 - x1 + 2", 2), [1, 1]), np.zeros((2, 2)))
    np.testing.assert_array_equal(hessian(poly("x0*x1", 2), [5, 6]), [[0, 1], [1, 0]])


def test_dimension_mismatch():
    f = poly("x0 + x1", 2)
    for fn in (evaluate, gradient, hessian):
        with pytest.raises(InputError):
            fn(f, [1.0, 2.0, 3.0])


def test_canonical_terms():
    p = MultiPoly(2, ((1.0, (1, 0)), (2.0, (0, 1)), (-1.0, (1, 0)), (0.0, (2, 2))))
    assert p.terms == ((2.0, (0, 1)),)
    assert p.degree == 1


def test_parse_examples():
    s = parse_system(CIRCLE)
    assert (s.n, s.s, s.D, s.homogeneous, s.m) == (2, 1, 2, False, 1)
    s = parse_system("vars: 2\nx0")
    assert (s.n, s.s, s.D, s.homogeneous) == (2, 1, 1, True)
    with pytest.raises(InputError, match="exceed"):
        parse_system("vars: 2\nx0^2+x1^2-1\nx0-x1\nx0+x1")


def test_parse_syntax_error_has_position():
    with pytest.raises(PolyParseError) as info:
        parse_system("vars: 2\nx0 + $x1")
    assert info.value.line == 2
    assert info.value.column == 6


def test_parse_rejects_constants_and_bad_variables():
    with pytest.raises(InputError):
        parse_system("vars: 2\n3")
    with pytest.raises(InputError):
        parse_system("vars: 2\nx2 + 1")


def test_parse_forms():
    s = parse_system("# unit sphere\nvars: 3\n\n1.5e0*x0^2 + x1^2 + x2 ^ 2 - 2.25\n")
    assert s.D == 2
    assert evaluate(s.polys[0], [1, 1, 0.5]) == pytest.approx(1.5 + 1 + 0.25 - 2.25)
    assert load_system("vars: 2; x0^2 + x1^2 - 1") == parse_system(CIRCLE)


def test_structured_document():
    doc = {"n": 2, "polys": [[{"c": 1, "e": [2, 0]}, {"c": 1, "e": [0, 2]}, {"c": -1, "e": [0, 0]}]]}
    s = parse_system_document(doc)
    assert s == parse_system(CIRCLE)
    assert parse_system_document(system_to_document(s)) == s


def test_load_system_from_file(tmp_path):
    path = tmp_path / "circle.poly"
    path.write_text(CIRCLE + "\n")
    assert load_system(str(path)) == parse_system(CIRCLE)


def test_homogeneity_is_computed():
    assert parse_system("vars: 3\nx0 x1 - x2^2").homogeneous
    assert not parse_system("vars: 3\nx0 x1 - x2").homogeneous


def test_shifted_system_agrees():
    s = parse_system("vars: 2\nx0^3 - 2 x0 x1 + x1^2 - 0.5")
    c = np.array([0.3, -1.2])
    t = s.shifted(c)
    X = np.random.default_rng(1).normal(size=(20, 2))
    np.testing.assert_allclose(t.values(X), s.values(X + c), rtol=1e-12, atol=1e-12)


def test_restrict_to_lines_matches_single_line():
    f = poly("x0^3 - 2 x0 x1 + x1^2 - 0.5", 2)
    rng = np.random.default_rng(3)
    P, D = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    C = f.restrict_to_lines(P, D)
    for k in range(5):
        np.testing.assert_allclose(C[k], f.restrict_to_line(P[k], D[k]), atol=1e-12)


def test_real_roots_batched():
    C = np.array([[-1.0, 0.0, 1.0], [1.0, 0.0, 1.0], [2.0, -3.0, 1.0], [0.0, 0.0, 0.0]])
    roots = real_roots_batched(C)
    np.testing.assert_allclose(roots[0], [-1, 1])
    assert roots[1].size == 0
    np.testing.assert_allclose(roots[2], [1, 2])
    assert roots[3].size == 0
    np.testing.assert_allclose(real_roots_batched(C, lo=0.0, hi=1.5)[2], [1.0])


# ---------------------------------------------------------------- properties

exps = st.lists(st.integers(0, 3), min_size=3, max_size=3)
terms = st.lists(st.tuples(st.floats(-2, 2, allow_nan=False), exps), min_size=1, max_size=6)


def _poly(raw):
    return MultiPoly(3, tuple((c, tuple(e)) for c, e in raw))


@settings(max_examples=60, deadline=None)
@given(terms, st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_derivatives_match_finite_differences(raw, x):
    p = _poly(raw)
    x = np.array(x)
    h = 1e-5
    eye = np.eye(3)
    fd_grad = np.array([(evaluate(p, x + h * e) - evaluate(p, x - h * e)) / (2 * h) for e in eye])
    scale = 1.0 + abs(evaluate(p, x)) + np.max(np.abs(gradient(p, x)))
    assert np.max(np.abs(fd_grad - gradient(p, x))) <= 1e-6 * scale
    fd_hess = np.array([(gradient(p, x + h * e) - gradient(p, x - h * e)) / (2 * h) for e in eye])
    assert np.max(np.abs(fd_hess - hessian(p, x))) <= 1e-6 * (scale + np.max(np.abs(hessian(p, x))))
    H = hessian(p, x)
    assert np.array_equal(H, H.T)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.lists(st.floats(-1, 1, allow_nan=False), min_size=10, max_size=10),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(-3, 3))
def test_homogeneous_scaling(D, coeffs, x, t):
    monos = [e for e in np.ndindex(D + 1, D + 1, D + 1) if sum(e) == D]
    p = MultiPoly(3, tuple((c, e) for c, e in zip(coeffs, monos)))
    if p.is_zero:
        return
    x = np.array(x)
    lhs = evaluate(p, t * x)
    rhs = t ** p.degree * evaluate(p, x)
    bound = sum(abs(c) for c, _ in p.terms) * (abs(t) * max(1.0, np.max(np.abs(x)))) ** p.degree
    assert abs(lhs - rhs) <= 1e-10 * max(bound, 1e-300)


@settings(max_examples=60, deadline=None)
@given(st.lists(terms, min_size=1, max_size=3))
def test_serialize_round_trip(raw_polys):
    polys = [p for p in (_poly(r) for r in raw_polys) if p.degree > 0]
    if not polys:
        return
    s = PolySystem(3, tuple(polys))
    assert parse_system(serialize_system(s)) == s
