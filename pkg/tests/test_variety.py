import numpy as np
import pytest

from tubebound.errors import DegeneratePointError, InputError, UnsupportedError
from tubebound.polycore import parse_system
from tubebound.variety import (
    complete_intersection_check,
    distance_oracle_dense,
    find_singular_points,
    frame_at,
    project_many,
    project_to_variety,
)

CIRCLE = parse_system("vars: 2\nx0^2 + x1^2 - 1")
SPHERE = parse_system("vars: 3\nx0^2 + x1^2 + x2^2 - 1")
LINE = parse_system("vars: 2\nx0")
CROSS = parse_system("vars: 2\nx0 x1")
AXES = parse_system("vars: 2\nx0\nx1")
PAIR = parse_system("vars: 1\nx0^2 - 1")
ELLIPSE = parse_system("vars: 2\n0.25 x0^2 + x1^2 - 1")
TWISTED = parse_system("vars: 3\nx0^2 + x1^2 + x2^2 - 1\nx0 + 0.3 x1^2 - 0.2")


def test_complete_intersection_examples():
    assert complete_intersection_check(CIRCLE, [1, 0])
    assert not complete_intersection_check(CROSS, [0, 0])
    assert complete_intersection_check(AXES, [0, 0])
    with pytest.raises(InputError):
        complete_intersection_check(CIRCLE, [0.5, 0])


def test_frame_examples():
    fp = frame_at(CIRCLE, [1, 0])
    np.testing.assert_allclose(fp.normal_frame, [[1, 0]], atol=1e-15)
    np.testing.assert_allclose(fp.tangent_frame, [[0, 1]], atol=1e-15)
    fp = frame_at(SPHERE, [0, 0, 1])
    np.testing.assert_allclose(fp.normal_frame, [[0, 0, 1]], atol=1e-15)
    np.testing.assert_allclose(fp.tangent_frame[:, 2], 0, atol=1e-15)
    fp = frame_at(LINE, [0, 0.3])
    np.testing.assert_allclose(fp.normal_frame, [[1, 0]], atol=1e-15)
    np.testing.assert_allclose(fp.tangent_frame, [[0, 1]], atol=1e-15)


def test_frame_degenerate_point():
    with pytest.raises(DegeneratePointError) as info:
        frame_at(CROSS, [0, 0])
    assert info.value.singular_values[-1] == 0


def test_frame_sign_convention():
    fp = frame_at(CIRCLE, [0, -1])
    np.testing.assert_allclose(fp.tangent_frame, [[1, 0]], atol=1e-15)
    np.testing.assert_allclose(fp.normal_frame, [[0, -1]], atol=1e-15)


def test_projection_examples():
    r = project_to_variety(CIRCLE, [2, 0])
    assert r.converged
    assert r.distance_upper == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(r.foot_point, [1, 0], atol=1e-12)
    r = project_to_variety(CIRCLE, [0.5, 0])
    assert r.distance_upper == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(r.foot_point, [1, 0], atol=1e-12)
    for a, b in [(0.3, -4.0), (-2.0, 0.7)]:
        r = project_to_variety(LINE, [a, b])
        assert r.distance_upper == pytest.approx(abs(a), abs=1e-12)
        np.testing.assert_allclose(r.foot_point, [0, b], atol=1e-12)


def test_projection_result_invariants():
    r = project_to_variety(TWISTED, [0.4, -0.9, 0.5])
    assert r.converged
    assert np.max(np.abs(TWISTED.values(r.foot_point[None, :]))) <= 1e-10
    assert abs(np.linalg.norm(r.foot_point - [0.4, -0.9, 0.5]) - r.distance_upper) <= 1e-12


def test_oracle_examples():
    assert distance_oracle_dense(CIRCLE, [2, 0], 400) == pytest.approx(1.0, abs=0.01)
    assert distance_oracle_dense(LINE, [0.7, -2], 400) == pytest.approx(0.7, abs=0.01)
    assert distance_oracle_dense(PAIR, [0.2], 400) == pytest.approx(0.8, abs=0.01)
    with pytest.raises(UnsupportedError):
        distance_oracle_dense(parse_system("vars: 4\nx0"), [0, 0, 0, 0])


def test_circle_projection_accuracy():
    X = np.random.default_rng(7).uniform(-2, 2, (1000, 2))
    d, Y, _, conv = project_many(CIRCLE, X)
    exact = np.abs(np.linalg.norm(X, axis=1) - 1)
    assert conv.mean() >= 0.99
    assert np.max(np.abs(d - exact)[conv]) <= 1e-8


@pytest.mark.parametrize("sys,dim", [(CIRCLE, 2), (ELLIPSE, 2), (SPHERE, 3), (TWISTED, 3)])
def test_projection_against_oracle(sys, dim):
    rng = np.random.default_rng(11)
    res = 120 if dim == 3 else 400
    for x in rng.uniform(-1.5, 1.5, (4, dim)):
        half = 2 * (1 + np.max(np.abs(x)))
        h = 2 * half / res * np.sqrt(dim)
        oracle = distance_oracle_dense(sys, x, res)
        d = project_to_variety(sys, x).distance_upper
        assert d >= oracle - h
        assert d <= oracle + 1e-6


def test_frames_orthonormal_on_random_points():
    for sys in (SPHERE, TWISTED, ELLIPSE):
        X = np.random.default_rng(3).normal(size=(1000, sys.n))
        _, Y, _, conv = project_many(sys, X)
        for y in Y[conv][:1000]:
            fp = frame_at(sys, y)
            E = np.vstack([fp.tangent_frame, fp.normal_frame])
            assert np.max(np.abs(E @ E.T - np.eye(sys.n))) <= 1e-10
            # each normal vector lies in the span of the gradients
            J = sys.jacobian(y[None, :])[0]
            coef, *_ = np.linalg.lstsq(J.T, fp.normal_frame.T, rcond=None)
            assert np.max(np.abs(J.T @ coef - fp.normal_frame.T)) <= 1e-8


def test_projection_is_deterministic():
    X = np.random.default_rng(5).normal(size=(200, 3))
    a = project_many(TWISTED, X)
    b = project_many(TWISTED, X)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


def test_singular_point_search():
    pts = find_singular_points(CROSS, [0, 0], 1.0)
    assert len(pts) == 1
    np.testing.assert_allclose(pts[0], [0, 0], atol=1e-8)
    assert len(find_singular_points(CIRCLE, [0, 0], 2.0)) == 0
