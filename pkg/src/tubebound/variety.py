"""Pointwise geometry of ``V = {f_1 = ... = f_s = 0}``.

Frames, complete-intersection checks, nearest-point projection and a
brute-force grid oracle for the distance to ``V``.  The projection is the
workhorse of the Monte Carlo estimator, so its core runs on whole batches
of points at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DegeneratePointError, InputError, NumericError, UnsupportedError
from .polycore import PolySystem

__all__ = [
    "FramedPoint",
    "DistanceResult",
    "ProjectionOptions",
    "complete_intersection_check",
    "frame_at",
    "frames_many",
    "project_to_variety",
    "project_many",
    "distance_oracle_dense",
    "dense_variety_points",
    "find_singular_points",
]

POINT_TOLERANCE = 1e-10
RANK_TOLERANCE = 1e-8
POLISH = 1e-3


@dataclass(frozen=True)
class FramedPoint:
    p: np.ndarray
    tangent_frame: np.ndarray  # (m, n), rows orthonormal
    normal_frame: np.ndarray  # (s, n), rows orthonormal
    residual: float

    @property
    def m(self):
        return self.tangent_frame.shape[0]

    @property
    def s(self):
        return self.normal_frame.shape[0]


@dataclass(frozen=True)
class DistanceResult:
    distance_upper: float
    foot_point: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ProjectionOptions:
    max_iterations: int = 200
    starts: int = 8
    point_tolerance: float = POINT_TOLERANCE
    tangent_tolerance: float = 1e-10
    # extra starts sit at x + perturbation * d0 * u_k, d0 the first-start distance
    perturbation: float = 0.5
    max_halvings: int = 30


def _as_vector(sys, x, name="x"):
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise InputError(f"{name} has shape {x.shape}, expected ({sys.n},)")
    return x


def _residual(sys, p):
    return float(np.max(np.abs(sys.values(p[None, :])[0])))


def complete_intersection_check(sys: PolySystem, p, tol: float = RANK_TOLERANCE,
                                point_tolerance: float = POINT_TOLERANCE) -> bool:
    """True iff the gradients of ``f_1..f_s`` are linearly independent at ``p``.

    Independence means the smallest singular value of the gradient matrix
    exceeds ``tol`` times the largest one.
    """
    p = _as_vector(sys, p, "p")
    res = _residual(sys, p)
    if res > point_tolerance:
        raise InputError(f"point is not on the variety (residual {res:.3e})")
    sv = np.linalg.svd(sys.jacobian(p[None, :])[0], compute_uv=False)
    return bool(sv[0] > 0 and sv[-1] > tol * sv[0])


def frames_many(sys: PolySystem, P):
    """Tangent ``(N, m, n)`` and normal ``(N, s, n)`` frames plus gradient singular values.

    Normals are the Gram-Schmidt orthonormalization of the gradients taken
    in order (a QR factorization with signs matched to the gradients); the
    tangent rows complete them to an orthonormal basis and each has its
    first clearly nonzero entry positive.  No degeneracy check is made here.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    J = sys.jacobian(P)
    sv = np.linalg.svd(J, compute_uv=False)
    Q, R = np.linalg.qr(np.swapaxes(J, 1, 2), mode="complete")
    s = sys.s
    diag = np.sign(np.diagonal(R[:, :s, :s], axis1=1, axis2=2))
    diag = np.where(diag == 0, 1.0, diag)
    normal = np.swapaxes(Q[:, :, :s] * diag[:, None, :], 1, 2)
    tangent = np.swapaxes(Q[:, :, s:], 1, 2)
    if tangent.shape[1]:
        big = np.abs(tangent) > 1e-12
        first = np.argmax(big, axis=2)
        lead = np.take_along_axis(tangent, first[..., None], axis=2)[..., 0]
        flip = np.where(lead < 0, -1.0, 1.0)
        tangent = tangent * flip[..., None]
    return tangent, normal, sv


def frame_at(sys: PolySystem, p, rank_tol: float = RANK_TOLERANCE,
             point_tolerance: float = POINT_TOLERANCE) -> FramedPoint:
    """Orthonormal tangent and normal frames at a point of ``V``.

    The normal frame is Gram-Schmidt applied to the gradients in order; the
    tangent frame spans the null space of the gradient matrix.
    """
    p = _as_vector(sys, p, "p")
    res = _residual(sys, p)
    if res > point_tolerance:
        raise InputError(f"point is not on the variety (residual {res:.3e})")
    tangent, normal, sv = frames_many(sys, p[None, :])
    sv = sv[0]
    if sv[0] == 0 or sv[-1] <= rank_tol * sv[0]:
        raise DegeneratePointError(
            f"gradient matrix is rank deficient at {p.tolist()}", singular_values=sv.tolist())
    return FramedPoint(p=p.copy(), tangent_frame=tangent[0], normal_frame=normal[0], residual=res)


# ------------------------------------------------------------ projection

def _start_directions(n, count):
    rng = np.random.default_rng(20240917 + n)
    U = rng.standard_normal((max(count, 1), n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def _solve(A, b):
    """Batched ``A^{-1} b`` falling back to the pseudo-inverse for singular stacks."""
    try:
        out = np.linalg.solve(A, b[..., None])[..., 0]
        if np.all(np.isfinite(out)):
            return out
    except np.linalg.LinAlgError:
        pass
    return np.einsum("kij,kj->ki", np.linalg.pinv(A), b)


def _tangential(sys, Y, X, F=None, J=None):
    """Merit pieces: constraint values, multipliers and ``P_T (y - x)``."""
    if F is None:
        F = sys.values(Y)
    if J is None:
        J = sys.jacobian(Y)
    r = Y - X
    G = J @ np.swapaxes(J, 1, 2)
    Jr = np.einsum("kij,kj->ki", J, r)
    lam = -_solve(G, Jr)
    g = r + np.einsum("kji,kj->ki", J, lam)
    return F, J, lam, g


def _merit(F, g):
    return np.sum(F * F, axis=1) + np.sum(g * g, axis=1)


def _newton_batch(sys, X, Y0, opts):
    """Nearest-point Newton iteration run on every row simultaneously.

    Each step solves the linearized KKT system of ``min |y - x|^2 s.t.
    f(y) = 0`` with the Lagrangian Hessian shifted to stay positive, then
    backtracks on ``|f|^2 + |P_T (y - x)|^2``.
    """
    N, n = X.shape
    s = sys.s
    Y = Y0.copy()
    iters = np.zeros(N, dtype=int)
    active = np.ones(N, dtype=bool)
    eye = np.eye(n)
    for _ in range(opts.max_iterations + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ya, Xa = Y[idx], X[idx]
        F, J, lam, g = _tangential(sys, Ya, Xa)
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(g))):
            bad = ~(np.all(np.isfinite(F), axis=1) & np.all(np.isfinite(g), axis=1))
            active[idx[bad]] = False
            keep = ~bad
            idx, Ya, Xa, F, J, lam, g = idx[keep], Ya[keep], Xa[keep], F[keep], J[keep], lam[keep], g[keep]
            if idx.size == 0:
                continue
        rnorm = np.linalg.norm(Ya - Xa, axis=1)
        fmax = np.max(np.abs(F), axis=1)
        gnorm = np.linalg.norm(g, axis=1)
        gtol = opts.tangent_tolerance * (1.0 + rnorm)
        # keep polishing well below the tolerance; quadratic convergence makes it cheap
        done = (fmax <= POLISH * opts.point_tolerance) & (gnorm <= POLISH * gtol)
        active[idx[done]] = False
        out_of_budget = iters[idx] >= opts.max_iterations
        active[idx[out_of_budget]] = False
        keep = ~done & ~out_of_budget
        if not np.any(keep):
            continue
        idx, Ya, Xa, F, J, lam, g = idx[keep], Ya[keep], Xa[keep], F[keep], J[keep], lam[keep], g[keep]
        rnorm = rnorm[keep]
        H = sys.hessians(Ya)
        W = eye + np.einsum("ks,ksij->kij", lam, H)
        wmin = np.linalg.eigvalsh(W)[:, 0]
        shift = np.maximum(0.0, 0.1 - wmin)
        W = W + shift[:, None, None] * eye
        K = np.zeros((idx.size, n + s, n + s))
        K[:, :n, :n] = W
        K[:, :n, n:] = np.swapaxes(J, 1, 2)
        K[:, n:, :n] = J
        rhs = -np.concatenate([g, F], axis=1)
        sol = _solve(K, rhs)
        delta = sol[:, :n]
        dnorm = np.linalg.norm(delta, axis=1)
        cap = 1.0 + 2.0 * rnorm
        scale = np.where(dnorm > cap, cap / np.maximum(dnorm, 1e-300), 1.0)
        delta = delta * scale[:, None]
        phi0 = _merit(F, g)
        t = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        Ynew = Ya.copy()
        for _ in range(opts.max_halvings):
            pi = np.flatnonzero(pending)
            if pi.size == 0:
                break
            trial = Ya[pi] + t[pi, None] * delta[pi]
            Ft, _, _, gt = _tangential(sys, trial, Xa[pi])
            phi = _merit(Ft, gt)
            ok = np.isfinite(phi) & (phi < (1.0 - 1e-4 * t[pi]) * phi0[pi])
            Ynew[pi[ok]] = trial[ok]
            pending[pi[ok]] = False
            t[pi[~ok]] *= 0.5
        # no decrease at all: the merit is stuck, stop iterating this start
        stuck = pending
        Y[idx] = Ynew
        iters[idx] += 1
        active[idx[stuck]] = False
    F, _, _, g = _tangential(sys, Y, X)
    rnorm = np.linalg.norm(Y - X, axis=1)
    converged = np.all(np.isfinite(Y), axis=1) & (np.max(np.abs(F), axis=1) <= opts.point_tolerance) & (
        np.linalg.norm(g, axis=1) <= opts.tangent_tolerance * (1.0 + rnorm))
    return Y, iters, converged


def project_many(sys: PolySystem, X, opts: ProjectionOptions = ProjectionOptions()):
    """Multi-start projection of every row of ``X`` onto ``V``.

    Returns ``(distance, feet, iterations, converged)`` arrays.  A converged
    distance is an upper bound on the true distance to ``V``; among
    converged starts the smallest distance wins (ties go to the lower start
    index).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != sys.n:
        raise InputError(f"points must have dimension {sys.n}")
    N, n = X.shape
    if N == 0:
        return np.zeros(0), np.zeros((0, n)), np.zeros(0, dtype=int), np.zeros(0, dtype=bool)
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite input point")
    Y, it, conv = _newton_batch(sys, X, X, opts)
    dist = np.where(conv, np.linalg.norm(Y - X, axis=1), np.inf)
    best_Y, best_it, best_d = Y.copy(), it.copy(), dist.copy()
    if opts.starts > 1:
        F = sys.values(X)
        J = sys.jacobian(X)
        G = J @ np.swapaxes(J, 1, 2)
        step = np.einsum("kji,kj->ki", J, _solve(G, F))
        d_lin = np.linalg.norm(step, axis=1)
        base = np.where(conv, dist, np.where(np.isfinite(d_lin), d_lin, 1.0))
        radius = opts.perturbation * np.maximum(base, 1e-3)
        U = _start_directions(n, opts.starts - 1)
        for k in range(opts.starts - 1):
            Y0 = X + radius[:, None] * U[k]
            Yk, itk, convk = _newton_batch(sys, X, Y0, opts)
            dk = np.where(convk, np.linalg.norm(Yk - X, axis=1), np.inf)
            better = dk < best_d
            best_Y[better] = Yk[better]
            best_it[better] = itk[better]
            best_d[better] = dk[better]
    converged = np.isfinite(best_d)
    best_d = np.where(converged, best_d, np.linalg.norm(best_Y - X, axis=1))
    return best_d, best_Y, best_it, converged


def project_to_variety(sys: PolySystem, x, opts: ProjectionOptions = ProjectionOptions()) -> DistanceResult:
    """Nearest point of ``V`` to ``x`` found by multi-start Newton iteration."""
    x = _as_vector(sys, x)
    d, Y, it, conv = project_many(sys, x[None, :], opts)
    return DistanceResult(distance_upper=float(d[0]), foot_point=Y[0],
                          iterations=int(it[0]), converged=bool(conv[0]))


# ------------------------------------------------------------ grid oracle

def _lin_distance(sys, P):
    """First-order distance estimate ``|J^+ f|`` at the rows of ``P``."""
    F = sys.values(P)
    J = sys.jacobian(P)
    G = J @ np.swapaxes(J, 1, 2)
    tr = np.trace(G, axis1=1, axis2=2)
    G = G + (1e-14 * tr + 1e-300)[:, None, None] * np.eye(sys.s)
    z = np.linalg.solve(G, F[..., None])[..., 0]
    return np.sqrt(np.maximum(np.einsum("ki,ki->k", F, z), 0.0))


def _min_norm_newton(sys, P, max_iter=40, tol=1e-12):
    """Plain minimum-norm Newton ``y <- y - J^+ f`` toward ``V``."""
    Y = P.copy()
    for _ in range(max_iter):
        F = sys.values(Y)
        if np.all(np.max(np.abs(F), axis=1) <= tol):
            break
        J = sys.jacobian(Y)
        Y = Y - np.einsum("kij,kj->ki", np.linalg.pinv(J), F)
        Y = np.where(np.isfinite(Y), Y, P)
    return Y


def dense_variety_points(sys: PolySystem, lo, hi, resolution: int) -> np.ndarray:
    """Points of ``V`` found by scanning a grid over the box ``[lo, hi]``.

    Grid edges with a sign change of ``f`` (hypersurfaces only) are bisected;
    grid nodes whose first-order distance is below two cell widths are
    pushed onto ``V`` by minimum-norm Newton.  Only ``n <= 3`` is supported.
    """
    n = sys.n
    if n > 3:
        raise UnsupportedError(f"dense grid oracle supports n <= 3, got n={n}")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    axes = [np.linspace(lo[j], hi[j], resolution + 1) for j in range(n)]
    h = float(np.max((hi - lo) / resolution))
    found = []
    # slabs along axis 0 keep memory bounded in 3D
    slab = max(1, int(2_000_000 // (resolution + 1) ** max(n - 1, 0)))
    for start in range(0, resolution + 1, slab):
        a0 = axes[0][start:min(start + slab + 1, resolution + 1)]
        mesh = np.meshgrid(a0, *axes[1:], indexing="ij")
        P = np.stack([g.ravel() for g in mesh], axis=1)
        shape = mesh[0].shape
        if sys.s == 1:
            f = sys.polys[0].eval_many(P).reshape(shape)
            for ax in range(n):
                f0 = np.moveaxis(f, ax, 0)
                sign = (f0[:-1] * f0[1:]) < 0
                if not np.any(sign):
                    continue
                grids = [np.moveaxis(g, ax, 0) for g in mesh]
                A = np.stack([g[:-1][sign] for g in grids], axis=1)
                B = np.stack([g[1:][sign] for g in grids], axis=1)
                fa = f0[:-1][sign]
                for _ in range(60):
                    M = 0.5 * (A + B)
                    fm = sys.polys[0].eval_many(M)
                    left = fa * fm <= 0
                    B = np.where(left[:, None], M, B)
                    A = np.where(left[:, None], A, M)
                    fa = np.where(left, fa, fm)
                found.append(0.5 * (A + B))
        near = _lin_distance(sys, P) <= 2.0 * h * np.sqrt(n)
        if np.any(near):
            C = P[near]
            Y = _min_norm_newton(sys, C)
            ok = (np.max(np.abs(sys.values(Y)), axis=1) <= POINT_TOLERANCE) & (
                np.linalg.norm(Y - C, axis=1) <= 4.0 * h * np.sqrt(n))
            found.append(Y[ok])
    if not found:
        return np.zeros((0, n))
    pts = np.concatenate(found, axis=0)
    good = np.max(np.abs(sys.values(pts)), axis=1) <= POINT_TOLERANCE if len(pts) else []
    return pts[good]


def distance_oracle_dense(sys: PolySystem, x, resolution: int = 400,
                          half_width: float | None = None, box=None) -> float:
    """Brute-force distance from ``x`` to ``V`` via :func:`dense_variety_points`.

    The search box defaults to a cube around ``x`` of half-width
    ``2 (1 + |x|_inf)``; returns ``inf`` if ``V`` misses the box.  The
    result is within a few grid spacings of the true distance.
    """
    x = _as_vector(sys, x)
    if sys.n > 3:
        raise UnsupportedError(f"dense grid oracle supports n <= 3, got n={sys.n}")
    if box is None:
        R = half_width if half_width is not None else 2.0 * (1.0 + float(np.max(np.abs(x))))
        lo, hi = x - R, x + R
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
    pts = dense_variety_points(sys, lo, hi, resolution)
    if len(pts) == 0:
        return float("inf")
    return float(np.min(np.linalg.norm(pts - x, axis=1)))


# ------------------------------------------------------- singular points

def find_singular_points(sys: PolySystem, center, radius: float, grid: int = 7,
                         tol: float = 1e-10, max_iter: int = 60) -> np.ndarray:
    """Points of ``V`` inside ``B(center, radius)`` where the gradients are dependent.

    Solves ``f(y) = 0, J(y)^T u = 0, |u| = 1`` by Gauss-Newton from a grid
    of starts.  An empty result is evidence, not proof, that ``V`` is a
    complete intersection in the ball.
    """
    center = _as_vector(sys, center, "center")
    n, s = sys.n, sys.s
    ticks = np.linspace(-radius, radius, grid)
    Y = center + np.array(list(product(ticks, repeat=n)), dtype=float)
    J0 = sys.jacobian(Y)
    U, _, _ = np.linalg.svd(J0)
    u = U[:, :, -1]
    Z = np.concatenate([Y, u], axis=1)
    for _ in range(max_iter):
        Yz, uz = Z[:, :n], Z[:, n:]
        F = sys.values(Yz)
        J = sys.jacobian(Yz)
        H = sys.hessians(Yz)
        R = np.concatenate([F, np.einsum("kji,kj->ki", J, uz),
                            (np.sum(uz * uz, axis=1) - 1.0)[:, None]], axis=1)
        if np.all(np.linalg.norm(R, axis=1) <= tol):
            break
        A = np.zeros((len(Z), s + n + 1, n + s))
        A[:, :s, :n] = J
        A[:, s:s + n, :n] = np.einsum("ks,ksij->kij", uz, H)
        A[:, s:s + n, n:] = np.swapaxes(J, 1, 2)
        A[:, s + n, n:] = 2.0 * uz
        step = np.einsum("kij,kj->ki", np.linalg.pinv(A), R)
        Z = Z - step
        Z = np.where(np.isfinite(Z), Z, 0.0)
    Yz, uz = Z[:, :n], Z[:, n:]
    F = sys.values(Yz)
    J = sys.jacobian(Yz)
    sv = np.linalg.svd(J, compute_uv=False)
    ok = (np.max(np.abs(F), axis=1) <= 1e-8) & (sv[:, -1] <= 1e-6 * np.maximum(1.0, sv[:, 0])) \
        & (np.linalg.norm(Yz - center, axis=1) <= radius)
    pts = Yz[ok]
    unique = []
    for p in pts:
        if all(np.linalg.norm(p - q) > 1e-6 for q in unique):
            unique.append(p)
    return np.array(unique).reshape(len(unique), n)
