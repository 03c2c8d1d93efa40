"""Weighted node sets on manifolds, used as quadrature rules for curvature integrals.

Supported sources:

* reference spheres (point pairs, circles, 2-spheres) with explicit nodes;
* isolated points of a zero-dimensional system (counting measure);
* implicit curves in R^2 or R^3, traced by predictor-corrector continuation;
* implicit surfaces in R^3, covered by the three coordinate-axis charts
  blended with the partition of unity ``n_k^4 / sum_j n_j^4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InputError, TracingError, UnsupportedError
from ..polycore import PolySystem, load_system, real_roots_batched
from ..reference import ReferenceManifold, implicit_form
from ..variety import (
    POINT_TOLERANCE,
    RANK_TOLERANCE,
    FramedPoint,
    dense_variety_points,
    frames_many,
)
from .sff import shape_operators_many

__all__ = [
    "Ball",
    "HalfSpace",
    "Box",
    "ManifoldPatch",
    "sample_manifold",
    "sample_reference",
    "sample_points",
    "trace_implicit_curve",
    "sample_implicit_surface",
    "CLOSURE_TOLERANCE",
]

CLOSURE_TOLERANCE = 1e-6
_CORRECTOR_TOLERANCE = 1e-11


# ------------------------------------------------------------------ regions

@dataclass(frozen=True)
class Ball:
    """Open ball; nodes are kept strictly inside."""

    center: tuple
    radius: float

    def contains(self, P):
        P = np.atleast_2d(P)
        return np.linalg.norm(P - np.asarray(self.center, dtype=float), axis=1) < self.radius

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class HalfSpace:
    """Open half-space ``{x : <normal, x> < offset}``."""

    normal: tuple
    offset: float

    def contains(self, P):
        return np.atleast_2d(P) @ np.asarray(self.normal, dtype=float) < self.offset

    def bounds(self):
        return None


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def contains(self, P):
        P = np.atleast_2d(P)
        return np.all((P > np.asarray(self.lo)) & (P < np.asarray(self.hi)), axis=1)

    def bounds(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)


@dataclass(frozen=True)
class _Intersection:
    parts: tuple

    def contains(self, P):
        out = np.ones(np.atleast_2d(P).shape[0], dtype=bool)
        for r in self.parts:
            out &= r.contains(P)
        return out

    def bounds(self):
        for r in self.parts:
            b = r.bounds()
            if b is not None:
                return b
        return None


def _region(region):
    if region is None or hasattr(region, "contains"):
        return region
    if isinstance(region, (list, tuple)):
        return _Intersection(tuple(_region(r) for r in region))
    raise InputError(f"unsupported region {region!r}")


# ------------------------------------------------------------------ patch

@dataclass(frozen=True)
class ManifoldPatch:
    """Nodes with tangent/normal frames and positive quadrature weights.

    ``weights.sum()`` estimates the ``m``-volume of the sampled piece.
    ``spacing`` is the largest gap between neighbouring nodes.
    """

    kind: str
    system: PolySystem
    points: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    closed: bool
    spacing: float
    warnings: tuple = field(default=())

    @property
    def n(self):
        return self.system.n

    @property
    def m(self):
        return self.system.m

    @property
    def s(self):
        return self.system.s

    @property
    def size(self):
        return int(self.points.shape[0])

    @property
    def total_weight(self):
        return math.fsum(self.weights.tolist())

    @property
    def sample_points(self):
        res = np.max(np.abs(self.system.values(self.points)), axis=1) if self.size else []
        return [FramedPoint(p=self.points[i].copy(), tangent_frame=self.tangents[i].copy(),
                            normal_frame=self.normals[i].copy(), residual=float(res[i]))
                for i in range(self.size)]


def _make_patch(kind, sys, P, w, closed, spacing, warnings=()):
    warnings = list(warnings)
    P = np.asarray(P, dtype=float).reshape(-1, sys.n)
    w = np.asarray(w, dtype=float).reshape(-1)
    if P.shape[0] == 0:
        empty = np.zeros((0, sys.m, sys.n)), np.zeros((0, sys.s, sys.n))
        return ManifoldPatch(kind, sys, P, empty[0], empty[1], w, closed, float(spacing),
                             tuple(warnings))
    res = np.max(np.abs(sys.values(P)), axis=1)
    T, N, sv = frames_many(sys, P)
    good = (res <= POINT_TOLERANCE) & (sv[:, -1] > RANK_TOLERANCE * sv[:, 0]) & (w > 0)
    if not np.all(good):
        warnings.append(f"dropped {int(np.sum(~good))} nodes that were off the variety, "
                        "singular or zero-weight")
    return ManifoldPatch(kind, sys, P[good], T[good], N[good], w[good], closed, float(spacing),
                         tuple(warnings))


# ------------------------------------------------------------------ reference spheres

def sample_reference(ref: ReferenceManifold, level: int = 64) -> ManifoldPatch:
    """Explicit nodes on a round sphere.

    ``S^1`` gets ``level`` equally spaced angles; ``S^2`` gets ``level``
    Gauss-Legendre heights times ``2 level`` equally spaced longitudes.
    """
    if level < 3:
        raise InputError("level must be at least 3")
    sys = implicit_form(ref)
    n, m, r = ref.n, ref.m, ref.radius
    if m == 0:
        P = np.zeros((2, n))
        P[0, 0], P[1, 0] = r, -r
        return _make_patch("parametrized_reference", sys, P, [1.0, 1.0], True, 2 * r)
    if m == 1:
        th = 2.0 * np.pi * np.arange(level) / level
        P = np.zeros((level, n))
        P[:, 0], P[:, 1] = r * np.cos(th), r * np.sin(th)
        w = np.full(level, 2.0 * np.pi * r / level)
        return _make_patch("parametrized_reference", sys, P, w, True, 2 * np.pi * r / level)
    if m == 2:
        z, wz = np.polynomial.legendre.leggauss(level)
        nphi = 2 * level
        phi = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
        Z, PHI = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1.0 - Z ** 2)
        P = np.zeros((Z.size, n))
        P[:, 0] = (r * rho * np.cos(PHI)).ravel()
        P[:, 1] = (r * rho * np.sin(PHI)).ravel()
        P[:, 2] = (r * Z).ravel()
        w = (r * r * wz[:, None] * (2.0 * np.pi / nphi) * np.ones_like(PHI)).ravel()
        return _make_patch("parametrized_reference", sys, P, w, True, 2 * np.pi * r / nphi)
    raise UnsupportedError(f"explicit sphere nodes only for m <= 2, got m={m}")


# ------------------------------------------------------------------ isolated points

def sample_points(sys: PolySystem, box=None, region=None, resolution: int = 200) -> ManifoldPatch:
    """All isolated points of a zero-dimensional system inside a box, weight 1 each."""
    if sys.m != 0:
        raise InputError("sample_points needs a zero-dimensional system (s = n)")
    region = _region(region)
    lo, hi = _seed_box(sys, box, region)
    pts = dense_variety_points(sys, lo, hi, resolution)
    if region is not None and len(pts):
        pts = pts[region.contains(pts)]
    pts = _dedupe(pts, 1e-6)
    spacing = float(np.max(hi - lo))
    return _make_patch("implicit_points", sys, pts, np.ones(len(pts)), True, spacing)


def _dedupe(P, radius):
    if len(P) == 0:
        return P
    order = np.lexsort(P.T[::-1])
    P = P[order]
    labels = _components(len(P), cKDTree(P).query_pairs(radius, output_type="ndarray"))
    _, first = np.unique(labels, return_index=True)
    return P[np.sort(first)]


def _components(count, pairs):
    """Connected-component labels from an edge list (union-find)."""
    parent = np.arange(count)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(a) for a in range(count)])


def _seed_box(sys, box, region):
    if box is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        if lo.shape != (sys.n,) or hi.shape != (sys.n,) or np.any(hi <= lo):
            raise InputError("box must be a pair of length-n vectors with lo < hi")
        return lo, hi
    b = region.bounds() if region is not None else None
    if b is None:
        raise InputError("a bounding box (or a bounded region) is needed to find seed points")
    return b


# ------------------------------------------------------------------ curves

class _CurveTracer:
    def __init__(self, sys, region, max_step, angle_step, max_nodes):
        self.sys = sys
        self.region = region
        self.max_step = max_step
        self.angle_step = angle_step
        self.max_nodes = max_nodes

    def correct(self, y_pred, t):
        """Newton on ``f(z) = 0``, ``<t, z - y_pred> = 0``."""
        sys = self.sys
        z = y_pred.copy()
        for _ in range(40):
            F = np.append(sys.values(z[None, :])[0], t @ (z - y_pred))
            J = np.vstack([sys.jacobian(z[None, :])[0], t])
            try:
                dz = np.linalg.solve(J, F)
            except np.linalg.LinAlgError:
                return z, False
            z = z - dz
            if not np.all(np.isfinite(z)):
                return y_pred, False
            if np.linalg.norm(dz) <= 1e-14 * (1.0 + np.linalg.norm(z)):
                break
        res = np.max(np.abs(sys.values(z[None, :])[0]))
        return z, bool(res <= _CORRECTOR_TOLERANCE)

    def frame(self, z):
        T, N, sv = frames_many(self.sys, z[None, :])
        if not sv[0, -1] > RANK_TOLERANCE * sv[0, 0]:
            raise TracingError(f"curve passes through a singular point near {z.tolist()}")
        S = shape_operators_many(self.sys, z[None, :], T, N)
        return T[0, 0], float(np.sqrt(np.sum(S ** 2)))

    def step_size(self, kappa):
        if kappa * self.max_step <= self.angle_step:
            return self.max_step
        return self.angle_step / kappa

    def march(self, y0, t0, close_to=None):
        pts = [y0]
        y, t = y0, t0
        _, kappa = self.frame(y)
        travelled = 0.0
        floor = 1e-9 * self.max_step
        while True:
            if len(pts) > self.max_nodes:
                raise TracingError(f"curve did not close after {self.max_nodes} nodes")
            h = self.step_size(kappa)
            if close_to is not None:
                d = close_to - y
                dist = float(np.linalg.norm(d))
                along = float(d @ t)
                if travelled > 2.0 * dist and dist <= 1.5 * h and along > 0:
                    z, ok = self.correct(y + along * t, t)
                    if ok and np.linalg.norm(z - close_to) <= CLOSURE_TOLERANCE:
                        return pts, "closed"
            while True:
                pred = y + h * t
                z, ok = self.correct(pred, t)
                if ok and np.linalg.norm(z - pred) <= 0.25 * h + 1e-12:
                    tz, kz = self.frame(z)
                    if tz @ t < 0:
                        tz = -tz
                    if tz @ t >= 0.9:
                        break
                h *= 0.5
                if h < floor:
                    raise TracingError(f"step size collapsed near {y.tolist()}")
            if self.region is not None and not self.region.contains(z)[0]:
                pts.append(self.exit_point(y, t, h))
                return pts, "exited"
            pts.append(z)
            travelled += float(np.linalg.norm(z - y))
            y, t, kappa = z, tz, kz

    def exit_point(self, y, t, h):
        a, b = 0.0, h
        for _ in range(80):
            mid = 0.5 * (a + b)
            z, ok = self.correct(y + mid * t, t)
            if ok and self.region.contains(z)[0]:
                a = mid
            else:
                b = mid
            if b - a <= 1e-14 * (1.0 + h):
                break
        z, _ = self.correct(y + 0.5 * (a + b) * t, t)
        return z

    def trace(self, seed):
        t0, _ = self.frame(seed)
        forward, status = self.march(seed, t0, close_to=seed)
        if status == "closed":
            return np.array(forward), True
        backward, _ = self.march(seed, -t0)
        return np.array(backward[::-1] + forward[1:]), False

    def curvatures(self, P):
        T, N, _ = frames_many(self.sys, P)
        S = shape_operators_many(self.sys, P, T, N)
        return np.sqrt(np.sum(S ** 2, axis=(1, 2, 3)))

    def arcs(self, P, closed):
        k = self.curvatures(P)
        if closed:
            c = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
            kb = 0.5 * (k + np.roll(k, -1))
        else:
            c = np.linalg.norm(P[1:] - P[:-1], axis=1)
            kb = 0.5 * (k[1:] + k[:-1])
        # chord to arc length with the curvature correction c (1 + k^2 c^2 / 24)
        return c * (1.0 + (kb * c) ** 2 / 24.0)

    def resample(self, P, closed, count):
        arcs = self.arcs(P, closed)
        cum = np.concatenate([[0.0], np.cumsum(arcs)])
        total = cum[-1]
        ring = np.vstack([P, P[:1]]) if closed else P
        targets = total * np.arange(count if closed else count + 1) / count
        out = []
        for s_k in targets:
            j = min(int(np.searchsorted(cum, s_k, side="right")) - 1, len(arcs) - 1)
            frac = (s_k - cum[j]) / arcs[j] if arcs[j] > 0 else 0.0
            a, b = ring[j], ring[j + 1]
            chord = b - a
            if frac <= 0 or np.linalg.norm(chord) == 0:
                out.append(a)
                continue
            z, ok = self.correct(a + frac * chord, chord / np.linalg.norm(chord))
            out.append(z if ok else a)
        if not closed:
            out[-1] = P[-1]
        return np.array(out)

    def nodes_and_weights(self, P, closed):
        arcs = self.arcs(P, closed)
        if closed:
            return P, 0.5 * (arcs + np.roll(arcs, 1)), float(np.max(arcs))
        mids = []
        for a, b in zip(P[:-1], P[1:]):
            chord = b - a
            z, ok = self.correct(0.5 * (a + b), chord / np.linalg.norm(chord))
            mids.append(z if ok else 0.5 * (a + b))
        return np.array(mids).reshape(-1, P.shape[1]), arcs, float(np.max(arcs))


def trace_implicit_curve(sys: PolySystem, box=None, region=None, seeds=None, nodes=None,
                         max_step: float = 0.02, angle_step: float = 0.02,
                         seed_resolution: int = 64, max_nodes: int = 200_000) -> ManifoldPatch:
    """Trace every component of a curve in R^2 or R^3 that meets the box or region.

    Closed components get trapezoidal weights in arc length; components cut
    by ``region`` become open arcs with midpoint nodes, so the cut points
    themselves are not nodes.  ``nodes`` asks for (roughly) that many nodes
    in total, spread evenly in arc length.
    """
    if sys.m != 1 or sys.n not in (2, 3):
        raise UnsupportedError("curve tracing needs a one-dimensional variety in R^2 or R^3")
    if not (max_step > 0 and angle_step > 0):
        raise InputError("max_step and angle_step must be positive")
    region = _region(region)
    if seeds is None:
        lo, hi = _seed_box(sys, box, region)
        seeds = dense_variety_points(sys, lo, hi, seed_resolution)
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float)).reshape(-1, sys.n)
    if region is not None and len(seeds):
        seeds = seeds[region.contains(seeds)]
    tracer = _CurveTracer(sys, region, max_step, angle_step, max_nodes)
    warnings = []
    comps = []
    remaining = seeds
    while len(remaining):
        seed = remaining[0]
        res = np.max(np.abs(sys.values(seed[None, :])))
        if res > POINT_TOLERANCE:
            z, ok = tracer.correct(seed, np.eye(sys.n)[0])
            if not ok:
                remaining = remaining[1:]
                continue
            seed = z
        try:
            P, closed = tracer.trace(seed)
        except TracingError as exc:
            if "singular" in str(exc):
                warnings.append(str(exc))
                remaining = remaining[1:]
                continue
            raise
        comps.append((P, closed))
        step = max(max_step, float(np.max(np.linalg.norm(np.diff(P, axis=0), axis=1)))
                   if len(P) > 1 else max_step)
        d, _ = cKDTree(P).query(remaining, k=1)
        remaining = remaining[(d > 1.5 * step) & (np.arange(len(remaining)) > 0)]
    lengths = [float(np.sum(tracer.arcs(P, c))) for P, c in comps]
    out_p, out_w, spacing = [], [], 0.0
    for (P, closed), length in zip(comps, lengths):
        if nodes is not None:
            share = max(3, int(round(nodes * length / sum(lengths))))
            P = tracer.resample(P, closed, share)
        Q, w, gap = tracer.nodes_and_weights(P, closed)
        out_p.append(Q)
        out_w.append(w)
        spacing = max(spacing, gap)
    kind = "implicit_curve_2d" if sys.n == 2 else "implicit_curve_3d"
    if not comps:
        return _make_patch(kind, sys, np.zeros((0, sys.n)), np.zeros(0), True, 0.0, warnings)
    closed_all = all(c for _, c in comps)
    return _make_patch(kind, sys, np.concatenate(out_p), np.concatenate(out_w), closed_all,
                       spacing, warnings)


# ------------------------------------------------------------------ surfaces

def sample_implicit_surface(sys: PolySystem, box, region=None, resolution: int = 96) -> ManifoldPatch:
    """Nodes on ``{f = 0}`` in R^3 from the three axis charts.

    Over a midpoint grid of each coordinate plane the roots along the
    orthogonal axis are found; a node with unit normal ``n`` in chart ``k``
    gets weight ``du dv |n_k|^3 / sum_j n_j^4``, which is the chart area
    element ``du dv / |n_k|`` times a smooth partition of unity.
    """
    if sys.n != 3 or sys.s != 1:
        raise UnsupportedError("surface sampling needs a single equation in R^3")
    if resolution < 2:
        raise InputError("resolution must be at least 2")
    region = _region(region)
    lo, hi = _seed_box(sys, box, region)
    f = sys.polys[0]
    pts, wts = [], []
    warnings = []
    for k in range(3):
        a, b = [j for j in range(3) if j != k]
        du = (hi[a] - lo[a]) / resolution
        dv = (hi[b] - lo[b]) / resolution
        u = lo[a] + (np.arange(resolution) + 0.5) * du
        v = lo[b] + (np.arange(resolution) + 0.5) * dv
        U, V = np.meshgrid(u, v, indexing="ij")
        X = np.zeros((U.size, 3))
        X[:, a], X[:, b] = U.ravel(), V.ravel()
        roots = real_roots_batched(f.axis_line_coefficients(k, X), lo[k], hi[k])
        counts = np.array([len(r) for r in roots])
        if counts.sum() == 0:
            continue
        P = np.repeat(X, counts, axis=0)
        P[:, k] = np.concatenate(roots)
        G = sys.jacobian(P)[:, 0, :]
        nrm = np.abs(G) / np.linalg.norm(G, axis=1, keepdims=True)
        w = du * dv * nrm[:, k] ** 3 / np.sum(nrm ** 4, axis=1)
        keep = nrm[:, k] > 1e-3
        pts.append(P[keep])
        wts.append(w[keep])
    if not pts:
        return _make_patch("implicit_surface_3d", sys, np.zeros((0, 3)), np.zeros(0), True, 0.0)
    P = np.concatenate(pts)
    w = np.concatenate(wts)
    if region is not None:
        inside = region.contains(P)
        P, w = P[inside], w[inside]
    h = float(np.max(hi - lo)) / resolution
    near_face = np.any((P - lo < h) | (hi - P < h), axis=1)
    closed = not np.any(near_face) or region is not None
    if region is None and np.any(near_face):
        warnings.append("surface reaches the sampling box; the patch is cut at the box faces")
    return _make_patch("implicit_surface_3d", sys, P, w, closed, 2.0 * h, warnings)


# ------------------------------------------------------------------ dispatcher

def sample_manifold(source, *, level: int = 64, nodes=None, max_step: float = 0.02,
                    angle_step: float = 0.02, resolution=None, box=None, region=None,
                    seeds=None) -> ManifoldPatch:
    """Build a :class:`ManifoldPatch` from a reference sphere or a polynomial system."""
    if isinstance(source, ReferenceManifold):
        return sample_reference(source, level)
    sys = source if isinstance(source, PolySystem) else load_system(source)
    if sys.m == 0:
        return sample_points(sys, box=box, region=region, resolution=resolution or 200)
    if sys.m == 1 and sys.n in (2, 3):
        return trace_implicit_curve(sys, box=box, region=region, seeds=seeds, nodes=nodes,
                                    max_step=max_step, angle_step=angle_step,
                                    seed_resolution=resolution or 64)
    if sys.m == 2 and sys.n == 3:
        return sample_implicit_surface(sys, box=box, region=region, resolution=resolution or 96)
    raise UnsupportedError(f"no sampler for m={sys.m} in R^{sys.n}")
