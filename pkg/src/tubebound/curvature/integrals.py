"""Curvature integrals over the unit normal bundle and tube volumes.

``K_i = int psi_i(v)`` and ``|K_i| = int |psi_i(v)|`` over pairs ``(p, v)``
with ``p`` a node of the patch and ``v`` a unit normal at ``p``.  The
normal sphere is ``{+e, -e}`` in codimension one and a uniform ring of
angles in codimension two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..bounds import CurvatureVector
from ..errors import InputError, UnsupportedError
from .sampling import ManifoldPatch
from .sff import psi_from_eigenvalues, shape_operators_many

__all__ = [
    "CurvatureReport",
    "normal_sphere_nodes",
    "curvature_integrals",
    "tube_volume_quadrature",
    "tube_upper_bound_from_K",
]


@dataclass(frozen=True)
class CurvatureReport:
    absolute_K: CurvatureVector
    signed_K: CurvatureVector
    normal_quadrature_nodes: int
    surface_nodes: int
    error_indicator: float
    volume: float

    def to_dict(self):
        return {
            "absolute_K": list(self.absolute_K.values),
            "signed_K": list(self.signed_K.values),
            "normal_quadrature_nodes": self.normal_quadrature_nodes,
            "surface_nodes": self.surface_nodes,
            "error_indicator": self.error_indicator,
            "volume": self.volume,
        }


def normal_sphere_nodes(s: int, count: int = 64):
    """Coordinates ``(q, s)`` in the normal frame and weights on ``S^{s-1}``."""
    if s == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if s == 2:
        if count < 2:
            raise InputError("need at least two normal nodes")
        th = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(count, 2.0 * np.pi / count)
    raise UnsupportedError(f"normal-sphere quadrature is only available for s <= 2, got s={s}")


def _kappas(patch: ManifoldPatch, U):
    """Principal curvatures ``(P, Q, m)`` for every node and normal direction."""
    S = shape_operators_many(patch.system, patch.points, patch.tangents, patch.normals)
    Sv = np.einsum("qj,pjab->pqab", U, S)
    if patch.m == 0:
        return np.zeros(Sv.shape[:2] + (0,))
    return np.linalg.eigvalsh(Sv)


def _integrate(patch, count):
    U, wq = normal_sphere_nodes(patch.s, count)
    psi = psi_from_eigenvalues(_kappas(patch, U))
    w = patch.weights[:, None, None] * wq[None, :, None]
    signed = np.sum(np.sum(psi * w, axis=1), axis=0)
    absolute = np.sum(np.sum(np.abs(psi) * w, axis=1), axis=0)
    return signed, absolute


def curvature_integrals(patch: ManifoldPatch, normal_nodes: int = 64) -> CurvatureReport:
    """Signed and absolute curvature integrals ``K_0..K_m`` over the patch."""
    m = patch.m
    if patch.size == 0:
        zeros = tuple(0.0 for _ in range(m + 1))
        return CurvatureReport(CurvatureVector(zeros, "absolute_K"),
                               CurvatureVector(zeros, "signed_K"), 0, 0, 0.0, 0.0)
    signed, absolute = _integrate(patch, normal_nodes)
    if patch.s == 1:
        err = 0.0
        q = 2
    else:
        coarse_s, coarse_a = _integrate(patch, max(2, normal_nodes // 2))
        err = float(max(np.max(np.abs(signed - coarse_s)), np.max(np.abs(absolute - coarse_a))))
        q = normal_nodes
    return CurvatureReport(
        absolute_K=CurvatureVector(tuple(absolute), "absolute_K"),
        signed_K=CurvatureVector(tuple(signed), "signed_K"),
        normal_quadrature_nodes=q,
        surface_nodes=patch.size,
        error_indicator=err,
        volume=patch.total_weight,
    )


def tube_volume_quadrature(patch: ManifoldPatch, epsilon, normal_nodes: int = 64,
                           t_nodes: int = 8):
    """``int_{S(NM)} int_0^eps t^(s-1) |det(Id - t S(v))| dt``.

    The ``t`` integral is split at the zeros ``1/kappa_j`` of the determinant
    so Gauss-Legendre is exact on every piece once ``t_nodes >= (m + s) / 2``.
    ``epsilon`` may be a scalar or a sequence; the result has the same shape.
    """
    eps = np.atleast_1d(np.asarray(epsilon, dtype=float))
    if np.any(~(eps > 0)):
        raise InputError("epsilon must be positive")
    if t_nodes < 1:
        raise InputError("t_nodes must be at least 1")
    s = patch.s
    out = np.zeros(eps.shape)
    if patch.size:
        U, wq = normal_sphere_nodes(s, normal_nodes)
        kappa = _kappas(patch, U)
        x, wx = np.polynomial.legendre.leggauss(t_nodes)
        w = patch.weights[:, None] * wq[None, :]
        for idx, e in enumerate(eps):
            inv = np.where(kappa > 0, 1.0 / np.where(kappa > 0, kappa, 1.0), e)
            inv = np.clip(inv, 0.0, e)
            shape = kappa.shape[:2]
            edges = np.sort(np.concatenate(
                [np.zeros(shape + (1,)), inv, np.full(shape + (1,), e)], axis=-1), axis=-1)
            a, b = edges[..., :-1], edges[..., 1:]
            half = 0.5 * (b - a)
            t = (a + half)[..., None] + half[..., None] * x
            det = np.ones_like(t)
            for j in range(kappa.shape[-1]):
                det = det * (1.0 - t * kappa[:, :, j, None, None])
            integrand = t ** (s - 1) * np.abs(det)
            inner = np.sum(np.sum(integrand * wx, axis=-1) * half, axis=-1)
            out[idx] = np.sum(np.sum(inner * w, axis=1), axis=0)
    return float(out[0]) if np.ndim(epsilon) == 0 else out


def tube_upper_bound_from_K(report, s: int, epsilon: float) -> float:
    """``eps^s sum_i |K_i| eps^i / (s + i)``."""
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    if s < 1:
        raise InputError("codimension s must be >= 1")
    K = report.absolute_K if isinstance(report, CurvatureReport) else report
    if isinstance(K, CurvatureVector) and K.flavor != "absolute_K":
        raise InputError(f"expected absolute_K invariants, got {K.flavor}")
    terms = [abs(k) * epsilon ** i / (s + i) for i, k in enumerate(K)]
    return epsilon ** s * math.fsum(terms)
