"""Second fundamental form of an implicit complete intersection.

For ``V = {f_1 = ... = f_s = 0}`` and a unit normal ``v`` at ``p`` write
``v = sum_k a_k grad f_k(p)``.  The field ``Z = sum_k a_k grad f_k`` (constant
``a``) is normal along ``V`` and equals ``v`` at ``p``, and the shape
operator only depends on the value of the normal field at the point, so

    S(v)_{jl} = -<E_l, D_{E_j} Z> = -sum_k a_k E_j^T Hess f_k(p) E_l

in a tangent frame ``E``.  With this sign the unit sphere and its outward
normal give ``S = -Id``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from ..polycore import PolySystem
from ..variety import FramedPoint

__all__ = [
    "SecondFundamentalForm",
    "PsiCoefficients",
    "second_fundamental_form",
    "psi_coefficients",
    "psi_from_eigenvalues",
    "shape_operators_many",
    "NORMAL_TOLERANCE",
]

NORMAL_TOLERANCE = 1e-8


@dataclass(frozen=True)
class SecondFundamentalForm:
    at: FramedPoint
    direction: np.ndarray
    matrix: np.ndarray

    @property
    def principal_curvatures(self):
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class PsiCoefficients:
    """``det(Id - t S) = sum_i psi_i t^i``."""

    values: tuple

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)


def second_fundamental_form(sys: PolySystem, fp: FramedPoint, v) -> SecondFundamentalForm:
    v = np.asarray(v, dtype=float)
    if v.shape != (sys.n,):
        raise InputError(f"normal vector must have length {sys.n}")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > NORMAL_TOLERANCE:
        raise InputError(f"normal vector must be unit length, got norm {norm:.3e}")
    E = fp.tangent_frame
    if E.shape[0] and np.max(np.abs(E @ v)) > NORMAL_TOLERANCE:
        raise InputError("vector is not normal to the variety at this point")
    J = sys.jacobian(fp.p[None, :])[0]
    alpha, *_ = np.linalg.lstsq(J.T, v, rcond=None)
    H = sys.hessians(fp.p[None, :])[0]
    A = np.einsum("k,kab->ab", alpha, H)
    S = -(E @ A @ E.T)
    S = 0.5 * (S + S.T)
    return SecondFundamentalForm(at=fp, direction=v.copy(), matrix=S)


def psi_from_eigenvalues(kappa):
    """Signed elementary symmetric functions ``(-1)^i sigma_i`` along the last axis.

    ``kappa`` has shape ``(..., m)``; the result has shape ``(..., m + 1)``.
    """
    kappa = np.asarray(kappa, dtype=float)
    m = kappa.shape[-1]
    e = np.zeros(kappa.shape[:-1] + (m + 1,))
    e[..., 0] = 1.0
    for j in range(m):
        k = kappa[..., j:j + 1]
        e[..., 1:] = e[..., 1:] - k * e[..., :-1]
    return e


def psi_coefficients(S) -> PsiCoefficients:
    """Coefficients of ``det(Id - t S)`` from the eigenvalues of the symmetric matrix ``S``."""
    M = S.matrix if isinstance(S, SecondFundamentalForm) else np.asarray(S, dtype=float)
    if M.size == 0:
        return PsiCoefficients((1.0,))
    kappa = np.linalg.eigvalsh(0.5 * (M + M.T))
    return PsiCoefficients(tuple(float(x) for x in psi_from_eigenvalues(kappa)))


def shape_operators_many(sys: PolySystem, points, tangents, normals):
    """``S(e_j)`` for every normal-frame vector ``e_j`` at every point.

    Returns an array of shape ``(N, s, m, m)``; by linearity
    ``S(sum_j u_j e_j) = sum_j u_j S(e_j)``.
    """
    J = sys.jacobian(points)
    H = sys.hessians(points)
    G = J @ np.swapaxes(J, 1, 2)
    # alpha[p, j, k]: coefficients of e_j in the gradient basis
    rhs = J @ np.swapaxes(normals, 1, 2)
    alpha = np.swapaxes(np.linalg.solve(G, rhs), 1, 2)
    A = np.einsum("pjk,pkab->pjab", alpha, H)
    S = -np.einsum("pxa,pjab,pyb->pjxy", tangents, A, tangents)
    return 0.5 * (S + np.swapaxes(S, 2, 3))
