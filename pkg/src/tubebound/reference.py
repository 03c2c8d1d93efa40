"""Closed forms for round spheres ``S^m`` of radius ``r`` sitting in ``R^n``.

The sphere is placed in the span of the first ``m + 1`` coordinates, so the
point pair ``S^0`` and the circle in ``R^3`` are the cases ``m = 0`` and
``(m, n) = (1, 3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InputError
from .geomconst import ball_volume, sphere_area
from .polycore import MultiPoly, PolySystem

__all__ = [
    "ReferenceManifold",
    "sphere_tube_volume",
    "sphere_tube_valid",
    "sphere_curvature_K",
    "sphere_abs_curvature_K",
    "sphere_volume",
    "euler_characteristic",
    "implicit_form",
]


@dataclass(frozen=True)
class ReferenceManifold:
    kind: str  # "sphere", "point_pair_S0" or "circle_in_R3"
    m: int
    n: int
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sphere", "point_pair_S0", "circle_in_R3"):
            raise InputError(f"unknown reference manifold kind {self.kind!r}")
        _check_dims(self.m, self.n)
        if self.kind == "point_pair_S0" and self.m != 0:
            raise InputError("point_pair_S0 has m = 0")
        if self.kind == "circle_in_R3" and (self.m, self.n) != (1, 3):
            raise InputError("circle_in_R3 has m = 1, n = 3")
        if not self.radius > 0:
            raise InputError("radius must be positive")

    @classmethod
    def sphere(cls, m, n, radius=1.0):
        return cls("sphere", m, n, radius)

    @classmethod
    def point_pair(cls, n, radius=1.0):
        return cls("point_pair_S0", 0, n, radius)

    @classmethod
    def circle_in_R3(cls, radius=1.0):
        return cls("circle_in_R3", 1, 3, radius)

    @property
    def s(self):
        return self.n - self.m


def _check_dims(m, n):
    if not (isinstance(m, int) and isinstance(n, int)):
        raise InputError("m and n must be integers")
    if not 0 <= m < n:
        raise InputError(f"need 0 <= m < n, got m={m}, n={n}")


def sphere_volume(m: int, radius: float = 1.0) -> float:
    """``m``-dimensional volume of the radius-``r`` sphere ``S^m``."""
    return sphere_area(m) * radius ** m


def euler_characteristic(m: int) -> int:
    return 1 + (-1) ** m


def sphere_tube_volume(m: int, n: int, epsilon: float, radius: float = 1.0) -> float:
    """Volume of the ``epsilon``-tube around ``S^m`` (radius ``r``) in ``R^n``.

    Sum over even ``i`` of ``2 w_{m+1} (w_{s+i} / w_{i+1}) C(m+1, i+1) eps^(s+i)``,
    scaled as ``r^n V(eps / r)``.  Exact while ``eps < r``; see
    :func:`sphere_tube_valid`.
    """
    _check_dims(m, n)
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    if not radius > 0:
        raise InputError("radius must be positive")
    s = n - m
    e = epsilon / radius
    terms = [
        (ball_volume(s + i) / ball_volume(i + 1)) * math.comb(m + 1, i + 1) * e ** i
        for i in range(0, m + 1, 2)
    ]
    return radius ** n * 2.0 * ball_volume(m + 1) * e ** s * math.fsum(terms)


def sphere_tube_valid(epsilon: float, radius: float = 1.0) -> bool:
    """True while the tube formula is exact (``epsilon`` below the inradius)."""
    return epsilon < radius


def sphere_curvature_K(m: int, n: int, i: int, radius: float = 1.0) -> float:
    """Signed curvature integral ``K_i`` of ``S^m`` in ``R^n`` for even ``i``.

    ``2 O_m O_{s+i-1} / O_i * C(m, i)``, times ``r^(m-i)``.
    """
    _check_dims(m, n)
    if i % 2 or not 0 <= i <= m:
        raise InputError(f"i must be even with 0 <= i <= m, got i={i}")
    s = n - m
    value = 2.0 * sphere_area(m) * sphere_area(s + i - 1) / sphere_area(i) * math.comb(m, i)
    return value * radius ** (m - i)


def sphere_abs_curvature_K(m: int, n: int, i: int, radius: float = 1.0) -> float:
    """Absolute curvature integral ``|K_i|`` of ``S^m`` in ``R^n``, any ``0 <= i <= m``.

    Only the radial component ``u_0`` of a unit normal bends the sphere, so
    ``|psi_i| = C(m, i) |u_0|^i / r^i`` and the normal-sphere integral is
    ``int_{S^{s-1}} |u_0|^i = 2 pi^((s-1)/2) Gamma((i+1)/2) / Gamma((s+i)/2)``.
    """
    _check_dims(m, n)
    if not 0 <= i <= m:
        raise InputError(f"need 0 <= i <= m, got i={i}")
    s = n - m
    moment = 2.0 * math.exp(0.5 * (s - 1) * math.log(math.pi)
                            + math.lgamma(0.5 * (i + 1)) - math.lgamma(0.5 * (s + i)))
    return sphere_volume(m, radius) * math.comb(m, i) * moment / radius ** i


def implicit_form(ref: ReferenceManifold) -> PolySystem:
    """``x_0^2 + ... + x_m^2 - r^2 = 0`` together with ``x_j = 0`` for ``j > m``."""
    n, m, r = ref.n, ref.m, ref.radius
    terms = [(1.0, tuple(2 if j == k else 0 for k in range(n))) for j in range(m + 1)]
    terms.append((-r * r, (0,) * n))
    polys = [MultiPoly(n, tuple(terms))]
    polys += [MultiPoly.variable(n, j) for j in range(m + 1, n)]
    return PolySystem(n, tuple(polys))
