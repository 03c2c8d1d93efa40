"""Closed-form probability and tube-volume bounds.

The two headline bounds estimate ``P{dist(x, V) <= eps}`` for ``x`` uniform
in a ball of radius ``sigma``, where ``V`` is cut out by ``s`` polynomials
of degree at most ``D`` in ``R^n``:

* affine:       ``4 sum_i C(n, s+i) (2 D eps / sigma)^(s+i) (1 + eps/sigma)^(m-i)``
* homogeneous:  ``2 sum_i C(n, s+i) (2 D eps / sigma)^(s+i)``  (ball centred at 0)

with ``m = n - s`` and ``i = 0..m``.  Both are built from a tube-volume
bound in terms of "section degrees" of the Gauss map, which is also exposed
here, together with the classical tube polynomial in the ``mu``
normalisation and its conversion to the ``K`` invariants.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .errors import InputError
from .geomconst import ball_volume, corollary_coefficient, sphere_surface

__all__ = [
    "BoundReport",
    "CurvatureVector",
    "bound_affine",
    "bound_homogeneous",
    "bezout_gauss_degree",
    "bezout_section_degrees",
    "bound_degree_tube",
    "theorem_bound_from_degree_tube",
    "weyl_tube_polynomial",
    "mu_from_K",
    "K_from_mu",
    "corollary_asymptotic",
]

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class BoundReport:
    kind: str  # "affine", "homogeneous" or "degree_tube"
    n: int
    s: int
    m: int
    D: int
    epsilon: float
    sigma: float
    per_term: tuple  # ((i, value), ...)
    total: float
    clamped_probability: float

    def to_dict(self):
        d = asdict(self)
        d["per_term"] = [{"i": i, "value": v} for i, v in self.per_term]
        return d


@dataclass(frozen=True)
class CurvatureVector:
    """Values indexed ``i = 0..m``; ``flavor`` is ``signed_K``, ``absolute_K`` or ``weyl_mu``.

    Entries that a flavour does not define (odd ``i`` for ``weyl_mu``) are NaN.
    """

    values: tuple
    flavor: str

    def __post_init__(self):
        if self.flavor not in ("signed_K", "absolute_K", "weyl_mu"):
            raise InputError(f"unknown curvature flavor {self.flavor!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def m(self):
        return len(self.values) - 1

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)


def _check_common(n, s, D, epsilon, sigma):
    if not (isinstance(n, int) and isinstance(s, int) and isinstance(D, int)):
        raise InputError("n, s and D must be integers")
    if not 1 <= s <= n:
        raise InputError(f"need 1 <= s <= n, got s={s}, n={n}")
    if D < 1:
        raise InputError(f"degree D must be >= 1, got {D}")
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise InputError(f"epsilon must be positive and finite, got {epsilon}")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise InputError(f"sigma must be positive and finite, got {sigma}")


def _report(kind, n, s, D, epsilon, sigma, terms):
    total = math.fsum(terms)
    return BoundReport(
        kind=kind, n=n, s=s, m=n - s, D=D, epsilon=float(epsilon), sigma=float(sigma),
        per_term=tuple((i, float(v)) for i, v in enumerate(terms)),
        total=total, clamped_probability=min(1.0, total),
    )


def bound_affine(n: int, s: int, D: int, epsilon: float, sigma: float) -> BoundReport:
    """Probability bound for an arbitrary ball centre."""
    _check_common(n, s, D, epsilon, sigma)
    m = n - s
    q = 2.0 * D * epsilon / sigma
    r = 1.0 + epsilon / sigma
    terms = [4.0 * math.comb(n, s + i) * q ** (s + i) * r ** (m - i) for i in range(m + 1)]
    return _report("affine", n, s, D, epsilon, sigma, terms)


def bound_homogeneous(n: int, s: int, D: int, epsilon: float, sigma: float) -> BoundReport:
    """Probability bound for homogeneous equations and a ball centred at the origin.

    The caller is responsible for checking both conditions.
    """
    _check_common(n, s, D, epsilon, sigma)
    m = n - s
    q = 2.0 * D * epsilon / sigma
    terms = [2.0 * math.comb(n, s + i) * q ** (s + i) for i in range(m + 1)]
    return _report("homogeneous", n, s, D, epsilon, sigma, terms)


def bezout_gauss_degree(n: int, D: int) -> int:
    """Upper bound ``(2D)^n`` on the fibre size of the generalized Gauss map."""
    if n < 1 or D < 1:
        raise InputError(f"need n >= 1 and D >= 1, got n={n}, D={D}")
    value = (2 * D) ** n
    if value > INT64_MAX:
        raise OverflowError(f"(2*{D})^{n} exceeds the 64-bit integer range")
    return value


def bezout_section_degrees(n: int, s: int, D: int) -> list[int]:
    """Bounds on the section degrees ``mdeg_i``, i.e. ``(2D)^(s+i)`` for ``i = 0..n-s``.

    A generic ``(s+i)``-flat meets ``V`` in a complete intersection living in
    ``R^(s+i)``, so the Gauss-map bound applies there.
    """
    if not 1 <= s <= n:
        raise InputError(f"need 1 <= s <= n, got s={s}, n={n}")
    return [bezout_gauss_degree(s + i, D) for i in range(n - s + 1)]


def bound_degree_tube(n: int, s: int, sigma: float, epsilon: float,
                      mdegs: Sequence[int]) -> BoundReport:
    """Tube-volume bound ``2 w_n eps^s sum_i C(n,s+i) mdeg_i sigma^(m-i) eps^i``.

    This is a volume, not a probability; ``clamped_probability`` is filled
    in after dividing by the ball volume ``w_n sigma^n``.
    """
    if not 1 <= s <= n:
        raise InputError(f"need 1 <= s <= n, got s={s}, n={n}")
    m = n - s
    if len(mdegs) != m + 1:
        raise InputError(f"expected {m + 1} section degrees, got {len(mdegs)}")
    if any(d < 0 for d in mdegs):
        raise InputError("section degrees must be non-negative")
    if not (epsilon > 0 and sigma > 0):
        raise InputError("epsilon and sigma must be positive")
    wn = ball_volume(n)
    terms = [2.0 * wn * epsilon ** s * math.comb(n, s + i) * mdegs[i]
             * sigma ** (m - i) * epsilon ** i for i in range(m + 1)]
    total = math.fsum(terms)
    prob = total / (wn * sigma ** n)
    return BoundReport(
        kind="degree_tube", n=n, s=s, m=m, D=0, epsilon=float(epsilon), sigma=float(sigma),
        per_term=tuple((i, float(v)) for i, v in enumerate(terms)),
        total=total, clamped_probability=min(1.0, prob),
    )


def theorem_bound_from_degree_tube(n: int, s: int, D: int, epsilon: float, sigma: float,
                                   homogeneous: bool = False) -> dict:
    """Rebuild the probability bound from the degree tube bound.

    The variety is cut to ``M' = V ∩ B(p, sigma + eps)`` (or ``B(0, sigma)``
    in the homogeneous case), the tube bound is applied with the Bézout
    section degrees, and the result is divided by the ball volume.  In the
    affine case the boundary of ``M'`` is charged the same amount again.
    """
    _check_common(n, s, D, epsilon, sigma)
    mdegs = bezout_section_degrees(n, s, D)
    radius = sigma if homogeneous else sigma + epsilon
    tube = bound_degree_tube(n, s, radius, epsilon, mdegs)
    interior = tube.total / (ball_volume(n) * sigma ** n)
    boundary = 0.0 if homogeneous else interior
    return {"interior": interior, "boundary": boundary, "total": interior + boundary}


def _odd_double_factorial(i):
    """(i-1)(i-3)...1 for even i, empty product 1 at i = 0."""
    return math.prod(range(i - 1, 0, -2))


def _weyl_denominator(s, i):
    """(s+i)(s+i-2)...s"""
    return math.prod(s + 2 * k for k in range(i // 2 + 1))


def _muk_denominator(s, i):
    """(s+i-2)(s+i-4)...s, empty product 1 at i = 0."""
    return math.prod(s + 2 * k for k in range(i // 2))


def weyl_tube_polynomial(mu: CurvatureVector, s: int, epsilon: float) -> float:
    """Tube volume from the ``mu`` invariants; only even ``i`` contribute."""
    if mu.flavor != "weyl_mu":
        raise InputError(f"expected weyl_mu invariants, got {mu.flavor}")
    if s < 1:
        raise InputError("codimension s must be >= 1")
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    terms = []
    for i in range(0, len(mu), 2):
        coeff = _odd_double_factorial(i) / _weyl_denominator(s, i)
        terms.append(coeff * mu[i] * epsilon ** i)
    return sphere_surface(s) * epsilon ** s * math.fsum(terms)


def mu_from_K(K: CurvatureVector, s: int) -> CurvatureVector:
    """Convert signed ``K_i`` to ``mu_i``; odd entries become NaN."""
    if K.flavor != "signed_K":
        raise InputError(f"expected signed_K invariants, got {K.flavor}")
    if s < 1:
        raise InputError("codimension s must be >= 1")
    o = sphere_surface(s)
    out = []
    for i, k in enumerate(K.values):
        if i % 2:
            out.append(math.nan)
        else:
            out.append(k * _muk_denominator(s, i) / (o * _odd_double_factorial(i)))
    return CurvatureVector(tuple(out), "weyl_mu")


def K_from_mu(mu: CurvatureVector, s: int) -> CurvatureVector:
    """Inverse of :func:`mu_from_K` on the even entries."""
    if mu.flavor != "weyl_mu":
        raise InputError(f"expected weyl_mu invariants, got {mu.flavor}")
    o = sphere_surface(s)
    out = []
    for i, v in enumerate(mu.values):
        if i % 2:
            out.append(math.nan)
        else:
            out.append(o * _odd_double_factorial(i) / _muk_denominator(s, i) * v)
    return CurvatureVector(tuple(out), "signed_K")


def corollary_asymptotic(n: int, s: int, volume_V: float, epsilon: float) -> float:
    """Leading-order probability for a compact variety in the unit ball.

    For a ball of radius ``sigma`` use ``volume_V / sigma^(n-s)`` and
    ``epsilon / sigma``.
    """
    if volume_V < 0 or epsilon < 0:
        raise InputError("volume and epsilon must be non-negative")
    return volume_V * epsilon ** s * corollary_coefficient(n, s)
