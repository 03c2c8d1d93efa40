"""Sphere areas, ball volumes and flag coefficients.

Everything goes through ``lgamma`` so that dimensions in the hundreds do
not overflow intermediate factorials.
"""

import math

from .errors import InputError

__all__ = [
    "sphere_surface",
    "sphere_area",
    "ball_volume",
    "flag_coefficient",
    "corollary_coefficient",
]

_LOG_PI = math.log(math.pi)


def _check_natural(name, value, minimum=0):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise InputError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def sphere_surface(n: int) -> float:
    """Area of the unit sphere ``S^{n-1}`` in ``R^n``: ``2 pi^{n/2} / Gamma(n/2)``.

    >>> round(sphere_surface(3) / math.pi, 12)
    4.0
    """
    n = _check_natural("n", n, 1)
    return 2.0 * math.exp(0.5 * n * _LOG_PI - math.lgamma(0.5 * n))


def sphere_area(k: int) -> float:
    """Area of the unit ``k``-sphere ``S^k``; ``sphere_area(k) == sphere_surface(k + 1)``."""
    return sphere_surface(_check_natural("k", k) + 1)


def ball_volume(n: int) -> float:
    """Volume of the unit ``n``-ball, with ``ball_volume(0) == 1``."""
    n = _check_natural("n", n)
    if n == 0:
        return 1.0
    return sphere_surface(n) / n


def flag_coefficient(n: int, k: int) -> float:
    """``binom(n, k) * omega_n / (omega_k * omega_{n-k})``."""
    n = _check_natural("n", n)
    k = _check_natural("k", k)
    if k > n:
        raise InputError(f"k={k} exceeds n={n}")
    return math.comb(n, k) * ball_volume(n) / (ball_volume(k) * ball_volume(n - k))


def corollary_coefficient(n: int, s: int) -> float:
    """Leading coefficient ``n Gamma(n/2) / (pi^{(n-s)/2} s Gamma(s/2))``.

    Multiplying by ``vol_{n-s}(V) * eps^s`` gives the small-``eps``
    probability for a compact variety in the unit ball.
    """
    n = _check_natural("n", n, 1)
    s = _check_natural("s", s, 1)
    if s > n:
        raise InputError(f"s={s} exceeds n={n}")
    log_c = (math.log(n) + math.lgamma(0.5 * n) - 0.5 * (n - s) * _LOG_PI
             - math.log(s) - math.lgamma(0.5 * s))
    return math.exp(log_c)
