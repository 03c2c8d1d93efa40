"""Cauchy-Crofton check for plane curves.

Lines in the plane are drawn as ``{x : <x, nu> = r}`` with ``nu`` uniform on
the circle and ``r`` uniform in ``[-R, R]``; under the normalized measure the
set of lines meeting ``B(0, R)`` has mass ``w_1 R = 2R``.  A curve meets a
line in a finite set whose ``K_0`` is twice the number of points, and
Crofton's identity reads ``K_0(M) = [2; 1] int K_0(M cap L) dL``.  The
absolute-curvature inequality allows a further factor 2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from ..errors import InputError, UnsupportedError
from ..geomconst import ball_volume, flag_coefficient
from ..polycore import real_roots_batched
from .integrals import curvature_integrals
from .sampling import ManifoldPatch

__all__ = ["CroftonResult", "crofton_check"]


@dataclass(frozen=True)
class CroftonResult:
    lhs: float
    rhs_estimate: float
    ci_halfwidth: float
    abs_bound: float
    num_flats: int
    radius: float
    mean_intersections: float
    ci_level: float

    def to_dict(self):
        return asdict(self)


def crofton_check(patch: ManifoldPatch, i: int = 0, num_flats: int = 100_000, seed: int = 0,
                  radius=None, ci_level: float = 0.99, chunk: int = 20_000) -> CroftonResult:
    """Compare ``|K_0|`` of a closed plane curve with its Crofton line integral."""
    sys = patch.system
    if i != 0 or sys.n != 2 or sys.s != 1:
        raise UnsupportedError("Crofton check is implemented for plane curves with i = 0")
    if num_flats < 2:
        raise InputError("num_flats must be at least 2")
    if not 0 < ci_level < 1:
        raise InputError("ci_level must lie in (0, 1)")
    if patch.size == 0 or patch.total_weight == 0:
        return CroftonResult(0.0, 0.0, 0.0, 0.0, num_flats, float(radius or 0.0), 0.0, ci_level)
    if not patch.closed:
        raise UnsupportedError("Crofton check needs a closed curve")
    reach = float(np.max(np.linalg.norm(patch.points, axis=1)))
    if radius is None:
        radius = 1.0 if reach <= 1.0 + 1e-9 else 1.05 * reach
    if reach > radius * (1 + 1e-9):
        raise InputError(f"curve leaves the ball of radius {radius}")
    lhs = curvature_integrals(patch).absolute_K[0]
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, num_flats)
    offset = rng.uniform(-radius, radius, num_flats)
    f = sys.polys[0]
    counts = np.zeros(num_flats)
    for start in range(0, num_flats, chunk):
        sl = slice(start, min(start + chunk, num_flats))
        nu = np.stack([np.cos(theta[sl]), np.sin(theta[sl])], axis=1)
        along = np.stack([-nu[:, 1], nu[:, 0]], axis=1)
        C = f.restrict_to_lines(offset[sl, None] * nu, along)
        # the curve lies inside the ball, so every real root is a crossing
        counts[sl] = [len(r) for r in real_roots_batched(C)]
    k0 = 2.0 * counts
    mass = ball_volume(1) * radius
    flag = flag_coefficient(2, 1)
    rhs = flag * mass * float(np.mean(k0))
    z = float(norm.ppf(0.5 + 0.5 * ci_level))
    half_width = flag * mass * z * float(np.std(k0, ddof=1)) / math.sqrt(num_flats)
    return CroftonResult(
        lhs=float(lhs), rhs_estimate=rhs, ci_halfwidth=half_width, abs_bound=2.0 * rhs,
        num_flats=num_flats, radius=float(radius), mean_intersections=float(np.mean(counts)),
        ci_level=ci_level,
    )
