"""Monte Carlo estimates of ``P{dist(x, V) <= eps}`` for ``x`` uniform in a ball.

Samples are drawn in fixed-size chunks.  Chunk ``k`` uses its own Philox
stream seeded from ``SeedSequence(seed, spawn_key=(k,))``, so the hit count
depends only on ``(seed, samples, chunk_size)`` and never on the number of
worker threads.

Most samples never reach the projection step.  Two sound lower bounds on
the distance are tried first, with ``R = sigma + eps`` and the bounds taken
over the box ``|y - p|_inf <= R``:

* ``|f_i(x)| > L_i eps`` with ``L_i`` a bound on ``|grad f_i|``;
* ``|f_i(x)| > |grad f_i(x)| eps + H_i eps^2 / 2`` with ``H_i`` a bound on
  the Hessian norm (second-order Taylor).

Either one shows ``f_i`` has no zero within ``eps`` of ``x``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import beta

from .bounds import BoundReport, bound_affine, bound_homogeneous
from .errors import InputError
from .polycore import MultiPoly, PolySystem
from .variety import ProjectionOptions, find_singular_points, project_many

__all__ = [
    "McEstimate",
    "Comparison",
    "sample_uniform_ball",
    "sample_uniform_ball_many",
    "clopper_pearson",
    "estimate_probability",
    "estimate_probability_grid",
    "compare_bound",
    "random_system",
    "default_threads",
    "THREADS_ENV",
]

THREADS_ENV = "TUBEBOUND_THREADS"
DEFAULT_CHUNK = 65536


@dataclass(frozen=True)
class McEstimate:
    samples: int
    hits: int
    estimate: float
    ci_low: float
    ci_high: float
    ci_level: float
    seed: int
    epsilon: float
    sigma: float
    center: tuple
    chunk_size: int
    nonconverged: int = 0
    projected: int = 0

    def to_dict(self):
        return {
            "samples": self.samples,
            "hits": self.hits,
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "ci_level": self.ci_level,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "sigma": self.sigma,
            "center": list(self.center),
            "chunk_size": self.chunk_size,
            "nonconverged": self.nonconverged,
            "projected": self.projected,
        }


@dataclass(frozen=True)
class Comparison:
    estimate: McEstimate
    affine: BoundReport
    homogeneous: BoundReport | None
    dominated_affine: bool
    dominated_homogeneous: bool | None
    warnings: tuple = field(default=())

    @property
    def dominated(self):
        return self.dominated_affine and self.dominated_homogeneous is not False

    @property
    def margin(self):
        """Gap between the tightest applicable bound and the upper confidence limit."""
        best = self.affine.total
        if self.homogeneous is not None:
            best = min(best, self.homogeneous.total)
        return best - self.estimate.ci_high

    def to_dict(self):
        return {
            "estimate": self.estimate.to_dict(),
            "affine": self.affine.to_dict(),
            "homogeneous": None if self.homogeneous is None else self.homogeneous.to_dict(),
            "dominated_affine": self.dominated_affine,
            "dominated_homogeneous": self.dominated_homogeneous,
            "dominated": self.dominated,
            "margin": self.margin,
            "warnings": list(self.warnings),
        }


def default_threads():
    """Worker count from the environment, or 1."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise InputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def sample_uniform_ball_many(n: int, center, sigma: float, count: int, rng) -> np.ndarray:
    """``count`` points uniform in ``B(center, sigma)``: Gaussian direction, radius ``sigma U^(1/n)``."""
    if not sigma > 0:
        raise InputError("sigma must be positive")
    center = np.asarray(center, dtype=float)
    G = rng.standard_normal((count, n))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    r = sigma * rng.random(count) ** (1.0 / n)
    return center + r[:, None] * G


def sample_uniform_ball(n: int, center, sigma: float, rng) -> np.ndarray:
    return sample_uniform_ball_many(n, center, sigma, 1, rng)[0]


def clopper_pearson(hits: int, samples: int, level: float = 0.99):
    """Exact two-sided binomial confidence interval."""
    if not 0 < level < 1:
        raise InputError("confidence level must lie in (0, 1)")
    alpha = 1.0 - level
    low = 0.0 if hits == 0 else float(beta.ppf(alpha / 2, hits, samples - hits + 1))
    high = 1.0 if hits == samples else float(beta.ppf(1 - alpha / 2, hits + 1, samples - hits))
    return low, high


def _chunk_rng(seed, index):
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


class _Counter:
    """Per-chunk hit counting for a fixed system, ball and list of radii."""

    def __init__(self, sys, center, sigma, eps, seed, chunk_size, opts):
        self.sys = sys
        self.center = center
        self.sigma = sigma
        self.eps = eps
        self.seed = seed
        self.chunk_size = chunk_size
        self.opts = opts
        self.single = replace(opts, starts=1)
        local = sys.shifted(center)
        reach = sigma + float(np.max(eps))
        half = np.full(sys.n, reach)
        self.grad_bound = local.gradient_bounds(half)
        self.hess_bound = local.hessian_bounds(half)

    def run(self, index, count):
        sys = self.sys
        eps_max = float(np.max(self.eps))
        eps_min = float(np.min(self.eps))
        X = sample_uniform_ball_many(sys.n, self.center, self.sigma, count, _chunk_rng(self.seed, index))
        F = np.abs(sys.values(X))
        far = np.any(F > self.grad_bound * eps_max, axis=1)
        idx = np.flatnonzero(~far)
        if idx.size:
            G = np.linalg.norm(sys.jacobian(X[idx]), axis=2)
            local = G * eps_max + 0.5 * self.hess_bound * eps_max ** 2
            idx = idx[~np.any(F[idx] > local, axis=1)]
        hits = np.zeros(len(self.eps), dtype=np.int64)
        nonconv = 0
        if idx.size:
            d, _, _, conv = project_many(sys, X[idx], self.single)
            retry = ~conv | (d > eps_min)
            if self.opts.starts > 1 and np.any(retry):
                d2, _, _, conv2 = project_many(sys, X[idx[retry]], self.opts)
                d_r = np.where(conv[retry], np.minimum(d[retry], d2), d2)
                d[retry] = np.where(conv2 | conv[retry], d_r, d2)
                conv[retry] = conv[retry] | conv2
            nonconv = int(np.sum(~conv))
            for k, e in enumerate(self.eps):
                hits[k] = int(np.sum((d <= e) | ~conv))
        return hits, nonconv, int(idx.size)


def _validate(sys, center, sigma, eps, samples, chunk_size):
    center = np.asarray(center if center is not None else np.zeros(sys.n), dtype=float)
    if center.shape != (sys.n,):
        raise InputError(f"center must have length {sys.n}")
    if not np.all(np.isfinite(center)):
        raise InputError("center must be finite")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise InputError("sigma must be positive and finite")
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if eps.size == 0 or np.any(~(eps > 0)) or np.any(~np.isfinite(eps)):
        raise InputError("epsilon values must be positive and finite")
    if int(samples) != samples or samples < 1:
        raise InputError("samples must be a positive integer")
    if int(chunk_size) != chunk_size or chunk_size < 1:
        raise InputError("chunk_size must be a positive integer")
    return center, eps


def estimate_probability_grid(sys: PolySystem, center, sigma: float, epsilons, samples: int,
                              seed: int = 0, ci_level: float = 0.99,
                              chunk_size: int = DEFAULT_CHUNK, threads=None,
                              opts: ProjectionOptions = ProjectionOptions()) -> list[McEstimate]:
    """One estimate per radius, all from the same sample points."""
    center, eps = _validate(sys, center, sigma, epsilons, samples, chunk_size)
    clopper_pearson(0, 1, ci_level)
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise InputError("threads must be >= 1")
    counter = _Counter(sys, center, float(sigma), eps, seed, int(chunk_size), opts)
    sizes = [min(chunk_size, samples - start) for start in range(0, samples, chunk_size)]
    if threads == 1 or len(sizes) == 1:
        results = [counter.run(k, c) for k, c in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(counter.run, range(len(sizes)), sizes))
    hits = np.zeros(len(eps), dtype=np.int64)
    nonconv = projected = 0
    for h, nc, pr in results:
        hits += h
        nonconv += nc
        projected += pr
    out = []
    for k, e in enumerate(eps):
        lo, hi = clopper_pearson(int(hits[k]), samples, ci_level)
        out.append(McEstimate(
            samples=int(samples), hits=int(hits[k]), estimate=int(hits[k]) / samples,
            ci_low=lo, ci_high=hi, ci_level=ci_level, seed=int(seed), epsilon=float(e),
            sigma=float(sigma), center=tuple(float(c) for c in center),
            chunk_size=int(chunk_size), nonconverged=nonconv, projected=projected,
        ))
    return out


def estimate_probability(sys: PolySystem, center, sigma: float, epsilon: float, samples: int,
                         seed: int = 0, ci_level: float = 0.99, chunk_size: int = DEFAULT_CHUNK,
                         threads=None, opts: ProjectionOptions = ProjectionOptions()) -> McEstimate:
    """Fraction of uniform samples in ``B(center, sigma)`` within ``epsilon`` of ``V``.

    Samples whose projection fails to converge are counted as hits.
    """
    return estimate_probability_grid(sys, center, sigma, [epsilon], samples, seed, ci_level,
                                     chunk_size, threads, opts)[0]


def hypothesis_warnings(sys: PolySystem, center, radius: float, grid: int = 7) -> list[str]:
    """Messages for points of ``V`` in the ball where the gradients are dependent."""
    sing = find_singular_points(sys, center, radius, grid=grid)
    if len(sing) == 0:
        return []
    pts = ", ".join(str([round(float(v), 6) for v in p]) for p in sing[:5])
    return [f"gradients are linearly dependent at {len(sing)} point(s) of V in the ball: {pts}; "
            "the complete-intersection hypothesis fails there"]


def compare_bound(sys: PolySystem, center, sigma: float, epsilon, samples: int, seed: int = 0,
                  ci_level: float = 0.99, chunk_size: int = DEFAULT_CHUNK, threads=None,
                  opts: ProjectionOptions = ProjectionOptions()) -> list[Comparison]:
    """Monte Carlo estimate against the affine bound, plus the homogeneous one when it applies.

    ``epsilon`` may be a single radius or a sequence; one record per radius.
    """
    center, eps = _validate(sys, center, sigma, epsilon, samples, chunk_size)
    warnings = hypothesis_warnings(sys, center, sigma + float(np.max(eps)))
    estimates = estimate_probability_grid(sys, center, sigma, eps, samples, seed, ci_level,
                                          chunk_size, threads, opts)
    homog = sys.homogeneous and bool(np.all(center == 0))
    out = []
    for est in estimates:
        w = list(warnings)
        if est.nonconverged:
            w.append(f"{est.nonconverged} samples did not converge and were counted as hits")
        aff = bound_affine(sys.n, sys.s, sys.D, est.epsilon, float(sigma))
        hom = bound_homogeneous(sys.n, sys.s, sys.D, est.epsilon, float(sigma)) if homog else None
        out.append(Comparison(
            estimate=est, affine=aff, homogeneous=hom,
            dominated_affine=est.ci_high <= aff.total,
            dominated_homogeneous=None if hom is None else est.ci_high <= hom.total,
            warnings=tuple(w),
        ))
    return out


def random_system(rng, n: int, s: int, D: int, homogeneous: bool = False) -> PolySystem:
    """``s`` dense polynomials with coefficients uniform in ``[-1, 1]``.

    Every polynomial has degree exactly ``D``; the homogeneous variant only
    keeps the top-degree monomials.
    """
    if not 1 <= s <= n:
        raise InputError(f"need 1 <= s <= n, got s={s}, n={n}")
    if D < 1:
        raise InputError("degree must be >= 1")
    exps = [e for e in np.ndindex(*([D + 1] * n)) if sum(e) <= D]
    if homogeneous:
        exps = [e for e in exps if sum(e) == D]
    polys = []
    for _ in range(s):
        while True:
            c = rng.uniform(-1.0, 1.0, len(exps))
            p = MultiPoly(n, tuple((float(ci), tuple(int(x) for x in e)) for ci, e in zip(c, exps)))
            if p.degree == D:
                break
        polys.append(p)
    return PolySystem(n, tuple(polys))
