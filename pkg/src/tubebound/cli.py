"""``tubebound`` command line.

Exit status: 0 success, 2 invalid input, 3 hypothesis warnings under
``--strict``, 4 numerical failure.  Errors are also written into the
report's ``warnings`` so a failed run still leaves a parseable report.
"""

from __future__ import annotations

import argparse
import math
import sys as _sys

import numpy as np

from . import __version__
from .bounds import (
    bezout_gauss_degree,
    bezout_section_degrees,
    bound_affine,
    bound_degree_tube,
    bound_homogeneous,
)
from .curvature import (
    crofton_check,
    curvature_integrals,
    gauss_degree_empirical,
    sample_manifold,
    tube_upper_bound_from_K,
    tube_volume_quadrature,
)
from .errors import InputError, NumericError, UnsupportedError
from .montecarlo import compare_bound, default_threads, estimate_probability_grid, hypothesis_warnings
from .polycore import load_system, serialize_system
from .reference import (
    ReferenceManifold,
    sphere_abs_curvature_K,
    sphere_curvature_K,
    sphere_tube_valid,
    sphere_tube_volume,
)
from .report import make_report, render

__all__ = ["main", "build_parser", "run"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STRICT = 3
EXIT_NUMERIC = 4


# ------------------------------------------------------------------ argument helpers

def _floats(text):
    parts = text.replace(",", " ").split()
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _level(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("confidence level must lie in (0, 1)")
    return v


def _add_common(p, system=True, sigma=True, eps=True, mc=False):
    if system:
        p.add_argument("--system", help="polynomial file (text or JSON) or inline text with ';' between lines")
    p.add_argument("--center", type=_floats, help="ball centre, comma separated (default: origin)")
    if sigma:
        p.add_argument("--sigma", type=_positive, default=1.0, help="ball radius (default 1)")
    if eps:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--eps", type=_positive, help="tube radius")
        g.add_argument("--eps-grid", nargs=3, metavar=("START", "STOP", "COUNT"),
                       help="geometric grid of tube radii")
    if mc:
        p.add_argument("--samples", type=_count, default=100_000)
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--ci-level", type=_level, default=0.99)
        p.add_argument("--chunk-size", type=_count, default=65536)
    p.add_argument("--threads", type=_count, default=None,
                   help="worker cap (default from TUBEBOUND_THREADS, else 1); never changes results")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--strict", action="store_true",
                   help="exit with status 3 when hypothesis warnings are raised")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tubebound",
        description="Bounds and numerical checks for the probability of landing near a real algebraic variety.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="closed-form probability bounds")
    _add_common(p)
    p.add_argument("--dims", nargs=3, type=int, metavar=("N", "S", "D"),
                   help="evaluate for n, s, D directly instead of reading a system")

    p = sub.add_parser("estimate", help="Monte Carlo probability estimate")
    _add_common(p, mc=True)

    p = sub.add_parser("compare", help="Monte Carlo estimate against the bounds")
    _add_common(p, mc=True)

    p = sub.add_parser("curvature", help="curvature integrals and tube volumes by quadrature")
    _add_common(p, sigma=False)
    p.add_argument("--sphere", nargs=2, type=int, metavar=("M", "N"),
                   help="use the unit sphere S^M in R^N instead of a system")
    p.add_argument("--radius", type=_positive, default=1.0, help="sphere radius")
    p.add_argument("--half-width", type=_positive, default=2.0,
                   help="half-width of the search box around --center for implicit systems")
    p.add_argument("--level", type=_count, default=64, help="sphere refinement level")
    p.add_argument("--nodes", type=_count, help="node count for implicit curves")
    p.add_argument("--resolution", type=_count, help="grid resolution for seeds or surface charts")
    p.add_argument("--normal-nodes", type=_count, default=64)
    p.add_argument("--t-nodes", type=_count, default=8)
    p.add_argument("--directions", type=_count, default=64, help="directions for the Gauss-degree sweep")
    p.add_argument("--seed", type=_seed, default=0)

    p = sub.add_parser("crofton", help="Cauchy-Crofton check for a closed plane curve")
    _add_common(p, sigma=False, eps=False)
    p.add_argument("--flats", type=_count, default=100_000, help="number of random lines")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--radius", type=_positive, help="lines are drawn through B(0, radius)")
    p.add_argument("--half-width", type=_positive, default=2.0)
    p.add_argument("--ci-level", type=_level, default=0.99)

    p = sub.add_parser("reference", help="closed forms for round spheres")
    _add_common(p, system=False, sigma=False)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--sphere", nargs=2, type=int, metavar=("M", "N"))
    g.add_argument("--point-pair", type=int, metavar="N")
    g.add_argument("--circle-in-r3", action="store_true")
    p.add_argument("--radius", type=_positive, default=1.0)

    p = sub.add_parser("report", help="bounds, Monte Carlo and (when available) curvature in one report")
    _add_common(p, mc=True)
    p.add_argument("--normal-nodes", type=_count, default=64)
    return parser


# ------------------------------------------------------------------ pipelines

def _eps_values(args, required=True):
    if getattr(args, "eps_grid", None):
        start, stop, count = args.eps_grid
        try:
            start, stop, count = float(start), float(stop), int(count)
        except ValueError:
            raise InputError("--eps-grid needs START STOP COUNT") from None
        if count < 1 or not (start > 0 and stop > 0):
            raise InputError("--eps-grid needs positive START, STOP and COUNT >= 1")
        if count == 1:
            return [start]
        return [float(v) for v in np.geomspace(start, stop, count)]
    if getattr(args, "eps", None) is not None:
        return [float(args.eps)]
    if required:
        raise InputError("give --eps or --eps-grid")
    return []


def _system(args):
    if not getattr(args, "system", None):
        raise InputError("--system is required")
    return load_system(args.system)


def _center(args, n):
    c = args.center if args.center is not None else [0.0] * n
    if len(c) != n:
        raise InputError(f"--center needs {n} values, got {len(c)}")
    return np.asarray(c, dtype=float)


def _threads(args):
    return args.threads if args.threads is not None else default_threads()


def _hypothesis(sys, center, radius):
    if sys.n > 6:
        return [f"complete-intersection check skipped for n={sys.n} > 6"]
    grid = max(3, min(9, int(20000 ** (1.0 / sys.n))))
    return hypothesis_warnings(sys, center, radius, grid=grid)


def _bound_records(n, s, D, eps_list, sigma, homogeneous_ok):
    out = []
    for e in eps_list:
        rec = {"epsilon": e, "affine": bound_affine(n, s, D, e, sigma).to_dict()}
        rec["homogeneous"] = bound_homogeneous(n, s, D, e, sigma).to_dict() if homogeneous_ok else None
        try:
            mdegs = bezout_section_degrees(n, s, D)
            rec["degree_tube"] = bound_degree_tube(n, s, sigma + e, e, mdegs).to_dict()
        except OverflowError:
            pass
        out.append(rec)
    return out


def cmd_bound(args, warnings, hyp):
    eps = _eps_values(args)
    if args.dims:
        n, s, D = args.dims
        center = _center(args, n)
        homog_ok = False
        warnings.append("no system given: the homogeneous bound needs a system to check homogeneity")
    else:
        sys = _system(args)
        n, s, D = sys.n, sys.s, sys.D
        center = _center(args, n)
        homog_ok = sys.homogeneous and bool(np.all(center == 0))
        if sys.homogeneous and not homog_ok:
            warnings.append("system is homogeneous but the centre is not the origin; "
                            "only the affine bound applies")
        hyp.extend(_hypothesis(sys, center, args.sigma + max(eps)))
    config = {"n": n, "s": s, "D": D, "sigma": args.sigma, "epsilons": eps,
              "center": center.tolist()}
    return config, _bound_records(n, s, D, eps, args.sigma, homog_ok)


def _mc_config(args, sys, center, eps):
    return {"system": sys_text(sys), "n": sys.n, "s": sys.s, "D": sys.D,
            "homogeneous": sys.homogeneous, "center": center.tolist(), "sigma": args.sigma,
            "epsilons": eps, "samples": args.samples, "seed": args.seed,
            "ci_level": args.ci_level, "chunk_size": args.chunk_size}


def sys_text(sys):
    return serialize_system(sys)


def cmd_estimate(args, warnings, hyp):
    sys = _system(args)
    eps = _eps_values(args)
    center = _center(args, sys.n)
    hyp.extend(_hypothesis(sys, center, args.sigma + max(eps)))
    ests = estimate_probability_grid(sys, center, args.sigma, eps, args.samples, args.seed,
                                     args.ci_level, args.chunk_size, _threads(args))
    if ests and ests[0].nonconverged:
        warnings.append(f"{ests[0].nonconverged} samples did not converge and were counted as hits")
    return _mc_config(args, sys, center, eps), [{"epsilon": e.epsilon, "estimate": e.to_dict()}
                                                for e in ests]


def cmd_compare(args, warnings, hyp):
    sys = _system(args)
    eps = _eps_values(args)
    center = _center(args, sys.n)
    hyp.extend(_hypothesis(sys, center, args.sigma + max(eps)))
    comps = compare_bound(sys, center, args.sigma, eps, args.samples, args.seed, args.ci_level,
                          args.chunk_size, _threads(args))
    records = []
    for c in comps:
        d = c.to_dict()
        for w in d.pop("warnings"):
            if w not in warnings and w not in hyp:
                warnings.append(w)
        records.append({"epsilon": c.estimate.epsilon, "comparison": d})
    return _mc_config(args, sys, center, eps), records


def _curvature_pipeline(patch, eps, normal_nodes, t_nodes, directions, seed):
    rep = curvature_integrals(patch, normal_nodes)
    try:
        gdeg = gauss_degree_empirical(patch, directions, seed, normal_nodes)
    except UnsupportedError:
        gdeg = None
    try:
        bez = bezout_gauss_degree(patch.n, patch.system.D)
    except OverflowError:
        bez = None
    tubes = tube_volume_quadrature(patch, eps, normal_nodes, t_nodes) if eps else []
    records = []
    for k, e in enumerate(eps or [None]):
        rec = {"epsilon": e, "curvature": rep.to_dict(), "gauss_degree_empirical": gdeg,
               "bezout_gauss_degree": bez}
        if e is not None:
            rec["tube_volume_quadrature"] = float(tubes[k])
            rec["tube_upper_bound"] = tube_upper_bound_from_K(rep, patch.s, e)
        records.append(rec)
    return records


def _patch_for(args, sys, center):
    h = args.half_width
    box = (center - h, center + h)
    return sample_manifold(sys, nodes=getattr(args, "nodes", None), box=box,
                           resolution=getattr(args, "resolution", None))


def cmd_curvature(args, warnings, hyp):
    eps = _eps_values(args, required=False)
    if args.sphere:
        m, n = args.sphere
        ref = ReferenceManifold.sphere(m, n, args.radius)
        patch = sample_manifold(ref, level=args.level)
        config = {"sphere": [m, n], "radius": args.radius, "level": args.level}
    else:
        sys = _system(args)
        center = _center(args, sys.n)
        patch = _patch_for(args, sys, center)
        config = {"system": sys_text(sys), "center": center.tolist(),
                  "half_width": args.half_width, "nodes": args.nodes,
                  "resolution": args.resolution}
    config.update({"epsilons": eps, "normal_nodes": args.normal_nodes, "t_nodes": args.t_nodes,
                   "directions": args.directions, "seed": args.seed})
    warnings.extend(patch.warnings)
    if patch.size == 0:
        warnings.append("no sample points were found on the variety")
    return config, _curvature_pipeline(patch, eps, args.normal_nodes, args.t_nodes,
                                       args.directions, args.seed)


def cmd_crofton(args, warnings, hyp):
    sys = _system(args)
    center = _center(args, sys.n)
    patch = _patch_for(args, sys, center)
    warnings.extend(patch.warnings)
    res = crofton_check(patch, 0, args.flats, args.seed, args.radius, args.ci_level)
    config = {"system": sys_text(sys), "flats": args.flats, "seed": args.seed,
              "radius": res.radius, "ci_level": args.ci_level}
    return config, [{"crofton": res.to_dict()}]


def cmd_reference(args, warnings, hyp):
    if args.sphere:
        ref = ReferenceManifold.sphere(args.sphere[0], args.sphere[1], args.radius)
    elif args.point_pair is not None:
        ref = ReferenceManifold.point_pair(args.point_pair, args.radius)
    else:
        ref = ReferenceManifold.circle_in_R3(args.radius)
    eps = _eps_values(args, required=False)
    m, n, r = ref.m, ref.n, ref.radius
    signed = [sphere_curvature_K(m, n, i, r) if i % 2 == 0 else None for i in range(m + 1)]
    absolute = [sphere_abs_curvature_K(m, n, i, r) for i in range(m + 1)]
    if m >= 1:
        warnings.append("signed_K is null for odd i: those invariants are not defined by the closed form")
    records = []
    for e in eps or [None]:
        d = {"kind": ref.kind, "m": m, "n": n, "radius": r, "signed_K": signed,
             "absolute_K": absolute}
        if e is not None:
            d["tube_volume"] = sphere_tube_volume(m, n, e, r)
            d["valid"] = sphere_tube_valid(e, r)
            if not d["valid"]:
                warnings.append(f"eps={e} is not below the radius; the tube formula is not exact there")
        records.append({"epsilon": e, "reference": d})
    return {"kind": ref.kind, "m": m, "n": n, "radius": r, "epsilons": eps}, records


def cmd_report(args, warnings, hyp):
    sys = _system(args)
    eps = _eps_values(args)
    center = _center(args, sys.n)
    hyp.extend(_hypothesis(sys, center, args.sigma + max(eps)))
    comps = compare_bound(sys, center, args.sigma, eps, args.samples, args.seed, args.ci_level,
                          args.chunk_size, _threads(args))
    homog_ok = sys.homogeneous and bool(np.all(center == 0))
    records = _bound_records(sys.n, sys.s, sys.D, eps, args.sigma, homog_ok)
    for rec, c in zip(records, comps):
        d = c.to_dict()
        for w in d.pop("warnings"):
            if w not in warnings and w not in hyp:
                warnings.append(w)
        rec["comparison"] = d
    curv_ok = (sys.m == 1 and sys.n in (2, 3)) or (sys.m == 2 and sys.n == 3) or sys.m == 0
    if curv_ok and sys.s <= 2 and sys.n <= 3:
        try:
            patch = sample_manifold(sys, box=(center - args.sigma, center + args.sigma))
            warnings.extend(patch.warnings)
            if patch.size:
                extra = _curvature_pipeline(patch, eps, args.normal_nodes, 8, 64, args.seed)
                for rec, more in zip(records, extra):
                    for key in ("curvature", "tube_volume_quadrature", "tube_upper_bound",
                                "gauss_degree_empirical", "bezout_gauss_degree"):
                        rec[key] = more[key]
        except (NumericError, UnsupportedError) as exc:
            warnings.append(f"curvature quadrature skipped: {exc}")
    config = _mc_config(args, sys, center, eps)
    return config, records


COMMANDS = {
    "bound": cmd_bound,
    "estimate": cmd_estimate,
    "compare": cmd_compare,
    "curvature": cmd_curvature,
    "crofton": cmd_crofton,
    "reference": cmd_reference,
    "report": cmd_report,
}


def run(args):
    """Execute parsed arguments; returns ``(report, exit_status)``."""
    warnings, hyp = [], []
    status = EXIT_OK
    config, results = {}, []
    try:
        config, results = COMMANDS[args.command](args, warnings, hyp)
    except (InputError, UnsupportedError, OverflowError) as exc:
        warnings.append(f"error: {exc}")
        status = EXIT_INPUT
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        warnings.append(f"numeric failure: {exc}")
        status = EXIT_NUMERIC
    warnings = hyp + warnings
    if status == EXIT_OK and hyp and args.strict:
        status = EXIT_STRICT
    return make_report(args.command, config, results, warnings), status


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    report, status = run(args)
    try:
        text = render(report, args.format)
    except ValueError as exc:
        print(f"tubebound: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)
    for w in report["warnings"]:
        if w.startswith(("error:", "numeric failure:")):
            print(f"tubebound: {w}", file=_sys.stderr)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
