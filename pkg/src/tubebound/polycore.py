"""Sparse multivariate polynomials with analytic first and second derivatives.

A :class:`MultiPoly` is an immutable list of ``(coefficient, exponents)``
terms kept in lexicographic order of the exponent vectors.  The fixed order
pins the floating point summation order, so evaluation is bit-reproducible.
A :class:`PolySystem` bundles ``f_1..f_s`` in ``n`` variables.

Two input formats are understood.  The text format::

    vars: 2
    x0^2 + x1^2 - 1

and an equivalent structured (JSON) document::

    {"n": 2, "polys": [[{"c": 1, "e": [2, 0]}, {"c": 1, "e": [0, 2]},
                        {"c": -1, "e": [0, 0]}]]}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import InputError, PolyParseError

__all__ = [
    "MultiPoly",
    "PolySystem",
    "evaluate",
    "gradient",
    "hessian",
    "parse_system",
    "parse_system_document",
    "serialize_system",
    "system_to_document",
    "load_system",
    "real_roots_batched",
]


def _power_table(X, max_exp):
    """List ``P`` with ``P[k][:, j] == X[:, j] ** k`` for ``k <= max_exp``."""
    table = [np.ones_like(X)]
    for _ in range(max_exp):
        table.append(table[-1] * X)
    return table


@dataclass(frozen=True)
class MultiPoly:
    """Real polynomial in ``n_vars`` variables stored as a sparse term list.

    Terms with equal exponent vectors are merged and zero coefficients
    dropped on construction, so two polynomials compare equal exactly when
    they have the same canonical term list.
    """

    n_vars: int
    terms: tuple = field(default=())

    def __post_init__(self):
        n = int(self.n_vars)
        if n < 1:
            raise InputError(f"n_vars must be >= 1, got {self.n_vars}")
        merged: dict[tuple, float] = {}
        for coeff, exps in self.terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise InputError(
                    f"exponent vector {exps} has length {len(exps)}, expected {n}")
            if any(e < 0 for e in exps):
                raise InputError(f"negative exponent in {exps}")
            c = float(coeff)
            if not np.isfinite(c):
                raise InputError(f"non-finite coefficient {coeff!r}")
            merged[exps] = merged.get(exps, 0.0) + c
        canon = tuple((c, e) for e, c in sorted(merged.items()) if c != 0.0)
        object.__setattr__(self, "n_vars", n)
        object.__setattr__(self, "terms", canon)

    @classmethod
    def constant(cls, n_vars, value):
        return cls(n_vars, ((value, (0,) * n_vars),))

    @classmethod
    def variable(cls, n_vars, j):
        exps = [0] * n_vars
        exps[j] = 1
        return cls(n_vars, ((1.0, tuple(exps)),))

    @property
    def degree(self):
        """Total degree; the zero polynomial is reported as degree 0."""
        return max((sum(e) for _, e in self.terms), default=0)

    @property
    def is_homogeneous(self):
        d = self.degree
        return all(sum(e) == d for _, e in self.terms)

    @property
    def is_zero(self):
        return not self.terms

    @cached_property
    def _coeffs(self):
        return np.array([c for c, _ in self.terms], dtype=float)

    @cached_property
    def _exps(self):
        if not self.terms:
            return np.zeros((0, self.n_vars), dtype=int)
        return np.array([e for _, e in self.terms], dtype=int)

    @cached_property
    def _max_exp(self):
        return int(self._exps.max()) if self.terms else 0

    def derivative(self, j):
        """Partial derivative with respect to variable ``j``."""
        if not 0 <= j < self.n_vars:
            raise InputError(f"variable index {j} out of range")
        out = []
        for c, e in self.terms:
            if e[j] > 0:
                de = list(e)
                de[j] -= 1
                out.append((c * e[j], tuple(de)))
        return MultiPoly(self.n_vars, tuple(out))

    @cached_property
    def partials(self):
        return tuple(self.derivative(j) for j in range(self.n_vars))

    @cached_property
    def second_partials(self):
        n = self.n_vars
        rows = [[None] * n for _ in range(n)]
        for j in range(n):
            for k in range(j, n):
                rows[j][k] = rows[k][j] = self.partials[j].derivative(k)
        return tuple(tuple(r) for r in rows)

    def _check_points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_vars:
            raise InputError(
                f"expected points of dimension {self.n_vars}, got array of shape {X.shape}")
        return X

    def _eval_table(self, table, n_points):
        acc = np.zeros(n_points)
        for c, e in self.terms:
            mono = np.full(n_points, c)
            for j, ej in enumerate(e):
                if ej:
                    mono = mono * table[ej][:, j]
            acc = acc + mono
        return acc

    def eval_many(self, X):
        """Evaluate at each row of ``X`` (shape ``(N, n_vars)``)."""
        X = self._check_points(X)
        return self._eval_table(_power_table(X, self._max_exp), X.shape[0])

    def grad_many(self, X):
        """Gradients at each row of ``X``, shape ``(N, n_vars)``."""
        X = self._check_points(X)
        table = _power_table(X, self._max_exp)
        N = X.shape[0]
        return np.stack([p._eval_table(table, N) for p in self.partials], axis=1)

    def hess_many(self, X):
        """Hessians at each row of ``X``, shape ``(N, n_vars, n_vars)``."""
        X = self._check_points(X)
        table = _power_table(X, self._max_exp)
        N, n = X.shape
        H = np.empty((N, n, n))
        for j in range(n):
            for k in range(j, n):
                H[:, j, k] = self.second_partials[j][k]._eval_table(table, N)
                H[:, k, j] = H[:, j, k]
        return H

    def __call__(self, x):
        return evaluate(self, x)

    def restrict_to_line(self, point, direction):
        """Coefficients (ascending) of ``t -> f(point + t * direction)``."""
        point = np.asarray(point, dtype=float)
        direction = np.asarray(direction, dtype=float)
        if point.shape != (self.n_vars,) or direction.shape != (self.n_vars,):
            raise InputError("line point/direction must match n_vars")
        out = np.zeros(self.degree + 1)
        for c, e in self.terms:
            term = np.array([c])
            for j, ej in enumerate(e):
                if ej:
                    term = npoly.polymul(term, npoly.polypow([point[j], direction[j]], ej))
            out[: len(term)] += term
        return out

    def restrict_to_lines(self, points, directions):
        """Row-wise :meth:`restrict_to_line` for ``(L, n)`` arrays of lines."""
        P = self._check_points(points)
        Dir = self._check_points(directions)
        L = P.shape[0]
        deg = self.degree
        out = np.zeros((L, deg + 1))
        # powers[j][k] = coefficients of (p_j + d_j t)^k, shape (L, k + 1)
        powers = []
        for j in range(self.n_vars):
            row = [np.ones((L, 1))]
            base = np.stack([P[:, j], Dir[:, j]], axis=1)
            for _ in range(self._max_exp):
                prev = row[-1]
                nxt = np.zeros((L, prev.shape[1] + 1))
                nxt[:, :-1] += prev * base[:, :1]
                nxt[:, 1:] += prev * base[:, 1:]
                row.append(nxt)
            powers.append(row)
        for c, e in self.terms:
            acc = np.full((L, 1), c)
            for j, ej in enumerate(e):
                if ej:
                    fac = powers[j][ej]
                    prod = np.zeros((L, acc.shape[1] + fac.shape[1] - 1))
                    for k in range(fac.shape[1]):
                        prod[:, k:k + acc.shape[1]] += acc * fac[:, k:k + 1]
                    acc = prod
            out[:, :acc.shape[1]] += acc
        return out

    def axis_line_coefficients(self, axis, X):
        """Coefficients in ``t`` of ``f`` along axis-parallel lines.

        Row ``r`` of the result holds the ascending coefficients of
        ``t -> f(X[r] with coordinate `axis` replaced by t)``.
        """
        X = self._check_points(X)
        table = _power_table(X, self._max_exp)
        N = X.shape[0]
        out = np.zeros((N, self._max_exp + 1))
        for c, e in self.terms:
            mono = np.full(N, c)
            for j, ej in enumerate(e):
                if ej and j != axis:
                    mono = mono * table[ej][:, j]
            out[:, e[axis]] += mono
        return out

    def abs_bound_on_box(self, half_widths):
        """Upper bound of ``|f|`` on the box ``|x_j| <= half_widths[j]``."""
        h = np.asarray(half_widths, dtype=float)
        total = 0.0
        for c, e in self.terms:
            total += abs(c) * float(np.prod(h ** np.asarray(e)))
        return total

    def to_text(self):
        if not self.terms:
            return "0"
        parts = []
        for k, (c, e) in enumerate(self.terms):
            factors = [repr(abs(c))]
            for j, ej in enumerate(e):
                if ej == 1:
                    factors.append(f"x{j}")
                elif ej > 1:
                    factors.append(f"x{j}^{ej}")
            body = "*".join(factors)
            if k == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append(("- " if c < 0 else "+ ") + body)
        return " ".join(parts)


def _as_point(poly, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != poly.n_vars:
        raise InputError(
            f"point has shape {x.shape}, expected ({poly.n_vars},)")
    return x[None, :]


def evaluate(poly: MultiPoly, x) -> float:
    """Value of ``poly`` at the point ``x``."""
    return float(poly.eval_many(_as_point(poly, x))[0])


def gradient(poly: MultiPoly, x) -> np.ndarray:
    """Analytic gradient of ``poly`` at ``x``."""
    return poly.grad_many(_as_point(poly, x))[0]


def hessian(poly: MultiPoly, x) -> np.ndarray:
    """Analytic Hessian of ``poly`` at ``x`` (symmetric by construction)."""
    return poly.hess_many(_as_point(poly, x))[0]


@dataclass(frozen=True)
class PolySystem:
    """The equations ``f_1 = ... = f_s = 0`` in ``n`` variables.

    Degree, codimension and the homogeneity flag are derived from the
    polynomials and cannot be set independently.
    """

    n: int
    polys: tuple

    def __post_init__(self):
        polys = tuple(self.polys)
        object.__setattr__(self, "polys", polys)
        n = int(self.n)
        object.__setattr__(self, "n", n)
        s = len(polys)
        if s < 1:
            raise InputError("a system needs at least one polynomial")
        if s > n:
            raise InputError(f"s={s} polynomials exceed n={n} variables")
        for i, p in enumerate(polys):
            if not isinstance(p, MultiPoly):
                raise InputError(f"polynomial {i} is not a MultiPoly")
            if p.n_vars != n:
                raise InputError(f"polynomial {i} has {p.n_vars} variables, expected {n}")
            if p.degree == 0:
                raise InputError(f"polynomial {i} is constant; degree-0 equations are rejected")

    @property
    def s(self):
        return len(self.polys)

    @property
    def m(self):
        return self.n - self.s

    @property
    def D(self):
        return max(p.degree for p in self.polys)

    @property
    def homogeneous(self):
        return all(p.is_homogeneous for p in self.polys)

    def values(self, X):
        """``(N, s)`` array of ``f_i`` at the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([p.eval_many(X) for p in self.polys], axis=1)

    def jacobian(self, X):
        """``(N, s, n)`` stack of gradient matrices."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([p.grad_many(X) for p in self.polys], axis=1)

    def hessians(self, X):
        """``(N, s, n, n)`` stack of Hessians."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([p.hess_many(X) for p in self.polys], axis=1)

    def gradient_bounds(self, half_widths):
        """Per-polynomial bound on ``|grad f_i|`` over a centered box."""
        out = []
        for p in self.polys:
            comps = [q.abs_bound_on_box(half_widths) for q in p.partials]
            out.append(float(np.sqrt(np.sum(np.square(comps)))))
        return np.array(out)

    def hessian_bounds(self, half_widths):
        """Per-polynomial Frobenius bound on the Hessian over a centered box."""
        out = []
        for p in self.polys:
            acc = 0.0
            for row in p.second_partials:
                for q in row:
                    acc += q.abs_bound_on_box(half_widths) ** 2
            out.append(float(np.sqrt(acc)))
        return np.array(out)

    def shifted(self, center):
        """The same system in coordinates centred at ``center`` (``y = x - center``)."""
        center = np.asarray(center, dtype=float)
        if np.all(center == 0):
            return self
        out = []
        for p in self.polys:
            acc: dict[tuple, float] = {}
            for c, e in p.terms:
                # expand prod (y_j + c_j)^e_j
                partial = {(0,) * self.n: c}
                for j, ej in enumerate(e):
                    if not ej:
                        continue
                    binom = npoly.polypow([center[j], 1.0], ej)
                    nxt: dict[tuple, float] = {}
                    for exps, val in partial.items():
                        for k, b in enumerate(binom):
                            if b == 0.0:
                                continue
                            ne = list(exps)
                            ne[j] += k
                            key = tuple(ne)
                            nxt[key] = nxt.get(key, 0.0) + val * b
                    partial = nxt
                for exps, val in partial.items():
                    acc[exps] = acc.get(exps, 0.0) + val
            out.append(MultiPoly(self.n, tuple((v, k) for k, v in acc.items())))
        return PolySystem(self.n, tuple(out))


def real_roots_batched(C, lo=-np.inf, hi=np.inf, imag_tol=1e-7):
    """Real roots of many univariate polynomials.

    ``C`` has shape ``(L, d + 1)`` with ascending coefficients.  Returns a
    list of ``L`` sorted arrays of real roots inside ``[lo, hi]``; roots are
    polished by a few Newton steps.  Polynomials that vanish identically
    yield an empty array.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    L, width = C.shape
    scale = np.max(np.abs(C), axis=1)
    significant = np.abs(C) > 1e-12 * scale[:, None]
    eff = np.where(significant.any(axis=1),
                   width - 1 - np.argmax(significant[:, ::-1], axis=1), 0)
    out = [np.zeros(0)] * L
    for d in range(1, width):
        rows = np.flatnonzero(eff == d)
        if rows.size == 0:
            continue
        c = C[rows, :d + 1]
        monic = c[:, :d] / c[:, d:d + 1]
        comp = np.zeros((rows.size, d, d))
        comp[:, 0, :] = -monic[:, ::-1]
        if d > 1:
            comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
        eig = np.linalg.eigvals(comp)
        real = np.abs(eig.imag) <= imag_tol * (1.0 + np.abs(eig.real))
        r = eig.real
        dc = c[:, 1:] * np.arange(1, d + 1)
        for _ in range(3):
            val = np.zeros_like(r)
            der = np.zeros_like(r)
            for k in range(d, -1, -1):
                val = val * r + c[:, k:k + 1]
            for k in range(d - 1, -1, -1):
                der = der * r + dc[:, k:k + 1]
            step = np.where(np.abs(der) > 0, val / np.where(der == 0, 1.0, der), 0.0)
            r = np.where(real, r - step, r)
        keep = real & (r >= lo) & (r <= hi)
        for a, row in enumerate(rows):
            out[row] = np.sort(r[a][keep[a]])
    return out


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x(?P<idx>\d+))
  | (?P<op>[-+*^])
    """,
    re.VERBOSE,
)


def _tokenize(text, lineno):
    pos = 0
    tokens = []
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if mt is None:
            raise PolyParseError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        kind = mt.lastgroup
        if kind != "ws":
            tokens.append((kind, mt.group(), pos + 1, mt))
        pos = mt.end()
    return tokens


def _parse_poly_line(text, n, lineno):
    tokens = _tokenize(text, lineno)
    if not tokens:
        raise PolyParseError("empty polynomial", lineno, 1)
    terms = []
    i = 0
    end_col = len(text) + 1

    def peek():
        return tokens[i] if i < len(tokens) else None

    first = True
    while i < len(tokens):
        sign = 1.0
        tok = peek()
        if tok[0] == "op" and tok[1] in "+-":
            sign = -1.0 if tok[1] == "-" else 1.0
            i += 1
        elif not first:
            raise PolyParseError(f"expected '+' or '-' before {tok[1]!r}", lineno, tok[2])
        first = False
        coeff = sign
        exps = [0] * n
        n_factors = 0
        while True:
            tok = peek()
            if tok is None:
                break
            kind, val, col, mt = tok
            if kind == "num":
                coeff *= float(val)
                i += 1
            elif kind == "var":
                j = int(mt.group("idx"))
                if j >= n:
                    raise PolyParseError(f"variable x{j} out of range for vars: {n}", lineno, col)
                i += 1
                power = 1
                nxt = peek()
                if nxt is not None and nxt[0] == "op" and nxt[1] == "^":
                    i += 1
                    ptok = peek()
                    if ptok is None:
                        raise PolyParseError("missing exponent after '^'", lineno, end_col)
                    if ptok[0] != "num" or not ptok[1].isdigit():
                        raise PolyParseError(
                            f"exponent must be a non-negative integer, got {ptok[1]!r}",
                            lineno, ptok[2])
                    power = int(ptok[1])
                    i += 1
                exps[j] += power
            else:
                raise PolyParseError(f"unexpected {val!r}", lineno, col)
            n_factors += 1
            nxt = peek()
            if nxt is None:
                break
            if nxt[0] == "op" and nxt[1] == "*":
                i += 1
                after = peek()
                if after is None or after[0] == "op":
                    col = after[2] if after is not None else end_col
                    raise PolyParseError("expected a factor after '*'", lineno, col)
                continue
            if nxt[0] == "op" and nxt[1] in "+-":
                break
            if nxt[0] == "op":
                raise PolyParseError(f"unexpected {nxt[1]!r}", lineno, nxt[2])
            # juxtaposition: implicit multiplication
        if n_factors == 0:
            tok = peek()
            col = tok[2] if tok is not None else end_col
            raise PolyParseError("expected a term", lineno, col)
        terms.append((coeff, tuple(exps)))
    return MultiPoly(n, tuple(terms))


_HEADER = re.compile(r"^\s*vars\s*:\s*(\d+)\s*$")


def parse_system(text: str) -> PolySystem:
    """Parse the line-oriented text format into a validated system.

    Blank lines and lines starting with ``#`` are ignored.  A document whose
    first non-blank character is ``{`` is treated as the structured format.
    """
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PolyParseError(exc.msg, exc.lineno, exc.colno) from None
        return parse_system_document(doc)
    lines = text.splitlines()
    n = None
    polys = []
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if n is None:
            mt = _HEADER.match(raw)
            if mt is None:
                raise PolyParseError("first line must be 'vars: <n>'", lineno, 1)
            n = int(mt.group(1))
            if n < 1:
                raise PolyParseError("vars must be >= 1", lineno, raw.index(mt.group(1)) + 1)
            continue
        poly = _parse_poly_line(raw, n, lineno)
        if poly.degree == 0:
            raise PolyParseError("constant polynomial (degree 0) is not an equation", lineno, 1)
        polys.append(poly)
    if n is None:
        raise PolyParseError("missing 'vars: <n>' header", 1, 1)
    if not polys:
        raise PolyParseError("no polynomials given", len(lines) or 1, 1)
    if len(polys) > n:
        raise InputError(f"s={len(polys)} polynomials exceed n={n} variables")
    return PolySystem(n, tuple(polys))


def parse_system_document(doc) -> PolySystem:
    """Build a system from the structured ``{n, polys: [[{c, e}...]...]}`` form."""
    if not isinstance(doc, dict) or "n" not in doc or "polys" not in doc:
        raise InputError("structured system needs fields 'n' and 'polys'")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError(f"'n' must be a positive integer, got {n!r}")
    polys = []
    for i, terms in enumerate(doc["polys"]):
        if not isinstance(terms, list):
            raise InputError(f"polys[{i}] must be a list of terms")
        parsed = []
        for k, term in enumerate(terms):
            try:
                c, e = term["c"], term["e"]
            except (TypeError, KeyError):
                raise InputError(f"polys[{i}][{k}] must have fields 'c' and 'e'") from None
            if not isinstance(e, list) or any(
                    not isinstance(v, int) or isinstance(v, bool) for v in e):
                raise InputError(f"polys[{i}][{k}].e must be a list of naturals")
            parsed.append((c, tuple(e)))
        polys.append(MultiPoly(n, tuple(parsed)))
    if len(polys) > n:
        raise InputError(f"s={len(polys)} polynomials exceed n={n} variables")
    return PolySystem(n, tuple(polys))


def serialize_system(system: PolySystem) -> str:
    """Text form that :func:`parse_system` reads back exactly."""
    lines = [f"vars: {system.n}"]
    lines.extend(p.to_text() for p in system.polys)
    return "\n".join(lines) + "\n"


def system_to_document(system: PolySystem) -> dict:
    return {
        "n": system.n,
        "polys": [[{"c": c, "e": list(e)} for c, e in p.terms] for p in system.polys],
    }


def load_system(source) -> PolySystem:
    """Load a system from a path, inline text or a structured mapping.

    Inline text may use ``;`` in place of newlines, e.g.
    ``"vars: 2; x0^2 + x1^2 - 1"``.
    """
    if isinstance(source, PolySystem):
        return source
    if isinstance(source, dict):
        return parse_system_document(source)
    if isinstance(source, Path):
        return parse_system(source.read_text(encoding="utf-8"))
    text = str(source)
    stripped = text.lstrip()
    if stripped.startswith("vars") or stripped.startswith("{"):
        if not stripped.startswith("{"):
            text = text.replace(";", "\n")
        return parse_system(text)
    path = Path(text)
    if not path.exists():
        raise InputError(f"system file not found: {text}")
    return parse_system(path.read_text(encoding="utf-8"))


def polys_from_strings(n: int, lines: Iterable[str]) -> PolySystem:
    """Convenience constructor: ``polys_from_strings(2, ["x0^2 + x1^2 - 1"])``."""
    return parse_system("vars: %d\n%s" % (n, "\n".join(lines)))


def system_from_terms(n: int, polys: Sequence[Sequence[tuple]]) -> PolySystem:
    return PolySystem(n, tuple(MultiPoly(n, tuple(t)) for t in polys))
