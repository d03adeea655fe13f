"""Twisted cohomology of simplicial complexes with rank-1 local systems.

An edge cocycle ``theta`` gives weights ``rho_e = exp(-theta_e)`` and the
twisted coboundary

    (d_rho c)(v0 .. v_{k+1}) = rho_{v0 v1} c(v1 .. v_{k+1})
                               + sum_{i>=1} (-1)^i c(v0 .. ^vi .. v_{k+1}).

Edge values come in three exact-friendly kinds:

* ``LogRational(r)``: ``theta = ln r`` with ``r`` a positive rational, so
  ``rho = 1/r`` is rational;
* ``Fraction``: ``theta`` itself rational.  ``exp(-theta)`` is then a power of
  the transcendental ``x = e^{1/N}``, so ranks equal generic ranks over
  ``Q(x)`` and are computed exactly at seeded random rational points;
* ``float``: double precision with an SVD rank.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .report import BettiReport

Simplex = Tuple[int, ...]
Edge = Tuple[int, int]

FLOAT_TOL = 1e-12
# number of independent evaluation points for formal-exponential ranks
GENERIC_TRIALS = 3


class CocycleError(ValueError):
    """The edge cochain is not closed."""


@dataclass(frozen=True, order=True)
class LogRational:
    """The edge value ``ln(ratio)`` for a positive rational ``ratio``."""

    ratio: Fraction

    def __post_init__(self):
        r = Fraction(self.ratio)
        if r <= 0:
            raise ValueError(f"log argument must be positive, got {r}")
        object.__setattr__(self, "ratio", r)

    def __neg__(self) -> "LogRational":
        return LogRational(1 / self.ratio)

    def __float__(self) -> float:
        return math.log(self.ratio.numerator) - math.log(self.ratio.denominator)

    def __str__(self) -> str:
        return f"log:{self.ratio}"


EdgeValue = Union[float, Fraction, LogRational]


def parse_value(token: str) -> EdgeValue:
    """Inverse of :func:`format_value`."""
    token = token.strip()
    if token.startswith("log:"):
        return LogRational(Fraction(token[4:]))
    if "/" in token or token.lstrip("-").isdigit():
        return Fraction(token)
    return float(token)


def format_value(v: EdgeValue) -> str:
    if isinstance(v, LogRational):
        return str(v)
    if isinstance(v, Fraction):
        return str(v)
    return repr(float(v))


@dataclass(frozen=True)
class SimplicialComplex:
    """Finite abstract simplicial complex with faces oriented by vertex order."""

    n_vertices: int
    facets: Tuple[Simplex, ...]

    @cached_property
    def faces(self) -> Tuple[Tuple[Simplex, ...], ...]:
        dim = max(len(f) for f in self.facets) - 1
        levels: List[set] = [set() for _ in range(dim + 1)]
        for f in self.facets:
            for k in range(1, len(f) + 1):
                levels[k - 1].update(combinations(f, k))
        return tuple(tuple(sorted(s)) for s in levels)

    @cached_property
    def _index(self) -> Tuple[Dict[Simplex, int], ...]:
        return tuple({s: i for i, s in enumerate(level)} for level in self.faces)

    @property
    def dim(self) -> int:
        return len(self.faces) - 1

    @property
    def f_vector(self) -> Tuple[int, ...]:
        return tuple(len(level) for level in self.faces)

    @property
    def euler_characteristic(self) -> int:
        return sum((-1) ** k * n for k, n in enumerate(self.f_vector))

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return self.faces[1] if self.dim >= 1 else ()

    @property
    def triangles(self) -> Tuple[Simplex, ...]:
        return self.faces[2] if self.dim >= 2 else ()

    def index(self, simplex: Sequence[int]) -> int:
        s = tuple(simplex)
        return self._index[len(s) - 1][s]

    def to_text(self) -> str:
        return "".join(" ".join(map(str, f)) + "\n" for f in self.facets)


def build_complex(facets: Iterable[Sequence[int]], n_vertices: Optional[int] = None) -> SimplicialComplex:
    """Validate maximal simplices and close them under faces.

    Facets keep their input order (for a bit-exact file round trip) but each
    is stored sorted.  Vertices must be ``0 .. n-1`` with no gaps.
    """
    out: List[Simplex] = []
    seen = set()
    for raw in facets:
        f = tuple(int(v) for v in raw)
        if not f:
            raise ValueError("empty facet")
        if len(set(f)) != len(f):
            raise ValueError(f"facet {f} repeats a vertex")
        if min(f) < 0:
            raise ValueError(f"facet {f} has a negative vertex index")
        s = tuple(sorted(f))
        if s in seen:
            raise ValueError(f"duplicate facet {s}")
        seen.add(s)
        out.append(s)
    if not out:
        raise ValueError("no facets given")
    used = sorted({v for f in out for v in f})
    n = used[-1] + 1 if n_vertices is None else n_vertices
    if used != list(range(n)):
        raise ValueError(f"vertex indices must be exactly 0..{n - 1}")
    return SimplicialComplex(n, tuple(out))


def parse_complex(text: str) -> SimplicialComplex:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    return build_complex([ln.split() for ln in lines if ln])


def load_complex(path) -> SimplicialComplex:
    return parse_complex(Path(path).read_text())


def save_complex(cx: SimplicialComplex, path) -> Path:
    path = Path(path)
    path.write_text(cx.to_text())
    return path


# ---------------------------------------------------------------- bundled data

_DATA = "data"


def _data_dir():
    return resources.files("twistcoh").joinpath(_DATA)


def bundled_names() -> List[str]:
    manifest = json.loads(_data_dir().joinpath("checksums.json").read_text())
    return sorted(manifest)


def bundled_complex(name: str) -> SimplicialComplex:
    """Load a shipped triangulation after verifying its SHA-256 checksum."""
    manifest = json.loads(_data_dir().joinpath("checksums.json").read_text())
    if name not in manifest:
        raise KeyError(f"unknown bundled complex {name!r}; have {sorted(manifest)}")
    text = _data_dir().joinpath(f"{name}.txt").read_text()
    digest = hashlib.sha256(text.encode()).hexdigest()
    if digest != manifest[name]:
        raise ValueError(f"checksum mismatch for bundled complex {name!r}")
    return parse_complex(text)


# ------------------------------------------------------------------- cocycles


@dataclass(frozen=True)
class EdgeCocycle:
    """Edge values on positively oriented edges ``(a, b)`` with ``a < b``."""

    values: Mapping[Edge, EdgeValue]

    def __post_init__(self):
        vals = {}
        for (a, b), v in dict(self.values).items():
            if a == b:
                raise ValueError("degenerate edge")
            if a > b:
                a, b, v = b, a, -v
            vals[(a, b)] = v
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, cx: SimplicialComplex) -> "EdgeCocycle":
        return cls({e: LogRational(Fraction(1)) for e in cx.edges})

    def value(self, a: int, b: int) -> EdgeValue:
        if a < b:
            return self.values[(a, b)]
        return -self.values[(b, a)]

    @property
    def kind(self) -> str:
        kinds = {type(v) for v in self.values.values()}
        if float in kinds or not kinds <= {Fraction, LogRational}:
            return "float"
        return "exact"

    def to_text(self) -> str:
        return "".join(f"{a} {b} {format_value(v)}\n" for (a, b), v in sorted(self.values.items()))


def parse_cocycle(text: str) -> EdgeCocycle:
    vals = {}
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        a, b, tok = ln.split()
        vals[(int(a), int(b))] = parse_value(tok)
    return EdgeCocycle(vals)


def load_cocycle(path) -> EdgeCocycle:
    return parse_cocycle(Path(path).read_text())


def _split(v: EdgeValue) -> Tuple[Fraction, Fraction, float]:
    """``theta = additive + ln(ratio)``; also the float value."""
    if isinstance(v, LogRational):
        return Fraction(0), v.ratio, float(v)
    if isinstance(v, Fraction):
        return v, Fraction(1), float(v)
    return Fraction(0), Fraction(1), float(v)


def cocycle_check(cx: SimplicialComplex, theta: EdgeCocycle) -> None:
    """Raise :class:`CocycleError` at the first triangle where ``theta`` is not closed."""
    missing = [e for e in cx.edges if e not in theta.values]
    if missing:
        raise ValueError(f"cocycle has no value on edge {missing[0]}")
    exact = theta.kind == "exact"
    for a, b, c in cx.triangles:
        vs = (theta.value(a, b), theta.value(b, c), theta.value(a, c))
        if exact:
            parts = [_split(v) for v in vs]
            add = parts[0][0] + parts[1][0] - parts[2][0]
            mult = parts[0][1] * parts[1][1] / parts[2][1]
            ok = add == 0 and mult == 1
            resid = abs(float(add) + math.log(mult)) if not ok else 0.0
        else:
            resid = abs(float(vs[0]) + float(vs[1]) - float(vs[2]))
            ok = resid <= FLOAT_TOL
        if not ok:
            raise CocycleError(f"cocycle not closed on triangle {(a, b, c)}: residual {resid:.3e}")


def vertex_gauge(theta: EdgeCocycle, p: Mapping[int, EdgeValue]) -> EdgeCocycle:
    """``theta'_{ab} = theta_{ab} + p(b) - p(a)``.

    Exact inputs stay exact when ``p`` has the same kinds as the edge values.
    """
    out = {}
    for (a, b), v in theta.values.items():
        out[(a, b)] = _add(_add(v, p.get(b, 0)), _neg(p.get(a, 0)))
    return EdgeCocycle(out)


def _neg(v):
    return -v if not isinstance(v, int) else Fraction(-v)


def _add(u: EdgeValue, v: EdgeValue) -> EdgeValue:
    if isinstance(u, int):
        u = Fraction(u)
    if isinstance(v, int):
        v = Fraction(v)
    if isinstance(u, float) or isinstance(v, float):
        return float(u) + float(v)
    if isinstance(u, LogRational) and isinstance(v, LogRational):
        return LogRational(u.ratio * v.ratio)
    if isinstance(u, Fraction) and isinstance(v, Fraction):
        return u + v
    if isinstance(u, LogRational) and v == 0:
        return u
    if isinstance(v, LogRational) and u == 0:
        return v
    raise TypeError("mixing additive-rational and log-rational values needs float mode")


def potential_cocycle(cx: SimplicialComplex, p: Mapping[int, EdgeValue]) -> EdgeCocycle:
    """Coboundary of a vertex potential."""
    zero = {e: (LogRational(Fraction(1)) if isinstance(next(iter(p.values()), 0), LogRational) else Fraction(0))
            for e in cx.edges}
    return vertex_gauge(EdgeCocycle(zero), p)


# ---------------------------------------------------------------- coboundary


@dataclass(frozen=True)
class LocalSystem:
    """Edge weights realised in one scalar field.

    ``weights[(a, b)]`` is ``rho_{ab}`` for ``a < b``.  In exact mode weights
    are ``Fraction`` values obtained by sending the formal exponential
    ``x = e^{1/N}`` to the rational ``point``.
    """

    weights: Mapping[Edge, Union[Fraction, float]]
    exact: bool
    point: Optional[Fraction] = None

    def rho(self, a: int, b: int):
        if a < b:
            return self.weights[(a, b)]
        return 1 / self.weights[(b, a)]


def _common_denominator(theta: EdgeCocycle) -> int:
    n = 1
    for v in theta.values.values():
        if isinstance(v, Fraction):
            n = math.lcm(n, v.denominator)
    return n


def is_formal(theta: EdgeCocycle) -> bool:
    """True when some edge carries a nonzero rational (not logarithmic) value."""
    return any(isinstance(v, Fraction) and v != 0 for v in theta.values.values())


def local_system(theta: EdgeCocycle, point: Optional[Fraction] = None) -> LocalSystem:
    if theta.kind == "float":
        return LocalSystem({e: math.exp(-float(v)) for e, v in theta.values.items()}, exact=False)
    n = _common_denominator(theta)
    x = Fraction(point) if point is not None else Fraction(1)
    w = {}
    for e, v in theta.values.items():
        add, ratio, _ = _split(v)
        # exp(-add) = x^(-add*N) with x standing for e^(1/N)
        power = -add * n
        assert power.denominator == 1
        w[e] = (x ** int(power)) / ratio
    return LocalSystem(w, exact=True, point=x if is_formal(theta) else None)


def twisted_coboundary(cx: SimplicialComplex, ls: LocalSystem, k: int):
    """Matrix of ``d_rho: C^k -> C^{k+1}`` as a dict-of-rows (exact) or dense array (float)."""
    if not 0 <= k < cx.dim:
        raise ValueError(f"degree {k} outside 0..{cx.dim - 1}")
    rows: Dict[int, Dict[int, object]] = {}
    for r, s in enumerate(cx.faces[k + 1]):
        row: Dict[int, object] = {}
        row[cx.index(s[1:])] = ls.rho(s[0], s[1])
        for i in range(1, len(s)):
            col = cx.index(s[:i] + s[i + 1:])
            row[col] = row.get(col, 0) + (-1) ** i
        rows[r] = {c: v for c, v in row.items() if v != 0}
    shape = (len(cx.faces[k + 1]), len(cx.faces[k]))
    if ls.exact:
        return DomainMatrix({r: {c: QQ(v) for c, v in row.items()} for r, row in rows.items()}, shape, QQ)
    dense = np.zeros(shape)
    for r, row in rows.items():
        for c, v in row.items():
            dense[r, c] = float(v)
    return dense


def _rank(mat, tol: float) -> int:
    if isinstance(mat, DomainMatrix):
        return int(mat.rank()) if min(mat.shape) else 0
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol * max(float(s[0]), 1.0)))


def _is_zero(mat) -> Tuple[bool, float]:
    if isinstance(mat, DomainMatrix):
        return mat.is_zero_matrix, 0.0
    r = float(np.max(np.abs(mat))) if mat.size else 0.0
    return r <= 1e-13, r


def _evaluation_points(seed: int, trials: int) -> List[Fraction]:
    rng = np.random.default_rng(seed)
    return [Fraction(int(rng.integers(2, 10 ** 6)), int(rng.integers(1, 10 ** 6))) for _ in range(trials)]


def coboundary_square_residuals(cx: SimplicialComplex, theta: EdgeCocycle, seed: int = 0):
    """``d_rho^{k+1} d_rho^k`` for each ``k``; exact zero test in exact mode."""
    cocycle_check(cx, theta)
    points = _evaluation_points(seed, GENERIC_TRIALS) if is_formal(theta) else [None]
    out = {}
    for x in points:
        ls = local_system(theta, x)
        for k in range(cx.dim - 1):
            prod = twisted_coboundary(cx, ls, k + 1) * twisted_coboundary(cx, ls, k) if ls.exact else \
                twisted_coboundary(cx, ls, k + 1) @ twisted_coboundary(cx, ls, k)
            zero, resid = _is_zero(prod)
            prev = out.get(k, (True, 0.0))
            out[k] = (prev[0] and zero, max(prev[1], resid))
    return out


def twisted_betti(cx: SimplicialComplex, theta: EdgeCocycle, rank_tol: float = 1e-8,
                  seed: int = 0) -> BettiReport:
    """Dimensions ``dim ker d^k - rank d^{k-1}``.

    With formal exponentials the generic rank over ``Q(x)`` is the maximum
    of exact ranks at seeded random rational points.
    """
    cocycle_check(cx, theta)
    formal = is_formal(theta)
    points = _evaluation_points(seed, GENERIC_TRIALS) if formal else [None]
    ranks = [0] * cx.dim
    for x in points:
        ls = local_system(theta, x)
        for k in range(cx.dim):
            ranks[k] = max(ranks[k], _rank(twisted_coboundary(cx, ls, k), rank_tol))
    f = cx.f_vector
    dims = [f[k] - (ranks[k] if k < cx.dim else 0) - (ranks[k - 1] if k > 0 else 0) for k in range(cx.dim + 1)]
    mode = "float" if theta.kind == "float" else ("formal-exponential" if formal else "rational")
    report = BettiReport(
        backend="simplicial",
        model={"n_vertices": cx.n_vertices, "f_vector": list(f)},
        twist={"kind": mode, "edges": len(theta.values)},
        dims=dims,
        euler_characteristic=sum((-1) ** k * n for k, n in enumerate(dims)),
        expected_euler=cx.euler_characteristic,
        seed=seed if formal else None,
    )
    report.extras["ranks"] = ranks
    report.extras["arithmetic"] = mode
    if formal:
        report.extras["evaluation_points"] = [str(p) for p in points]
    return report


def euler_check(report: BettiReport) -> bool:
    return report.euler_characteristic == report.expected_euler


def holonomy(theta: EdgeCocycle, cycle: Sequence[int]) -> float:
    """Sum of ``theta`` along a closed vertex path ``v0 v1 .. v0``."""
    return sum(float(theta.value(a, b)) for a, b in zip(cycle, cycle[1:]))


# ------------------------------------------------------- named twist builders


def torus7_cocycle(hx: EdgeValue, hy: EdgeValue) -> EdgeCocycle:
    """Cocycle on the 7-vertex torus with prescribed holonomy.

    Vertex ``v`` is the lattice point class ``x + 3y mod 7``; edges are
    the displacements ``(1,0)``, ``(0,1)``, ``(-1,1)`` (label differences
    1, 3, 2).  The returned cocycle is ``a dx + b dy`` for the unique
    ``(a, b)`` with holonomy ``hx`` along ``(-3, 1)`` and ``hy`` along
    ``(7, 0)``: ``b = hx + 3a`` and ``a = hy / 7``.
    """
    disp = {1: (1, 0), 3: (0, 1), 2: (-1, 1)}
    a = _scale(hy, Fraction(1, 7))
    b = _add(hx, _scale(a, 3))
    vals = {}
    for u in range(7):
        for d, (dx, dy) in disp.items():
            w = (u + d) % 7
            vals[(u, w)] = _add(_scale(a, dx), _scale(b, dy))
    return EdgeCocycle(vals)


def _scale(v: EdgeValue, s) -> EdgeValue:
    s = Fraction(s)
    if isinstance(v, LogRational):
        if s.denominator != 1:
            root = _rational_root(v.ratio, s.denominator)
            if root is None:
                return float(v) * float(s)
            return LogRational(root ** s.numerator)
        return LogRational(v.ratio ** int(s))
    if isinstance(v, Fraction):
        return v * s
    if isinstance(v, int):
        return Fraction(v) * s
    return float(v) * float(s)


def _rational_root(r: Fraction, n: int) -> Optional[Fraction]:
    def iroot(m):
        c = round(m ** (1.0 / n))
        for cand in (c - 1, c, c + 1):
            if cand >= 0 and cand ** n == m:
                return cand
        return None

    p, q = iroot(r.numerator), iroot(r.denominator)
    return None if p is None or q is None else Fraction(p, q)


def circle_cocycle(h: EdgeValue) -> EdgeCocycle:
    """3-vertex circle with holonomy ``h`` along ``0 -> 1 -> 2 -> 0``."""
    zero = LogRational(Fraction(1)) if isinstance(h, LogRational) else Fraction(0)
    return EdgeCocycle({(0, 1): zero, (1, 2): zero, (0, 2): _neg(h)})


def random_closed_cocycle(cx: SimplicialComplex, rng: np.random.Generator, kind: str = "log",
                          scale: int = 3) -> EdgeCocycle:
    """A random exact-arithmetic cocycle, generally not cohomologous to zero.

    Draws a random integer vector in the kernel of the triangle constraint
    matrix (a basis of closed cochains computed exactly).  ``kind="log"``
    returns ``ln 2`` multiples (rational weights); ``kind="rational"``
    returns rational values (formal exponentials).
    """
    edges = cx.edges
    col = {e: i for i, e in enumerate(edges)}
    rows = {}
    for r, (a, b, c) in enumerate(cx.triangles):
        rows[r] = {col[(a, b)]: QQ(1), col[(b, c)]: QQ(1), col[(a, c)]: QQ(-1)}
    if rows:
        cons = DomainMatrix(rows, (len(cx.triangles), len(edges)), QQ)
        kernel = cons.nullspace().to_Matrix()
        basis = [list(kernel.row(i)) for i in range(kernel.rows)]
    else:
        basis = [[1 if j == i else 0 for j in range(len(edges))] for i in range(len(edges))]
    coeffs = rng.integers(-scale, scale + 1, size=len(basis))
    vec = [Fraction(0)] * len(edges)
    for c, b in zip(coeffs, basis):
        for i, x in enumerate(b):
            vec[i] += int(c) * Fraction(int(x.p), int(x.q)) if hasattr(x, "p") else int(c) * Fraction(x)
    den = math.lcm(*[v.denominator for v in vec]) if vec else 1
    if kind == "log":
        return EdgeCocycle({e: LogRational(Fraction(2) ** int(v * den)) for e, v in zip(edges, vec)})
    if kind == "rational":
        return EdgeCocycle({e: v / scale for e, v in zip(edges, vec)})
    raise ValueError(f"unknown cocycle kind {kind!r}")
