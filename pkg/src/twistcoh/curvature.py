"""Levi-Civita data from frame brackets, Lie algebras and the positivity gate.

Throughout, ``c[i, j, k] = g([e_i, e_j], e_k)`` are the structure functions of
an orthonormal frame (constant on every model here) and

    Gamma[i][a, b] = g(nabla_{e_i} e_b, e_a),
    R[i][j][a, b]  = g(R(e_i, e_j) e_b, e_a),

with ``R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]`` so the
round sphere has positive sectional curvature ``K(e_i, e_j) = R[i][j][i, j]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

GATE_TOL = 1e-12


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def _zeros(shape, exact: bool):
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape)


def koszul_connection(c: np.ndarray) -> List[np.ndarray]:
    """Christoffel matrices of an orthonormal frame with constant brackets."""
    n = c.shape[0]
    exact = _is_exact(c)
    half = Fraction(1, 2) if exact else 0.5
    gam = []
    for i in range(n):
        g = _zeros((n, n), exact)
        for a in range(n):
            for b in range(n):
                g[a, b] = half * (c[i, b, a] - c[b, a, i] + c[a, i, b])
        gam.append(g)
    return gam


def curvature_matrices(c: np.ndarray, gamma: Optional[List[np.ndarray]] = None) -> np.ndarray:
    """``R[i, j]`` as an ``n x n x n x n`` array."""
    gamma = koszul_connection(c) if gamma is None else gamma
    n = c.shape[0]
    exact = _is_exact(c)
    out = _zeros((n, n, n, n), exact)
    for i in range(n):
        for j in range(n):
            r = gamma[i].dot(gamma[j]) - gamma[j].dot(gamma[i])
            for k in range(n):
                if c[i, j, k] != 0:
                    r = r - c[i, j, k] * gamma[k]
            out[i, j] = r
    return out


def curvature_operator(R: np.ndarray) -> np.ndarray:
    """Matrix of the curvature operator on 2-vectors ``e_i ^ e_j`` (``i < j``)."""
    n = R.shape[0]
    pairs = list(combinations(range(n), 2))
    out = _zeros((len(pairs), len(pairs)), _is_exact(R))
    for p, (i, j) in enumerate(pairs):
        for r, (k, l) in enumerate(pairs):
            out[p, r] = R[i, j, k, l]
    return out


def sectional_curvatures(R: np.ndarray) -> Dict[Tuple[int, int], object]:
    n = R.shape[0]
    return {(i, j): R[i, j, i, j] for i, j in combinations(range(n), 2)}


@dataclass
class CurvatureReport:
    """Curvature summary for the transverse (or Lie-group) metric."""

    dim: int
    sectional: Dict[Tuple[int, int], object]
    operator_eigenvalues: List[float]
    R: Optional[np.ndarray] = None
    extras: Dict[str, object] = field(default_factory=dict)

    def sectional_floats(self) -> Dict[str, float]:
        return {f"{i},{j}": float(v) for (i, j), v in self.sectional.items()}

    def to_dict(self) -> dict:
        out = {
            "dim": self.dim,
            "sectional": {f"{i},{j}": str(v) if isinstance(v, Fraction) else float(v)
                          for (i, j), v in self.sectional.items()},
            "operator_eigenvalues": [float(x) for x in self.operator_eigenvalues],
        }
        out.update({k: v for k, v in self.extras.items() if not isinstance(v, np.ndarray)})
        return out


def curvature_report(c: np.ndarray) -> CurvatureReport:
    R = curvature_matrices(c)
    op = curvature_operator(R)
    eig = np.linalg.eigvalsh(np.asarray(op, dtype=float)) if op.size else np.zeros(0)
    return CurvatureReport(c.shape[0], sectional_curvatures(R), sorted(float(x) for x in eig), R)


@dataclass(frozen=True)
class LieAlgebraModel:
    """Structure constants ``c^k_{ij}`` in an orthonormal basis.

    ``constants[i, j, k]`` is the ``e_k`` component of ``[e_i, e_j]``.
    """

    constants: np.ndarray
    name: str = ""

    def __post_init__(self):
        c = self.constants
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise ValueError("structure constants must be an n x n x n array")

    @property
    def dim(self) -> int:
        return self.constants.shape[0]

    @property
    def exact(self) -> bool:
        return _is_exact(self.constants)

    def antisymmetry_residual(self) -> float:
        c = self.constants
        return max((abs(float(c[i, j, k] + c[j, i, k])) for i in range(self.dim)
                    for j in range(self.dim) for k in range(self.dim)), default=0.0)

    def jacobi_residual(self) -> float:
        """Max over ``i<j<k`` of the components of the cyclic Jacobi sum."""
        c = self.constants
        n = self.dim
        worst = 0.0
        for i, j, k in combinations(range(n), 3):
            for m in range(n):
                s = 0
                for a, b, d in ((i, j, k), (j, k, i), (k, i, j)):
                    # [[e_a, e_b], e_d]
                    s = s + sum(c[a, b, l] * c[l, d, m] for l in range(n))
                worst = max(worst, abs(float(s)))
        return worst

    def scaled(self, factor) -> "LieAlgebraModel":
        """Orthonormal gauge of the metric rescaled by ``factor^2``.

        Lengths grow by ``factor`` so unit vectors shrink by it and the
        structure constants scale by ``1/factor``.
        """
        f = Fraction(factor) if self.exact else float(factor)
        return LieAlgebraModel(self.constants * (1 / f), self.name)

    def to_text(self) -> str:
        c = self.constants
        lines = []
        for i in range(self.dim):
            for j in range(self.dim):
                for k in range(self.dim):
                    if c[i, j, k] != 0 and i < j:
                        lines.append(f"{i} {j} {k} {c[i, j, k]}\n")
        return "".join(lines)


def lie_from_brackets(n: int, brackets: Dict[Tuple[int, int], Dict[int, object]], name: str = "") -> LieAlgebraModel:
    """Fill antisymmetric constants from ``{(i, j): {k: value}}`` with ``i < j``."""
    values = [v for d in brackets.values() for v in d.values()]
    exact = all(isinstance(v, (int, Fraction)) for v in values)
    c = _zeros((n, n, n), exact)
    for (i, j), comps in brackets.items():
        for k, v in comps.items():
            v = Fraction(v) if exact else float(v)
            c[i, j, k] = c[i, j, k] + v
            c[j, i, k] = c[j, i, k] - v
    return LieAlgebraModel(c, name)


def so3() -> LieAlgebraModel:
    return lie_from_brackets(3, {(0, 1): {2: 1}, (1, 2): {0: 1}, (0, 2): {1: -1}}, "o(3)")


def abelian(n: int) -> LieAlgebraModel:
    return LieAlgebraModel(_zeros((n, n, n), True), f"abelian-{n}")


def parse_structure_constants(text: str) -> LieAlgebraModel:
    """Lines ``i j k value`` meaning ``[e_i, e_j]`` has ``e_k`` component ``value``."""
    entries = []
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        i, j, k, v = ln.split()
        tok = v.strip()
        val = Fraction(tok) if ("/" in tok or tok.lstrip("-").isdigit()) else float(tok)
        entries.append((int(i), int(j), int(k), val))
    if not entries:
        raise ValueError("no structure constants given")
    n = 1 + max(max(e[:3]) for e in entries)
    brackets: Dict[Tuple[int, int], Dict[int, object]] = {}
    for i, j, k, v in entries:
        if i == j:
            raise ValueError(f"[e_{i}, e_{i}] must vanish")
        if i > j:
            i, j, v = j, i, -v
        brackets.setdefault((i, j), {})
        brackets[(i, j)][k] = brackets[(i, j)].get(k, 0) + v
    return lie_from_brackets(n, brackets)


def load_structure_constants(path) -> LieAlgebraModel:
    return parse_structure_constants(Path(path).read_text())


def biinvariant_curvature(lie: LieAlgebraModel, tol: float = 1e-13) -> CurvatureReport:
    """Sectional curvatures of the orthonormal-basis left-invariant metric.

    The metric is taken to be bi-invariant as in the classical compact
    examples; the Koszul route is cross-checked against ``1/4 |[e_i, e_j]|^2``.
    """
    if lie.jacobi_residual() > tol:
        raise ValueError(f"Jacobi identity fails (residual {lie.jacobi_residual():.3e})")
    if lie.antisymmetry_residual() > tol:
        raise ValueError("structure constants are not antisymmetric")
    rep = curvature_report(lie.constants)
    c = lie.constants
    quarter = Fraction(1, 4) if lie.exact else 0.25
    formula = {(i, j): quarter * sum(c[i, j, k] * c[i, j, k] for k in range(lie.dim))
               for i, j in combinations(range(lie.dim), 2)}
    rep.extras["formula_residual"] = max((abs(float(rep.sectional[p] - formula[p])) for p in formula), default=0.0)
    rep.extras["exact"] = lie.exact
    rep.extras["name"] = lie.name
    return rep


@dataclass
class GateVerdict:
    passed: bool
    min_eigenvalue: float
    max_eigenvalue: float
    dim: int
    implied_vanishing_degrees: List[int]
    lcs_obstruction: bool
    reason: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def positivity_gate(curv: CurvatureReport, tol: float = GATE_TOL) -> GateVerdict:
    """Non-negative curvature operator that is positive somewhere.

    On these homogeneous models "somewhere" is "anywhere", so the gate is
    ``min >= 0`` and ``max > 0``.  A true verdict implies vanishing of the
    twisted basic groups in degrees ``0 < i < q`` and hence, for ``q > 2``,
    no transverse locally conformally symplectic structure.
    """
    eig = list(curv.operator_eigenvalues)
    lo = min(eig) if eig else 0.0
    hi = max(eig) if eig else 0.0
    ok = lo >= -tol and hi > tol
    if not ok:
        reason = "negative curvature-operator eigenvalue" if lo < -tol else "curvature operator vanishes identically"
    else:
        reason = "non-negative and positive curvature operator"
    q = curv.dim
    return GateVerdict(ok, lo, hi, q, list(range(1, q)) if ok else [], ok and q > 2, reason)
