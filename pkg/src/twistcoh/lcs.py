"""Locally conformally symplectic test on flat tori.

A 2-form ``omega`` is l.c.s. with Lee form ``theta`` when it is
nondegenerate and ``d_theta omega = d omega - theta ^ omega = 0``.

Forms are kept sparse (mode -> coefficient vector): a conformal factor
``e^f`` with ``f`` depending on one or two variables only fills a thin slab
of a 4-dimensional mode cube, and the dense box would be needlessly large.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from . import exterior as ext
from .exterior import FormBasis
from .modes import TWO_PI, Mode, TrigPolynomial, exp_series
from .torus import TwistClass

CLOSED_TOL = 1e-10
DEGENERACY_TOL = 1e-10


@dataclass
class SparseForm:
    """Homogeneous form: ``coefficients[k]`` is the vector on ``degree_bases[degree]`` at mode ``k``."""

    q: int
    degree: int
    coefficients: Dict[Mode, np.ndarray] = field(default_factory=dict)

    @property
    def basis(self) -> FormBasis:
        return FormBasis(self.q)

    def norm(self) -> float:
        return float(np.sqrt(sum(np.linalg.norm(v) ** 2 for v in self.coefficients.values())))

    def _add(self, mode: Mode, vec: np.ndarray):
        if mode in self.coefficients:
            self.coefficients[mode] = self.coefficients[mode] + vec
        else:
            self.coefficients[mode] = np.asarray(vec, dtype=complex)

    def at(self, x: np.ndarray) -> np.ndarray:
        """Real coefficient vector at the point ``x``."""
        out = np.zeros(self.basis.dim(self.degree), dtype=complex)
        for m, v in self.coefficients.items():
            out += v * np.exp(1j * TWO_PI * np.dot(m, x))
        return np.real(out)

    def matrix_at(self, x: np.ndarray) -> np.ndarray:
        """Antisymmetric ``q x q`` matrix of a 2-form at ``x``."""
        if self.degree != 2:
            raise ValueError("matrix_at needs a 2-form")
        vals = self.at(x)
        m = np.zeros((self.q, self.q))
        for (i, j), v in zip(self.basis.degree_bases[2], vals):
            m[i, j], m[j, i] = v, -v
        return m


def constant_two_form(q: int, entries: Mapping[Tuple[int, int], float]) -> SparseForm:
    """``sum c_ij dx^i ^ dx^j`` with constant coefficients (0-based indices)."""
    basis = FormBasis(q)
    vec = np.zeros(basis.dim(2), dtype=complex)
    for (i, j), v in entries.items():
        sign = 1
        if i > j:
            i, j, sign = j, i, -1
        vec[basis.index((i, j))] += sign * v
    return SparseForm(q, 2, {(0,) * q: vec})


def standard_symplectic(q: int = 4) -> SparseForm:
    if q % 2:
        raise ValueError("symplectic forms need even dimension")
    return constant_two_form(q, {(2 * a, 2 * a + 1): 1.0 for a in range(q // 2)})


def multiply(g: TrigPolynomial, form: SparseForm) -> SparseForm:
    out = SparseForm(form.q, form.degree)
    for m1, c in g.coefficients.items():
        for m2, v in form.coefficients.items():
            out._add(tuple(a + b for a, b in zip(m1, m2)), c * v)
    return out


def conformal_rescale(omega: SparseForm, f: TrigPolynomial, pad: Optional[int] = None) -> Tuple[SparseForm, float]:
    """``e^f omega``; returns the form and the l1 mass of the dropped series tail."""
    if pad is None:
        pad = max(2 * f.bandwidth, 1)
        series, tail = exp_series(f, 1.0, pad)
        while tail > 1e-13 and pad < 64:
            pad += 1
            series, tail = exp_series(f, 1.0, pad)
    else:
        series, tail = exp_series(f, 1.0, pad)
    return multiply(series, omega), tail


def twisted_d(form: SparseForm, theta: TwistClass) -> SparseForm:
    """``d form - theta ^ form`` on sparse modes."""
    q, p = form.q, form.degree
    basis = form.basis
    if p >= q:
        return SparseForm(q, p + 1)
    wedges = [ext.wedge_matrix(ext.unit(q, j), basis, p).matrix for j in range(q)]
    out = SparseForm(q, p + 1)
    for m, v in form.coefficients.items():
        out._add(m, sum(TWO_PI * 1j * m[j] * wedges[j].dot(v) for j in range(q)))
    for j in range(q):
        shifted = multiply(theta.component(j), SparseForm(q, p, {m: wedges[j].dot(v) for m, v in form.coefficients.items()}))
        for m, v in shifted.coefficients.items():
            out._add(m, -v)
    return out


@dataclass
class LcsResult:
    closed: bool
    residual: float
    nondegenerate: bool
    min_abs_det: float

    @property
    def passed(self) -> bool:
        return self.closed and self.nondegenerate

    @property
    def failure(self) -> Optional[str]:
        if not self.nondegenerate:
            return "degenerate"
        if not self.closed:
            return "not twisted-closed"
        return None

    def to_dict(self) -> dict:
        return {"closed": self.closed, "residual": self.residual, "nondegenerate": self.nondegenerate,
                "min_abs_det": self.min_abs_det, "passed": self.passed, "failure": self.failure}


def lcs_check(omega: SparseForm, theta: TwistClass, grid: int = 6, tol: float = CLOSED_TOL) -> LcsResult:
    """Twisted closedness in L2 plus nondegeneracy on a uniform sample grid."""
    if omega.degree != 2:
        raise ValueError("omega must be a 2-form")
    if omega.q < 4 or omega.q % 2:
        raise ValueError("the l.c.s. check needs an even-dimensional torus of dimension >= 4")
    if theta.q != omega.q:
        raise ValueError("twist and form dimensions differ")
    resid = twisted_d(omega, theta).norm()
    axes = np.stack(np.meshgrid(*[np.arange(grid) / grid] * omega.q, indexing="ij"), -1).reshape(-1, omega.q)
    min_det = float(min(abs(np.linalg.det(omega.matrix_at(x))) for x in axes))
    return LcsResult(resid <= tol, resid, min_det > DEGENERACY_TOL, min_det)
