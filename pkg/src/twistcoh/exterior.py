"""Pointwise exterior algebra over an orthonormal coframe.

Forms of degree ``k`` on a ``q``-dimensional frame are coefficient vectors in
the basis ``e^S = e^{s_1} ^ ... ^ e^{s_k}`` where ``S`` runs over strictly
increasing index tuples in lexicographic order.  Every sign in the package is
derived here from insertion-sort parity.

Scalars are either floating (real or complex numpy arrays) or exact
(``fractions.Fraction`` held in object arrays).  The field is inferred from the
input coefficients unless given explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations
from math import comb
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

EXACT = "exact"
REAL = "real"
COMPLEX = "complex"


class DegreeError(ValueError):
    """Raised when a form degree is outside the range an operator accepts."""


def infer_field(values: Iterable) -> str:
    values = list(values)
    if any(isinstance(v, (complex, np.complexfloating)) for v in values):
        return COMPLEX
    if values and all(isinstance(v, (int, Fraction, np.integer)) for v in values):
        if any(isinstance(v, Fraction) for v in values):
            return EXACT
    return REAL


def zeros(shape, field_: str) -> np.ndarray:
    if field_ == EXACT:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape, dtype=complex if field_ == COMPLEX else float)


def identity(n: int, field_: str) -> np.ndarray:
    out = zeros((n, n), field_)
    for i in range(n):
        out[i, i] = Fraction(1) if field_ == EXACT else 1.0
    return out


def _coerce(value, field_: str):
    if field_ == EXACT:
        return Fraction(value)
    return value


@lru_cache(maxsize=None)
def _degree_bases(q: int) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
    return tuple(tuple(combinations(range(q), k)) for k in range(q + 1))


@dataclass(frozen=True)
class FormBasis:
    """Graded basis of the exterior algebra on a ``frame_dim``-dimensional frame.

    Indices are 0-based: ``e^0`` is the first coframe element.
    """

    frame_dim: int

    def __post_init__(self):
        if self.frame_dim < 1:
            raise ValueError(f"frame dimension must be >= 1, got {self.frame_dim}")

    @property
    def degree_bases(self) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
        return _degree_bases(self.frame_dim)

    @cached_property
    def _index(self) -> Tuple[Dict[Tuple[int, ...], int], ...]:
        return tuple({s: i for i, s in enumerate(b)} for b in self.degree_bases)

    def dim(self, k: int) -> int:
        if not 0 <= k <= self.frame_dim:
            return 0
        return comb(self.frame_dim, k)

    def index(self, subset: Sequence[int]) -> int:
        return self._index[len(subset)][tuple(subset)]

    @property
    def total_rank(self) -> int:
        return 2 ** self.frame_dim

    def offset(self, k: int) -> int:
        """Position of the degree-``k`` block inside the flattened algebra."""
        return sum(self.dim(j) for j in range(k))


@dataclass(frozen=True)
class GradedVector:
    degree: int
    coefficients: np.ndarray

    def check(self, basis: FormBasis) -> "GradedVector":
        if len(self.coefficients) != basis.dim(self.degree):
            raise ValueError(
                f"degree {self.degree} needs {basis.dim(self.degree)} coefficients, "
                f"got {len(self.coefficients)}"
            )
        return self


@dataclass(frozen=True)
class PointwiseOperator:
    """Linear map from degree ``source`` to degree ``target`` forms."""

    source: int
    target: int
    matrix: np.ndarray

    def check(self, basis: FormBasis) -> "PointwiseOperator":
        expected = (basis.dim(self.target), basis.dim(self.source))
        if self.matrix.shape != expected:
            raise ValueError(f"operator shape {self.matrix.shape} != {expected}")
        return self

    def __matmul__(self, other: "PointwiseOperator") -> "PointwiseOperator":
        if self.source != other.target:
            raise DegreeError(f"cannot compose degree {other.target} into {self.source}")
        return PointwiseOperator(other.source, self.target, self.matrix.dot(other.matrix))


def _insertion_sign(subset: Sequence[int], j: int) -> int:
    """Sign of moving ``j`` from the front of ``subset`` to its sorted slot."""
    return -1 if sum(1 for s in subset if s < j) % 2 else 1


def _field_of(c, field_):
    return field_ if field_ is not None else infer_field(c)


def wedge_matrix(c: Sequence, basis: FormBasis, k: int, field: str | None = None) -> PointwiseOperator:
    """Matrix of ``alpha -> c ^ alpha`` from degree ``k`` to ``k + 1``."""
    q = basis.frame_dim
    if len(c) != q:
        raise ValueError(f"covector has {len(c)} entries, frame has {q}")
    if not 0 <= k < q:
        raise DegreeError(f"wedge needs 0 <= k < {q}, got {k}")
    field_ = _field_of(c, field)
    mat = zeros((basis.dim(k + 1), basis.dim(k)), field_)
    for col, subset in enumerate(basis.degree_bases[k]):
        for j in range(q):
            if j in subset or c[j] == 0:
                continue
            target = tuple(sorted(subset + (j,)))
            mat[basis.index(target), col] += _insertion_sign(subset, j) * _coerce(c[j], field_)
    return PointwiseOperator(k, k + 1, mat)


def interior_matrix(v: Sequence, basis: FormBasis, k: int, field: str | None = None) -> PointwiseOperator:
    """Matrix of the contraction ``iota_v`` from degree ``k`` to ``k - 1``."""
    q = basis.frame_dim
    if len(v) != q:
        raise ValueError(f"vector has {len(v)} entries, frame has {q}")
    if not 1 <= k <= q:
        raise DegreeError(f"interior product needs 1 <= k <= {q}, got {k}")
    field_ = _field_of(v, field)
    mat = zeros((basis.dim(k - 1), basis.dim(k)), field_)
    for col, subset in enumerate(basis.degree_bases[k]):
        for pos, j in enumerate(subset):
            if v[j] == 0:
                continue
            rest = subset[:pos] + subset[pos + 1:]
            sign = -1 if pos % 2 else 1
            mat[basis.index(rest), col] += sign * _coerce(v[j], field_)
    return PointwiseOperator(k, k - 1, mat)


def adjoint(op):
    """Conjugate transpose with respect to the orthonormal coefficient inner product."""
    if isinstance(op, GradedOperator):
        return op.adjoint()
    m = op.matrix
    mt = m.T.copy()
    if mt.dtype != object:
        mt = mt.conj()
    return PointwiseOperator(op.target, op.source, mt)


@dataclass
class GradedOperator:
    """Operator on the whole exterior algebra stored as degree blocks.

    ``blocks[(target, source)]`` is the matrix from degree ``source`` to
    ``target``; absent blocks are zero.
    """

    basis: FormBasis
    field: str = REAL
    blocks: Dict[Tuple[int, int], np.ndarray] = dc_field(default_factory=dict)

    @classmethod
    def from_pointwise(cls, basis, ops: Iterable[PointwiseOperator], field_: str = REAL):
        out = cls(basis, field_)
        for op in ops:
            out._accumulate((op.target, op.source), op.matrix)
        return out

    @classmethod
    def identity(cls, basis: FormBasis, field_: str = REAL, scale=1):
        out = cls(basis, field_)
        for k in range(basis.frame_dim + 1):
            out.blocks[(k, k)] = identity(basis.dim(k), field_) * _coerce(scale, field_)
        return out

    def _accumulate(self, key, mat):
        if key in self.blocks:
            self.blocks[key] = self.blocks[key] + mat
        else:
            self.blocks[key] = mat

    def _promote(self, other: "GradedOperator") -> str:
        fields = {self.field, other.field}
        if EXACT in fields and len(fields) > 1:
            raise TypeError("cannot mix exact and floating operators")
        return COMPLEX if COMPLEX in fields else self.field

    def __add__(self, other: "GradedOperator") -> "GradedOperator":
        out = GradedOperator(self.basis, self._promote(other), dict(self.blocks))
        for key, mat in other.blocks.items():
            out._accumulate(key, mat)
        return out

    def __neg__(self) -> "GradedOperator":
        return GradedOperator(self.basis, self.field, {k: -m for k, m in self.blocks.items()})

    def __sub__(self, other: "GradedOperator") -> "GradedOperator":
        return self + (-other)

    def scale(self, s) -> "GradedOperator":
        field_ = COMPLEX if isinstance(s, complex) and self.field != EXACT else self.field
        return GradedOperator(self.basis, field_, {k: m * _coerce(s, self.field) for k, m in self.blocks.items()})

    def __matmul__(self, other: "GradedOperator") -> "GradedOperator":
        out = GradedOperator(self.basis, self._promote(other))
        for (t2, s2), m2 in self.blocks.items():
            for (t1, s1), m1 in other.blocks.items():
                if t1 == s2:
                    out._accumulate((t2, s1), m2.dot(m1))
        return out

    def adjoint(self) -> "GradedOperator":
        out = GradedOperator(self.basis, self.field)
        for (t, s), m in self.blocks.items():
            out.blocks[(s, t)] = adjoint(PointwiseOperator(s, t, m)).matrix
        return out

    def dense(self) -> np.ndarray:
        """Flattened ``2^q x 2^q`` matrix, for norms and spectra only."""
        n = self.basis.total_rank
        out = zeros((n, n), self.field)
        for (t, s), m in self.blocks.items():
            r0, c0 = self.basis.offset(t), self.basis.offset(s)
            out[r0:r0 + m.shape[0], c0:c0 + m.shape[1]] += m
        return out

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.norm() <= tol

    def norm(self) -> float:
        """Spectral norm (exact operators are converted to float)."""
        d = self.dense()
        if d.dtype == object:
            if all(x == 0 for x in d.flat):
                return 0.0
            d = d.astype(float)
        return float(np.linalg.norm(d, 2)) if d.size else 0.0

    def apply(self, vec: GradedVector) -> Dict[int, np.ndarray]:
        out: Dict[int, np.ndarray] = {}
        for (t, s), m in self.blocks.items():
            if s == vec.degree:
                out[t] = out.get(t, 0) + m.dot(vec.coefficients)
        return out


def wedge_operator(c: Sequence, basis: FormBasis, field: str | None = None) -> GradedOperator:
    field_ = _field_of(c, field)
    ops = [wedge_matrix(c, basis, k, field_) for k in range(basis.frame_dim)]
    return GradedOperator.from_pointwise(basis, ops, field_)


def interior_operator(v: Sequence, basis: FormBasis, field: str | None = None) -> GradedOperator:
    field_ = _field_of(v, field)
    ops = [interior_matrix(v, basis, k, field_) for k in range(1, basis.frame_dim + 1)]
    return GradedOperator.from_pointwise(basis, ops, field_)


def clifford_matrix(v: Sequence, basis: FormBasis, k: int, field: str | None = None) -> Dict[int, PointwiseOperator]:
    """Clifford product ``v . alpha = v^flat ^ alpha - iota_v alpha`` on degree ``k``.

    Returns the two graded components keyed by target degree.
    """
    field_ = _field_of(v, field)
    parts: Dict[int, PointwiseOperator] = {}
    if k < basis.frame_dim:
        parts[k + 1] = wedge_matrix(v, basis, k, field_)
    if k >= 1:
        op = interior_matrix(v, basis, k, field_)
        parts[k - 1] = PointwiseOperator(k, k - 1, -op.matrix)
    return parts


def clifford_operator(v: Sequence, basis: FormBasis, field: str | None = None) -> GradedOperator:
    field_ = _field_of(v, field)
    ops = [op for k in range(basis.frame_dim + 1) for op in clifford_matrix(v, basis, k, field_).values()]
    return GradedOperator.from_pointwise(basis, ops, field_)


def derivation_operator(endo: np.ndarray, basis: FormBasis) -> GradedOperator:
    """Extend an endomorphism of 1-forms to the algebra as a derivation.

    ``endo[a, b]`` is the ``e^a`` coefficient of the image of ``e^b``; the
    extension is ``sum_{a,b} endo[a, b] e^a ^ iota_{e_b}``.
    """
    q = basis.frame_dim
    endo = np.asarray(endo)
    field_ = COMPLEX if np.iscomplexobj(endo) else REAL
    out = GradedOperator(basis, field_)
    for k in range(1, q + 1):
        mat = zeros((basis.dim(k), basis.dim(k)), field_)
        for b in range(q):
            eb = np.zeros(q)
            eb[b] = 1.0
            contract = interior_matrix(eb, basis, k).matrix
            for a in range(q):
                if endo[a, b] == 0:
                    continue
                ea = np.zeros(q)
                ea[a] = 1.0
                mat = mat + endo[a, b] * wedge_matrix(ea, basis, k - 1).matrix.dot(contract)
        out.blocks[(k, k)] = mat
    out.blocks[(0, 0)] = zeros((1, 1), field_)
    return out


def unit(q: int, i: int) -> np.ndarray:
    e = np.zeros(q)
    e[i] = 1.0
    return e
