"""Truncated Fourier mode spaces and block-banded operators on them.

A form on a torus ``T^d`` (or on a circle, for the mapping-torus models) is
stored as coefficients ``a[k, S]`` for Fourier modes ``k`` in a box
``max|k_j| <= K`` and frame subsets ``S``.  Rows are mode-major: the entry for
``(k, S)`` sits at ``box.index(k) * basis.dim(deg) + basis.index(S)``.

Operators with trigonometric-polynomial coefficients of bandwidth ``b`` map
the box of cutoff ``K`` into the box of cutoff ``K + b`` without truncation,
so compositions and adjoint identities are exact finite sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm

from .exterior import FormBasis, GradedOperator

TWO_PI = 2.0 * np.pi

Mode = Tuple[int, ...]


@dataclass(frozen=True)
class ModeBox:
    """All integer modes ``k`` in ``Z^dim`` with ``max|k_j| <= cutoff``."""

    dim: int
    cutoff: int

    def __post_init__(self):
        if self.dim < 1 or self.cutoff < 0:
            raise ValueError(f"invalid mode box dim={self.dim} cutoff={self.cutoff}")

    @cached_property
    def modes(self) -> Tuple[Mode, ...]:
        r = range(-self.cutoff, self.cutoff + 1)
        return tuple(product(r, repeat=self.dim))

    @cached_property
    def _index(self) -> Dict[Mode, int]:
        return {m: i for i, m in enumerate(self.modes)}

    def __len__(self) -> int:
        return (2 * self.cutoff + 1) ** self.dim

    def __contains__(self, mode) -> bool:
        return tuple(mode) in self._index

    def index(self, mode: Sequence[int]) -> int:
        return self._index[tuple(mode)]

    def grow(self, by: int) -> "ModeBox":
        return ModeBox(self.dim, self.cutoff + by)

    @cached_property
    def mode_array(self) -> np.ndarray:
        return np.array(self.modes, dtype=int).reshape(len(self), self.dim)


class TrigPolynomial:
    """Finite Fourier series ``sum_m c_m exp(2 pi i m.x)`` on ``T^dim``."""

    def __init__(self, dim: int, coefficients: Optional[Mapping[Mode, complex]] = None):
        self.dim = dim
        self.coefficients: Dict[Mode, complex] = {}
        for m, c in (coefficients or {}).items():
            m = tuple(int(x) for x in m)
            if len(m) != dim:
                raise ValueError(f"mode {m} does not have dimension {dim}")
            if c != 0:
                self.coefficients[m] = self.coefficients.get(m, 0) + complex(c)

    @classmethod
    def constant(cls, dim: int, value) -> "TrigPolynomial":
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def from_terms(cls, dim: int, terms: Iterable[Mapping]) -> "TrigPolynomial":
        """Build from ``{"kind": "sin"|"cos", "amplitude": a, "mode": [..]}`` terms.

        ``sin`` and ``cos`` are of ``2 pi m.x``; the result is real valued.
        """
        coeffs: Dict[Mode, complex] = {}
        for term in terms:
            kind = term.get("kind", "cos")
            a = float(term["amplitude"])
            m = tuple(int(x) for x in term["mode"])
            neg = tuple(-x for x in m)
            if kind not in ("cos", "sin"):
                raise ValueError(f"unknown term kind {kind!r}")
            if m == neg:
                # the zero mode: cos(0) = 1, sin(0) = 0
                if kind == "cos":
                    coeffs[m] = coeffs.get(m, 0) + a
                continue
            if kind == "cos":
                parts = {m: a / 2, neg: a / 2}
            elif kind == "sin":
                parts = {m: a / 2j, neg: -a / 2j}
            else:
                raise ValueError(f"unknown term kind {kind!r}")
            for key, val in parts.items():
                coeffs[key] = coeffs.get(key, 0) + val
        return cls(dim, coeffs)

    @property
    def bandwidth(self) -> int:
        if not self.coefficients:
            return 0
        return max(max(abs(x) for x in m) for m in self.coefficients)

    def is_zero(self) -> bool:
        return not self.coefficients

    def is_real(self, tol: float = 1e-14) -> bool:
        for m, c in self.coefficients.items():
            partner = self.coefficients.get(tuple(-x for x in m), 0)
            if abs(c - np.conj(partner)) > tol:
                return False
        return True

    def derivative(self, j: int) -> "TrigPolynomial":
        return TrigPolynomial(self.dim, {m: c * TWO_PI * 1j * m[j] for m, c in self.coefficients.items()})

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        out = dict(self.coefficients)
        for m, c in other.coefficients.items():
            out[m] = out.get(m, 0) + c
        return TrigPolynomial(self.dim, out)

    def __mul__(self, s) -> "TrigPolynomial":
        if isinstance(s, TrigPolynomial):
            out: Dict[Mode, complex] = {}
            for m1, c1 in self.coefficients.items():
                for m2, c2 in s.coefficients.items():
                    m = tuple(a + b for a, b in zip(m1, m2))
                    out[m] = out.get(m, 0) + c1 * c2
            return TrigPolynomial(self.dim, out)
        return TrigPolynomial(self.dim, {m: c * s for m, c in self.coefficients.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "TrigPolynomial":
        return self * -1

    def constant_term(self) -> complex:
        return self.coefficients.get((0,) * self.dim, 0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at points ``x`` of shape ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], dtype=complex)
        for m, c in self.coefficients.items():
            out += c * np.exp(TWO_PI * 1j * (x @ np.array(m, dtype=float)))
        return out

    def to_terms(self) -> list:
        return [{"mode": list(m), "re": c.real, "im": c.imag} for m, c in sorted(self.coefficients.items())]

    def __repr__(self) -> str:
        return f"TrigPolynomial(dim={self.dim}, terms={len(self.coefficients)}, bandwidth={self.bandwidth})"


def exp_series(f: TrigPolynomial, sign: float, cutoff: int, oversample: int = 2):
    """Fourier coefficients of ``exp(sign * f)`` truncated to ``cutoff``.

    Returns the truncated series and the l1 mass of the discarded tail,
    estimated from an oversampled FFT over the variables ``f`` depends on.
    """
    active = [j for j in range(f.dim) if any(m[j] for m in f.coefficients)]
    if not active:
        return TrigPolynomial.constant(f.dim, np.exp(sign * f.constant_term())), 0.0
    sub = TrigPolynomial(len(active), {tuple(m[j] for j in active): c for m, c in f.coefficients.items()})
    n = max(2 * oversample * (cutoff + sub.bandwidth) + 16, 32)
    axes = [np.arange(n) / n] * sub.dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = np.exp(sign * sub(grid))
    coeffs = np.fft.fftn(values) / n ** sub.dim
    # FFT round-off floor; coefficients below it are noise, not tail
    floor = 4 * np.finfo(float).eps * float(np.max(np.abs(values)))
    freqs = np.rint(np.fft.fftfreq(n, 1.0 / n)).astype(int)
    mesh = np.stack(np.meshgrid(*[freqs] * sub.dim, indexing="ij"), axis=-1)
    inside = np.max(np.abs(mesh), axis=-1) <= cutoff
    outside = np.abs(coeffs[~inside])
    tail = float(np.sum(outside[outside > floor]))
    kept: Dict[Mode, complex] = {}
    for idx in zip(*np.nonzero(inside)):
        c = coeffs[idx]
        if abs(c) > 1e-300:
            full = [0] * f.dim
            for j, k in zip(active, mesh[idx]):
                full[j] = int(k)
            kept[tuple(full)] = complex(c)
    return TrigPolynomial(f.dim, kept), tail


def inclusion_matrix(src: ModeBox, tgt: ModeBox) -> sp.csr_matrix:
    rows = [tgt.index(m) for m in src.modes]
    cols = list(range(len(src)))
    return sp.csr_matrix((np.ones(len(src)), (rows, cols)), shape=(len(tgt), len(src)))


def derivative_matrix(j: int, src: ModeBox, tgt: ModeBox) -> sp.csr_matrix:
    """``d/dx_j`` from ``src`` into ``tgt`` (which must contain ``src``)."""
    diag = TWO_PI * 1j * src.mode_array[:, j]
    return (inclusion_matrix(src, tgt) @ sp.diags(diag)).tocsr()


def multiplication_matrix(g: TrigPolynomial, src: ModeBox, tgt: ModeBox) -> sp.csr_matrix:
    """Multiplication by ``g``; entries whose image falls outside ``tgt`` are dropped."""
    rows, cols, vals = [], [], []
    for col, k in enumerate(src.modes):
        for m, c in g.coefficients.items():
            out = tuple(a + b for a, b in zip(k, m))
            if out in tgt:
                rows.append(tgt.index(out))
                cols.append(col)
                vals.append(c)
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(len(tgt), len(src)))


@dataclass
class ModeBlockOperator:
    """Graded operator on truncated form spaces, one sparse matrix per degree pair.

    ``blocks[(target_degree, source_degree)]`` maps the degree-``source``
    coefficients on ``src`` to degree-``target`` coefficients on ``tgt``.
    """

    basis: FormBasis
    src: ModeBox
    tgt: ModeBox
    blocks: Dict[Tuple[int, int], sp.csr_matrix] = field(default_factory=dict)

    @property
    def bandwidth(self) -> int:
        return self.tgt.cutoff - self.src.cutoff

    def shape(self, t: int, s: int) -> Tuple[int, int]:
        return (len(self.tgt) * self.basis.dim(t), len(self.src) * self.basis.dim(s))

    def block(self, t: int, s: int) -> sp.csr_matrix:
        if (t, s) in self.blocks:
            return self.blocks[(t, s)]
        return sp.csr_matrix(self.shape(t, s), dtype=complex)

    def _accumulate(self, key, mat):
        mat = sp.csr_matrix(mat, dtype=complex)
        if key in self.blocks:
            self.blocks[key] = (self.blocks[key] + mat).tocsr()
        else:
            self.blocks[key] = mat

    @classmethod
    def zero(cls, basis, src, tgt) -> "ModeBlockOperator":
        return cls(basis, src, tgt)

    @classmethod
    def kron(cls, mode_matrix, pointwise: GradedOperator, src: ModeBox, tgt: ModeBox) -> "ModeBlockOperator":
        """``mode_matrix`` acting on Fourier modes tensored with a pointwise operator."""
        out = cls(pointwise.basis, src, tgt)
        for key, mat in pointwise.blocks.items():
            pm = np.asarray(mat, dtype=complex)
            if not pm.any():
                continue
            out._accumulate(key, sp.kron(mode_matrix, sp.csr_matrix(pm), format="csr"))
        return out

    def _check_same(self, other: "ModeBlockOperator"):
        if self.src != other.src or self.tgt != other.tgt:
            raise ValueError(
                f"mode boxes differ: {self.src.cutoff}->{self.tgt.cutoff} vs "
                f"{other.src.cutoff}->{other.tgt.cutoff}"
            )

    def __add__(self, other: "ModeBlockOperator") -> "ModeBlockOperator":
        self._check_same(other)
        out = ModeBlockOperator(self.basis, self.src, self.tgt, dict(self.blocks))
        for key, mat in other.blocks.items():
            out._accumulate(key, mat)
        return out

    def __neg__(self) -> "ModeBlockOperator":
        return self.scale(-1.0)

    def __sub__(self, other: "ModeBlockOperator") -> "ModeBlockOperator":
        return self + (-other)

    def scale(self, s) -> "ModeBlockOperator":
        return ModeBlockOperator(self.basis, self.src, self.tgt, {k: (m * s).tocsr() for k, m in self.blocks.items()})

    def __matmul__(self, other: "ModeBlockOperator") -> "ModeBlockOperator":
        if self.src != other.tgt:
            raise ValueError(f"cannot compose: inner boxes {other.tgt.cutoff} != {self.src.cutoff}")
        out = ModeBlockOperator(self.basis, other.src, self.tgt)
        for (t2, s2), m2 in self.blocks.items():
            for (t1, s1), m1 in other.blocks.items():
                if t1 == s2:
                    out._accumulate((t2, s1), m2 @ m1)
        return out

    def adjoint(self) -> "ModeBlockOperator":
        return ModeBlockOperator(
            self.basis, self.tgt, self.src, {(s, t): m.conj().T.tocsr() for (t, s), m in self.blocks.items()}
        )

    def lift(self, tgt: ModeBox) -> "ModeBlockOperator":
        """Same operator with its target embedded into a larger box."""
        if tgt == self.tgt:
            return self
        out = ModeBlockOperator(self.basis, self.src, tgt)
        for (t, s), m in self.blocks.items():
            emb = sp.kron(inclusion_matrix(self.tgt, tgt), sp.identity(self.basis.dim(t)), format="csr")
            out.blocks[(t, s)] = (emb @ m).tocsr()
        return out

    def restrict(self, tgt: ModeBox) -> "ModeBlockOperator":
        """Orthogonal projection of the output onto a smaller box."""
        out = ModeBlockOperator(self.basis, self.src, tgt)
        for (t, s), m in self.blocks.items():
            emb = sp.kron(inclusion_matrix(tgt, self.tgt), sp.identity(self.basis.dim(t)), format="csr")
            out.blocks[(t, s)] = (emb.T @ m).tocsr()
        return out

    def apply(self, form: Mapping[int, np.ndarray]) -> Dict[int, np.ndarray]:
        out: Dict[int, np.ndarray] = {}
        for (t, s), m in self.blocks.items():
            if s in form:
                out[t] = out.get(t, 0) + m @ form[s]
        return {t: np.asarray(v) for t, v in out.items()}

    def is_block_diagonal(self) -> bool:
        return self.bandwidth == 0 and all(_is_mode_diagonal(m, self.basis.dim(t), self.basis.dim(s), len(self.src))
                                           for (t, s), m in self.blocks.items())

    def mode_block(self, mode_index: int, t: int, s: int) -> np.ndarray:
        nt, ns = self.basis.dim(t), self.basis.dim(s)
        m = self.block(t, s)
        return m[mode_index * nt:(mode_index + 1) * nt, mode_index * ns:(mode_index + 1) * ns].toarray()

    def iter_mode_blocks(self, t: int, s: int) -> Iterator[Tuple[Mode, np.ndarray]]:
        for i, mode in enumerate(self.src.modes):
            yield mode, self.mode_block(i, t, s)

    def norm(self) -> float:
        """Spectral norm of the whole graded operator.

        Block-diagonal operators are normed mode by mode; banded ones are
        normed densely up to 6000 rows, beyond that the Frobenius norm (an
        upper bound) is returned.
        """
        if not self.blocks:
            return 0.0
        if all(m.nnz == 0 for m in self.blocks.values()):
            return 0.0
        q = self.basis.frame_dim
        if self.bandwidth == 0 and self.is_block_diagonal():
            best = 0.0
            for i in range(len(self.src)):
                g = GradedOperator(self.basis, "complex",
                                   {(t, s): self.mode_block(i, t, s) for (t, s) in self.blocks})
                best = max(best, g.norm())
            return best
        rows = len(self.tgt) * 2 ** q
        if rows <= 6000:
            return float(np.linalg.norm(self.dense(), 2))
        return float(np.sqrt(sum(sparse_norm(m) ** 2 for m in self.blocks.values())))

    def dense(self) -> np.ndarray:
        q = self.basis.frame_dim
        row_off = np.cumsum([0] + [len(self.tgt) * self.basis.dim(k) for k in range(q + 1)])
        col_off = np.cumsum([0] + [len(self.src) * self.basis.dim(k) for k in range(q + 1)])
        out = np.zeros((row_off[-1], col_off[-1]), dtype=complex)
        for (t, s), m in self.blocks.items():
            out[row_off[t]:row_off[t + 1], col_off[s]:col_off[s + 1]] += m.toarray()
        return out


def _is_mode_diagonal(m: sp.csr_matrix, nt: int, ns: int, nmodes: int) -> bool:
    coo = m.tocoo()
    mask = coo.data != 0
    return bool(np.all(coo.row[mask] // nt == coo.col[mask] // ns))


def random_form(rng: np.random.Generator, basis: FormBasis, box: ModeBox, degree: int) -> np.ndarray:
    n = len(box) * basis.dim(degree)
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """L2 inner product of coefficient vectors on a unit-volume torus."""
    return complex(np.vdot(b, a))
