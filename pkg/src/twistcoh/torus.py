"""Twisted calculus on flat tori in the Fourier basis.

The torus ``T^q = R^q / Z^q`` carries the flat metric and the coordinate
coframe ``dx^1 .. dx^q``.  Leaves are points, so the mean curvature vanishes
and the twisted Bott connection is ``D_v - theta(v)``.  A twist is a closed
1-form ``theta = theta_bar + df`` with constant harmonic part ``theta_bar``
and a real trigonometric polynomial potential ``f``.

With ``f = 0`` every operator is block diagonal in the Fourier modes; with a
potential of bandwidth ``b`` first-order operators map the box of cutoff
``K`` into the box of cutoff ``K + b`` and all identities are checked as exact
finite sums on those rectangular blocks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import exterior as ext
from .exterior import FormBasis, GradedOperator
from .modes import (
    TWO_PI,
    ModeBlockOperator,
    ModeBox,
    TrigPolynomial,
    derivative_matrix,
    exp_series,
    inclusion_matrix,
    multiplication_matrix,
    random_form,
)
from .report import BettiReport, SpectrumEntry

DEFAULT_RANK_TOL = 1e-8
EXP_TAIL_TOL = 1e-7


class CutoffError(ValueError):
    """The mode cutoff is too small to certify the requested computation."""


class PaddingWarning(UserWarning):
    """A truncated exponential series dropped more mass than allowed."""


@dataclass(frozen=True)
class TorusModel:
    q: int
    cutoff: int = 4
    rank_tol: float = DEFAULT_RANK_TOL
    margin: float = 1.0

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"torus dimension must be >= 1, got {self.q}")
        if self.cutoff < 1:
            raise ValueError(f"mode cutoff must be >= 1, got {self.cutoff}")

    @property
    def basis(self) -> FormBasis:
        return FormBasis(self.q)

    def box(self, cutoff: Optional[int] = None) -> ModeBox:
        return ModeBox(self.q, self.cutoff if cutoff is None else cutoff)


@dataclass(frozen=True)
class TwistClass:
    """Closed 1-form ``sum_j theta_bar_j dx^j + df``."""

    constant_part: Tuple[float, ...]
    potential: Optional[TrigPolynomial] = None

    def __post_init__(self):
        object.__setattr__(self, "constant_part", tuple(float(c) for c in self.constant_part))
        if self.potential is not None:
            if self.potential.dim != len(self.constant_part):
                raise ValueError("potential dimension does not match the constant part")
            if not self.potential.is_real():
                raise ValueError("potential must be a real trigonometric polynomial")
            if self.potential.is_zero():
                object.__setattr__(self, "potential", None)

    @classmethod
    def constant(cls, *coeffs: float) -> "TwistClass":
        return cls(tuple(coeffs))

    @property
    def q(self) -> int:
        return len(self.constant_part)

    @property
    def bandwidth(self) -> int:
        return 0 if self.potential is None else self.potential.bandwidth

    @property
    def is_constant(self) -> bool:
        return self.potential is None

    def component(self, j: int) -> TrigPolynomial:
        """Coefficient of ``dx^j`` as a trigonometric polynomial."""
        out = TrigPolynomial.constant(self.q, self.constant_part[j])
        if self.potential is not None:
            out = out + self.potential.derivative(j)
        return out

    def plus_exact(self, f: TrigPolynomial) -> "TwistClass":
        pot = f if self.potential is None else self.potential + f
        return TwistClass(self.constant_part, pot)

    def to_dict(self) -> dict:
        return {
            "constant_part": list(self.constant_part),
            "potential": [] if self.potential is None else self.potential.to_terms(),
        }


def _check(model: TorusModel, theta: TwistClass):
    if theta.q != model.q:
        raise ValueError(f"twist has dimension {theta.q}, torus has {model.q}")


class TorusCalculus:
    """Operator assembly for one ``(model, theta)`` pair.

    Every builder takes the source cutoff and returns an operator into the box
    grown by the twist bandwidth.
    """

    def __init__(self, model: TorusModel, theta: TwistClass):
        _check(model, theta)
        self.model = model
        self.theta = theta
        self.basis = model.basis
        self.b = theta.bandwidth
        self.q = model.q

    def _boxes(self, cutoff: Optional[int]) -> Tuple[ModeBox, ModeBox]:
        c = self.model.cutoff if cutoff is None else cutoff
        return ModeBox(self.q, c), ModeBox(self.q, c + self.b)

    @cached_property
    def _components(self):
        return [self.theta.component(j) for j in range(self.q)]

    def _const(self, op: GradedOperator, cutoff=None) -> ModeBlockOperator:
        src, tgt = self._boxes(cutoff)
        return ModeBlockOperator.kron(inclusion_matrix(src, tgt), op, src, tgt)

    def _mult(self, g: TrigPolynomial, op: GradedOperator, cutoff=None) -> ModeBlockOperator:
        src, tgt = self._boxes(cutoff)
        return ModeBlockOperator.kron(multiplication_matrix(g, src, tgt), op, src, tgt)

    def _identity(self) -> GradedOperator:
        return GradedOperator.identity(self.basis)

    def partial(self, j: int, cutoff=None) -> ModeBlockOperator:
        src, tgt = self._boxes(cutoff)
        return ModeBlockOperator.kron(derivative_matrix(j, src, tgt), self._identity(), src, tgt)

    def theta_of(self, v: Sequence[float]) -> TrigPolynomial:
        out = TrigPolynomial(self.q)
        for j, vj in enumerate(v):
            if vj:
                out = out + self._components[j] * float(vj)
        return out

    def nabla(self, v: Sequence[float], cutoff=None) -> ModeBlockOperator:
        """Twisted connection ``D_v - theta(v)`` along a constant field ``v``."""
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for j, vj in enumerate(v):
            if vj:
                out = out + self.partial(j, cutoff).scale(vj)
        return out - self._mult(self.theta_of(v), self._identity(), cutoff)

    def nabla_untwisted(self, v: Sequence[float], cutoff=None) -> ModeBlockOperator:
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for j, vj in enumerate(v):
            if vj:
                out = out + self.partial(j, cutoff).scale(vj)
        return out

    def nabla_adjoint(self, v: Sequence[float], cutoff=None) -> ModeBlockOperator:
        """``-nabla_v - div v - 2 theta(v)``; coordinate fields are divergence free."""
        return -self.nabla(v, cutoff) - self._mult(self.theta_of(v) * 2.0, self._identity(), cutoff)

    def wedge_theta(self, cutoff=None) -> ModeBlockOperator:
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for j in range(self.q):
            out = out + self._mult(self._components[j], ext.wedge_operator(ext.unit(self.q, j), self.basis), cutoff)
        return out

    def interior_theta(self, cutoff=None) -> ModeBlockOperator:
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for j in range(self.q):
            out = out + self._mult(self._components[j], ext.interior_operator(ext.unit(self.q, j), self.basis), cutoff)
        return out

    def d(self, cutoff=None) -> ModeBlockOperator:
        """``d - theta ^`` assembled directly."""
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for j in range(self.q):
            wj = ext.wedge_operator(ext.unit(self.q, j), self.basis)
            out = out + ModeBlockOperator.kron(derivative_matrix(j, src, tgt), wj, src, tgt)
        return out - self.wedge_theta(cutoff)

    def d_from_connection(self, cutoff=None) -> ModeBlockOperator:
        """``sum_i e^i ^ nabla_{e_i}``."""
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for j in range(self.q):
            wj = self._square(ext.wedge_operator(ext.unit(self.q, j), self.basis), tgt)
            out = out + wj @ self.nabla(ext.unit(self.q, j), cutoff)
        return out

    def delta(self, cutoff=None) -> ModeBlockOperator:
        """``-sum_i iota_{e_i} nabla_{e_i} - 2 iota_{theta#}``."""
        src, tgt = self._boxes(cutoff)
        out = self.interior_theta(cutoff).scale(-2.0)
        for j in range(self.q):
            ij = self._square(ext.interior_operator(ext.unit(self.q, j), self.basis), tgt)
            out = out - ij @ self.nabla(ext.unit(self.q, j), cutoff)
        return out

    def _square(self, op: GradedOperator, box: ModeBox) -> ModeBlockOperator:
        """Constant pointwise operator acting on a single box."""
        return ModeBlockOperator.kron(inclusion_matrix(box, box), op, box, box)

    def clifford(self, v: Sequence[float], box: ModeBox) -> ModeBlockOperator:
        return self._square(ext.clifford_operator(v, self.basis), box)

    def dirac(self, cutoff=None) -> ModeBlockOperator:
        return self.d(cutoff) + self.delta(cutoff)

    def dirac_clifford(self, cutoff=None) -> ModeBlockOperator:
        """``sum_i e_i . nabla_{e_i} - 2 iota_{theta#}``."""
        src, tgt = self._boxes(cutoff)
        out = self.interior_theta(cutoff).scale(-2.0)
        for j in range(self.q):
            out = out + self.clifford(ext.unit(self.q, j), tgt) @ self.nabla(ext.unit(self.q, j), cutoff)
        return out

    def next_cutoff(self, cutoff=None) -> int:
        return (self.model.cutoff if cutoff is None else cutoff) + self.b

    def laplacian(self, cutoff=None) -> ModeBlockOperator:
        c1 = self.next_cutoff(cutoff)
        return self.d(c1) @ self.delta(cutoff) + self.delta(c1) @ self.d(cutoff)

    def rough_laplacian(self, cutoff=None) -> ModeBlockOperator:
        c1 = self.next_cutoff(cutoff)
        out = None
        for j in range(self.q):
            e = ext.unit(self.q, j)
            term = self.nabla_adjoint(e, c1) @ self.nabla(e, cutoff)
            out = term if out is None else out + term
        return out

    def hessian_term(self, cutoff=None) -> ModeBlockOperator:
        """``sum_i e_i . iota_{nabla_{e_i} theta#}``; nonzero only for potentials."""
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for i in range(self.q):
            ci = ext.clifford_operator(ext.unit(self.q, i), self.basis)
            for j in range(self.q):
                hij = self._components[j].derivative(i)
                if hij.is_zero():
                    continue
                op = ci @ ext.interior_operator(ext.unit(self.q, j), self.basis)
                out = out + self._mult(hij, op, cutoff)
        return out

    def lie_derivative_lemma_term(self, cutoff=None) -> ModeBlockOperator:
        """``sum_i e^i ^ iota_{nabla_{e_i} theta#}``."""
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for i in range(self.q):
            wi = ext.wedge_operator(ext.unit(self.q, i), self.basis)
            for j in range(self.q):
                hij = self._components[j].derivative(i)
                if not hij.is_zero():
                    out = out + self._mult(hij, wi @ ext.interior_operator(ext.unit(self.q, j), self.basis), cutoff)
        return out

    def weitzenbock_rhs(self, cutoff=None) -> ModeBlockOperator:
        c2 = self.next_cutoff(self.next_cutoff(cutoff))
        tgt = ModeBox(self.q, c2)
        # flat metric: the curvature term vanishes identically
        return self.rough_laplacian(cutoff) - self.hessian_term(cutoff).lift(tgt).scale(2.0)

    def lie_derivative(self, cutoff=None) -> ModeBlockOperator:
        """Untwisted ``L_{theta#} = d iota + iota d`` via Cartan's formula."""
        c1 = self.next_cutoff(cutoff)
        flat = TorusCalculus(self.model, TwistClass((0.0,) * self.q))
        d0, d1 = flat.d(cutoff), flat.d(c1)
        i0, i1 = self.interior_theta(cutoff), self.interior_theta(c1)
        tgt = ModeBox(self.q, self.next_cutoff(c1))
        return (d1.lift(tgt) @ i0) + (i1 @ d0.lift(ModeBox(self.q, c1)))

    def nabla_theta_field(self, cutoff=None) -> ModeBlockOperator:
        """Untwisted covariant derivative along ``theta#``: ``sum_j theta_j D_j``."""
        src, tgt = self._boxes(cutoff)
        out = ModeBlockOperator(self.basis, src, tgt)
        for j in range(self.q):
            mj = multiplication_matrix(self._components[j], tgt, tgt)
            out = out + ModeBlockOperator.kron(mj @ derivative_matrix(j, src, tgt), self._identity(), src, tgt)
        return out


def twisted_d(model: TorusModel, theta: TwistClass, cutoff=None) -> ModeBlockOperator:
    return TorusCalculus(model, theta).d(cutoff)


def twisted_delta(model: TorusModel, theta: TwistClass, cutoff=None) -> ModeBlockOperator:
    return TorusCalculus(model, theta).delta(cutoff)


def laplacian(model: TorusModel, theta: TwistClass, cutoff=None) -> ModeBlockOperator:
    return TorusCalculus(model, theta).laplacian(cutoff)


def dirac(model: TorusModel, theta: TwistClass, cutoff=None) -> ModeBlockOperator:
    return TorusCalculus(model, theta).dirac(cutoff)


def required_cutoff(model: TorusModel, theta: TwistClass) -> int:
    """Smallest cutoff passing the coercivity and padding requirements.

    A mode ``k`` outside the box has twisted Laplacian block
    ``|2 pi i k - theta_bar|^2 Id``, which is invertible once
    ``2 pi |k| > |theta_bar| + margin``.  Potentials additionally need twice
    their bandwidth of padding.
    """
    radius = (np.linalg.norm(theta.constant_part) + model.margin) / TWO_PI
    base = int(np.floor(radius)) + 1
    if theta.potential is not None:
        # gauged kernel elements carry exp(+-f); their Fourier tails must be resolved
        base = max(base, exp_resolution_cutoff(theta.potential))
    return base + 2 * theta.bandwidth


def exp_resolution_cutoff(f: TrigPolynomial, tail_tol: float = EXP_TAIL_TOL, limit: int = 64) -> int:
    """Smallest cutoff at which both ``exp(f)`` and ``exp(-f)`` drop less than ``tail_tol``."""
    for k in range(1, limit + 1):
        if max(exp_series(f, 1.0, k)[1], exp_series(f, -1.0, k)[1]) <= tail_tol:
            return k
    raise CutoffError(f"exp(+-f) not resolved below cutoff {limit}")


def _count_zero(eigs: np.ndarray, tol: float) -> int:
    scale = max(float(np.max(np.abs(eigs))) if eigs.size else 0.0, 1.0)
    return int(np.sum(np.abs(eigs) < tol * scale))


def harmonic_dims(model: TorusModel, theta: TwistClass, with_spectra: bool = False) -> BettiReport:
    """Kernel dimensions of the twisted Laplacian in each degree.

    Constant twists are solved mode by mode.  With a potential the Laplacian
    is the Galerkin form ``d* d + delta* delta`` on the box, whose eigenvalues
    bound the true ones from above (Rayleigh-Ritz), so no spurious kernel can
    appear.
    """
    _check(model, theta)
    need = required_cutoff(model, theta)
    if model.cutoff < need:
        raise CutoffError(f"cutoff {model.cutoff} below the certified bound {need}")
    calc = TorusCalculus(model, theta)
    q = model.q
    report = BettiReport(
        backend="torus",
        model={"q": q, "cutoff": model.cutoff, "rank_tol": model.rank_tol},
        twist=theta.to_dict(),
        expected_euler=0,
    )
    dims = [0] * (q + 1)
    min_sv = np.inf
    if theta.is_constant:
        lap = calc.laplacian()
        for p in range(q + 1):
            for mode, block in lap.iter_mode_blocks(p, p):
                eigs = np.linalg.eigvalsh((block + block.conj().T) / 2)
                dims[p] += _count_zero(eigs, model.rank_tol)
                min_sv = min(min_sv, float(np.min(np.abs(eigs))))
                if with_spectra:
                    report.spectra += [SpectrumEntry(str(mode), p, float(e)) for e in eigs]
        report.extras["min_block_singular_value"] = min_sv
        report.extras["certificate"] = "mode blocks outside the box are |2 pi i k - theta_bar|^2 Id, invertible"
    else:
        d, delta = calc.d(), calc.delta()
        for p in range(q + 1):
            g = (d.block(p + 1, p).conj().T @ d.block(p + 1, p)) if p < q else 0
            if p > 0:
                g = g + delta.block(p - 1, p).conj().T @ delta.block(p - 1, p)
            g = g.toarray()
            eigs = np.linalg.eigvalsh((g + g.conj().T) / 2)
            dims[p] = _count_zero(eigs, model.rank_tol)
            min_sv = min(min_sv, float(np.min(np.abs(eigs))))
            if with_spectra:
                report.spectra += [SpectrumEntry("galerkin", p, float(e)) for e in eigs]
        report.extras["min_galerkin_eigenvalue"] = min_sv
        report.extras["certificate"] = "Rayleigh-Ritz upper bounds on the Laplacian spectrum"
    report.dims = dims
    report.euler_characteristic = sum((-1) ** k * n for k, n in enumerate(dims))
    return report


def _as_form(alpha) -> Dict[int, np.ndarray]:
    return {int(k): np.asarray(v, dtype=complex) for k, v in alpha.items()}


def gauge_transform(model: TorusModel, alpha: Mapping[int, np.ndarray], f: TrigPolynomial,
                    pad: Optional[int] = None, cutoff: Optional[int] = None) -> Tuple[Dict[int, np.ndarray], int]:
    """Multiply a truncated form by ``exp(-f)``.

    ``alpha`` lives on the box of ``cutoff``; the product lives on the box of
    ``cutoff + pad``.  Returns the product and the pad used.  Without an
    explicit ``pad`` the smallest pad with a discarded tail below 1e-13 is
    chosen.
    """
    c = model.cutoff if cutoff is None else cutoff
    if f.is_zero():
        return _as_form(alpha), 0
    if pad is None:
        pad = max(2 * f.bandwidth, 1)
        series, tail = exp_series(f, -1.0, pad)
        while tail > 1e-13 and pad < 64:
            pad += 1
            series, tail = exp_series(f, -1.0, pad)
    else:
        series, tail = exp_series(f, -1.0, pad)
    if tail > 1e-10:
        warnings.warn(f"exp(-f) tail mass {tail:.2e} exceeds 1e-10 at pad {pad}", PaddingWarning)
    src, tgt = ModeBox(model.q, c), ModeBox(model.q, c + pad)
    op = ModeBlockOperator.kron(multiplication_matrix(series, src, tgt), GradedOperator.identity(model.basis), src, tgt)
    return op.apply(_as_form(alpha)), pad


def _gauge_operator(model, f, pad, src_cutoff, tgt_cutoff):
    series, tail = exp_series(f, -1.0, pad)
    src, tgt = ModeBox(model.q, src_cutoff), ModeBox(model.q, tgt_cutoff)
    op = ModeBlockOperator.kron(multiplication_matrix(series, src, tgt), GradedOperator.identity(model.basis), src, tgt)
    return op, tail


def gauge_intertwining_residual(model: TorusModel, theta: TwistClass, f: TrigPolynomial,
                                rng: np.random.Generator, samples: int = 5) -> float:
    """Max of ``|d_theta(e^{-f} a) - e^{-f} d_{theta+df} a|`` over random ``a``.

    Both sides are compared on the padded box (the box of ``K + pad``).
    """
    _check(model, theta)
    K = model.cutoff
    shifted = theta.plus_exact(f)
    _, pad = gauge_transform(model, {0: np.zeros(len(model.box()))}, f)
    b = shifted.bandwidth
    e_small, _ = _gauge_operator(model, f, pad, K, K + pad)
    e_big, _ = _gauge_operator(model, f, pad, K + b, K + b + pad)
    common = ModeBox(model.q, K + pad)
    lhs_op = (TorusCalculus(model, theta).d(K + pad) @ e_small).restrict(common)
    rhs_op = (e_big @ TorusCalculus(model, shifted).d(K)).restrict(common)
    worst = 0.0
    for _ in range(samples):
        for p in range(model.q + 1):
            a = {p: random_form(rng, model.basis, model.box(), p)}
            lhs, rhs = lhs_op.apply(a), rhs_op.apply(a)
            for deg in set(lhs) | set(rhs):
                diff = lhs.get(deg, 0) - rhs.get(deg, 0)
                scale = max(np.linalg.norm(a[p]), 1.0)
                worst = max(worst, float(np.linalg.norm(diff)) / scale)
    return worst


def weitzenbock_residual(model: TorusModel, theta: TwistClass, cutoff=None) -> float:
    calc = TorusCalculus(model, theta)
    return (calc.laplacian(cutoff) - calc.weitzenbock_rhs(cutoff)).norm()


def cartan_identity_check(model: TorusModel, theta: TwistClass) -> Dict[str, float]:
    """Residuals of the homotopy formula and commutation relations for parallel twists.

    ``d_theta iota + iota d_theta = nabla_{theta#} - |theta|^2`` and
    ``[nabla_{theta#}, d_theta] = [nabla_{theta#}, delta_theta] = 0``.
    """
    _check(model, theta)
    if not theta.is_constant:
        raise ValueError("the Cartan identity check needs a parallel (constant) twist")
    calc = TorusCalculus(model, theta)
    d, delta, i_theta = calc.d(), calc.delta(), calc.interior_theta()
    nab = calc.nabla_untwisted(theta.constant_part)
    norm_sq = float(np.dot(theta.constant_part, theta.constant_part))
    ident = calc._square(GradedOperator.identity(model.basis), model.box())
    homotopy = d @ i_theta + i_theta @ d
    return {
        "norm_squared": norm_sq,
        "cartan": (homotopy - (nab - ident.scale(norm_sq))).norm(),
        "commutator_d": (nab @ d - d @ nab).norm(),
        "commutator_delta": (nab @ delta - delta @ nab).norm(),
        "nabla_theta_skew": (nab + nab.adjoint()).norm(),
    }


def _orth_basis(mat: np.ndarray, tol: float) -> np.ndarray:
    if mat.size == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    scale = max(float(s.max()) if s.size else 0.0, 1.0)
    return u[:, s > tol * scale]


def hodge_decompose(model: TorusModel, theta: TwistClass, alpha: Mapping[int, np.ndarray]):
    """Split ``alpha`` into exact, coexact and harmonic parts mode by mode.

    Requires a constant twist so that the complex is block diagonal.
    """
    _check(model, theta)
    if not theta.is_constant:
        raise ValueError("mode-by-mode decomposition needs a constant twist")
    calc = TorusCalculus(model, theta)
    d, delta = calc.d(), calc.delta()
    lap = calc.laplacian()
    basis, box = model.basis, model.box()
    alpha = _as_form(alpha)
    parts = tuple({p: np.zeros_like(v) for p, v in alpha.items()} for _ in range(3))
    tol = model.rank_tol
    for p, vec in alpha.items():
        n = basis.dim(p)
        for i in range(len(box)):
            sl = slice(i * n, (i + 1) * n)
            a = vec[sl]
            spaces = [
                _orth_basis(d.mode_block(i, p, p - 1), tol) if p > 0 else np.zeros((n, 0)),
                _orth_basis(delta.mode_block(i, p, p + 1), tol) if p < model.q else np.zeros((n, 0)),
            ]
            blk = lap.mode_block(i, p, p)
            w, v = np.linalg.eigh((blk + blk.conj().T) / 2)
            scale = max(float(np.max(np.abs(w))), 1.0)
            spaces.append(v[:, np.abs(w) < tol * scale])
            for part, u in zip(parts, spaces):
                part[p][sl] = u @ (u.conj().T @ a)
    return parts
