"""Basic complexes of suspension flows on mapping tori.

The model is a frame ``E, V_1 .. V_{q-1}, W`` with constant brackets

    [E, V_j] = mu_j V_j,     [E, W] = nu W,

where ``E = d/dt`` is the base direction, the ``V_j`` are transverse and
``W`` spans the leaves.  For a hyperbolic ``A`` in ``SL(2, Z)`` the flow
runs along the contracting eigendirection: ``nu = ln lambda_2`` and the
single transverse rate is ``mu = ln lambda_1``.

Basic forms have coefficients depending on ``t`` only.  They are stored on
Fourier modes in ``t`` against the transverse coframe ``dt, e^1 .. e^{q-1}``
with the same mode-major layout as the torus backend.  On basic forms
``nabla_E`` is ``d/dt`` (the frame is parallel along ``E``) and
``nabla_{V_j}`` is the pointwise derivation built from the Christoffel
matrix of ``V_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import exterior as ext
from .curvature import CurvatureReport, curvature_matrices, curvature_operator, koszul_connection, sectional_curvatures
from .exterior import FormBasis, GradedOperator
from .modes import (
    TWO_PI,
    ModeBlockOperator,
    ModeBox,
    TrigPolynomial,
    derivative_matrix,
    inclusion_matrix,
    multiplication_matrix,
)
from .report import BettiReport, SpectrumEntry

DEFAULT_RANK_TOL = 1e-8
UNIMODULAR_TOL = 1e-12
CROSSCHECK_TOL = 1e-10


class CutoffError(ValueError):
    """Fourier cutoff below the kernel-support bound."""


class ConventionError(RuntimeError):
    """The assembled adjoint disagrees with the coderivative formula."""


@dataclass(frozen=True)
class MappingTorusModel:
    """Rates of a unimodular suspension-flow model.

    Attributes:
        mu: transverse dilation rates, one per direction ``V_j``.
        nu: leaf dilation rate.
        cutoff: Fourier cutoff in ``t``.
    """

    mu: Tuple[float, ...]
    nu: float
    cutoff: int = 16
    rank_tol: float = DEFAULT_RANK_TOL
    margin: float = 1.0
    matrix: Optional[Tuple[Tuple[int, ...], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        object.__setattr__(self, "nu", float(self.nu))
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")
        if abs(sum(self.mu) + self.nu) > UNIMODULAR_TOL:
            raise ValueError(f"rates must be volume preserving: sum(mu) + nu = {sum(self.mu) + self.nu:.3e}")

    @classmethod
    def from_matrix(cls, A: Sequence[Sequence[int]], cutoff: int = 16, **kw) -> "MappingTorusModel":
        return from_matrix(A, cutoff=cutoff, **kw)

    @property
    def q(self) -> int:
        """Transverse codimension: ``t`` plus the ``V_j``."""
        return len(self.mu) + 1

    @property
    def basis(self) -> FormBasis:
        return FormBasis(self.q)

    @property
    def kappa(self) -> float:
        """Mean-curvature coefficient of ``dt`` from the rates."""
        return self.nu

    def box(self, cutoff: Optional[int] = None) -> ModeBox:
        return ModeBox(1, self.cutoff if cutoff is None else cutoff)

    def full_brackets(self) -> np.ndarray:
        """``c[i, j, k]`` on the full frame ``E, V_1.., W``."""
        n = self.q + 1
        c = np.zeros((n, n, n))
        for j, m in enumerate(self.mu, start=1):
            c[0, j, j], c[j, 0, j] = m, -m
        c[0, n - 1, n - 1], c[n - 1, 0, n - 1] = self.nu, -self.nu
        return c

    def transverse_brackets(self) -> np.ndarray:
        q = self.q
        return self.full_brackets()[:q, :q, :q]

    @cached_property
    def christoffel(self) -> List[np.ndarray]:
        """Transverse Levi-Civita matrices (projection of the ambient connection)."""
        full = koszul_connection(self.full_brackets())
        q = self.q
        return [g[:q, :q] for g in full[:q]]

    @cached_property
    def divergence(self) -> np.ndarray:
        """Transverse divergence ``sum_j g(nabla_{e_j} e_i, e_j)`` of each frame field."""
        q = self.q
        return np.array([sum(self.christoffel[j][j, i] for j in range(q)) for i in range(q)])

    def to_dict(self) -> dict:
        out = {"mu": list(self.mu), "nu": self.nu, "cutoff": self.cutoff, "rank_tol": self.rank_tol}
        if self.matrix is not None:
            out["matrix"] = [list(r) for r in self.matrix]
        return out


def from_matrix(A: Sequence[Sequence[int]], cutoff: int = 16, **kw) -> MappingTorusModel:
    """Model of the suspension of a hyperbolic ``A`` in ``SL(2, Z)``."""
    a = np.array(A, dtype=int)
    if a.shape != (2, 2):
        raise ValueError("A must be 2 x 2")
    det = int(round(np.linalg.det(a)))
    if det != 1:
        raise ValueError(f"det A = {det}, need 1")
    tr = int(a.trace())
    if tr <= 2:
        raise ValueError(f"trace {tr} <= 2: eigenvalues are not real, positive and different from 1")
    disc = np.sqrt(tr * tr - 4.0)
    lam1 = (tr + disc) / 2
    # ln(lam2) = -ln(lam1) exactly; use it to keep the model unimodular to the last bit
    mu = np.log(lam1)
    return MappingTorusModel((mu,), -mu, cutoff=cutoff, matrix=tuple(tuple(int(x) for x in r) for r in a), **kw)


def eigenvalues(model: MappingTorusModel) -> Tuple[float, float]:
    """``(lambda_1, lambda_2)`` for a model built from a matrix."""
    if model.matrix is None:
        raise ValueError("model was not built from a matrix")
    tr = model.matrix[0][0] + model.matrix[1][1]
    disc = np.sqrt(tr * tr - 4.0)
    return (tr + disc) / 2, (tr - disc) / 2


@dataclass(frozen=True)
class BasicTwist:
    """Closed basic 1-form ``c dt + df`` with ``f`` a trigonometric polynomial in ``t``."""

    c: float
    potential: Optional[TrigPolynomial] = None

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))
        if self.potential is not None:
            if self.potential.dim != 1:
                raise ValueError("basic potentials depend on t only")
            if not self.potential.is_real():
                raise ValueError("potential must be real")
            if self.potential.is_zero():
                object.__setattr__(self, "potential", None)

    @property
    def bandwidth(self) -> int:
        return 0 if self.potential is None else self.potential.bandwidth

    def dt_coefficient(self) -> TrigPolynomial:
        out = TrigPolynomial.constant(1, self.c)
        if self.potential is not None:
            out = out + self.potential.derivative(0)
        return out

    def __add__(self, other: "BasicTwist") -> "BasicTwist":
        pots = [p for p in (self.potential, other.potential) if p is not None]
        pot = None if not pots else (pots[0] if len(pots) == 1 else pots[0] + pots[1])
        return BasicTwist(self.c + other.c, pot)

    def scaled(self, s: float) -> "BasicTwist":
        return BasicTwist(self.c * s, None if self.potential is None else self.potential * s)

    def to_dict(self) -> dict:
        return {"c": self.c, "potential": [] if self.potential is None else self.potential.to_terms()}


@dataclass(frozen=True)
class MeanCurvatureForm:
    kappa_t: float
    rate_value: float
    crosscheck_residual: float

    def as_twist(self) -> BasicTwist:
        return BasicTwist(self.kappa_t)


class BasicCalculus:
    """Operators on basic forms twisted by ``shift``.

    ``shift`` is the 1-form subtracted in the connection
    ``nabla_v - shift(v)``; for the untilded groups ``H_{b, gamma}`` it is
    ``gamma``, for the tilde operators with twist ``theta`` it is
    ``kappa/2 + theta``.
    """

    def __init__(self, model: MappingTorusModel, shift: BasicTwist):
        self.model = model
        self.shift = shift
        self.q = model.q
        self.basis = model.basis
        self.b = shift.bandwidth
        self.phi = shift.dt_coefficient()

    def boxes(self, cutoff=None) -> Tuple[ModeBox, ModeBox]:
        c = self.model.cutoff if cutoff is None else cutoff
        return ModeBox(1, c), ModeBox(1, c + self.b)

    def next_cutoff(self, cutoff=None) -> int:
        return (self.model.cutoff if cutoff is None else cutoff) + self.b

    def _pointwise(self, op: GradedOperator, cutoff=None) -> ModeBlockOperator:
        src, tgt = self.boxes(cutoff)
        return ModeBlockOperator.kron(inclusion_matrix(src, tgt), op, src, tgt)

    def _mult(self, g: TrigPolynomial, op: GradedOperator, cutoff=None) -> ModeBlockOperator:
        src, tgt = self.boxes(cutoff)
        return ModeBlockOperator.kron(multiplication_matrix(g, src, tgt), op, src, tgt)

    def square(self, op: GradedOperator, box: ModeBox) -> ModeBlockOperator:
        return ModeBlockOperator.kron(inclusion_matrix(box, box), op, box, box)

    def identity(self) -> GradedOperator:
        return GradedOperator.identity(self.basis)

    def connection_derivation(self, i: int) -> GradedOperator:
        """Pointwise part of ``nabla_{e_i}`` on forms (zero for ``E``)."""
        return ext.derivation_operator(self.model.christoffel[i], self.basis)

    def nabla_untwisted(self, i: int, cutoff=None) -> ModeBlockOperator:
        src, tgt = self.boxes(cutoff)
        out = self._pointwise(self.connection_derivation(i), cutoff)
        if i == 0:
            out = out + ModeBlockOperator.kron(derivative_matrix(0, src, tgt), self.identity(), src, tgt)
        return out

    def nabla(self, i: int, cutoff=None) -> ModeBlockOperator:
        out = self.nabla_untwisted(i, cutoff)
        if i == 0:
            out = out - self._mult(self.phi, self.identity(), cutoff)
        return out

    def wedge(self, i: int) -> GradedOperator:
        return ext.wedge_operator(ext.unit(self.q, i), self.basis)

    def interior(self, i: int) -> GradedOperator:
        return ext.interior_operator(ext.unit(self.q, i), self.basis)

    def d(self, cutoff=None) -> ModeBlockOperator:
        """``sum_i e^i ^ nabla_{e_i}``; torsion freeness makes this ``d_b - shift ^``."""
        _, tgt = self.boxes(cutoff)
        out = None
        for i in range(self.q):
            term = self.square(self.wedge(i), tgt) @ self.nabla(i, cutoff)
            out = term if out is None else out + term
        return out

    def d_structure(self, cutoff=None) -> ModeBlockOperator:
        """``d_b - shift ^`` from the structure equations ``de^j = -mu_j dt ^ e^j``.

        Independent of the Christoffel route; used as a cross-check.
        """
        src, tgt = self.boxes(cutoff)
        dt = self.wedge(0)
        out = ModeBlockOperator.kron(derivative_matrix(0, src, tgt), dt, src, tgt)
        # on e^S: d(e^S) = -(sum_{j in S} mu_j) dt ^ e^S
        weights = GradedOperator(self.basis, ext.REAL)
        for k in range(self.q + 1):
            diag = np.array([-sum(self.model.mu[j - 1] for j in S if j > 0) for S in self.basis.degree_bases[k]])
            weights.blocks[(k, k)] = np.diag(diag)
        out = out + self._pointwise(dt @ weights, cutoff)
        return out - self._mult(self.phi, dt, cutoff)

    def delta_formula(self, kappa_t: float, cutoff=None) -> ModeBlockOperator:
        """``-sum_i iota_{e_i} nabla_{e_i} + iota_{kappa#}`` with the shifted connection."""
        src, tgt = self.boxes(cutoff)
        out = self._pointwise(self.interior(0), cutoff).scale(kappa_t)
        for i in range(self.q):
            out = out - self.square(self.interior(i), tgt) @ self.nabla(i, cutoff)
        return out

    def codifferential(self, cutoff=None) -> ModeBlockOperator:
        """Adjoint of :meth:`d`: ``-sum_i iota_{e_i} nabla_{e_i} + iota_{kappa#} - iota_{shift#}``."""
        src, tgt = self.boxes(cutoff)
        out = self._pointwise(self.interior(0), cutoff).scale(self.model.kappa)
        out = out - self._mult(self.phi, self.interior(0), cutoff)
        for i in range(self.q):
            out = out - self.square(self.interior(i), tgt) @ self.nabla_untwisted(i, cutoff).lift(tgt)
        return out

    def nabla_adjoint(self, i: int, theta_coeff: TrigPolynomial, cutoff=None) -> ModeBlockOperator:
        """``-nabla_v - div v - 2 theta(v)`` for the frame field ``e_i``."""
        out = -self.nabla(i, cutoff) - self._pointwise(self.identity(), cutoff).scale(self.model.divergence[i])
        if i == 0:
            out = out - self._mult(theta_coeff * 2.0, self.identity(), cutoff)
        return out


def _shift_for(model: MappingTorusModel, theta: BasicTwist) -> BasicTwist:
    return BasicTwist(0.5 * model.kappa) + theta


def tilde_calculus(model: MappingTorusModel, theta: BasicTwist) -> BasicCalculus:
    return BasicCalculus(model, _shift_for(model, theta))


def mean_curvature(model: MappingTorusModel, cutoff: Optional[int] = None,
                   tol: float = CROSSCHECK_TOL) -> MeanCurvatureForm:
    """Mean curvature coefficient fixed by the coderivative formula.

    ``d_b`` is assembled from the structure equations, its true adjoint is
    the conjugate transpose (unimodular models have constant fibre volume),
    and ``kappa_t`` is the least-squares coefficient making
    ``-sum iota nabla + kappa_t iota_E`` equal to that adjoint.
    """
    calc = BasicCalculus(model, BasicTwist(0.0))
    K = model.cutoff if cutoff is None else cutoff
    target = calc.d_structure(K).adjoint()
    base = calc.delta_formula(0.0, K)
    unit_part = calc._pointwise(calc.interior(0), K)
    diff = (target - base).dense()
    u = unit_part.dense()
    kappa_t = float(np.real(np.vdot(u, diff)) / np.real(np.vdot(u, u)))
    resid = (target - calc.delta_formula(kappa_t, K)).norm()
    if resid > tol or abs(kappa_t - model.nu) > tol:
        raise ConventionError(f"coderivative cross-check failed: kappa_t={kappa_t}, residual={resid:.3e}")
    return MeanCurvatureForm(kappa_t, model.nu, resid)


# ------------------------------------------------------------------ cohomology


def multiplier_radius(model: MappingTorusModel, gamma: BasicTwist) -> float:
    """Largest ``|sum_{j in S} mu_j + c|`` over subsets ``S``."""
    best = 0.0
    for r in range(len(model.mu) + 1):
        for S in combinations(model.mu, r):
            best = max(best, abs(sum(S) + gamma.c))
    return best


def required_cutoff(model: MappingTorusModel, gamma: BasicTwist) -> int:
    radius = (multiplier_radius(model, gamma) + model.margin) / TWO_PI
    base = int(np.floor(radius)) + 1
    if gamma.potential is not None:
        from .torus import exp_resolution_cutoff

        base = max(base, exp_resolution_cutoff(gamma.potential))
    return base + 2 * gamma.bandwidth


def _count_zero(eigs: np.ndarray, tol: float) -> int:
    scale = max(float(np.max(np.abs(eigs))) if eigs.size else 0.0, 1.0)
    return int(np.sum(np.abs(eigs) < tol * scale))


def basic_twisted_betti(model: MappingTorusModel, gamma: BasicTwist, with_spectra: bool = False) -> BettiReport:
    """``dim H^k_{b, gamma}`` from the twisted basic complex on Fourier modes."""
    need = required_cutoff(model, gamma)
    if model.cutoff < need:
        raise CutoffError(f"cutoff {model.cutoff} below the kernel-support bound {need}")
    calc = BasicCalculus(model, gamma)
    q = model.q
    d = calc.d_structure()
    report = BettiReport(backend="mapping_torus", model=model.to_dict(), twist=gamma.to_dict(), expected_euler=0)
    dims = [0] * (q + 1)
    if gamma.potential is None:
        for p in range(q + 1):
            for i, mode in enumerate(model.box().modes):
                blk = np.zeros((model.basis.dim(p),) * 2, dtype=complex)
                if p < q:
                    dp = d.mode_block(i, p + 1, p)
                    blk += dp.conj().T @ dp
                if p > 0:
                    dm = d.mode_block(i, p, p - 1)
                    blk += dm @ dm.conj().T
                eigs = np.linalg.eigvalsh(blk)
                dims[p] += _count_zero(eigs, model.rank_tol)
                if with_spectra:
                    report.spectra += [SpectrumEntry(str(mode), p, float(e)) for e in eigs]
    else:
        # Galerkin form d* d + delta* delta on the box; Ritz values bound the spectrum from above
        delta = calc.codifferential()
        for p in range(q + 1):
            g = 0
            if p < q:
                dp = d.block(p + 1, p)
                g = dp.conj().T @ dp
            if p > 0:
                dm = delta.block(p - 1, p)
                g = g + dm.conj().T @ dm
            g = g.toarray()
            eigs = np.linalg.eigvalsh((g + g.conj().T) / 2)
            dims[p] = _count_zero(eigs, model.rank_tol)
            if with_spectra:
                report.spectra += [SpectrumEntry("galerkin", p, float(e)) for e in eigs]
    report.dims = dims
    report.euler_characteristic = sum((-1) ** k * n for k, n in enumerate(dims))
    return report


def multiplier_dims(model: MappingTorusModel, c: float, cutoff: Optional[int] = None) -> List[int]:
    """Closed-form dims for ``gamma = c dt`` from the Fourier multipliers.

    For each subset ``S`` of transverse directions the multiplier on
    ``f(t) e^S`` is ``2 pi i n - sum_{j in S} mu_j - c``; each vanishing
    multiplier contributes one class in degree ``|S|`` and one in ``|S|+1``.
    """
    q = model.q
    K = model.cutoff if cutoff is None else cutoff
    dims = [0] * (q + 1)
    for r in range(q):
        for S in combinations(model.mu, r):
            for n in range(-K, K + 1):
                if abs(TWO_PI * 1j * n - sum(S) - c) < 1e-9:
                    dims[r] += 1
                    dims[r + 1] += 1
    return dims


@dataclass
class ScanResult:
    values: Dict[float, int]
    locus: List[float]
    kappa_t: float
    duality: Dict[float, Tuple[int, int]]
    euler: Dict[float, int]

    @property
    def duality_ok(self) -> bool:
        return all(a == b for a, b in self.duality.values())

    def to_dict(self) -> dict:
        return {
            "top_degree": {repr(c): d for c, d in self.values.items()},
            "nonvanishing_locus": self.locus,
            "kappa_t": self.kappa_t,
            "locus_is_kappa": self.locus == [self.kappa_t],
            "duality_ok": self.duality_ok,
            "euler": {repr(c): e for c, e in self.euler.items()},
        }


def top_degree_scan(model: MappingTorusModel, c_values: Iterable[float], include_kappa: bool = True) -> ScanResult:
    """``dim H^q_{b, c dt}`` over a list of ``c``.

    The class of ``kappa`` is appended when ``include_kappa`` is set and it
    is not already in the list (a uniform grid rarely contains it).  Each
    value is paired with ``dim H^0_{b, kappa - c dt}`` for the duality check.
    """
    kappa_t = model.kappa
    cs = [float(c) for c in c_values]
    if include_kappa and not any(abs(c - kappa_t) < 1e-14 for c in cs):
        cs.append(kappa_t)
    cs = sorted(cs)
    q = model.q
    values, duality, euler = {}, {}, {}
    for c in cs:
        rep = basic_twisted_betti(_fit(model, c), BasicTwist(c))
        values[c] = rep.dims[q]
        euler[c] = rep.euler_characteristic
        dual = basic_twisted_betti(_fit(model, kappa_t - c), BasicTwist(kappa_t - c))
        duality[c] = (rep.dims[q], dual.dims[0])
    locus = [c for c, v in values.items() if v != 0]
    return ScanResult(values, locus, kappa_t, duality, euler)


def _fit(model: MappingTorusModel, c: float) -> MappingTorusModel:
    """Same model with the cutoff raised to the certified bound if needed."""
    need = required_cutoff(model, BasicTwist(c))
    if model.cutoff >= need:
        return model
    return MappingTorusModel(model.mu, model.nu, need, model.rank_tol, model.margin, model.matrix)


# ------------------------------------------------------------------- curvature


def _form_curvature(model: MappingTorusModel) -> Dict[Tuple[int, int], GradedOperator]:
    R = curvature_matrices(model.transverse_brackets(), model.christoffel)
    q = model.q
    return {(i, j): ext.derivation_operator(R[i, j], model.basis) for i in range(q) for j in range(q)}


def curvature_endomorphism(model: MappingTorusModel) -> GradedOperator:
    """``sum_{i<j} e_i . e_j . R(e_i, e_j)`` on forms."""
    q, basis = model.q, model.basis
    forms = _form_curvature(model)
    out = GradedOperator(basis, ext.REAL)
    for i, j in combinations(range(q), 2):
        ci = ext.clifford_operator(ext.unit(q, i), basis)
        cj = ext.clifford_operator(ext.unit(q, j), basis)
        out = out + ci @ cj @ forms[(i, j)]
    return out


def twisted_curvature_residual(model: MappingTorusModel, gamma: BasicTwist, cutoff: Optional[int] = None) -> float:
    """``|R^gamma - R|`` with ``R^gamma`` assembled from the twisted connection on modes."""
    calc = BasicCalculus(model, gamma)
    K = model.cutoff if cutoff is None else cutoff
    c1 = calc.next_cutoff(K)
    c = model.transverse_brackets()
    forms = _form_curvature(model)
    tgt = ModeBox(1, calc.next_cutoff(c1))
    worst = 0.0
    for i, j in combinations(range(model.q), 2):
        rg = calc.nabla(i, c1) @ calc.nabla(j, K) - calc.nabla(j, c1) @ calc.nabla(i, K)
        for k in range(model.q):
            if c[i, j, k]:
                rg = rg - calc.nabla(k, K).lift(tgt).scale(c[i, j, k])
        flat = ModeBlockOperator.kron(inclusion_matrix(ModeBox(1, K), tgt), forms[(i, j)], ModeBox(1, K), tgt)
        worst = max(worst, (rg - flat).norm())
    return worst


def transverse_curvature(model: MappingTorusModel, gammas: Sequence[BasicTwist] = (),
                         cutoff: Optional[int] = None) -> CurvatureReport:
    q = model.q
    R = curvature_matrices(model.transverse_brackets(), model.christoffel)
    op = curvature_operator(R)
    eig = sorted(float(x) for x in np.linalg.eigvalsh(np.asarray(op, dtype=float))) if op.size else []
    rep = CurvatureReport(q, sectional_curvatures(R), eig, R)
    rep.extras["curvature_endomorphism_norm"] = curvature_endomorphism(model).norm()
    rep.extras["twist_residuals"] = {repr(g.c): twisted_curvature_residual(model, g, cutoff or min(model.cutoff, 6))
                                     for g in gammas}
    return rep


# --------------------------------------------------------- Weitzenbock, Bochner


def hessian_coefficients(model: MappingTorusModel, theta: BasicTwist) -> List[List[TrigPolynomial]]:
    """``H[i][b]``: the ``e_b`` component of ``nabla_{e_i} theta#`` as functions of ``t``."""
    q = model.q
    phi = theta.dt_coefficient()
    out = []
    for i in range(q):
        row = []
        for b in range(q):
            if i == 0:
                row.append(phi.derivative(0) if b == 0 else TrigPolynomial(1))
            else:
                row.append(phi * float(model.christoffel[i][b, 0]))
        out.append(row)
    return out


def weitzenbock_parts(model: MappingTorusModel, theta: BasicTwist, cutoff: Optional[int] = None):
    """``(laplacian, rough, hessian, curvature)`` on the common target box."""
    calc = tilde_calculus(model, theta)
    K = model.cutoff if cutoff is None else cutoff
    c1 = calc.next_cutoff(K)
    tgt = ModeBox(1, calc.next_cutoff(c1))
    d0, d1 = calc.d(K), calc.d(c1)
    delta0 = tilde_delta(model, theta, K)
    delta1 = tilde_delta(model, theta, c1)
    lap = d1 @ delta0 + delta1 @ d0
    phi = theta.dt_coefficient()
    rough = None
    for i in range(model.q):
        term = calc.nabla_adjoint(i, phi, c1) @ calc.nabla(i, K)
        rough = term if rough is None else rough + term
    src = ModeBox(1, K)
    hess = ModeBlockOperator(model.basis, src, ModeBox(1, c1))
    H = hessian_coefficients(model, theta)
    for i in range(model.q):
        ci = ext.clifford_operator(ext.unit(model.q, i), model.basis)
        for b in range(model.q):
            if H[i][b].is_zero():
                continue
            op = ci @ ext.interior_operator(ext.unit(model.q, b), model.basis)
            hess = hess + calc._mult(H[i][b], op, K)
    curv = ModeBlockOperator.kron(inclusion_matrix(src, tgt), curvature_endomorphism(model), src, tgt)
    return lap, rough, hess.lift(tgt), curv


def tilde_delta(model: MappingTorusModel, theta: BasicTwist, cutoff: Optional[int] = None) -> ModeBlockOperator:
    """``delta_b - kappa/2 iota - theta iota`` from the formula ``-sum iota nabla~ - 2 iota_theta``."""
    calc = tilde_calculus(model, theta)
    phi = theta.dt_coefficient()
    out = calc._mult(phi, calc.interior(0), cutoff).scale(-2.0)
    _, tgt = calc.boxes(cutoff)
    for i in range(model.q):
        out = out - calc.square(calc.interior(i), tgt) @ calc.nabla(i, cutoff)
    return out


def weitzenbock_residual(model: MappingTorusModel, theta: BasicTwist, cutoff: Optional[int] = None) -> float:
    lap, rough, hess, curv = weitzenbock_parts(model, theta, cutoff)
    return (lap - (rough - hess.scale(2.0) + curv)).norm()


def lie_lemma_residual(model: MappingTorusModel, theta: BasicTwist, cutoff: Optional[int] = None) -> float:
    """``|L_v - nabla_v - sum e^i ^ iota_{nabla_{e_i} v}|`` for ``v = theta#``.

    ``L_v`` comes from Cartan's formula ``d iota_v + iota_v d`` with the
    untwisted basic ``d``; ``nabla_v = phi nabla_E`` since ``v = phi E``.
    """
    flat = BasicCalculus(model, BasicTwist(0.0))
    K = model.cutoff if cutoff is None else cutoff
    b = theta.bandwidth
    phi = theta.dt_coefficient()
    src, tgt = ModeBox(1, K), ModeBox(1, K + b)

    def iota(c0):
        s_, t_ = ModeBox(1, c0), ModeBox(1, c0 + b)
        return ModeBlockOperator.kron(multiplication_matrix(phi, s_, t_), flat.interior(0), s_, t_)

    lie = flat.d(K + b) @ iota(K) + iota(K) @ flat.d(K)
    nab_v = ModeBlockOperator.kron(multiplication_matrix(phi, src, tgt), GradedOperator.identity(model.basis),
                                   src, tgt) @ flat.nabla_untwisted(0, K)
    return (lie - nab_v - lemma_term(model, theta, K)).norm()


def lemma_term(model: MappingTorusModel, theta: BasicTwist, cutoff: Optional[int] = None) -> ModeBlockOperator:
    """``sum_i e^i ^ iota_{nabla_{e_i} theta#}`` assembled from the connection blocks."""
    K = model.cutoff if cutoff is None else cutoff
    b = theta.bandwidth
    src, tgt = ModeBox(1, K), ModeBox(1, K + b)
    H = hessian_coefficients(model, theta)
    out = ModeBlockOperator(model.basis, src, tgt)
    for i in range(model.q):
        wi = ext.wedge_operator(ext.unit(model.q, i), model.basis)
        for j in range(model.q):
            if H[i][j].is_zero():
                continue
            op = wi @ ext.interior_operator(ext.unit(model.q, j), model.basis)
            out = out + ModeBlockOperator.kron(multiplication_matrix(H[i][j], src, tgt), op, src, tgt)
    return out
