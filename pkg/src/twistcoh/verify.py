"""Identity suites: every operator identity as one residual per name.

Each suite returns a flat ``{name: residual}`` mapping plus informational
extras; the caller decides tolerances.  Residuals are spectral norms of
operator differences on truncated mode boxes (Frobenius upper bounds for
very large operators).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Dict

import numpy as np

from . import bochner as bo
from . import exterior as ext
from . import mapping_torus as mt
from . import torus as tt
from .exterior import GradedOperator
from .modes import ModeBlockOperator, ModeBox, TrigPolynomial, multiplication_matrix


@dataclass
class SuiteResult:
    residuals: Dict[str, float]
    extras: Dict[str, object] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)


def leibniz_function(dim: int, seed: int) -> TrigPolynomial:
    """Seeded real bandwidth-1 test function for the Leibniz rule."""
    rng = np.random.default_rng(seed)
    terms = []
    for j in range(dim):
        mode = [0] * dim
        mode[j] = 1
        terms.append({"kind": "cos", "amplitude": float(rng.normal()), "mode": mode})
        terms.append({"kind": "sin", "amplitude": float(rng.normal()), "mode": mode})
    return TrigPolynomial.from_terms(dim, terms)


def _mult_op(g: TrigPolynomial, op: GradedOperator, src: ModeBox, tgt: ModeBox) -> ModeBlockOperator:
    return ModeBlockOperator.kron(multiplication_matrix(g, src, tgt), op, src, tgt)


def torus_suite(model: tt.TorusModel, theta: tt.TwistClass, seed: int = 0, samples: int = 50) -> SuiteResult:
    calc = tt.TorusCalculus(model, theta)
    q, basis, K = model.q, model.basis, model.cutoff
    c1 = calc.next_cutoff(K)
    box = lambda c: ModeBox(q, c)  # noqa: E731
    d0, d1 = calc.d(K), calc.d(c1)
    D0, D1 = calc.dirac(K), calc.dirac(c1)
    lap = calc.laplacian(K)
    res: Dict[str, float] = {}
    res["d_squared"] = (d1 @ d0).norm()
    res["delta_squared"] = (calc.delta(c1) @ calc.delta(K)).norm()
    res["adjointness"] = (calc.delta(c1).restrict(box(K)) - d0.adjoint()).norm()
    res["d_connection"] = (calc.d_from_connection(K) - d0).norm()
    res["dirac_clifford"] = (calc.dirac_clifford(K) - D0).norm()
    res["dirac_squared"] = (D1 @ D0 - lap).norm()

    g = leibniz_function(q, seed)
    ident = GradedOperator.identity(basis)
    lhs = calc.d(K + 1) @ _mult_op(g, ident, box(K), box(K + 1))
    tgt = box(K + 1 + calc.b)
    rhs = _mult_op(g, ident, box(c1), tgt) @ d0
    for j in range(q):
        rhs = rhs + _mult_op(g.derivative(j), ext.wedge_operator(ext.unit(q, j), basis), box(K), box(K + 1)).lift(tgt)
    res["leibniz"] = (lhs - rhs).norm()

    worst = 0.0
    for i, j in product(range(q), repeat=2):
        e_i = ext.unit(q, i)
        iota = ext.interior_operator(ext.unit(q, j), basis)
        comm = calc.nabla(e_i, K) @ calc._square(iota, box(K)) - calc._square(iota, box(c1)) @ calc.nabla(e_i, K)
        worst = max(worst, comm.norm())
    res["interior_nabla"] = worst

    worst = 0.0
    for i, j in product(range(q), repeat=2):
        if i < j:
            ei, ej = ext.unit(q, i), ext.unit(q, j)
            worst = max(worst, (calc.nabla(ei, c1) @ calc.nabla(ej, K) - calc.nabla(ej, c1) @ calc.nabla(ei, K)).norm())
    res["curvature_twist"] = worst

    res["weitzenbock"] = tt.weitzenbock_residual(model, theta)
    res["lie_lemma"] = bo.torus_lemma_residual(model, theta)
    boch = bo.torus_bochner(model, theta, samples=samples, seed=seed)
    res["bochner_identity"] = boch.identity_residual
    out = SuiteResult(res, {"bochner": boch.to_dict(), "leibniz_seed": seed})
    if theta.is_constant:
        cartan = tt.cartan_identity_check(model, theta)
        out.extras["theta_norm_squared"] = cartan.pop("norm_squared")
        res.update(cartan)
    else:
        out.skipped["cartan"] = "needs a parallel (constant) twist"
    return out


def mapping_torus_suite(model: mt.MappingTorusModel, theta: mt.BasicTwist, seed: int = 0,
                        samples: int = 50) -> SuiteResult:
    calc = mt.tilde_calculus(model, theta)
    q, basis, K = model.q, model.basis, model.cutoff
    c1 = calc.next_cutoff(K)
    box = lambda c: ModeBox(1, c)  # noqa: E731
    d0, d1 = calc.d(K), calc.d(c1)
    dl0, dl1 = mt.tilde_delta(model, theta, K), mt.tilde_delta(model, theta, c1)
    lap, rough, hess, curv = mt.weitzenbock_parts(model, theta, K)
    res: Dict[str, float] = {}
    res["d_squared"] = (d1 @ d0).norm()
    res["delta_squared"] = (dl1 @ dl0).norm()
    res["d_structure"] = (calc.d_structure(K) - d0).norm()
    res["adjointness"] = (dl1.restrict(box(K)) - d0.adjoint()).norm()
    res["codifferential"] = (calc.codifferential(K) - dl0).norm()
    res["dirac_squared"] = ((d1 + dl1) @ (d0 + dl0) - lap).norm()

    g = leibniz_function(1, seed)
    ident = GradedOperator.identity(basis)
    lhs = calc.d(K + 1) @ _mult_op(g, ident, box(K), box(K + 1))
    tgt = box(K + 1 + calc.b)
    rhs = _mult_op(g, ident, box(c1), tgt) @ d0
    rhs = rhs + _mult_op(g.derivative(0), calc.wedge(0), box(K), box(K + 1)).lift(tgt)
    res["leibniz"] = (lhs - rhs).norm()

    # [nabla_i, iota_j] = iota_{nabla_i e_j}
    worst = 0.0
    gam = model.christoffel
    for i, j in product(range(q), repeat=2):
        iota = calc.interior(j)
        expected = GradedOperator(basis, ext.REAL)
        for a in range(q):
            if gam[i][a, j]:
                expected = expected + calc.interior(a).scale(gam[i][a, j])
        comm = calc.nabla(i, K) @ calc.square(iota, box(K)) - calc.square(iota, box(c1)) @ calc.nabla(i, K)
        worst = max(worst, (comm - calc._pointwise(expected, K)).norm())
    res["interior_nabla"] = worst

    res["weitzenbock"] = (lap - (rough - hess.scale(2.0) + curv)).norm()
    res["lie_lemma"] = mt.lie_lemma_residual(model, theta, K)
    res["curvature_twist"] = max(mt.twisted_curvature_residual(model, g_, min(K, 6))
                                 for g_ in (mt.BasicTwist(0.0), theta, mt._shift_for(model, theta)))
    boch = bo.mapping_torus_bochner(model, theta, samples=samples, seed=seed)
    res["bochner_identity"] = boch.identity_residual
    extras = {
        "bochner": boch.to_dict(),
        "leibniz_seed": seed,
        "weitzenbock_term_norms": {"rough": rough.norm(), "hessian": hess.norm(), "curvature": curv.norm()},
    }
    return SuiteResult(res, extras, {"cartan": "the dt direction is not parallel on this model"})


def run_suite(model, theta, seed: int = 0, samples: int = 50) -> SuiteResult:
    if isinstance(model, tt.TorusModel):
        return torus_suite(model, theta, seed, samples)
    if isinstance(model, mt.MappingTorusModel):
        return mapping_torus_suite(model, theta, seed, samples)
    raise TypeError(f"no identity suite for {type(model).__name__}")


__all__ = ["SuiteResult", "leibniz_function", "mapping_torus_suite", "run_suite", "torus_suite"]
