"""Acceptance suite: one test per criterion, tolerances pinned."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from twistcoh import bochner as bo
from twistcoh import cli
from twistcoh import curvature as cv
from twistcoh import lcs
from twistcoh import mapping_torus as mt
from twistcoh import simplicial as sc
from twistcoh import torus as tt
from twistcoh.modes import TrigPolynomial
from twistcoh.simplicial import LogRational

from . import oracles
from .conftest import random_potential

A = [[2, 1], [1, 1]]
LN_LAMBDA1 = math.log((3 + math.sqrt(5)) / 2)
LN_LAMBDA2 = math.log((3 - math.sqrt(5)) / 2)
BUDGET_SECONDS = 60.0


@pytest.fixture(autouse=True)
def desk_scale():
    start = time.perf_counter()
    yield
    assert time.perf_counter() - start < BUDGET_SECONDS


def test_parallel_twist_vanishing():
    K = 5
    unit = tt.TwistClass((1.0, 0.0))
    rep = tt.harmonic_dims(tt.TorusModel(2, K), unit)
    assert rep.dims == [0, 0, 0] == oracles.torus_constant_dims(2, (1.0, 0.0), K)
    # d on mode k is the Koszul map of m = 2 pi i k - theta; its singular value is |m|
    d = tt.TorusCalculus(tt.TorusModel(2, K), unit).d()
    smallest = min(np.linalg.svd(blk, compute_uv=False).min() for _, blk in d.iter_mode_blocks(1, 0))
    assert smallest >= 0.5
    for k1 in range(-K, K + 1):
        assert abs(complex(-1.0, 2 * math.pi * k1)) >= 0.5
    assert rep.extras["min_block_singular_value"] >= 0.5
    assert tt.harmonic_dims(tt.TorusModel(2, K), tt.TwistClass((0.0, 0.0))).dims == [1, 2, 1]


def test_gauge_invariance():
    rng = np.random.default_rng(2)
    for theta_bar in [(0.0, 0.0), (1.0, 0.0)]:
        base = tt.TwistClass(theta_bar)
        expected = tt.harmonic_dims(tt.TorusModel(2, 4), base).dims
        for _ in range(5):
            f = random_potential(rng)
            shifted = base.plus_exact(f)
            K = tt.required_cutoff(tt.TorusModel(2), shifted)
            assert tt.harmonic_dims(tt.TorusModel(2, K), shifted).dims == expected
            assert tt.gauge_intertwining_residual(tt.TorusModel(2, 3), base, f, rng, samples=2) <= 1e-8


def test_weitzenbock_identity():
    assert tt.weitzenbock_residual(tt.TorusModel(2, 4), tt.TwistClass((0.6, 0.8))) <= 1e-12
    assert tt.weitzenbock_residual(tt.TorusModel(3, 2), tt.TwistClass((0.3, -1.2, 2.0))) <= 1e-12
    rng = np.random.default_rng(3)
    theta = tt.TwistClass((0.5, 0.0), random_potential(rng))
    assert tt.weitzenbock_residual(tt.TorusModel(2, 4), theta) <= 1e-8
    model = mt.from_matrix(A)
    lap, rough, hess, curv = mt.weitzenbock_parts(model, mt.BasicTwist(0.3))
    assert min(rough.norm(), hess.norm(), curv.norm()) > 1e-3
    assert (lap - (rough - hess.scale(2.0) + curv)).norm() <= 1e-8


def test_cartan_commutation_identities():
    for theta_bar in [(1.0, 0.0), (0.6, 0.8), (-2.0, 0.5)]:
        out = tt.cartan_identity_check(tt.TorusModel(2, 4), tt.TwistClass(theta_bar))
        assert max(out["cartan"], out["commutator_d"], out["commutator_delta"]) <= 1e-12
    out = tt.cartan_identity_check(tt.TorusModel(2, 4), tt.TwistClass((0.6, 0.8)))
    assert out["norm_squared"] == 1.0


def test_mapping_torus_basic_cohomology():
    model = mt.from_matrix(A)
    kappa = mt.mean_curvature(model)
    assert abs(kappa.kappa_t - (-math.log((3 + math.sqrt(5)) / 2))) <= 1e-12
    assert kappa.crosscheck_residual <= 1e-10
    cases = {0.0: [1, 1, 0], kappa.kappa_t: [0, 1, 1], 1.0: [0, 0, 0]}
    for c, expected in cases.items():
        rep = mt.basic_twisted_betti(mt._fit(model, c), mt.BasicTwist(c))
        assert rep.dims == expected == oracles.mapping_torus_dims([LN_LAMBDA1], c)
    for c in np.linspace(-2, 2, 21).tolist() + [LN_LAMBDA2]:
        rep = mt.basic_twisted_betti(mt._fit(model, c), mt.BasicTwist(c))
        assert rep.euler_characteristic == 0


def test_top_degree_scan():
    rep = cli.run("scan", {"backend": "mapping_torus", "model": {"matrix": A},
                           "scan": {"linspace": [-2, 2, 21]}})
    top = {float(c): v for c, v in rep.extras["scan"]["top_degree"].items()}
    assert len(top) == 22
    nonzero = [c for c, v in top.items() if v != 0]
    assert nonzero == [pytest.approx(LN_LAMBDA2, abs=1e-15)]
    assert top[nonzero[0]] == 1
    assert rep.gates["top_degree_locus"]["locus_is_kappa"]
    assert rep.notes and "locus" in rep.notes[0]
    assert rep.passed


def test_curvature_twist_invariance():
    model = mt.from_matrix(A)
    for c in (0.0, 1.0, -3.0):
        assert mt.twisted_curvature_residual(model, mt.BasicTwist(c)) <= 1e-12


def test_bochner_identity():
    t = bo.torus_bochner(tt.TorusModel(2, 3), tt.TwistClass((0.6, 0.8)), samples=50, seed=11)
    assert t.identity_residual <= 1e-8
    assert np.isfinite(t.min_eigenvalue)
    model = mt.from_matrix(A)
    for c in (0.0, 0.3, -2.0, 5.0):
        m = bo.mapping_torus_bochner(mt._fit(model, c), mt.BasicTwist(c), samples=50, seed=11)
        assert m.identity_residual <= 1e-8
        assert np.isfinite(m.min_eigenvalue)
        assert not m.vanishing_verdict


def test_simplicial_backend():
    rng = np.random.default_rng(5)
    for name in sc.bundled_names():
        cx = sc.bundled_complex(name)
        theta = sc.random_closed_cocycle(cx, rng, "rational")
        assert all(zero and r == 0.0 for zero, r in sc.coboundary_square_residuals(cx, theta).values())
        assert sc.euler_check(sc.twisted_betti(cx, theta))
    t7 = sc.bundled_complex("torus7")
    zero = sc.twisted_betti(t7, sc.torus7_cocycle(LogRational(Fraction(1)), LogRational(Fraction(1))))
    ln2 = sc.twisted_betti(t7, sc.torus7_cocycle(LogRational(Fraction(2)), LogRational(Fraction(1))))
    assert zero.dims == [1, 2, 1] and ln2.dims == [0, 0, 0]
    assert sc.euler_check(zero) and sc.euler_check(ln2)
    rp3 = sc.bundled_complex("rp3")
    assert sc.twisted_betti(rp3, sc.EdgeCocycle.zero(rp3)).dims == [1, 0, 0, 1]
    smooth = [tt.harmonic_dims(tt.TorusModel(2, 5), tt.TwistClass(th)).dims for th in [(0.0, 0.0), (1.0, 0.0)]]
    assert smooth == [zero.dims, ln2.dims]


def test_lie_gate_and_lcs():
    so3 = cv.biinvariant_curvature(cv.so3())
    assert all(k == Fraction(1, 4) for k in so3.sectional.values())
    assert min(so3.operator_eigenvalues) > 0
    assert cv.positivity_gate(so3).passed
    assert not cv.positivity_gate(cv.biinvariant_curvature(cv.abelian(3))).passed
    assert not cv.positivity_gate(mt.transverse_curvature(mt.from_matrix(A))).passed
    omega = lcs.standard_symplectic(4)
    # the conformal factor depends on two of the four variables, which keeps the rescaled form sparse
    f = TrigPolynomial.from_terms(4, [{"kind": "sin", "amplitude": 0.4, "mode": [1, 0, 0, 0]},
                                      {"kind": "cos", "amplitude": 0.3, "mode": [0, 1, 1, 0]}])
    rescaled, _ = lcs.conformal_rescale(omega, f)
    verdicts = [
        lcs.lcs_check(omega, tt.TwistClass((0.0,) * 4)).passed,
        lcs.lcs_check(rescaled, tt.TwistClass((0.0,) * 4, f)).passed,
        lcs.lcs_check(omega, tt.TwistClass((1.0, 0.0, 0.0, 0.0))).passed,
    ]
    assert verdicts == [True, True, False]
