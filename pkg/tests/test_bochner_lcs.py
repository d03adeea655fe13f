import numpy as np
import pytest

from twistcoh import bochner as bo
from twistcoh import lcs
from twistcoh import mapping_torus as mt
from twistcoh import torus as tt
from twistcoh.modes import TrigPolynomial

F4 = TrigPolynomial.from_terms(4, [{"kind": "sin", "amplitude": 0.4, "mode": [1, 0, 0, 0]},
                                   {"kind": "cos", "amplitude": 0.2, "mode": [0, 0, 1, 0]}])


def test_torus_constant_beta_vanishes():
    res = bo.torus_bochner(tt.TorusModel(2, 3), tt.TwistClass((0.5, -0.2)), samples=10)
    assert res.beta_norm == 0.0
    assert res.identity_residual <= 1e-10
    assert not res.vanishing_verdict


def test_torus_potential_identity():
    f = TrigPolynomial.from_terms(2, [{"kind": "cos", "amplitude": 0.3, "mode": [1, 1]}])
    theta = tt.TwistClass((0.0, 0.0), f)
    model = tt.TorusModel(2, tt.required_cutoff(tt.TorusModel(2), theta))
    res = bo.torus_bochner(model, theta, samples=10)
    assert res.identity_residual <= 1e-8
    # a nonconstant Hessian changes sign over the torus: no vanishing verdict
    assert res.min_eigenvalue < 0 and not res.vanishing_verdict


@pytest.mark.parametrize("c", [0.0, 0.3, -1.0])
def test_mapping_torus_negative_curvature_blocks_verdict(c):
    res = bo.mapping_torus_bochner(mt.from_matrix([[2, 1], [1, 1]]), mt.BasicTwist(c), samples=10)
    assert res.identity_residual <= 1e-8
    assert res.min_by_degree[1] < 0
    assert not res.vanishing_verdict


def test_dispatch_rejects_unknown_model():
    with pytest.raises(TypeError):
        bo.bochner_form(object(), None)


def test_lcs_three_examples():
    omega = lcs.standard_symplectic(4)
    assert lcs.lcs_check(omega, tt.TwistClass((0.0,) * 4)).passed
    rescaled, tail = lcs.conformal_rescale(omega, F4)
    assert tail <= 1e-13
    res = lcs.lcs_check(rescaled, tt.TwistClass((0.0,) * 4, F4))
    assert res.passed and res.residual <= 1e-10
    bad = lcs.lcs_check(omega, tt.TwistClass((1.0, 0.0, 0.0, 0.0)))
    assert not bad.passed and bad.failure == "not twisted-closed"
    # |dx^1 ^ omega| = |dx^1 dx^3 dx^4| = 1
    assert bad.residual == pytest.approx(1.0)


def test_lcs_degenerate_flagged_separately():
    res = lcs.lcs_check(lcs.constant_two_form(4, {(0, 1): 1.0}), tt.TwistClass((0.0,) * 4))
    assert res.closed and not res.nondegenerate
    assert res.failure == "degenerate"


def test_lcs_dimension_checks():
    with pytest.raises(ValueError):
        lcs.standard_symplectic(3)
    with pytest.raises(ValueError):
        lcs.lcs_check(lcs.constant_two_form(2, {(0, 1): 1.0}), tt.TwistClass((0.0, 0.0)))


def test_twisted_d_squares_to_zero_on_sparse_forms():
    omega, _ = lcs.conformal_rescale(lcs.standard_symplectic(4), F4)
    theta = tt.TwistClass((0.3, 0.0, -0.1, 0.0), F4)
    once = lcs.twisted_d(omega, theta)
    assert lcs.twisted_d(once, theta).norm() <= 1e-10 * max(once.norm(), 1)


def test_matrix_at_is_antisymmetric():
    omega, _ = lcs.conformal_rescale(lcs.standard_symplectic(4), F4)
    m = omega.matrix_at(np.array([0.1, 0.2, 0.3, 0.4]))
    assert np.allclose(m, -m.T)
