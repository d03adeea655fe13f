import math

import numpy as np
import pytest

from twistcoh import mapping_torus as mt
from twistcoh.modes import TrigPolynomial

A = [[2, 1], [1, 1]]
MU = math.log((3 + math.sqrt(5)) / 2)


@pytest.fixture(scope="module")
def model():
    return mt.from_matrix(A)


def test_rates(model):
    assert model.mu[0] == pytest.approx(MU, abs=1e-15)
    assert model.kappa == -model.mu[0]
    lam1, lam2 = mt.eigenvalues(model)
    assert lam1 * lam2 == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [[[1, 1], [0, 1]], [[2, 0], [0, 1]], [[0, 1], [-1, 0]]])
def test_rejects_non_hyperbolic(bad):
    with pytest.raises(ValueError):
        mt.from_matrix(bad)


def test_rejects_non_unimodular_rates():
    with pytest.raises(ValueError):
        mt.MappingTorusModel((1.0,), 0.0)


def test_mean_curvature(model):
    mc = mt.mean_curvature(model)
    assert mc.kappa_t == pytest.approx(-MU, abs=1e-12)
    assert mc.crosscheck_residual <= 1e-10


@pytest.mark.parametrize("c,expected", [(0.0, [1, 1, 0]), (-MU, [0, 1, 1]), (1.0, [0, 0, 0]), (MU, [0, 0, 0])])
def test_basic_dims(model, c, expected):
    assert mt.basic_twisted_betti(mt._fit(model, c), mt.BasicTwist(c)).dims == expected


def test_potential_does_not_change_dims(model):
    f = TrigPolynomial.from_terms(1, [{"kind": "sin", "amplitude": 0.6, "mode": [1]},
                                      {"kind": "cos", "amplitude": 0.3, "mode": [2]}])
    for c, expected in [(0.0, [1, 1, 0]), (-MU, [0, 1, 1])]:
        gamma = mt.BasicTwist(c, f)
        m = mt.MappingTorusModel(model.mu, model.nu, mt.required_cutoff(model, gamma), matrix=model.matrix)
        assert mt.basic_twisted_betti(m, gamma).dims == expected


def test_cutoff_error(model):
    small = mt.MappingTorusModel(model.mu, model.nu, 1)
    with pytest.raises(mt.CutoffError):
        mt.basic_twisted_betti(small, mt.BasicTwist(30.0))


def test_scan_duality_and_locus(model):
    res = mt.top_degree_scan(model, np.linspace(-2, 2, 5))
    assert res.locus == [model.kappa]
    assert res.duality_ok
    assert set(res.euler.values()) == {0}


def test_curvature_twist_invariance(model):
    for g in (0.0, 1.0, -3.0):
        assert mt.twisted_curvature_residual(model, mt.BasicTwist(g), 6) <= 1e-12


def test_weitzenbock_terms_nonzero(model):
    lap, rough, hess, curv = mt.weitzenbock_parts(model, mt.BasicTwist(0.3))
    assert min(rough.norm(), hess.norm(), curv.norm()) > 1e-3
    assert (lap - (rough - hess.scale(2.0) + curv)).norm() <= 1e-8


def test_structure_and_connection_routes_agree(model):
    calc = mt.BasicCalculus(model, mt.BasicTwist(0.7))
    assert (calc.d() - calc.d_structure()).norm() < 1e-12
