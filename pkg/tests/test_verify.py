import pytest

from twistcoh import mapping_torus as mt
from twistcoh import torus as tt
from twistcoh.modes import TrigPolynomial
from twistcoh.verify import leibniz_function, run_suite

IDENTITIES = {"d_squared", "delta_squared", "adjointness", "dirac_squared", "leibniz", "interior_nabla",
              "weitzenbock", "bochner_identity", "curvature_twist", "lie_lemma"}


def test_flat_unit_twist_suite():
    res = run_suite(tt.TorusModel(2, 4), tt.TwistClass((1.0, 0.0)), samples=10)
    assert IDENTITIES | {"cartan", "commutator_d", "commutator_delta"} <= set(res.residuals)
    assert max(res.residuals.values()) <= 1e-12


def test_torus_potential_suite_skips_cartan():
    f = TrigPolynomial.from_terms(2, [{"kind": "sin", "amplitude": 0.3, "mode": [0, 1]}])
    theta = tt.TwistClass((0.0, 0.0), f)
    model = tt.TorusModel(2, tt.required_cutoff(tt.TorusModel(2), theta))
    res = run_suite(model, theta, samples=10)
    assert "cartan" in res.skipped
    assert max(res.residuals.values()) <= 1e-8


def test_mapping_torus_suite():
    res = run_suite(mt.from_matrix([[2, 1], [1, 1]]), mt.BasicTwist(0.3), samples=10)
    assert IDENTITIES <= set(res.residuals)
    assert max(res.residuals.values()) <= 1e-8
    assert min(res.extras["weitzenbock_term_norms"].values()) > 1e-3


def test_leibniz_function_is_seeded():
    a, b = leibniz_function(2, 4), leibniz_function(2, 4)
    assert a.coefficients == b.coefficients
    assert a.is_real()


def test_unknown_model_type():
    with pytest.raises(TypeError):
        run_suite(object(), None)
