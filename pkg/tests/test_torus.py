import math
import warnings

import numpy as np
import pytest

from twistcoh import torus as tt
from twistcoh.modes import TrigPolynomial

from .conftest import random_potential


def dims(q, theta, cutoff=None):
    K = cutoff if cutoff is not None else max(tt.required_cutoff(tt.TorusModel(q), theta), 4)
    return tt.harmonic_dims(tt.TorusModel(q, K), theta).dims


@pytest.mark.parametrize("q,theta,expected", [
    (2, (0.0, 0.0), [1, 2, 1]),
    (2, (1.0, 0.0), [0, 0, 0]),
    (3, (0.0, 0.0, 0.0), [1, 3, 3, 1]),
    (3, (0.0, 0.0, -2.5), [0, 0, 0, 0]),
    (1, (0.0,), [1, 1]),
])
def test_constant_twist_dims(q, theta, expected):
    assert dims(q, tt.TwistClass(theta)) == expected


def test_euler_characteristic_vanishes():
    rep = tt.harmonic_dims(tt.TorusModel(2, 4), tt.TwistClass((0.3, 0.0)))
    assert rep.euler_characteristic == 0 and rep.euler_ok


def test_exact_twist_keeps_untwisted_dims():
    f = TrigPolynomial.from_terms(2, [{"kind": "sin", "amplitude": 1.0, "mode": [1, 0]}])
    assert dims(2, tt.TwistClass((0.0, 0.0), f)) == [1, 2, 1]


def test_cutoff_below_bound_raises():
    theta = tt.TwistClass((20.0, 0.0))
    with pytest.raises(tt.CutoffError):
        tt.harmonic_dims(tt.TorusModel(2, 1), theta)


def test_twist_dimension_mismatch():
    with pytest.raises(ValueError):
        tt.harmonic_dims(tt.TorusModel(3, 2), tt.TwistClass((0.0, 0.0)))


@pytest.mark.parametrize("theta", [(0.0, 0.0), (1.0, 0.0), (0.6, 0.8)])
def test_dirac_squares_to_laplacian(theta):
    calc = tt.TorusCalculus(tt.TorusModel(2, 3), tt.TwistClass(theta))
    D = calc.dirac()
    assert (calc.dirac(calc.next_cutoff()) @ D - calc.laplacian()).norm() < 1e-12
    assert (calc.dirac_clifford() - D).norm() < 1e-12


def test_adjointness_with_potential(rng):
    f = random_potential(rng)
    model = tt.TorusModel(2, 3)
    calc = tt.TorusCalculus(model, tt.TwistClass((0.4, 0.0), f))
    d0 = calc.d()
    delta = calc.delta(calc.next_cutoff()).restrict(model.box())
    assert (delta - d0.adjoint()).norm() < 1e-12


def test_weitzenbock_on_three_torus():
    assert tt.weitzenbock_residual(tt.TorusModel(3, 2), tt.TwistClass((0.2, -0.7, 1.1))) < 1e-12


def test_cartan_unit_twist():
    out = tt.cartan_identity_check(tt.TorusModel(2, 3), tt.TwistClass((0.6, 0.8)))
    assert out["norm_squared"] == 1.0
    assert max(v for k, v in out.items() if k != "norm_squared") < 1e-12


def test_cartan_needs_parallel_twist():
    f = TrigPolynomial.from_terms(2, [{"kind": "cos", "amplitude": 0.1, "mode": [0, 1]}])
    with pytest.raises(ValueError):
        tt.cartan_identity_check(tt.TorusModel(2, 3), tt.TwistClass((0.0, 0.0), f))


def test_gauge_intertwining(rng):
    f = random_potential(rng)
    res = tt.gauge_intertwining_residual(tt.TorusModel(2, 3), tt.TwistClass((1.0, 0.0)), f, rng, samples=2)
    assert res < 1e-8


def test_gauge_transform_warns_on_coarse_pad():
    f = TrigPolynomial.from_terms(2, [{"kind": "cos", "amplitude": 3.0, "mode": [1, 0]}])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tt.gauge_transform(tt.TorusModel(2, 2), {0: np.ones(25)}, f, pad=1)
    assert any(issubclass(w.category, tt.PaddingWarning) for w in caught)


def test_hodge_decomposition_is_orthogonal_and_complete(rng):
    model = tt.TorusModel(2, 2)
    theta = tt.TwistClass((0.0, 0.0))
    alpha = {1: rng.normal(size=len(model.box()) * 2) + 1j * rng.normal(size=len(model.box()) * 2)}
    exact, coexact, harmonic = tt.hodge_decompose(model, theta, alpha)
    total = exact[1] + coexact[1] + harmonic[1]
    assert np.allclose(total, alpha[1])
    assert abs(np.vdot(exact[1], coexact[1])) < 1e-10
    assert abs(np.vdot(exact[1], harmonic[1])) < 1e-10
    # the harmonic part sits in the constant mode only
    zero = model.box().index((0, 0))
    mask = np.ones(len(total), bool)
    mask[2 * zero:2 * zero + 2] = False
    assert np.allclose(harmonic[1][mask], 0)


def test_required_cutoff_grows_with_twist():
    small = tt.required_cutoff(tt.TorusModel(2), tt.TwistClass((0.0, 0.0)))
    big = tt.required_cutoff(tt.TorusModel(2), tt.TwistClass((4 * math.pi, 0.0)))
    assert big > small
