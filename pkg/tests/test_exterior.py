import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twistcoh import exterior as ext
from twistcoh.exterior import FormBasis

vectors = st.integers(2, 4).flatmap(
    lambda q: st.lists(st.floats(-3, 3, allow_nan=False), min_size=q, max_size=q).map(np.array))


@pytest.mark.parametrize("q", [1, 2, 3, 4, 5])
def test_basis_dimensions_are_binomial(q):
    basis = FormBasis(q)
    assert sum(basis.dim(k) for k in range(q + 1)) == 2 ** q
    assert basis.offset(q) == 2 ** q - 1


@settings(max_examples=40, deadline=None)
@given(vectors)
def test_wedge_squares_to_zero(c):
    basis = FormBasis(len(c))
    w = ext.wedge_operator(c, basis)
    assert (w @ w).norm() < 1e-12


@settings(max_examples=40, deadline=None)
@given(vectors, st.data())
def test_cartan_anticommutator_is_pairing(c, data):
    q = len(c)
    v = np.array(data.draw(st.lists(st.floats(-3, 3, allow_nan=False), min_size=q, max_size=q)))
    basis = FormBasis(q)
    w, i = ext.wedge_operator(c, basis), ext.interior_operator(v, basis)
    anti = w @ i + i @ w
    expected = ext.GradedOperator.identity(basis, scale=float(np.dot(c, v)))
    assert (anti - expected).norm() < 1e-10 * (1 + np.linalg.norm(c) * np.linalg.norm(v))


@settings(max_examples=40, deadline=None)
@given(vectors)
def test_clifford_squares_to_minus_norm(v):
    basis = FormBasis(len(v))
    c = ext.clifford_operator(v, basis)
    expected = ext.GradedOperator.identity(basis, scale=-float(np.dot(v, v)))
    assert (c @ c - expected).norm() < 1e-10 * (1 + np.dot(v, v))


def test_interior_is_adjoint_of_wedge():
    basis = FormBasis(4)
    v = np.array([0.3, -1.0, 2.0, 0.5])
    assert (ext.wedge_operator(v, basis).adjoint() - ext.interior_operator(v, basis)).norm() < 1e-14


def test_derivation_of_identity_counts_degree():
    basis = FormBasis(3)
    n = ext.derivation_operator(np.eye(3), basis)
    for k in range(4):
        assert np.allclose(n.blocks[(k, k)], k * np.eye(basis.dim(k)))


def test_exact_field_for_fractions():
    from fractions import Fraction
    basis = FormBasis(3)
    m = ext.wedge_matrix([Fraction(1, 3), 0, Fraction(-2)], basis, 1)
    assert m.matrix.dtype == object


def test_shape_errors():
    basis = FormBasis(3)
    with pytest.raises(ValueError):
        ext.wedge_matrix([1.0, 2.0], basis, 0)
    with pytest.raises(ext.DegreeError):
        ext.interior_matrix([1.0, 0, 0], basis, 0)
