from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twistcoh import simplicial as sc
from twistcoh.simplicial import LogRational

BUNDLED = {
    "circle3": ((3, 3), [1, 1]),
    "tetrahedron_boundary": ((4, 6, 4), [1, 0, 1]),
    "torus7": ((7, 21, 14), [1, 2, 1]),
    "klein_bottle": ((16, 48, 32), [1, 1, 0]),
    "rp3": ((40, 232, 384, 192), [1, 0, 0, 1]),
}


def test_bundled_names():
    assert sorted(BUNDLED) == sc.bundled_names()


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_untwisted_betti(name):
    cx = sc.bundled_complex(name)
    fvec, betti = BUNDLED[name]
    assert cx.f_vector == fvec
    rep = sc.twisted_betti(cx, sc.EdgeCocycle.zero(cx))
    assert rep.dims == betti
    assert sc.euler_check(rep)


@pytest.mark.parametrize("name", sorted(BUNDLED))
@pytest.mark.parametrize("kind", ["log", "rational"])
def test_coboundary_squares_to_zero_exactly(name, kind):
    cx = sc.bundled_complex(name)
    theta = sc.random_closed_cocycle(cx, np.random.default_rng(7), kind)
    for zero, resid in sc.coboundary_square_residuals(cx, theta).values():
        assert zero and resid == 0.0
    assert sc.euler_check(sc.twisted_betti(cx, theta))


@pytest.mark.parametrize("hx,hy,expected", [
    ("0", "0", [1, 2, 1]),
    ("log:2", "0", [0, 0, 0]),
    ("0", "log:3", [0, 0, 0]),
    ("1/2", "0", [0, 0, 0]),
    (0.7, 0.0, [0, 0, 0]),
])
def test_torus7_holonomy(hx, hy, expected):
    cx = sc.bundled_complex("torus7")
    val = lambda h: sc.parse_value(h) if isinstance(h, str) else h  # noqa: E731
    theta = sc.torus7_cocycle(val(hx), val(hy))
    assert sc.twisted_betti(cx, theta).dims == expected


def test_torus7_holonomy_values():
    theta = sc.torus7_cocycle(LogRational(Fraction(2)), Fraction(0))
    # seven (1, 0) steps wrap the y-cycle of the lattice quotient, whose holonomy is hy = 0
    assert sc.holonomy(theta, [0, 1, 2, 3, 4, 5, 6, 0]) == pytest.approx(0.0, abs=1e-15)
    cx = sc.bundled_complex("torus7")
    sc.cocycle_check(cx, theta)


def test_circle_monodromy():
    cx = sc.bundled_complex("circle3")
    assert sc.twisted_betti(cx, sc.circle_cocycle(LogRational(Fraction(2)))).dims == [0, 0]
    assert sc.twisted_betti(cx, sc.circle_cocycle(LogRational(Fraction(1)))).dims == [1, 1]
    assert sc.holonomy(sc.circle_cocycle(0.5), [0, 1, 2, 0]) == pytest.approx(0.5)


def test_open_cochain_is_rejected():
    cx = sc.bundled_complex("tetrahedron_boundary")
    vals = {e: Fraction(0) for e in cx.edges}
    vals[(0, 1)] = Fraction(1)
    with pytest.raises(sc.CocycleError):
        sc.cocycle_check(cx, sc.EdgeCocycle(vals))


def test_vertex_gauge_preserves_dims():
    cx = sc.bundled_complex("torus7")
    theta = sc.torus7_cocycle(LogRational(Fraction(2)), Fraction(0))
    p = {v: LogRational(Fraction(v + 1)) for v in range(7)}
    gauged = sc.vertex_gauge(theta, p)
    assert sc.twisted_betti(cx, gauged).dims == sc.twisted_betti(cx, theta).dims
    exact = sc.potential_cocycle(cx, p)
    assert sc.twisted_betti(cx, exact).dims == [1, 2, 1]


def test_float_fallback_agrees_with_exact():
    cx = sc.bundled_complex("klein_bottle")
    theta = sc.random_closed_cocycle(cx, np.random.default_rng(3), "log")
    as_float = sc.EdgeCocycle({e: float(v) for e, v in theta.values.items()})
    exact, fl = sc.twisted_betti(cx, theta), sc.twisted_betti(cx, as_float)
    assert exact.dims == fl.dims
    assert fl.extras["arithmetic"] == "float"


@settings(max_examples=50, deadline=None)
@given(st.one_of(
    st.fractions(min_value=-100, max_value=100),
    st.fractions(min_value=Fraction(1, 100), max_value=100).map(LogRational),
    st.floats(-1e6, 1e6, allow_nan=False),
))
def test_value_format_round_trip(v):
    assert sc.parse_value(sc.format_value(v)) == v


def test_complex_and_cocycle_text_round_trip(tmp_path):
    cx = sc.bundled_complex("torus7")
    path = sc.save_complex(cx, tmp_path / "t.txt")
    again = sc.load_complex(path)
    assert again.f_vector == cx.f_vector
    theta = sc.torus7_cocycle(LogRational(Fraction(2)), LogRational(Fraction(3)))
    (tmp_path / "c.txt").write_text(theta.to_text())
    assert sc.load_cocycle(tmp_path / "c.txt").values == theta.values


def test_unknown_bundled_name():
    with pytest.raises(KeyError):
        sc.bundled_complex("moebius")


def test_formal_generic_rank_records_points():
    cx = sc.bundled_complex("circle3")
    rep = sc.twisted_betti(cx, sc.circle_cocycle(Fraction(1, 2)), seed=5)
    assert rep.dims == [0, 0]
    assert rep.extras["arithmetic"] == "formal-exponential"
    assert len(rep.extras["evaluation_points"]) == sc.GENERIC_TRIALS


def test_mixed_value_kinds_need_float_mode():
    with pytest.raises(TypeError):
        sc.torus7_cocycle(LogRational(Fraction(2)), Fraction(1, 3))
