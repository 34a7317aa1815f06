import numpy as np
import pytest
import sympy as sp

from kahlerlab.errors import ConfigurationError
from kahlerlab.geometry import build_manifold
from kahlerlab.polynomials import (
    ChartPoly,
    SectionPoly,
    coordinate_section,
    linear_section,
    monomial_exponents,
    multinomial,
)


def test_monomial_counts():
    p1 = build_manifold("P1")
    p2 = build_manifold("P2")
    pp = build_manifold("P1xP1")
    assert len(monomial_exponents(p1, 7)) == 8
    assert len(monomial_exponents(p2, 3)) == 10
    assert len(monomial_exponents(p2, 6)) == 28
    assert len(monomial_exponents(pp, (2, 3))) == 12


def test_monomial_order_deterministic():
    p2 = build_manifold("P2")
    a = monomial_exponents(p2, 4)
    b = monomial_exponents(p2, 4)
    assert np.array_equal(a, b)
    # rows homogeneous of the right degree
    assert np.all(a.sum(axis=1) == 4)


@pytest.fixture
def cubic():
    p2 = build_manifold("P2")
    return p2, SectionPoly.from_coeff_map(
        p2, 3, {(2, 1, 0): 1.0, (0, 1, 2): -2.0, (0, 0, 3): 1.0})


def test_restrict_line_matches_sympy(cubic):
    p2, s = cubic
    A = np.array([1.0, 0.5, -0.3])
    B = np.array([0.2, -1.0, 0.7])
    r = s.restrict_line(A, B)
    t0, t1 = sp.symbols("t0 t1")
    z = [A[i] * t0 + B[i] * t1 for i in range(3)]
    ref = sp.Poly(sp.expand(z[0] ** 2 * z[1] - 2 * z[1] * z[2] ** 2
                            + z[2] ** 3), t0, t1)
    for e, c in zip(r.exponents, r.coeffs):
        cr = complex(ref.coeff_monomial(t0 ** int(e[0]) * t1 ** int(e[1])))
        assert abs(c - cr) < 1e-12


def test_chart_derivatives_match_sympy(cubic):
    p2, s = cubic
    cp = s.chart_poly(0)  # variables (z1/z0, z2/z0)
    x, y = sp.symbols("x y")
    ex = x - 2 * x * y ** 2 + y ** 3
    P = np.array([[0.3 + 0.2j, -0.5 + 0.1j]])
    subs = {x: complex(P[0, 0]), y: complex(P[0, 1])}
    assert abs(complex(cp.eval(P)[0]) - complex(ex.subs(subs))) < 1e-12
    for axis, var in ((0, x), (1, y)):
        v = complex(cp.deriv(axis).eval(P)[0])
        vr = complex(sp.diff(ex, var).subs(subs))
        assert abs(v - vr) < 1e-12


def test_multiply_evaluates_consistently(cubic):
    p2, s = cubic
    q = linear_section(p2, [1.0, -1.0, 0.0])
    prod = s.multiply(q)
    assert prod.degree == (4,)
    pt = np.array([[0.7, -0.2, 1.1]])
    assert abs(prod.eval_hom(pt)[0]
               - s.eval_hom(pt)[0] * q.eval_hom(pt)[0]) < 1e-12


def test_vanishing_order_and_division():
    p2 = build_manifold("P2")
    h = SectionPoly.from_coeff_map(p2, 3, {(0, 2, 1): 2.0, (0, 1, 2): 1.0})
    assert h.vanishing_order(0) == 0
    assert h.vanishing_order(1) == 1
    assert h.vanishing_order(2) == 1
    hd = h.divide_coordinate(1, 1)
    assert hd.degree == (2,)
    with pytest.raises(ConfigurationError):
        h.divide_coordinate(1, 2)


def test_fix_factor_on_product():
    pp = build_manifold("P1xP1")
    f = SectionPoly.from_coeff_map(
        pp, (2, 1), {(2, 0, 1, 0): 1.0, (1, 1, 0, 1): 3.0, (0, 2, 1, 0): -1.0})
    g = f.fix_factor(0, [0.5, 2.0])
    direct = f.eval_hom(np.array([[0.5, 2.0, 1.0, 0.7]]))[0]
    via = g.eval_hom(np.array([[1.0, 0.7]]))[0]
    assert abs(direct - via) < 1e-12
    # freezing the other factor
    g2 = f.fix_factor(1, [1.0, 0.7])
    via2 = g2.eval_hom(np.array([[0.5, 2.0]]))[0]
    assert abs(direct - via2) < 1e-12


def test_coordinate_section_degrees():
    pp = build_manifold("P1xP1")
    assert coordinate_section(pp, 1).degree == (1, 0)
    assert coordinate_section(pp, 3).degree == (0, 1)
    p1 = build_manifold("P1")
    z0 = coordinate_section(p1, 0)
    assert z0.vanishing_order(0) == 1


def test_inhomogeneous_rows_rejected():
    p2 = build_manifold("P2")
    with pytest.raises(ConfigurationError):
        SectionPoly.from_coeff_map(p2, 3, {(1, 1, 0): 1.0})


def test_dense_roundtrip():
    cp = ChartPoly(np.array([[2, 0], [0, 3], [1, 1]]),
                   np.array([1.0, -2.0, 3.0]), 2)
    grid = cp.dense()
    cp2 = ChartPoly.from_dense(grid)
    P = np.array([[0.4 - 0.1j, 1.2 + 0.3j], [0.0, 0.5]])
    assert np.allclose(cp.eval(P), cp2.eval(P))
    assert cp.degree(0) == 2 and cp.degree(1) == 3


def test_multinomial_values():
    assert multinomial(3, [[1, 1, 1]])[0] == 6
    assert multinomial(4, [[4, 0]])[0] == 1
    assert multinomial(4, [[2, 2]])[0] == 6
