"""Section spaces: filtered bases, Gram assembly, Bergman kernels.

Expected values are closed forms: reference-metric Gram matrices are exactly
the identity in the scaled monomial basis, the reference Bergman function is
exactly the dimension, and dimensions follow the degree-counting formulas.
"""

import numpy as np
import pytest

from kahlerlab.bundles import LineBundle, Metric, SmoothedMaxAtom
from kahlerlab.errors import (ConfigurationError, EmptySpaceError,
                              IllConditionedError, UnsupportedMetricError)
from kahlerlab.geometry import build_manifold, quadrature_nodes
from kahlerlab.polynomials import SectionPoly, coordinate_section
from kahlerlab.sections import (build_section_space, dimension_profile,
                                log_bergman_sup, section_degree,
                                space_dimension, vanishing_order_required)

P1 = build_manifold("P1")
P2 = build_manifold("P2")
P11 = build_manifold("P1xP1")


def _generic_pair():
    Q1 = SectionPoly.from_coeff_map(P1, 2, {(2, 0): 1.0, (0, 2): -0.5})
    Q2 = SectionPoly.from_coeff_map(P1, 2, {(1, 1): 1.0, (2, 0): 0.3})
    return Q1, Q2


# -- degrees and dimensions ----------------------------------------------------


def test_section_degrees():
    assert section_degree(P1, 1, 16, adjoint=True) == (14,)
    assert section_degree(P1, 1, 16, adjoint=False) == (16,)
    assert section_degree(P2, 1, 8, adjoint=True) == (5,)
    assert section_degree(P11, (1, 1), 6, adjoint=True) == (4, 4)
    assert section_degree(P11, (2, 1), 6, adjoint=False) == (12, 6)


@pytest.mark.parametrize("p", [4, 8, 16])
def test_reference_dimensions(p):
    fs1 = Metric.fubini_study(LineBundle(P1, 1))
    fs2 = Metric.fubini_study(LineBundle(P2, 1))
    fs11 = Metric.fubini_study(LineBundle(P11, (1, 1)))
    assert space_dimension(fs1, p, adjoint=True) == p - 1
    assert space_dimension(fs1, p, adjoint=False) == p + 1
    assert space_dimension(fs2, p, adjoint=True) == (p - 1) * (p - 2) // 2
    assert space_dimension(fs2, p, adjoint=False) == (p + 1) * (p + 2) // 2
    assert space_dimension(fs11, p, adjoint=True) == (p - 1) ** 2
    assert space_dimension(fs11, p, adjoint=False) == (p + 1) ** 2


def test_dimension_profile_ratio():
    fs2 = Metric.fubini_study(LineBundle(P2, 1))
    rows = dimension_profile(fs2, [4, 8], adjoint=False)
    assert rows[0] == {"p": 4, "dim": 15, "ratio": 15 / 16}
    assert rows[1]["dim"] == 45


# -- integrability filter ------------------------------------------------------


def test_vanishing_order_threshold():
    # square integrability needs order k > p nu - 1, strictly
    assert vanishing_order_required(4, 0.5) == 2
    assert vanishing_order_required(16, 0.35) == 5
    assert vanishing_order_required(10, 0.5) == 5
    assert vanishing_order_required(3, 0.1) == 0


def test_coordinate_pole_filter():
    L = LineBundle(P1, 1)
    h = Metric.log_pole(L, coordinate_section(P1, 1), 0.5)
    sp = build_section_space(h, 10, orthonormalize=False)
    assert sp.dim == 4  # degree 8, forced order 5 along z1
    assert sp.base_divisors == [(("coord", 1), 5)]
    assert all(e[1] >= 5 for e in sp.exponents)


def test_two_pole_filter_on_p2():
    L = LineBundle(P2, 1)
    h = Metric(L, [(1.0, a) for _, a in
                   (Metric.log_pole(L, coordinate_section(P2, 0), 0.25).atoms
                    + Metric.log_pole(L, coordinate_section(P2, 1),
                                      0.25).atoms)])
    sp = build_section_space(h, 12, orthonormalize=False)
    # degree 9, order 3 forced along each of two coordinate lines
    assert sp.dim == 10
    assert sorted(k for _, k in sp.base_divisors) == [3, 3]


def test_empty_space():
    L = LineBundle(P1, 1)
    h = Metric.log_pole(L, coordinate_section(P1, 1), 1.0)
    with pytest.raises(EmptySpaceError):
        build_section_space(h, 10, adjoint=True)  # forced order 10 > degree 8
    assert space_dimension(h, 10, adjoint=True) == 0
    assert space_dimension(h, 10, adjoint=False) == 1


def test_generic_pole_filter():
    L = LineBundle(P1, 1)
    Q1, _ = _generic_pair()
    h = Metric.log_pole(L, Q1, 0.7)
    sp = build_section_space(h, 16, orthonormalize=False)
    assert sp.dim == 5  # degree 14, order 5 along a conic pair of points
    assert sp.base_divisors[0][1] == 5
    assert sp.sigma_polys[0][1] == 5
    assert sp.q_reduced == (4,)


# -- reference metric: exact Gram and constant Bergman function ---------------


@pytest.mark.parametrize("kind,deg,p", [("P1", 1, 16), ("P2", 1, 8),
                                        ("P1xP1", (1, 1), 6)])
@pytest.mark.parametrize("adjoint", [True, False])
def test_reference_gram_is_identity(kind, deg, p, adjoint):
    m = build_manifold(kind)
    h = Metric.fubini_study(LineBundle(m, deg))
    sp = build_section_space(h, p, adjoint=adjoint)
    assert sp.gram_method == "diagonal"
    err = np.max(np.abs(sp.gram() - np.eye(sp.dim)))
    assert err < 1e-12


@pytest.mark.parametrize("kind,deg,p", [("P1", 1, 16), ("P2", 1, 8),
                                        ("P1xP1", (1, 1), 6)])
def test_reference_bergman_is_constant(kind, deg, p):
    m = build_manifold(kind)
    h = Metric.fubini_study(LineBundle(m, deg))
    sp = build_section_space(h, p)
    pts = m.sample_grid(300)
    vals = sp.bergman_hom(pts)
    assert np.max(np.abs(vals - sp.dim)) / sp.dim < 1e-12


def test_bergman_total_mass_singular_metric():
    # integral of the Bergman function against the unit volume form equals
    # the dimension for any admissible metric, singular ones included
    L = LineBundle(P1, 1)
    h = Metric.log_pole(L, coordinate_section(P1, 1), 0.5)
    sp = build_section_space(h, 10)
    rule = quadrature_nodes(P1, 48, singular_refinement=h.refinement_centers())
    total = float(rule.weights() @ sp.bergman_hom(rule.nodes_homogeneous()))
    assert abs(total - sp.dim) < 1e-9


def test_log_bergman_sup_reference():
    h = Metric.fubini_study(LineBundle(P1, 1))
    p = 16
    sp = build_section_space(h, p)
    s = log_bergman_sup(sp, grid_count=200)
    assert abs(s - np.log(p - 1.0) / p) < 1e-12


# -- cross-validation of the three Gram strategies -----------------------------


def test_gram_paths_agree_coordinate_pole():
    L = LineBundle(P1, 1)
    h = Metric.log_pole(L, coordinate_section(P1, 1), 0.5)
    grams = {}
    for meth in ("diagonal", "modes", "nodes"):
        sp = build_section_space(h, 10, method=meth, resolution=48)
        grams[meth] = sp.gram()
    assert np.max(np.abs(grams["modes"] - grams["diagonal"])) < 1e-10
    assert np.max(np.abs(grams["nodes"] - grams["diagonal"])) < 1e-10


def test_gram_paths_agree_smooth_generic():
    L = LineBundle(P1, 1)
    Q1, Q2 = _generic_pair()
    g = Metric.smoothed_max(L, Q1, Q2, 0.7, 0.6)
    spm = build_section_space(g, 8, method="modes", resolution=64)
    spn = build_section_space(g, 8, method="nodes", resolution=64)
    assert spm.gram_method == "modes"
    assert np.max(np.abs(spm.gram() - spn.gram())) < 1e-10
    assert build_section_space(g, 8, orthonormalize=False)._dispatch() \
        == "modes"


def test_gram_dispatch_and_validation():
    L = LineBundle(P1, 1)
    Q1, Q2 = _generic_pair()
    g = Metric.smoothed_max(L, Q1, Q2, 0.7, 0.6)
    with pytest.raises(ConfigurationError):
        build_section_space(g, 8, method="diagonal")
    h = Metric.log_pole(L, Q1, 0.7)
    assert build_section_space(h, 8, orthonormalize=False)._dispatch() \
        == "nodes"


def test_generic_pole_gram_unsupported_on_surfaces():
    L = LineBundle(P2, 1)
    Q = SectionPoly.from_coeff_map(
        P2, 2, {(2, 0, 0): 1.0, (0, 2, 0): -0.5, (0, 0, 2): 0.25})
    h = Metric.log_pole(L, Q, 0.5)
    with pytest.raises(UnsupportedMetricError):
        build_section_space(h, 8)


# -- orthonormalization --------------------------------------------------------


def test_orthonormal_against_independent_rule():
    L = LineBundle(P1, 1)
    h = Metric.log_pole(L, coordinate_section(P1, 1), 0.5)
    sp = build_section_space(h, 10)
    rule = quadrature_nodes(P1, 48, singular_refinement=h.refinement_centers())
    G = np.zeros((sp.dim, sp.dim), dtype=complex)
    for b in rule.blocks:
        V = sp.section_values(b.chart, b.points)
        W = np.exp(-2.0 * sp.p * h.weight(b.chart, b.points))
        E = V * np.sqrt(W * b.weights_lebesgue)[:, None]
        G += E.T @ np.conj(E)
    assert np.max(np.abs(G - np.eye(sp.dim))) < 1e-10


def test_ill_conditioned_basis_rejected():
    # a strongly negative smooth weight concentrates all mass near one point,
    # collapsing the numerical rank of the Gram matrix
    L = LineBundle(P1, 1)
    Q1, Q2 = _generic_pair()
    bad = Metric(L, [(-30.0, SmoothedMaxAtom(Q1, Q2, 1.0, 1.0))])
    with pytest.raises(IllConditionedError):
        build_section_space(bad, 8)


# -- section evaluation ---------------------------------------------------------


def test_section_polynomial_roundtrip():
    L = LineBundle(P1, 1)
    h = Metric.log_pole(L, coordinate_section(P1, 1), 0.5)
    sp = build_section_space(h, 10)
    rng = np.random.default_rng(7)
    c = rng.normal(size=sp.dim) + 1j * rng.normal(size=sp.dim)
    poly = sp.section_polynomial(c)
    assert poly.degree == sp.q
    pts = P1.sample_grid(50)
    want = poly.eval_hom(pts)
    charts = P1.chart_of(pts)
    got = np.empty_like(want)
    for chart in range(2):
        mask = charts == chart
        Z = P1.to_chart(pts[mask], chart)
        B = sp.basis_values(chart, Z)
        frame = pts[mask, chart] ** sum(sp.q)
        got[mask] = (B @ (c * 1.0)) * frame
    assert np.max(np.abs(want - got)) < 1e-10


def test_section_derivatives_match_finite_differences():
    L = LineBundle(P1, 1)
    Q1, _ = _generic_pair()
    h = Metric.log_pole(L, Q1, 0.7)  # sigma-filtered basis, product rule
    sp = build_section_space(h, 16)
    Z = np.array([[0.31 + 0.20j], [-0.55 + 0.41j]])
    V, (V1,) = sp.section_values(0, Z, derivs=True)
    eps = 1e-6
    for k, step in enumerate((eps, 1j * eps)):
        num = (sp.section_values(0, Z + step)
               - sp.section_values(0, Z - step)) / (2 * step)
        err = np.max(np.abs(num - V1))
        assert err < 1e-5


def test_degree_and_power_guards():
    L = LineBundle(P1, 1)
    h = Metric.fubini_study(L)
    with pytest.raises(ConfigurationError):
        build_section_space(h, 0)
    with pytest.raises(ConfigurationError):
        build_section_space(h, 500)
