import numpy as np
import pytest

from kahlerlab.errors import ConfigurationError, NumericalError
from kahlerlab.geometry import (
    build_manifold,
    integrate,
    quadrature_nodes,
    wedge_density_11,
)

KINDS = ["P1", "P2", "P1xP1"]


def const_one(chart, Z):
    return np.ones(Z.shape[0])


@pytest.mark.parametrize("kind", KINDS)
def test_total_volume_is_one(kind):
    m = build_manifold(kind)
    rule = quadrature_nodes(m, 16)
    assert abs(integrate(const_one, rule) - 1.0) < 1e-9


def test_bad_manifold_name_rejected():
    with pytest.raises(ConfigurationError):
        build_manifold("P3")


def test_p1_linear_moment_exact():
    # x = |z1|^2/|Z|^2 is Beta(1,1) under the unit FS volume: mean 1/2
    m = build_manifold("P1")
    rule = quadrature_nodes(m, 16)

    def f(c, Z):
        a = np.abs(Z[:, 0]) ** 2
        x = a / (1.0 + a)
        return x if c == 0 else 1.0 - x

    assert abs(integrate(f, rule) - 0.5) < 1e-12


def _log_t(m, i):
    # log(|z_i|^2 / |Z|^2) as a chart field (per-factor norm on products)
    def f(chart, Z):
        pts = m.from_chart(Z, chart)
        return np.log(np.abs(pts[:, i]) ** 2)

    return f


# E[log t_i] under the unit FS volume: Dirichlet(1,..,1) gives -(1+..+1/n)
@pytest.mark.parametrize("kind,i,expected,tol", [
    ("P1", 0, -1.0, 1e-7),
    ("P1", 1, -1.0, 1e-7),
    ("P2", 2, -1.5, 1e-6),
    ("P1xP1", 1, -1.0, 1e-6),
])
def test_log_coordinate_moments(kind, i, expected, tol):
    m = build_manifold(kind)
    rule = quadrature_nodes(m, 32, singular_refinement=[("coord", i)])
    val = integrate(_log_t(m, i), rule, integrable=True)
    assert abs(val - expected) < tol


def test_non_finite_field_requires_flag():
    m = build_manifold("P1")
    rule = quadrature_nodes(m, 16)

    def f(c, Z):
        out = np.ones(Z.shape[0])
        out[::7] = np.nan
        return out

    with pytest.raises(NumericalError):
        integrate(f, rule)
    # even with the flag, widespread non-finite values are an error
    with pytest.raises(NumericalError):
        integrate(f, rule, integrable=True)


@pytest.mark.parametrize("kind,seam", [
    ("P1", [1.3, 0.8]),
    ("P2", [1.0, 1.25, 0.8]),
    ("P1xP1", [1.2, 0.9, 1.0, 1.1]),
])
def test_seam_leaves_integrals_unchanged(kind, seam):
    # the chart decomposition is a bookkeeping device; integrals cannot move
    m = build_manifold(kind)
    base = quadrature_nodes(m, 24)
    alt = quadrature_nodes(m, 24, seam=seam)
    assert abs(integrate(const_one, alt) - 1.0) < 1e-9

    def f(c, Z):
        pts = m.from_chart(Z, c)
        return np.abs(pts[:, 0]) ** 2

    v0 = integrate(f, base)
    v1 = integrate(f, alt)
    assert abs(v0 - v1) < 1e-8


def test_seamed_log_moment_with_refinement():
    m = build_manifold("P1")
    rule = quadrature_nodes(m, 32, singular_refinement=[("coord", 1)],
                            seam=[1.3, 0.8])
    val = integrate(_log_t(m, 1), rule, integrable=True)
    assert abs(val + 1.0) < 1e-7


@pytest.mark.parametrize("kind", KINDS)
def test_chart_roundtrip(kind):
    m = build_manifold(kind)
    pts = m.sample_grid(64)
    charts = m.chart_of(pts)
    for c in range(m.num_charts):
        sel = charts == c
        if not np.any(sel):
            continue
        Z = m.to_chart(pts[sel], c)
        # region property: affine coordinates bounded by 1 on own chart
        assert np.all(np.abs(Z) <= 1.0 + 1e-12)
        back = m.from_chart(Z, c)
        d = m.chordal_distance(pts[sel], back)
        assert np.max(d) < 1e-12


def test_quadrature_nodes_counts_grow():
    m = build_manifold("P1")
    a = quadrature_nodes(m, 8)
    b = quadrature_nodes(m, 32)
    assert b.num_nodes > a.num_nodes
    assert a.num_nodes == sum(bl.num_nodes for bl in a.blocks)
    w = a.weights()
    assert np.all(w > 0)
    assert abs(w.sum() - 1.0) < 1e-12


def test_refinement_concentrates_nodes():
    # node density inside a small ball around the center must beat the
    # uniform share by a wide margin
    m = build_manifold("P2")
    center = np.array([0.0, 0.0, 1.0])
    rule = quadrature_nodes(m, 16, singular_refinement=[center])
    pts = rule.nodes_homogeneous()
    d = m.chordal_distance(pts, center[None, :])
    s = 0.1
    share = np.mean(d <= s)
    # FS mass of a sine-radius ball on a surface is s^4
    assert share >= 4.0 * s ** 4
    # and no node collides with the center
    assert d.min() > 1e-10


def test_nodes_avoid_coordinate_divisors():
    m = build_manifold("P2")
    rule = quadrature_nodes(m, 16, singular_refinement=[("coord", 0)])
    pts = rule.nodes_homogeneous()
    assert np.min(np.abs(pts[:, 0])) > 0.0


def test_omega_wedge_mass_on_surfaces():
    for kind in ("P2", "P1xP1"):
        m = build_manifold(kind)
        rule = quadrature_nodes(m, 24)
        total = 0.0
        for b in rule.blocks:
            A = m.omega_matrix(b.chart, b.points)
            dens = wedge_density_11(A, A)
            total += float(np.dot(dens, b.weights_lebesgue / 4.0))
        assert abs(total - 1.0) < 1e-8


def test_p1_omega_density_matches_volume():
    m = build_manifold("P1")
    rule = quadrature_nodes(m, 16)
    total = 0.0
    for b in rule.blocks:
        dens = m.omega_matrix(b.chart, b.points)
        total += float(np.dot(np.real(dens), b.weights_lebesgue) / np.pi)
    assert abs(total - 1.0) < 1e-12


def test_canonical_factor_curvature_degree():
    # d dc log of the canonical factor integrates to the anticanonical mass:
    # checked via the closed form int omega = 1 applied per factor
    m = build_manifold("P1")
    rule = quadrature_nodes(m, 24)

    # second radial derivative of rho = (1/2) log(canonical factor) along
    # each chart equals 2 * omega density; check pointwise on a circle
    Z = np.exp(1j * np.linspace(0.1, 2.0, 7))[:, None] * 0.3
    f = m.canonical_factor(0, Z)
    D = 1.0 + np.abs(Z[:, 0]) ** 2
    assert np.allclose(f, 2.0 * np.pi * D ** 2, rtol=1e-13)


def test_sample_grid_deterministic_and_spread():
    for kind in KINDS:
        m = build_manifold(kind)
        a = m.sample_grid(40)
        b = m.sample_grid(40)
        assert np.array_equal(a, b)
        # pairwise separation: no two points nearly identical
        dmin = 1.0
        for i in range(10):
            d = m.chordal_distance(np.repeat(a[i:i + 1], 40, axis=0), a)
            d[i] = 1.0
            dmin = min(dmin, d.min())
        assert dmin > 1e-3
