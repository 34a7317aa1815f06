import numpy as np
import pytest

from kahlerlab.bundles import LineBundle, Metric
from kahlerlab.distance import (ApproximationSchedule, PairingVector,
                                approximation_run, descriptor_vector,
                                diagonal_sequence, dictionary_signature,
                                ds_distance, multilinear_expansion_residual,
                                wedge_vector)
from kahlerlab.errors import (ConfigurationError, GeneralPositionError,
                              UnsupportedMetricError)
from kahlerlab.fscurrents import form_values_hom, pair_omega_basis
from kahlerlab.geometry import build_manifold, quadrature_nodes
from kahlerlab.polynomials import coordinate_section, linear_section
from kahlerlab.testforms import test_form_dictionary


@pytest.fixture(scope="module")
def p1():
    return build_manifold("P1")


@pytest.fixture(scope="module")
def p2():
    return build_manifold("P2")


@pytest.fixture(scope="module")
def p1_dict(p1):
    return test_form_dictionary(p1, 1, count=12)


# -- pairing vectors -----------------------------------------------------------


def test_mass_is_the_leading_pairing(p1, p1_dict):
    v = PairingVector("t", np.arange(12.0), p1_dict)
    assert v.mass == 0.0
    assert v.scale(3.0).mass == 0.0
    assert v.scale(3.0).values[3] == 9.0


def test_vector_shape_and_dictionary_are_checked(p1, p1_dict):
    with pytest.raises(ConfigurationError):
        PairingVector("t", np.arange(5.0), p1_dict)
    a = PairingVector("a", np.zeros(12), p1_dict)
    b = PairingVector("b", np.zeros(8), test_form_dictionary(p1, 1, count=8))
    with pytest.raises(ConfigurationError):
        ds_distance(a, b)


def test_distance_is_a_pseudometric(p1_dict):
    sig = dictionary_signature(p1_dict)
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b, c = (PairingVector("r", rng.standard_normal(12), sig)
                   for _ in range(3))
        assert ds_distance(a, a) == 0.0
        assert abs(ds_distance(a, b) - ds_distance(b, a)) < 1e-12
        assert (ds_distance(a, c)
                <= ds_distance(a, b) + ds_distance(b, c) + 1e-12)
        assert abs(ds_distance(a.scale(2.0), b.scale(2.0))
                   - 2.0 * ds_distance(a, b)) < 1e-12


def test_distance_against_a_point_mass_current(p1, p1_dict):
    # FS curvature vs the half omega plus half point mass curvature: the
    # gap per form is half of |integral - point value|, computable directly
    L = LineBundle(p1, 1)
    rule = quadrature_nodes(p1, 48)
    d_fs = Metric.fubini_study(L).curvature_descriptor()
    d_lp = Metric.log_pole(L, coordinate_section(p1, 0),
                           0.5).curvature_descriptor()
    d = ds_distance(descriptor_vector(d_fs, p1_dict, rule, "fs"),
                    descriptor_vector(d_lp, p1_dict, rule, "lp"))
    pole = np.zeros((1, 2), dtype=complex)
    pole[0, 1] = 1.0
    oracle = max(0.5 * abs(pair_omega_basis(0, f, rule)
                           - float(form_values_hom(p1, f, pole)[0]))
                 for f in p1_dict)
    assert abs(d - oracle) < 1e-12


def test_distance_never_shrinks_when_the_dictionary_grows(p1, p1_dict):
    L = LineBundle(p1, 1)
    rule = quadrature_nodes(p1, 32)
    d_fs = Metric.fubini_study(L).curvature_descriptor()
    d_lp = Metric.log_pole(L, coordinate_section(p1, 0),
                           0.5).curvature_descriptor()
    small = test_form_dictionary(p1, 1, count=8)
    d_small = ds_distance(descriptor_vector(d_fs, small, rule),
                          descriptor_vector(d_lp, small, rule))
    d_large = ds_distance(descriptor_vector(d_fs, p1_dict, rule),
                          descriptor_vector(d_lp, p1_dict, rule))
    assert d_small <= d_large + 1e-15


# -- interpolation expansion ------------------------------------------------------


def test_expansion_is_exact_for_one_factor(p2):
    L = LineBundle(p2, 1)
    h = Metric.log_pole(L, coordinate_section(p2, 0), 0.5)
    g = Metric.fubini_study(L)
    chi = test_form_dictionary(p2, 1, count=2)[1]
    rule = quadrature_nodes(p2, 16)
    assert multilinear_expansion_residual([h], [g], 0.3, chi, rule) < 1e-12


def test_expansion_residual_on_surface_pairs(p2):
    L = LineBundle(p2, 1)
    h1 = Metric.log_pole(L, coordinate_section(p2, 0), 0.5)
    h2 = Metric.log_pole(L, coordinate_section(p2, 1), 0.25)
    g = Metric.fubini_study(L)
    rule = quadrature_nodes(p2, 16)
    chis = test_form_dictionary(p2, 2, count=3)
    for eps in (0.5, 0.25, 0.1):
        for chi in chis:
            assert multilinear_expansion_residual(
                [h1, h2], [g, g], eps, chi, rule) < 1e-8
    # identity case: both routes are the plain wedge
    assert multilinear_expansion_residual(
        [h1, h2], [g, g], 0.0, chis[1], rule) < 1e-12


def test_expansion_preconditions(p2):
    L = LineBundle(p2, 1)
    g = Metric.fubini_study(L)
    chi = test_form_dictionary(p2, 2, count=2)[1]
    rule = quadrature_nodes(p2, 8)
    ha = Metric.log_pole(L, linear_section(p2, [1.0, 1.0, 1.0]), 0.5)
    hb = Metric.log_pole(L, linear_section(p2, [1.0, -1.0, 2.0]), 0.5)
    with pytest.raises(GeneralPositionError):
        multilinear_expansion_residual([ha, hb], [g, g], 0.3, chi, rule)
    sm = Metric.smoothed_max(L, coordinate_section(p2, 0),
                             coordinate_section(p2, 1), 1.0, 0.5)
    with pytest.raises(UnsupportedMetricError):
        multilinear_expansion_residual([sm, g], [g, g], 0.3, chi, rule)
    with pytest.raises(ConfigurationError):
        multilinear_expansion_residual([g, g], [g], 0.3, chi, rule)


# -- schedules and diagonal selection ----------------------------------------------


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        ApproximationSchedule([0.5, 0.5], [4, 8])
    with pytest.raises(ConfigurationError):
        ApproximationSchedule([0.5, 0.25], [8, 4])
    with pytest.raises(ConfigurationError):
        ApproximationSchedule([0.5], [4, 8], thresholds=[1.0, 0.5])
    s = ApproximationSchedule([0.5, 0.25], [[4, 8], [8, 16]])
    assert s.grid(0) == [4, 8] and s.grid(1) == [8, 16]
    assert s.thresholds == [1.0, 0.5]


def test_selection_forces_strict_increase():
    sel = diagonal_sequence([[0, 0, 0]] * 3, [4, 8, 16])
    assert [(s["j"], s["p"]) for s in sel] == [(1, 4), (2, 8), (3, 16)]
    assert all(s["resolved"] for s in sel)


def test_selection_threshold_arithmetic():
    grid = list(range(1, 9))
    sel = diagonal_sequence([[1.0 / p for p in grid]] * 4, grid)
    assert [(s["j"], s["p"]) for s in sel] == [(1, 1), (2, 2), (3, 3), (4, 4)]


def test_unresolved_rows_are_flagged_and_skipped():
    sel = diagonal_sequence([[0.9, 0.9], [0.9, 0.9], [0.0, 0.0]], [4, 8])
    assert sel[0]["resolved"] and sel[0]["p"] == 4
    assert not sel[1]["resolved"] and sel[1]["p"] is None
    # the floor stays at 4, so row three may still pick 8
    assert sel[2]["resolved"] and sel[2]["p"] == 8
    sel = diagonal_sequence([[None, 0.0]], [4, 8])
    assert sel[0]["p"] == 8


# -- the end-to-end run -------------------------------------------------------------


def test_approximation_run_on_the_reference_family(p1):
    fs = Metric.fubini_study(LineBundle(p1, 1))
    sched = ApproximationSchedule([0.5, 0.25], [4, 8, 16])
    rep = approximation_run([fs], [fs], sched, samples=1, seed=(41,))
    assert rep["resolved"]
    assert all(r["status"] == "ok" for r in rep["rows"])
    # trivial twist keeps the zero count at p, so every mass is exactly one
    assert all(r["mass"] == 1.0 for r in rep["rows"])
    for s in rep["selected"]:
        assert s["distance"] <= s["threshold"]
    again = approximation_run([fs], [fs], sched, samples=1, seed=(41,))
    assert again == rep


def test_approximation_masses_follow_the_twist_deficit(p2):
    L = LineBundle(p2, 1)
    h1 = Metric.log_pole(L, coordinate_section(p2, 0), 0.5)
    h2 = Metric.log_pole(L, coordinate_section(p2, 1), 0.5)
    g = Metric.fubini_study(L)
    sched = ApproximationSchedule([0.5], [6, 8])
    rep = approximation_run([h1, h2], [g, g], sched, samples=1, seed=(42,))
    assert abs(rep["target"][0] - 1.0) < 1e-9
    for r in rep["rows"]:
        assert r["status"] == "ok"
        assert abs(r["mass"] - ((r["p"] - 3.0) / r["p"]) ** 2) < 1e-5


def test_smoothing_metrics_must_be_positive(p1):
    L = LineBundle(p1, 1)
    fs = Metric.fubini_study(L)
    flat = Metric.log_pole(L, coordinate_section(p1, 0), 1.0)
    sched = ApproximationSchedule([0.5], [4])
    with pytest.raises(ConfigurationError):
        approximation_run([fs], [flat], sched, samples=1, seed=(43,))
