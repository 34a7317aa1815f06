"""Normalized currents of orthonormal section families.

For a family spanning the p-th space with squared frame norm F the induced
current is ``(1/2p) dd^c log F``.  Two independent evaluation routes are
provided and kept deliberately separate:

* ``"potential"`` moves dd^c onto the test form, so only the globally
  defined potential pieces (Bergman function, metric weight, reference
  volume factor) are ever sampled.  It tolerates any admissible metric.

* ``"derivative"`` differentiates the reduced family pointwise and adds the
  forced divisor parts explicitly; the pointwise Hessian never sees the
  distributional mass sitting on the base divisor, so skipping that
  correction is a silent factor-of-everything bug.

Agreement of the two routes is a strong end-to-end check and is exercised
by the test suite.  Wedge pairings (surfaces, bidegree (2,2)) decompose the
square of the current into the smooth part, divisor restrictions of the
reduced family, and transverse intersection points; a divisor paired with
itself contributes nothing, matching the closed-form wedge convention in
:mod:`kahlerlab.bundles`.
"""

from __future__ import annotations

import math

import numpy as np

from ._kernels import eval_monomials
from .bundles import (_coord_intersection, _p1_roots, curvature_pairing,
                      ddc_pairing, _form_omega_matrix, pair_omega_basis,
                      descriptor_pairing_p1)
from .errors import (ConfigurationError, GeneralPositionError, NumericalError)
from .geometry import build_manifold, quadrature_nodes, wedge_density_11

__all__ = [
    "fs_pairing", "fs_pairings", "fs_wedge_self_pairing", "form_values_hom",
    "divisor_pairing", "descriptor_form_pairing", "descriptor_wedge_pairing",
    "BergmanField", "ReducedHessianField",
]


# ---------------------------------------------------------------------------
# cached per-block fields
# ---------------------------------------------------------------------------


class BergmanField:
    """Log Bergman values cached per quadrature block.

    Keyed by ``id`` of the node array, so a single instance may be shared
    across many test forms on the same rule but must not outlive the rule.
    """

    def __init__(self, space):
        self.space = space
        self._cache = {}

    def __call__(self, chart, Z):
        key = (chart, id(Z))
        if key not in self._cache:
            self._cache[key] = self.space.log_bergman(chart, Z)
        return self._cache[key]


class ReducedHessianField:
    """Pointwise Hessian of ``log F_red / (2p)`` cached per block.

    Returns ``(H, bad)`` where H is (N,) on curves and (N, 2, 2) on
    surfaces and ``bad`` flags nodes where the reduced family vanished
    (isolated; their quadrature weight is dropped by the caller).
    """

    def __init__(self, space):
        self.space = space
        self._cache = {}

    def __call__(self, chart, Z):
        key = (chart, id(Z))
        if key not in self._cache:
            self._cache[key] = _reduced_hessian(self.space, chart, Z)
        return self._cache[key]


def _reduced_hessian(space, chart, Z):
    n = space.manifold.dim
    V, dV = space.reduced_section_values(chart, Z, derivs=True)
    F = np.einsum("nj,nj->n", np.abs(V), np.abs(V))
    bad = F < 1e-290
    Fs = np.where(bad, 1.0, F)
    scale = 1.0 / (2.0 * space.p)
    if n == 1:
        Fa = np.einsum("nj,nj->n", dV[0], np.conj(V))
        Faa = np.einsum("nj,nj->n", np.abs(dV[0]), np.abs(dV[0]))
        H = scale * (Faa * Fs - np.abs(Fa) ** 2) / Fs ** 2
        return np.where(bad, 0.0, np.real(H)), bad
    H = np.empty((Z.shape[0], 2, 2), dtype=complex)
    for a in range(2):
        Fa = np.einsum("nj,nj->n", dV[a], np.conj(V))
        for b in range(2):
            Fab = np.einsum("nj,nj->n", dV[a], np.conj(dV[b]))
            Fb = np.einsum("nj,nj->n", dV[b], np.conj(V))
            H[:, a, b] = scale * (Fab * Fs - Fa * np.conj(Fb)) / Fs ** 2
    H[bad] = 0.0
    return H, bad


# ---------------------------------------------------------------------------
# point evaluation of test forms
# ---------------------------------------------------------------------------


def form_values_hom(manifold, form, points):
    """chi at homogeneous points, preserving order."""
    pts = manifold.normalize(np.atleast_2d(np.asarray(points, dtype=complex)))
    charts = manifold.chart_of(pts)
    out = np.empty(pts.shape[0], dtype=float)
    for c in np.unique(charts):
        sel = charts == c
        Z = manifold.to_chart(pts[sel], int(c))
        out[sel] = np.asarray(form.chi(int(c), Z), dtype=float)
    return out


# ---------------------------------------------------------------------------
# main pairing, two routes
# ---------------------------------------------------------------------------


def fs_pairing(space, form, rule, route="potential", line_resolution=None,
               _field=None):
    """``<(1/2p) dd^c log F_p, form>`` for an orthonormalized space."""
    if space.manifold.dim == 2 and form.omega_part is None:
        raise ConfigurationError(
            "(1,1)-current pairings on surfaces need omega-carrying forms")
    if route == "potential":
        field = _field if _field is not None else BergmanField(space)
        total = curvature_pairing(space.metric, form, rule)
        if space.adjoint:
            for i, cdeg in enumerate(space.manifold.canonical_degree):
                total += (cdeg / space.p) * pair_omega_basis(i, form, rule)
        total += ddc_pairing(field, form, rule, integrable=True) / (2.0 * space.p)
        return total
    if route != "derivative":
        raise ConfigurationError(f"unknown pairing route {route!r}")
    field = _field if _field is not None else ReducedHessianField(space)
    total = _pointwise_pairing(field, form, rule)
    for comp, k in space.base_divisors:
        total += (k / space.p) * divisor_pairing(
            space.manifold, comp, form, resolution=line_resolution)
    return total


def fs_pairings(space, forms, rule, route="potential", line_resolution=None):
    """Pair one space against many forms, sharing the per-block cache."""
    field = (BergmanField(space) if route == "potential"
             else ReducedHessianField(space))
    return np.array([
        fs_pairing(space, f, rule, route, line_resolution, _field=field)
        for f in forms])


def _pointwise_pairing(field, form, rule):
    m = rule.manifold
    total = 0.0
    for b in rule.capped_blocks():
        H, bad = field(b.chart, b.points)
        nbad = int(np.count_nonzero(bad))
        if nbad > max(8, b.points.shape[0] // 10000):
            raise NumericalError(
                f"reduced family vanished at {nbad} quadrature nodes")
        chi = np.asarray(form.chi(b.chart, b.points), dtype=float)
        if m.dim == 1:
            dens = np.real(H) / math.pi
            wq = b.weights_lebesgue
        else:
            Mf = _form_omega_matrix(m, form, b.chart, b.points)
            dens = wedge_density_11(H, Mf)
            wq = b.weights_lebesgue / 4.0
        if nbad:
            wq = np.where(bad, 0.0, wq)
        total += float(np.dot(chi * dens, wq))
    return total


# ---------------------------------------------------------------------------
# divisor currents
# ---------------------------------------------------------------------------


def divisor_pairing(manifold, comp, form, resolution=None):
    """``<[D], form>`` for one singular component.

    On curves divisors are point masses and the form is a test function.
    On surfaces the form must carry an ``omega_part`` and the pairing is
    the restriction integral over a coordinate divisor; polynomial
    components of surfaces have no closed-form parametrization here.
    """
    if manifold.dim == 1:
        if comp[0] == "coord":
            pt = np.zeros((1, 2), dtype=complex)
            pt[0, 1 - comp[1]] = 1.0
            return float(form_values_hom(manifold, form, pt)[0])
        return float(sum(form_values_hom(manifold, form, r[None, :])[0]
                         for r in _p1_roots(comp[2])))
    if comp[0] != "coord":
        raise GeneralPositionError(
            "surface divisor pairings need coordinate components")
    if form.omega_part is None:
        raise ConfigurationError(
            "pairing a divisor on a surface needs a (1,1) test form")
    embed, _, omega_index = _line_embedding(manifold, comp)
    coeff = float(np.asarray(form.omega_part, dtype=float)[omega_index])
    if coeff == 0.0:
        return 0.0
    line_m, rule = _line_rule(resolution)
    total = 0.0
    for b in rule.capped_blocks():
        pts = embed(line_m.from_chart(b.points, b.chart))
        chi = form_values_hom(manifold, form, pts)
        total += coeff * float(np.dot(chi, b.weights_volume))
    return total


def _line_embedding(manifold, comp):
    """Linear embedding of a coordinate divisor as a parameter curve.

    Returns ``(embed, slots, omega_index)``: embed maps (N, 2) parameter
    points to ambient homogeneous coordinates, ``slots`` names the ambient
    exponent columns that survive on the divisor, and ``omega_index`` is
    the reference basis form whose restriction is the parameter form.
    """
    i = comp[1]
    if manifold.kind == "P2":
        j, k = sorted({0, 1, 2} - {i})

        def embed(pts2):
            out = np.zeros((pts2.shape[0], 3), dtype=complex)
            out[:, j] = pts2[:, 0]
            out[:, k] = pts2[:, 1]
            return out

        return embed, (j, k), 0
    if manifold.kind != "P1xP1":
        raise ConfigurationError("coordinate divisors live on surfaces here")
    if i < 2:
        fixed, slots, omega_index = 1 - i, (2, 3), 1
    else:
        fixed, slots, omega_index = 2 + (1 - (i - 2)), (0, 1), 0

    def embed(pts2):
        out = np.zeros((pts2.shape[0], 4), dtype=complex)
        out[:, fixed] = 1.0
        out[:, slots[0]] = pts2[:, 0]
        out[:, slots[1]] = pts2[:, 1]
        return out

    return embed, slots, omega_index


def _line_rule(resolution, q_line=0):
    line_m = build_manifold("P1")
    res = resolution if resolution is not None else max(48, 2 * q_line)
    return line_m, quadrature_nodes(line_m, res)


# ---------------------------------------------------------------------------
# closed-form current pairings
# ---------------------------------------------------------------------------


def descriptor_form_pairing(descriptor, form, rule, line_resolution=None):
    """``<T, form>`` for a closed-form (1,1)-current on any model."""
    m = descriptor.manifold
    if m.kind == "P1":
        return descriptor_pairing_p1(descriptor, form, rule)
    if form.omega_part is None:
        raise ConfigurationError(
            "(1,1)-current pairings on surfaces need omega-carrying forms")
    total = 0.0
    for i, c in enumerate(descriptor.omega):
        if c != 0.0:
            total += c * pair_omega_basis(i, form, rule)
    for comp, nu in descriptor.divisors:
        total += nu * divisor_pairing(m, comp, form, resolution=line_resolution)
    return total


def descriptor_wedge_pairing(manifold, wedge, form, rule, line_resolution=None):
    """``<A ^ B, chi>`` from a closed-form wedge decomposition.

    ``wedge`` is the output of :func:`kahlerlab.bundles.wedge_descriptors`;
    ``form`` must be a scalar test function (no omega part).
    """
    if form.omega_part is not None:
        raise ConfigurationError("bidegree (2,2) currents pair with functions")
    total = 0.0
    pairs = np.asarray(wedge["omega_pairs"], dtype=float)
    for b in rule.capped_blocks():
        chi = np.asarray(form.chi(b.chart, b.points), dtype=float)
        mats = [manifold.omega_basis_matrix(i, b.chart, b.points)
                for i in range(manifold.factors)]
        wq = b.weights_lebesgue / 4.0
        for i in range(manifold.factors):
            for j in range(manifold.factors):
                if pairs[i, j] != 0.0:
                    dens = wedge_density_11(mats[i], mats[j])
                    total += pairs[i, j] * float(np.dot(chi * dens, wq))
    for comp, vec in wedge["divisor_omega"]:
        total += _divisor_omega_pairing(manifold, comp, vec, form,
                                        line_resolution)
    for pt, mass in wedge["points"]:
        total += mass * float(form_values_hom(manifold, form, pt[None, :])[0])
    return total


def _divisor_omega_pairing(manifold, comp, omega_vec, form, resolution):
    """``int_D chi * (omega_vec . basis)|_D`` over a coordinate divisor."""
    if comp[0] != "coord":
        raise GeneralPositionError(
            "surface divisor pairings need coordinate components")
    embed, _, omega_index = _line_embedding(manifold, comp)
    coeff = float(np.asarray(omega_vec, dtype=float)[omega_index])
    if coeff == 0.0:
        return 0.0
    line_m, rule = _line_rule(resolution)
    total = 0.0
    for b in rule.capped_blocks():
        pts = embed(line_m.from_chart(b.points, b.chart))
        chi = form_values_hom(manifold, form, pts)
        total += coeff * float(np.dot(chi, b.weights_volume))
    return total


# ---------------------------------------------------------------------------
# self-wedge of the family current (surfaces)
# ---------------------------------------------------------------------------


def fs_wedge_pairing(space_a, space_b, form, rule, line_resolution=None):
    """``<gamma_a ^ gamma_b, chi>`` for two section spaces over one surface.

    The product expands into the pointwise wedge of the two reduced
    families, each family restricted to the other's forced divisors, and
    the transverse intersections between the two divisor collections.  A
    component shared by both collections carries no intersection mass:
    both local potentials depend on the same coordinate there.
    """
    m = space_a.manifold
    if m.dim != 2:
        raise ConfigurationError("current wedges need a surface")
    if space_b.manifold.kind != m.kind:
        raise ConfigurationError("both factors must live on one manifold")
    if form.omega_part is not None:
        raise ConfigurationError("bidegree (2,2) currents pair with functions")
    same = space_b is space_a
    field_a = ReducedHessianField(space_a)
    field_b = field_a if same else ReducedHessianField(space_b)
    total = 0.0
    for b in rule.capped_blocks():
        Ha, bad = field_a(b.chart, b.points)
        if same:
            Hb = Ha
        else:
            Hb, bad_b = field_b(b.chart, b.points)
            bad = bad | bad_b
        nbad = int(np.count_nonzero(bad))
        if nbad > max(8, b.points.shape[0] // 10000):
            raise NumericalError(
                f"reduced families vanished at {nbad} quadrature nodes")
        chi = np.asarray(form.chi(b.chart, b.points), dtype=float)
        dens = wedge_density_11(Ha, Hb)
        wq = b.weights_lebesgue / 4.0
        if nbad:
            wq = np.where(bad, 0.0, wq)
        total += float(np.dot(chi * dens, wq))
    for comp, k in space_a.base_divisors:
        total += (k / space_a.p) * _restricted_pairing(
            space_b, comp, form, line_resolution)
    for comp, k in space_b.base_divisors:
        total += (k / space_b.p) * _restricted_pairing(
            space_a, comp, form, line_resolution)
    for comp_a, ka in space_a.base_divisors:
        for comp_b, kb in space_b.base_divisors:
            if comp_a[0] != "coord" or comp_b[0] != "coord":
                raise GeneralPositionError(
                    "transverse divisor terms are available for coordinate "
                    "divisors only")
            if comp_a[1] == comp_b[1]:
                continue
            pts = _coord_intersection(m, comp_a[1], comp_b[1])
            if pts is None:
                raise GeneralPositionError(
                    f"divisors {comp_a} and {comp_b} are not in general "
                    "position")
            for pt in pts:
                total += (ka * kb / (space_a.p * space_b.p)) * float(
                    form_values_hom(m, form, pt[None, :])[0])
    return total


def fs_wedge_self_pairing(space, form, rule, line_resolution=None):
    """``<gamma_p ^ gamma_p, chi>`` on a surface.

    The diagonal case of :func:`fs_wedge_pairing`; the shared reduced
    family is evaluated once per block.
    """
    return fs_wedge_pairing(space, space, form, rule, line_resolution)


def _restricted_pairing(space, comp, form, resolution):
    """``<[D] ^ beta, chi>``: the reduced current restricted to a divisor."""
    m = space.manifold
    Rc, q_line = _line_family(space, comp)
    line_m, rule = _line_rule(resolution, q_line)
    embed, _, _ = _line_embedding(m, comp)
    p = space.p
    exps = np.arange(q_line + 1)
    total = 0.0
    for b in rule.capped_blocks():
        Z = b.points
        e = exps if b.chart == 0 else q_line - exps
        V = eval_monomials(Z, e[:, None].astype(np.int64),
                           np.ones(q_line + 1)) @ Rc
        dV = eval_monomials(Z, np.maximum(e - 1, 0)[:, None].astype(np.int64),
                            e.astype(float)) @ Rc
        F = np.einsum("nj,nj->n", np.abs(V), np.abs(V))
        bad = F < 1e-290
        Fs = np.where(bad, 1.0, F)
        Fa = np.einsum("nj,nj->n", dV, np.conj(V))
        Faa = np.einsum("nj,nj->n", np.abs(dV), np.abs(dV))
        H = np.real(Faa * Fs - np.abs(Fa) ** 2) / Fs ** 2 / (2.0 * p)
        chi = form_values_hom(m, form, embed(line_m.from_chart(Z, b.chart)))
        wq = np.where(bad, 0.0, b.weights_lebesgue)
        total += float(np.dot(chi * H / math.pi, wq))
    return total


def _line_family(space, comp):
    """Coefficients of the reduced family restricted to a coordinate divisor.

    Returns ``(Rc, q_line)`` where column j of Rc holds the binary-form
    coefficients of the j-th orthonormal section over the slots
    ``s^(q_line - a) t^a``.
    """
    if comp[0] != "coord":
        raise GeneralPositionError(
            "restrictions are available for coordinate divisors only")
    m = space.manifold
    i = comp[1]
    _, slots, _ = _line_embedding(m, comp)
    E = space.exponents - space.coordinate_shift[None, :]
    keep = E[:, i] == 0
    if not np.any(keep):
        raise NumericalError("reduced family vanishes on the divisor")
    a_slot = E[keep, slots[1]]
    q_line = int(E[keep][0, slots[0]] + E[keep][0, slots[1]])
    R = np.zeros((q_line + 1, space.exponents.shape[0]))
    R[a_slot, np.nonzero(keep)[0]] = space.scales[keep]
    return R @ space.coeff_matrix(), q_line
