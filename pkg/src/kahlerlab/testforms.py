"""Smooth test forms with exact complex Hessians.

Scalar test functions are built from the U(1)-invariant family

    chi = Re(c * A(z) * conj(B(z))) / prod_f |z_f|^{2 s_f}

where A, B are homogeneous sections of matching degrees ``s_f`` per factor.
This family is closed under the chart calculus: chi and its complex Hessian
evaluate from exact chart-polynomial derivatives, so pairings built on them
never use numerical differentiation.  It contains the squared-modulus ratios
(A = B) and the harmonic cross terms (A != B) and separates points well.

On surfaces a test form of bidegree (1,1) is ``chi`` times a fixed closed
combination of the reference forms (``omega``, or a factor form on the
product); its dd^c is then ``dd^c chi ^ (that form)``, again exact.

Every dictionary entry is normalized by a deterministic grid estimate of
``sup|chi| + sup rho(Hess chi) / pi`` so that entries share a common scale.
"""

import numpy as np

from .errors import ConfigurationError
from .polynomials import SectionPoly, monomial_exponents

# ---------------------------------------------------------------------------
# factor bookkeeping
# ---------------------------------------------------------------------------


def _factor_of(manifold):
    """factor index of each affine chart coordinate"""
    if manifold.kind == "P1xP1":
        return (0, 1)
    return (0,) * manifold.dim


def _factor_D(manifold, Z):
    """per-factor 1 + |zeta_f|^2, shape (N, factors)"""
    if manifold.kind == "P1xP1":
        return np.stack([1.0 + np.abs(Z[:, 0]) ** 2,
                         1.0 + np.abs(Z[:, 1]) ** 2], axis=1)
    return (1.0 + np.sum(np.abs(Z) ** 2, axis=1))[:, None]


# ---------------------------------------------------------------------------
# forms
# ---------------------------------------------------------------------------


class TestForm:
    """chi = Re(c A conj(B)) / prod D^s, optionally times a closed 2-form.

    ``omega_part`` is None for scalar test functions and a coefficient
    vector over the reference basis forms for (1,1) test forms on surfaces.
    """

    __test__ = False  # keep pytest collection away from the class name

    def __init__(self, manifold, c, A, B, omega_part=None, label="", scale=1.0):
        self.manifold = manifold
        self.c = complex(c)
        self.A = A
        self.B = B
        if A is not None:
            if A.degree != B.degree:
                raise ConfigurationError("A and B must share their degree")
            self.s = tuple(A.degree)
        else:
            self.s = (0,) * manifold.factors
        self.omega_part = (None if omega_part is None
                           else np.asarray(omega_part, dtype=float))
        self.label = label
        self.scale = float(scale)
        self._charts = {}

    # -- chart data ----------------------------------------------------------

    def _chart(self, chart):
        if chart not in self._charts:
            if self.A is None:
                self._charts[chart] = None
            else:
                a = self.A.chart_poly(chart)
                b = self.B.chart_poly(chart)
                n = self.manifold.dim
                self._charts[chart] = (
                    a, b,
                    [a.deriv(j) for j in range(n)],
                    [b.deriv(j) for j in range(n)],
                )
        return self._charts[chart]

    def chi(self, chart, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        if self.A is None:
            return np.full(Z.shape[0], np.real(self.c) * self.scale)
        a, b, _, _ = self._chart(chart)
        D = _factor_D(self.manifold, Z)
        E = np.prod(D ** (-np.asarray(self.s, dtype=float)), axis=1)
        S = np.real(self.c * a.eval(Z) * np.conj(b.eval(Z)))
        return self.scale * S * E

    def hessian(self, chart, Z):
        """Complex Hessian of chi: (N,) on P1, (N, 2, 2) on surfaces."""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        n = self.manifold.dim
        N = Z.shape[0]
        if self.A is None:
            if n == 1:
                return np.zeros(N, dtype=complex)
            return np.zeros((N, 2, 2), dtype=complex)
        a, b, da, db = self._chart(chart)
        fac = _factor_of(self.manifold)
        D = _factor_D(self.manifold, Z)
        svec = np.asarray(self.s, dtype=float)
        E = np.prod(D ** (-svec), axis=1)

        Av = a.eval(Z)
        Bv = b.eval(Z)
        Aj = [da[j].eval(Z) for j in range(n)]
        Bj = [db[j].eval(Z) for j in range(n)]

        # e_j = d_j log E = -s_f conj(z_j) / D_f
        e = [-svec[fac[j]] * np.conj(Z[:, j]) / D[:, fac[j]] for j in range(n)]

        c = self.c
        S = 0.5 * (c * Av * np.conj(Bv) + np.conj(c * Av * np.conj(Bv)))
        Sj = [0.5 * (c * Aj[j] * np.conj(Bv)
                     + np.conj(c) * np.conj(Av) * Bj[j]) for j in range(n)]

        H = np.empty((N, n, n), dtype=complex)
        for j in range(n):
            for k in range(n):
                Sjk = 0.5 * (c * Aj[j] * np.conj(Bj[k])
                             + np.conj(c) * np.conj(Aj[k]) * Bj[j])
                Sk_bar = np.conj(Sj[k])
                if fac[j] == fac[k]:
                    f = fac[j]
                    de = -svec[f] * ((1.0 if j == k else 0.0) / D[:, f]
                                     - np.conj(Z[:, j]) * Z[:, k] / D[:, f] ** 2)
                else:
                    de = 0.0
                H[:, j, k] = (Sjk * E + Sj[j] * E * np.conj(e[k])
                              + Sk_bar * E * e[j]
                              + S * E * (e[j] * np.conj(e[k]) + de))
        H *= self.scale
        if n == 1:
            return H[:, 0, 0]
        return H

    # -- metadata --------------------------------------------------------------

    def with_scale(self, scale):
        return TestForm(self.manifold, self.c, self.A, self.B,
                        self.omega_part, self.label, scale)

    def __repr__(self):
        return f"TestForm({self.label})"


def constant_form(manifold, omega_part=None, label="one"):
    return TestForm(manifold, 1.0, None, None, omega_part, label)


# ---------------------------------------------------------------------------
# dictionaries
# ---------------------------------------------------------------------------


def _monomial_section(manifold, degree, expo):
    e = np.asarray(expo, dtype=np.int64)[None, :]
    return SectionPoly(manifold, degree, e, np.ones(1))


def _scalar_specs(manifold):
    """Deterministic stream of (c, A, B, label) scalar generators."""
    yield None  # the constant function
    s_total = 1
    while True:
        if manifold.kind == "P1xP1":
            degrees = [(a, s_total - a) for a in range(s_total + 1)]
        else:
            degrees = [s_total]
        for deg in degrees:
            exps = monomial_exponents(manifold, deg)
            for ia in range(len(exps)):
                for ib in range(ia, len(exps)):
                    A = _monomial_section(manifold, deg, exps[ia])
                    B = _monomial_section(manifold, deg, exps[ib])
                    la = "".join(str(int(x)) for x in exps[ia])
                    lb = "".join(str(int(x)) for x in exps[ib])
                    yield (1.0, A, B, f"re[{la}|{lb}]s{s_total}")
                    if ia != ib:
                        yield (1j, A, B, f"im[{la}|{lb}]s{s_total}")
        s_total += 1


def _normalize(form, grid_charts):
    sup_chi = 0.0
    sup_h = 0.0
    n = form.manifold.dim
    for chart, Z in grid_charts:
        chi = form.chi(chart, Z)
        sup_chi = max(sup_chi, float(np.max(np.abs(chi))))
        H = form.hessian(chart, Z)
        if n == 1:
            sup_h = max(sup_h, float(np.max(np.abs(H))))
        else:
            ev = np.linalg.eigvalsh(0.5 * (H + np.conj(np.swapaxes(H, 1, 2))))
            sup_h = max(sup_h, float(np.max(np.abs(ev))))
    norm = sup_chi + sup_h / np.pi
    if norm < 1e-12:
        return None
    return form.with_scale(form.scale / norm)


def _norm_grid(manifold):
    pts = manifold.sample_grid(600)
    charts = manifold.chart_of(pts)
    out = []
    for c in range(manifold.num_charts):
        sel = charts == c
        if np.any(sel):
            out.append((c, manifold.to_chart(pts[sel], c)))
    return out


def test_form_dictionary(manifold, m, count=12):
    """Normalized test forms for pairing currents of codimension ``m``.

    ``m = 1``: test objects for (1,1)-currents (functions on P1, chi times a
    closed reference form on surfaces).  ``m = 2`` (surfaces): test functions
    for measures.  The first entry always has unit mass pairing (the constant
    function / the Kähler form) and is exactly unnormalized.
    """
    if m not in (1, 2):
        raise ConfigurationError("codimension m must be 1 or 2")
    if m == 2 and manifold.dim != 2:
        raise ConfigurationError("m = 2 needs a surface")
    scalar = m == 2 or manifold.dim == 1

    if scalar:
        omega_parts = [None]
    elif manifold.kind == "P1xP1":
        omega_parts = [manifold.omega_coeffs(), np.array([1.0, 0.0]),
                       np.array([0.0, 1.0])]
    else:
        omega_parts = [manifold.omega_coeffs()]

    grid = _norm_grid(manifold)
    out = []
    spec_it = _scalar_specs(manifold)
    while len(out) < count:
        spec = next(spec_it)
        for op in omega_parts:
            if len(out) >= count:
                break
            if spec is None:
                label = "one" if op is None else f"one*w{_oplabel(op)}"
                out.append(constant_form(manifold, op, label))
                continue
            c, A, B, lab = spec
            if op is not None:
                lab = f"{lab}*w{_oplabel(op)}"
            form = TestForm(manifold, c, A, B, op, lab)
            form = _normalize(form, grid)
            if form is not None:
                out.append(form)
    return out


def _oplabel(op):
    return "".join(f"{x:g}" for x in np.round(op, 3))


test_form_dictionary.__test__ = False  # not a pytest item despite the name
