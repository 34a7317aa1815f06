"""Homogeneous and bihomogeneous polynomial sections.

A section of O(d) (or O(d1, d2) on the product) is stored as an exponent
matrix over the flat homogeneous coordinates plus a complex coefficient
vector.  Charts turn a section into an affine polynomial in ``dim`` complex
variables by dropping the chart coordinate; all derivative and elimination
work happens on those chart polynomials, exactly, by exponent shifts; nothing
here ever differentiates numerically.

Monomial enumeration order is fixed (lexicographic in the reduced exponents)
so bases, Gram matrices and cached results are reproducible byte for byte.
"""

import math

import numpy as np

from ._kernels import eval_monomials
from .errors import ConfigurationError

# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def monomial_exponents(manifold, degree):
    """Exponent rows of the full monomial basis of O(degree).

    degree: int for P1/P2, pair for P1xP1.  Rows are int64 over the
    homogeneous coordinates, in a fixed lexicographic order.
    """
    kind = manifold.kind
    if kind == "P1":
        d = _as_int_degree(degree, 1)[0]
        rows = [(d - a, a) for a in range(d + 1)]
    elif kind == "P2":
        d = _as_int_degree(degree, 1)[0]
        rows = [(d - a - b, a, b)
                for a in range(d + 1) for b in range(d - a + 1)]
    else:
        d1, d2 = _as_int_degree(degree, 2)
        rows = [(d1 - a, a, d2 - b, b)
                for a in range(d1 + 1) for b in range(d2 + 1)]
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), manifold.hom_len)


def _as_int_degree(degree, k):
    if k == 1:
        if np.ndim(degree) != 0:
            (degree,) = degree
        d = int(degree)
        if d < 0:
            raise ConfigurationError("degree must be non-negative")
        return (d,)
    d1, d2 = (int(x) for x in degree)
    if d1 < 0 or d2 < 0:
        raise ConfigurationError("degrees must be non-negative")
    return (d1, d2)


def degree_tuple(manifold, degree):
    """Normalize a degree spec to the per-factor tuple."""
    return _as_int_degree(degree, manifold.factors)


# ---------------------------------------------------------------------------
# chart polynomials (affine, exact calculus)
# ---------------------------------------------------------------------------


class ChartPoly:
    """Polynomial in the affine coordinates of one chart."""

    __slots__ = ("exponents", "coeffs", "nvars")

    def __init__(self, exponents, coeffs, nvars):
        self.exponents = np.asarray(exponents, dtype=np.int64).reshape(-1, nvars)
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        self.nvars = nvars

    @classmethod
    def zero(cls, nvars):
        return cls(np.zeros((0, nvars), dtype=np.int64), np.zeros(0), nvars)

    @property
    def is_zero(self):
        return self.coeffs.size == 0 or not np.any(self.coeffs)

    def eval(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        if self.coeffs.size == 0:
            return np.zeros(Z.shape[0], dtype=complex)
        mono = eval_monomials(Z, self.exponents, np.ones(len(self.coeffs)))
        return mono @ self.coeffs

    def deriv(self, axis):
        e = self.exponents
        keep = e[:, axis] > 0
        if not np.any(keep):
            return ChartPoly.zero(self.nvars)
        e2 = e[keep].copy()
        c2 = self.coeffs[keep] * e2[:, axis]
        e2[:, axis] -= 1
        return ChartPoly(e2, c2, self.nvars)

    def degree(self, axis):
        if self.coeffs.size == 0:
            return -1
        live = np.abs(self.coeffs) > 0
        if not np.any(live):
            return -1
        return int(self.exponents[live, axis].max())

    def dense(self):
        """Dense coefficient array indexed by the exponents."""
        if self.coeffs.size == 0:
            return np.zeros((1,) * self.nvars, dtype=complex)
        shape = tuple(int(self.exponents[:, a].max()) + 1
                      for a in range(self.nvars))
        out = np.zeros(shape, dtype=complex)
        np.add.at(out, tuple(self.exponents[:, a] for a in range(self.nvars)),
                  self.coeffs)
        return out

    @classmethod
    def from_dense(cls, grid):
        grid = np.asarray(grid, dtype=complex)
        nz = np.nonzero(grid)
        coeffs = grid[nz]
        exps = np.stack(nz, axis=1).astype(np.int64)
        return cls(exps, coeffs, grid.ndim)


# ---------------------------------------------------------------------------
# homogeneous sections
# ---------------------------------------------------------------------------


class SectionPoly:
    """A polynomial section of O(degree) in homogeneous form."""

    def __init__(self, manifold, degree, exponents, coeffs):
        self.manifold = manifold
        self.degree = degree_tuple(manifold, degree)
        self.exponents = np.asarray(exponents, dtype=np.int64)
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        if self.exponents.shape != (self.coeffs.size, manifold.hom_len):
            raise ConfigurationError("exponent/coefficient shape mismatch")
        self._check_degrees()
        self._charts = {}

    def _check_degrees(self):
        e = self.exponents
        if e.size == 0:
            return
        m = self.manifold
        if m.kind == "P1xP1":
            if (np.any(e[:, 0] + e[:, 1] != self.degree[0])
                    or np.any(e[:, 2] + e[:, 3] != self.degree[1])):
                raise ConfigurationError("inhomogeneous exponent rows")
        else:
            if np.any(e.sum(axis=1) != self.degree[0]):
                raise ConfigurationError("inhomogeneous exponent rows")

    @classmethod
    def from_coeff_map(cls, manifold, degree, items):
        """Build from ``{exponent tuple: coefficient}``."""
        exps = np.asarray([k for k, _ in items.items()], dtype=np.int64)
        coeffs = np.asarray([v for _, v in items.items()], dtype=complex)
        if exps.size == 0:
            exps = np.zeros((0, manifold.hom_len), dtype=np.int64)
        return cls(manifold, degree, exps, coeffs)

    @property
    def is_zero(self):
        return self.coeffs.size == 0 or not np.any(self.coeffs)

    def eval_hom(self, points):
        """Values at homogeneous points (caller controls normalization)."""
        pts = np.atleast_2d(np.asarray(points, dtype=complex))
        if self.is_zero:
            return np.zeros(pts.shape[0], dtype=complex)
        mono = eval_monomials(pts, self.exponents, np.ones(self.coeffs.size))
        return mono @ self.coeffs

    def chart_poly(self, chart):
        """Affine polynomial on a chart (section / chart-frame power)."""
        if chart in self._charts:
            return self._charts[chart]
        m = self.manifold
        cols = _chart_columns(m, chart)
        exps = self.exponents[:, cols] if self.coeffs.size else \
            np.zeros((0, m.dim), dtype=np.int64)
        cp = ChartPoly(exps, self.coeffs, m.dim)
        self._charts[chart] = cp
        return cp

    def multiply(self, other):
        if self.manifold != other.manifold:
            raise ConfigurationError("manifold mismatch in product")
        deg = tuple(a + b for a, b in zip(self.degree, other.degree))
        acc = {}
        for e1, c1 in zip(self.exponents, self.coeffs):
            for e2, c2 in zip(other.exponents, other.coeffs):
                key = tuple(int(x) for x in (e1 + e2))
                acc[key] = acc.get(key, 0.0) + c1 * c2
        items = {k: v for k, v in acc.items() if v != 0}
        return SectionPoly.from_coeff_map(self.manifold, deg, items)

    def vanishing_order(self, coord):
        """Order of vanishing along the coordinate divisor {z_coord = 0}."""
        live = np.abs(self.coeffs) > 0
        if not np.any(live):
            return None
        return int(self.exponents[live, coord].min())

    def divide_coordinate(self, coord, k):
        """Exact division by z_coord^k (requires vanishing order >= k)."""
        if k == 0:
            return self
        ordv = self.vanishing_order(coord)
        if ordv is None or ordv < k:
            raise ConfigurationError("section does not vanish to that order")
        e = self.exponents.copy()
        e[:, coord] -= k
        m = self.manifold
        if m.kind == "P1xP1":
            d1, d2 = self.degree
            deg = (d1 - k, d2) if coord < 2 else (d1, d2 - k)
        else:
            deg = (self.degree[0] - k,)
        return SectionPoly(m, deg, e, self.coeffs.copy())

    def restrict_line(self, A, B):
        """Restriction to the line {t0 A + t1 B} on P2, as a binary form.

        Returns the P1 section s(t0 A + t1 B) of the same degree; exact, via
        discrete Fourier interpolation of the parametrized values.
        """
        m = self.manifold
        if m.kind != "P2":
            raise ConfigurationError("line restriction is a P2 operation")
        d = self.degree[0]
        A = np.asarray(A, dtype=complex)
        B = np.asarray(B, dtype=complex)
        M = d + 1
        w = np.exp(2j * np.pi * np.arange(M) / M)
        pts = A[None, :] + w[:, None] * B[None, :]
        # F(1, w_k) = sum_j c_j w^{jk} -> inverse transform is fft(vals)/M
        vals = self.eval_hom(pts)
        coeffs = np.fft.fft(vals) / M  # c_j = coeff of t0^{d-j} t1^j
        from . import geometry  # local import to avoid a cycle at load time
        p1 = geometry.build_manifold("P1")
        exps = np.stack([d - np.arange(M), np.arange(M)], axis=1)
        return SectionPoly(p1, d, exps.astype(np.int64), coeffs)

    def fix_factor(self, factor, point):
        """On P1xP1, freeze one factor at a point; returns a P1 section."""
        m = self.manifold
        if m.kind != "P1xP1":
            raise ConfigurationError("fix_factor is a product operation")
        pt = np.asarray(point, dtype=complex).reshape(2)
        from . import geometry
        p1 = geometry.build_manifold("P1")
        if factor == 0:
            scale = pt[0] ** self.exponents[:, 0] * pt[1] ** self.exponents[:, 1]
            exps = self.exponents[:, 2:]
            deg = self.degree[1]
        else:
            scale = pt[0] ** self.exponents[:, 2] * pt[1] ** self.exponents[:, 3]
            exps = self.exponents[:, :2]
            deg = self.degree[0]
        acc = {}
        for e, c in zip(exps, self.coeffs * scale):
            key = tuple(int(x) for x in e)
            acc[key] = acc.get(key, 0.0) + c
        acc = {k: v for k, v in acc.items() if v != 0}
        return SectionPoly.from_coeff_map(p1, deg, acc)


def _chart_columns(manifold, chart):
    """Homogeneous columns that become the affine coordinates of a chart."""
    kind = manifold.kind
    if kind == "P1":
        return [1 - chart]
    if kind == "P2":
        return [i for i in range(3) if i != chart]
    cz, cw = divmod(chart, 2)
    return [1 - cz, 3 - cw]


def coordinate_section(manifold, coord):
    """The section z_coord of the degree-one bundle along its factor."""
    if manifold.kind == "P1xP1":
        deg = (1, 0) if coord < 2 else (0, 1)
    else:
        deg = 1
    e = np.zeros((1, manifold.hom_len), dtype=np.int64)
    e[0, coord] = 1
    return SectionPoly(manifold, deg, e, np.ones(1))


def linear_section(manifold, coeffs):
    """The section sum_i coeffs[i] z_i (degree one; P1 and P2 only)."""
    if manifold.kind == "P1xP1":
        raise ConfigurationError("use per-factor sections on the product")
    c = np.asarray(coeffs, dtype=complex).reshape(manifold.hom_len)
    e = np.eye(manifold.hom_len, dtype=np.int64)
    live = np.abs(c) > 0
    return SectionPoly(manifold, 1, e[live], c[live])


def multinomial(degree, exps):
    """Multinomial coefficient d! / prod(e_i!) for exponent rows."""
    exps = np.atleast_2d(exps)
    out = np.empty(exps.shape[0])
    for i, row in enumerate(exps):
        v = math.factorial(int(degree))
        for e in row:
            v //= math.factorial(int(e))
        out[i] = float(v)
    return out
