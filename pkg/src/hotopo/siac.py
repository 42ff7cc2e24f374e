"""B-splines, symmetric SIAC kernels and line (L-SIAC) convolution.

The filtered value at ``p`` along direction ``theta`` is

    u*(p) = integral K_H(t) u_h(p - t (cos theta, sin theta)) dt

with ``K_H(t) = (1/H) sum_g c_g psi_l(t/H - g)``, ``g = -k..k``. The field is
restricted to the filter line once (a piecewise polynomial in the line
parameter) and the integral is evaluated exactly by Gauss-Legendre quadrature
between consecutive breakpoints (kernel knots and element crossings).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidOrder, SingularMomentMatrix, SupportExitsDomain
from .field import HighOrderField

MAX_H_ITERATIONS = 10


# -- B-splines ------------------------------------------------------------------


def bspline_eval(order: int, t):
    """Centred B-spline ``psi_order(t)`` by the standard recurrence.

    ``psi_1`` is the indicator of ``[-1/2, 1/2)``; support is
    ``[-order/2, order/2]``.
    """
    if order < 1:
        raise InvalidOrder(f"B-spline order must be >= 1, got {order}")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    # level kappa holds psi_kappa(t + s) for s = -(order-kappa)/2 + i
    n = order
    s = -(n - 1) / 2.0 + np.arange(n)
    x = t[..., None] + s
    vals = ((x >= -0.5) & (x < 0.5)).astype(float)
    for kappa in range(1, order):
        s = -(order - kappa - 1) / 2.0 + np.arange(order - kappa)
        x = t[..., None] + s
        half = (kappa + 1) / 2.0
        vals = ((x + half) * vals[..., 1:] + (half - x) * vals[..., :-1]) / kappa
    out = vals[..., 0]
    return float(out[0]) if scalar else out


def bspline_derivative(order: int, t):
    """Exact derivative ``psi_l'(t) = psi_{l-1}(t + 1/2) - psi_{l-1}(t - 1/2)``."""
    if order < 2:
        raise InvalidOrder(f"B-spline derivative needs order >= 2, got {order}")
    t = np.asarray(t, dtype=float)
    out = bspline_eval(order - 1, t + 0.5) - bspline_eval(order - 1, t - 0.5)
    return float(out) if np.ndim(out) == 0 else out


# -- kernel coefficients -------------------------------------------------------


def _bspline_moment(order: int, shift: float, m: int, npts: int) -> float:
    """integral of psi_order(t - shift) t^m dt, exact per knot interval."""
    x, w = np.polynomial.legendre.leggauss(npts)
    total = 0.0
    for i in range(order):
        a = shift - order / 2.0 + i
        t = a + 0.5 * (x + 1.0)
        total += 0.5 * float(np.sum(w * bspline_eval(order, t - shift) * t**m))
    return total


@lru_cache(maxsize=None)
def _coefficients(k: int, order: int) -> tuple[float, ...]:
    gammas = np.arange(-k, k + 1)
    npts = k + order
    a = np.array([[_bspline_moment(order, g, m, npts) for g in gammas] for m in range(2 * k + 1)])
    rhs = np.zeros(2 * k + 1)
    rhs[0] = 1.0
    if not np.isfinite(np.linalg.cond(a)) or np.linalg.cond(a) > 1e14:
        raise SingularMomentMatrix(f"moment matrix for k={k}, order={order} is singular")
    c = np.linalg.solve(a, rhs)
    c = 0.5 * (c + c[::-1])
    return tuple(float(v) for v in c)


def solve_kernel_coefficients(k: int, order: int | None = None) -> np.ndarray:
    """Coefficients ``c_{-k..k}`` reproducing polynomials of degree ``2k``.

    Solves ``integral K(t) t^m dt = delta_{m0}`` for ``m = 0..2k``. Results are
    cached per ``(k, order)``.
    """
    if order is None:
        order = k + 1
    if k < 1:
        raise InvalidOrder(f"kernel half-order k must be >= 1, got {k}")
    if order < 1:
        raise InvalidOrder(f"B-spline order must be >= 1, got {order}")
    return np.array(_coefficients(int(k), int(order)))


@dataclass(frozen=True)
class SiacKernel:
    k: int
    spline_order: int
    H: float = 1.0
    theta: float = 0.0  # degrees

    def __post_init__(self):
        if self.H <= 0:
            raise ValueError("characteristic length H must be positive")
        if self.k < 1 or self.spline_order < 1:
            raise InvalidOrder("kernel needs k >= 1 and spline_order >= 1")

    @classmethod
    def build(cls, k: int, spline_order: int | None = None, H: float = 1.0, theta: float = 0.0):
        return cls(k, k + 1 if spline_order is None else spline_order, float(H), float(theta))

    @property
    def coeffs(self) -> np.ndarray:
        return solve_kernel_coefficients(self.k, self.spline_order)

    @property
    def num_splines(self) -> int:
        return 2 * self.k + 1

    @property
    def half_width(self) -> float:
        return self.H * (2 * self.k + self.spline_order) / 2.0

    def knots(self) -> np.ndarray:
        """Breakpoints of the piecewise polynomial kernel in ``t``."""
        j = np.arange(2 * self.k + self.spline_order + 1)
        return self.H * (-self.k - self.spline_order / 2.0 + j)

    def __call__(self, t, deriv: int = 0):
        return kernel_eval(self, t, deriv)


def kernel_eval(kernel: SiacKernel, t, deriv: int = 0):
    """``K_H(t)`` (``deriv=0``) or ``K_H'(t)`` (``deriv=1``)."""
    t = np.asarray(t, dtype=float)
    tau = t[..., None] / kernel.H - np.arange(-kernel.k, kernel.k + 1)
    if deriv == 0:
        psi = bspline_eval(kernel.spline_order, tau)
    elif deriv == 1:
        psi = bspline_derivative(kernel.spline_order, tau)
    else:
        raise ValueError("deriv must be 0 or 1")
    out = (psi @ kernel.coeffs) / kernel.H ** (1 + deriv)
    return float(out) if out.ndim == 0 else out


# -- restriction of a field to a line ------------------------------------------


def _unit(theta_deg: float) -> np.ndarray:
    th = np.deg2rad(theta_deg)
    return np.array([np.cos(th), np.sin(th)])


class LineRestriction:
    """The field along ``origin + s * direction`` as a piecewise polynomial in ``s``.

    ``raw_*`` arrays list every element whose closure meets the line (interval
    may be degenerate). ``piece_*`` arrays partition the covered part of the
    line; where two closures overlap (line running along an edge) the lower
    element id owns the piece.
    """

    def __init__(self, field: HighOrderField, origin, direction):
        self.field = field
        mesh = field.mesh
        self.origin = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        self.direction = d / np.hypot(*d)
        x0, y0, x1, y1 = mesh.bbox
        self.scale = max(x1 - x0, y1 - y0)
        self.tol = 1e-12 * self.scale
        self._clip(mesh)
        self._build_pieces()

    def _clip(self, mesh):
        # Cyrus-Beck against every element, vectorised
        c = mesh.conn.copy()
        tri = mesh.kinds == 0
        c[tri, 3] = c[tri, 0]  # closing edge repeated as a zero-length edge
        a = mesh.vertices[c]
        b = np.roll(a, -1, axis=1)
        edge = b - a
        normal = np.stack([edge[..., 1], -edge[..., 0]], axis=-1)  # outward for CCW
        nlen = np.hypot(normal[..., 0], normal[..., 1])
        num = np.einsum("eij,eij->ei", normal, self.origin - a)
        den = normal @ self.direction
        tol = self.tol * np.maximum(nlen, 1e-300)
        live = nlen > 0
        par = np.abs(den) <= 1e-14 * nlen
        # num + s * den <= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = -num / den
        lo = np.where(live & ~par & (den < 0), bound, -np.inf).max(axis=1)
        hi = np.where(live & ~par & (den > 0), bound, np.inf).min(axis=1)
        blocked = (live & par & (num > tol)).any(axis=1)
        ok = ~blocked & (lo <= hi + self.tol) & np.isfinite(lo) & np.isfinite(hi)
        idx = np.nonzero(ok)[0]
        self.raw_elem = idx
        self.raw_s0 = np.minimum(lo[idx], hi[idx])
        self.raw_s1 = np.maximum(lo[idx], hi[idx])

    def _build_pieces(self):
        keep = (self.raw_s1 - self.raw_s0) > self.tol
        s0, s1, el = self.raw_s0[keep], self.raw_s1[keep], self.raw_elem[keep]
        pts = np.sort(np.concatenate([s0, s1]))
        if len(pts):
            pts = pts[np.concatenate([[True], np.diff(pts) > self.tol])]
        a, b = pts[:-1], pts[1:]
        mid = 0.5 * (a + b)
        cover = (s0[None, :] <= mid[:, None]) & (mid[:, None] <= s1[None, :])
        big = np.iinfo(np.int64).max
        owner = np.where(cover, el[None, :], big).min(axis=1) if len(el) else np.full(len(mid), big)
        has = owner != big
        self.piece_a, self.piece_b, self.piece_elem = a[has], b[has], owner[has]
        # contiguous runs of pieces
        runs = []
        for pa, pb in zip(self.piece_a, self.piece_b):
            if runs and pa <= runs[-1][1] + self.tol:
                runs[-1][1] = max(runs[-1][1], pb)
            else:
                runs.append([pa, pb])
        self.runs = np.array(runs).reshape(-1, 2)
        # polynomial of each piece in the local variable xi in [-1, 1]
        field = self.field
        deg = field.degree * (2 if np.any(field.mesh.kinds == 1) else 1)
        self.poly_degree = deg
        xi = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
        vinv = np.linalg.inv(np.vander(xi, deg + 1, increasing=True))
        n = len(self.piece_a)
        if n:
            s = 0.5 * (self.piece_a + self.piece_b)[:, None] + 0.5 * (self.piece_b - self.piece_a)[:, None] * xi
            pts = self.origin + s.reshape(-1, 1) * self.direction
            vals = field.eval_at(np.repeat(self.piece_elem, deg + 1), pts).reshape(n, deg + 1)
            self.piece_coef = vals @ vinv.T
        else:
            self.piece_coef = np.zeros((0, deg + 1))

    def covers(self, lo: float, hi: float) -> bool:
        r = self.runs
        return bool(np.any((r[:, 0] <= lo + self.tol) & (r[:, 1] >= hi - self.tol))) if len(r) else False

    def point(self, s) -> np.ndarray:
        return self.origin + np.multiply.outer(np.asarray(s, dtype=float), self.direction)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        i = np.clip(np.searchsorted(self.piece_a, s, side="right") - 1, 0, len(self.piece_a) - 1)
        a, b = self.piece_a[i], self.piece_b[i]
        xi = (2.0 * s - a - b) / (b - a)
        c = self.piece_coef[i]
        out = c[..., -1]
        for j in range(c.shape[-1] - 2, -1, -1):
            out = out * xi + c[..., j]
        return out

    def element_at(self, s: float) -> int:
        """Lowest element id whose closure contains the line point ``s``."""
        hit = (self.raw_s0 - self.tol <= s) & (s <= self.raw_s1 + self.tol)
        if not np.any(hit):
            raise SupportExitsDomain("filter location is outside the mesh")
        return int(self.raw_elem[hit].min())

    def max_size_on(self, lo: float, hi: float) -> float:
        hit = (self.raw_s0 <= hi + self.tol) & (self.raw_s1 >= lo - self.tol)
        return float(self.field.mesh.longest_edge[self.raw_elem[hit]].max())


# -- characteristic length and convolution -------------------------------------


def _direction_factor(theta: float) -> float:
    u = _unit(theta)
    return float(abs(u[0]) + abs(u[1]))


def _adaptive_H(line: LineRestriction, s: float, theta: float, k: int, order: int) -> float:
    factor = _direction_factor(theta)
    span = (2 * k + order) / 2.0
    H = factor * float(line.field.mesh.longest_edge[line.element_at(s)])
    for _ in range(MAX_H_ITERATIONS):
        new = factor * line.max_size_on(s - span * H, s + span * H)
        if new <= H:
            break
        H = new
    if not line.covers(s - span * H, s + span * H):
        raise SupportExitsDomain("symmetric kernel support leaves the mesh")
    return H


def adaptive_characteristic_length(field: HighOrderField, p, theta: float = 0.0, k: int | None = None, order: int | None = None) -> float:
    """Kernel scaling grown until it covers the largest element under its support.

    Starts from ``(|cos| + |sin|) * h(elem(p))``, ``h`` the longest element
    edge, and iterates ``H <- (|cos| + |sin|) * max h`` over elements met by the
    support segment. Equals ``h (cos + sin)`` on uniform meshes.
    """
    k = field.degree if k is None else k
    order = k + 1 if order is None else order
    line = LineRestriction(field, p, _unit(theta))
    return _adaptive_H(line, 0.0, theta, k, order)


def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def convolve_on_line(line: LineRestriction, s: float, kernel: SiacKernel, deriv: int = 0) -> float:
    """Filter value at the line point ``s`` with a fixed kernel."""
    W = kernel.half_width
    if not line.covers(s - W, s + W):
        raise SupportExitsDomain("symmetric kernel support leaves the mesh")
    # breakpoints in t: kernel knots and element crossings (s - t = boundary)
    bnd = np.concatenate([line.piece_a, line.piece_b])
    tb = s - bnd
    tb = tb[(tb > -W) & (tb < W)]
    t = np.sort(np.concatenate([kernel.knots(), tb]))
    t = t[np.concatenate([[True], np.diff(t) > 1e-12 * kernel.H])]
    a, b = t[:-1], t[1:]
    x, w = _gauss(kernel.k + kernel.spline_order)
    half = 0.5 * (b - a)
    tq = (0.5 * (a + b))[:, None] + half[:, None] * x
    wq = half[:, None] * w
    kv = kernel_eval(kernel, tq.ravel(), deriv)
    uv = line(s - tq.ravel())
    return float(np.dot(wq.ravel() * kv, uv))


def lsiac_point(
    field: HighOrderField,
    p,
    theta: float = 0.0,
    k: int | None = None,
    order: int | None = None,
    deriv: int = 0,
    H: float | None = None,
) -> float:
    """L-SIAC filtered value (``deriv=0``) or directional derivative along ``theta``.

    ``H=None`` selects :func:`adaptive_characteristic_length`. Raises
    :class:`SupportExitsDomain` when the symmetric support leaves the mesh.
    """
    k = field.degree if k is None else k
    order = k + 1 if order is None else order
    line = LineRestriction(field, p, _unit(theta))
    if H is None:
        H = _adaptive_H(line, 0.0, theta, k, order)
    kernel = SiacKernel(k, order, float(H), float(theta))
    return convolve_on_line(line, 0.0, kernel, deriv)


def lsiac_line(
    field: HighOrderField,
    origin,
    theta: float,
    s_nodes,
    k: int | None = None,
    order: int | None = None,
    deriv: int = 0,
    H: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Filter many points lying on one line; returns ``(values, fallback)``.

    Points whose support leaves the mesh get ``nan`` and ``fallback=True``.
    """
    k = field.degree if k is None else k
    order = k + 1 if order is None else order
    line = LineRestriction(field, origin, _unit(theta))
    s_nodes = np.asarray(s_nodes, dtype=float)
    vals = np.full(len(s_nodes), np.nan)
    flags = np.zeros(len(s_nodes), dtype=bool)
    fixed = None if H is None else SiacKernel(k, order, float(H), float(theta))
    for i, s in enumerate(s_nodes):
        try:
            kern = fixed
            if kern is None:
                kern = SiacKernel(k, order, _adaptive_H(line, float(s), theta, k, order), float(theta))
            vals[i] = convolve_on_line(line, float(s), kern, deriv)
        except SupportExitsDomain:
            flags[i] = True
    return vals, flags
