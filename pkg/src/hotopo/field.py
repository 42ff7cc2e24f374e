"""Element-wise polynomial fields on a :class:`~hotopo.mesh.Mesh`."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import basis
from .errors import InvalidSpec, SingularMassMatrix
from .mesh import QUAD, TRI, Mesh


class HighOrderField:
    """Degree-``k`` nodal Lagrange coefficients per element.

    Values of neighbouring elements need not agree on shared edges; the field
    is evaluated element-locally everywhere.
    """

    def __init__(self, mesh: Mesh, degree: int, coeffs, name: str = "u"):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.mesh = mesh
        self.degree = int(degree)
        self.name = name
        counts = np.array([basis.n_nodes(int(kd), self.degree) for kd in mesh.kinds])
        width = int(counts.max())
        arr = np.zeros((mesh.n_elements, width))
        if len(coeffs) != mesh.n_elements:
            raise ValueError(f"expected coefficients for {mesh.n_elements} elements, got {len(coeffs)}")
        for e, c in enumerate(coeffs):
            c = np.asarray(c, dtype=float)
            if c.shape != (counts[e],):
                raise ValueError(f"element {e}: expected {counts[e]} coefficients, got {c.shape}")
            arr[e, : counts[e]] = c
        self.coeffs = arr
        self.counts = counts

    def element_coeffs(self, e: int) -> np.ndarray:
        return self.coeffs[e, : self.counts[e]]

    def coeff_lists(self) -> list[list[float]]:
        return [self.element_coeffs(e).tolist() for e in range(self.mesh.n_elements)]

    # -- evaluation -----------------------------------------------------------

    def _groups(self, elems: np.ndarray):
        for kind in (TRI, QUAD):
            sel = np.nonzero(self.mesh.kinds[elems] == kind)[0]
            if len(sel):
                yield kind, sel

    def _corners(self, kind: int, elems: np.ndarray) -> np.ndarray:
        nv = 3 if kind == TRI else 4
        return self.mesh.vertices[self.mesh.conn[elems, :nv]]

    def reference_coords(self, elems, pts) -> np.ndarray:
        elems = np.asarray(elems, dtype=np.int64)
        pts = np.asarray(pts, dtype=float)
        ref = np.empty_like(pts)
        for kind, sel in self._groups(elems):
            ref[sel] = basis.map_to_reference(kind, self._corners(kind, elems[sel]), pts[sel])
        return ref

    def eval_at(self, elems, pts) -> np.ndarray:
        """Evaluate element ``elems[i]``'s polynomial at ``pts[i]``."""
        elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(len(elems))
        k = self.degree
        for kind, sel in self._groups(elems):
            e = elems[sel]
            ref = basis.map_to_reference(kind, self._corners(kind, e), pts[sel])
            phi = basis.basis_values(kind, k, ref)
            out[sel] = np.einsum("pn,pn->p", phi, self.coeffs[e, : phi.shape[1]])
        return out

    def gradient_at(self, elems, pts) -> np.ndarray:
        elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty((len(elems), 2))
        k = self.degree
        for kind, sel in self._groups(elems):
            e = elems[sel]
            corners = self._corners(kind, e)
            ref = basis.map_to_reference(kind, corners, pts[sel])
            dphi = basis.basis_gradients(kind, k, ref)
            gref = np.einsum("pnd,pn->pd", dphi, self.coeffs[e, : dphi.shape[1]])
            jac = basis.jacobian(kind, corners, ref)
            # grad_x = J^{-T} grad_ref
            out[sel] = np.linalg.solve(np.swapaxes(jac, 1, 2), gref[..., None])[..., 0]
        return out

    def evaluate(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.eval_at(self.mesh.locate_points(pts), pts)

    def gradient(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.gradient_at(self.mesh.locate_points(pts), pts)

    def node_positions(self, e: int) -> np.ndarray:
        kind = int(self.mesh.kinds[e])
        ref = basis.reference_nodes(kind, self.degree)
        corners = self._corners(kind, np.full(len(ref), e))
        return basis.map_to_physical(kind, corners, ref)


def eval(field: HighOrderField, p, elem: int | None = None) -> float:
    """Value of the element-local interpolant at ``p``."""
    p = np.asarray(p, dtype=float)
    if elem is None:
        elem = field.mesh.locate_element(p)
    return float(field.eval_at([elem], p[None, :])[0])


def eval_elementwise_gradient(field: HighOrderField, p, elem: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if elem is None:
        elem = field.mesh.locate_element(p)
    return field.gradient_at([elem], p[None, :])[0]


# -- analytic fields ---------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticField:
    """A named closed-form function ``f(x, y)`` (vectorised over arrays)."""

    name: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    velocity: tuple[Callable, Callable] | None = dc_field(default=None, compare=False)

    def __call__(self, x, y):
        return self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def _paper2d(x, y):
    return (np.sin(2 * np.pi * x) + 0.5 * np.sin(4 * np.pi * x)) * (np.sin(2 * np.pi * y) + np.sin(4 * np.pi * y))


def _vortex_u(x, y):
    return np.sin(np.pi * x) * np.cos(np.pi * y)


def _vortex_v(x, y):
    return -np.cos(np.pi * x) * np.sin(np.pi * y)


BUILTIN_FIELDS: dict[str, AnalyticField] = {
    "paper2d": AnalyticField("paper2d", _paper2d),
    # rigid rotation, vorticity 2
    "rotation": AnalyticField(
        "rotation",
        lambda x, y: np.hypot(x, y),
        velocity=(lambda x, y: -y + 0.0 * x, lambda x, y: x + 0.0 * y),
    ),
    # Taylor-Green cell; the scalar is its vorticity v_x - u_y
    "taylor-green": AnalyticField(
        "taylor-green",
        lambda x, y: 2 * np.pi * np.sin(np.pi * x) * np.sin(np.pi * y),
        velocity=(_vortex_u, _vortex_v),
    ),
}


def analytic(name: str) -> AnalyticField:
    try:
        return BUILTIN_FIELDS[name]
    except KeyError:
        raise InvalidSpec(f"unknown analytic field {name!r}; choose from {sorted(BUILTIN_FIELDS)}") from None


def project(func, mesh: Mesh, k: int, name: str = "u") -> HighOrderField:
    """Element-local L2 projection of ``func(x, y)`` onto degree-``k`` polynomials.

    Quadrature is Gauss-Legendre with ``k + 2`` points per direction.
    """
    if k < 1:
        raise ValueError("degree must be >= 1")
    coeffs: list = [None] * mesh.n_elements
    for kind in (TRI, QUAD):
        elems = np.nonzero(mesh.kinds == kind)[0]
        if not len(elems):
            continue
        nv = 3 if kind == TRI else 4
        corners = mesh.vertices[mesh.conn[elems, :nv]]  # (ne, nv, 2)
        qp, qw = basis.reference_quadrature(kind, k + 2)
        phi = basis.basis_values(kind, k, qp)  # (nq, nn)
        ne, nq = len(elems), len(qp)
        c_rep = np.repeat(corners, nq, axis=0)
        q_rep = np.tile(qp, (ne, 1))
        xq = basis.map_to_physical(kind, c_rep, q_rep)
        det = np.linalg.det(basis.jacobian(kind, c_rep, q_rep)).reshape(ne, nq)
        if np.any(det <= 0.0):
            bad = elems[np.nonzero((det <= 0.0).any(axis=1))[0][0]]
            raise SingularMassMatrix(f"element {bad} has a degenerate geometry map")
        gq = np.asarray(func(xq[:, 0], xq[:, 1]), dtype=float).reshape(ne, nq)
        w = qw[None, :] * det
        mass = np.einsum("eq,qi,qj->eij", w, phi, phi)
        rhs = np.einsum("eq,eq,qi->ei", w, gq, phi)
        cond = np.linalg.cond(mass)
        if np.any(~np.isfinite(cond)) or np.any(cond > 1e14):
            raise SingularMassMatrix("element mass matrix is singular")
        sol = np.linalg.solve(mass, rhs[..., None])[..., 0]
        for i, e in enumerate(elems):
            coeffs[e] = sol[i]
    return HighOrderField(mesh, k, coeffs, name=name)


def interpolate(func, mesh: Mesh, k: int, name: str = "u") -> HighOrderField:
    """Nodal interpolation: coefficients are ``func`` at each element's nodes."""
    coeffs = []
    for e in range(mesh.n_elements):
        kind = int(mesh.kinds[e])
        nv = 3 if kind == TRI else 4
        ref = basis.reference_nodes(kind, k)
        corners = np.broadcast_to(mesh.vertices[mesh.conn[e, :nv]], (len(ref), nv, 2))
        x = basis.map_to_physical(kind, corners, ref)
        coeffs.append(np.asarray(func(x[:, 0], x[:, 1]), dtype=float) * np.ones(len(ref)))
    return HighOrderField(mesh, k, coeffs, name=name)


def project_analytic(af: AnalyticField, mesh: Mesh, k: int) -> list[HighOrderField]:
    """Project a built-in.

    A plain scalar is stored as ``u``. Built-ins with a velocity keep their own
    name for the scalar and add ``u``/``v`` components.
    """
    out = [project(af.func, mesh, k, name="u" if af.velocity is None else af.name)]
    if af.velocity is not None:
        out.append(project(af.velocity[0], mesh, k, name="u"))
        out.append(project(af.velocity[1], mesh, k, name="v"))
    return out
