"""Continuous Lagrange finite element spaces on space-time simplicial meshes.

Degrees 1 and 2 are supported.  Functions in the trial space vanish on the
lateral boundary and the bottom (initial-time) face of the space-time box;
dofs on the top face are free.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .mesh import BoundaryTag, SimplicialMesh
from .quadrature import simplex_rule


def _local_edges(D: int):
    return list(itertools.combinations(range(D + 1), 2))


def tabulate_shape(D: int, k: int, points: np.ndarray):
    """Reference shape function values and gradients at given points.

    Returns (values, grads) with shapes (nq, nloc) and (nq, nloc, D).
    The local dof order is vertices first, then edge midpoints in
    lexicographic local-edge order (for k=2).
    """
    pts = np.atleast_2d(points)
    nq = pts.shape[0]
    lam = np.empty((nq, D + 1))
    lam[:, 0] = 1.0 - pts.sum(axis=1)
    lam[:, 1:] = pts
    dlam = np.zeros((D + 1, D))
    dlam[0, :] = -1.0
    dlam[1:, :] = np.eye(D)

    if k == 1:
        vals = lam
        grads = np.broadcast_to(dlam, (nq, D + 1, D)).copy()
        return vals, grads
    if k == 2:
        edges = _local_edges(D)
        nloc = (D + 1) + len(edges)
        vals = np.empty((nq, nloc))
        grads = np.empty((nq, nloc, D))
        for i in range(D + 1):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i, :] = (4.0 * lam[:, i, None] - 1.0) * dlam[i]
        for m, (a, b) in enumerate(edges):
            j = D + 1 + m
            vals[:, j] = 4.0 * lam[:, a] * lam[:, b]
            grads[:, j, :] = 4.0 * (lam[:, a, None] * dlam[b]
                                    + lam[:, b, None] * dlam[a])
        return vals, grads
    raise ValueError(f"unsupported polynomial degree {k}")


class FeSpace:
    """Lagrange space of degree k with constrained dofs on the lateral and
    bottom boundary.

    Attributes
    ----------
    elem_dofs : (n_elements, n_local) int array
    dof_coords : (n_dofs, D) float array
    constrained : (n_dofs,) bool array
    """

    def __init__(self, mesh: SimplicialMesh, degree: int):
        if degree not in (1, 2):
            raise ValueError(f"unsupported polynomial degree {degree}")
        self.mesh = mesh
        self.degree = degree
        D = mesh.dim

        if degree == 1:
            self.n_dofs = mesh.n_vertices
            self.elem_dofs = mesh.elements.copy()
            self.dof_coords = mesh.vertices.copy()
        else:
            edge_index, edge_pairs = mesh.edge_table()
            nv = mesh.n_vertices
            self.n_dofs = nv + len(edge_pairs)
            edges = _local_edges(D)
            ed = np.empty((mesh.n_elements, len(edges)), dtype=np.int64)
            for e, elem in enumerate(mesh.elements):
                for m, (a, b) in enumerate(edges):
                    va, vb = elem[a], elem[b]
                    ed[e, m] = nv + edge_index[(min(va, vb), max(va, vb))]
            self.elem_dofs = np.hstack([mesh.elements, ed])
            mids = 0.5 * (mesh.vertices[edge_pairs[:, 0]]
                          + mesh.vertices[edge_pairs[:, 1]])
            self.dof_coords = np.vstack([mesh.vertices, mids])
            self._edge_pairs = edge_pairs

        self.constrained = self._constrained_mask()
        self.free = ~self.constrained
        self._geom = None
        self._batch_cache = {}

    @property
    def n_local(self) -> int:
        return self.elem_dofs.shape[1]

    def _constrained_mask(self) -> np.ndarray:
        mesh = self.mesh
        mask = np.zeros(self.n_dofs, dtype=bool)
        constrained_vertices = set()
        for facet, _elem, tag in mesh.boundary_facets():
            if tag in (BoundaryTag.LATERAL, BoundaryTag.BOTTOM):
                constrained_vertices.update(facet)
        idx = np.fromiter(constrained_vertices, dtype=np.int64,
                          count=len(constrained_vertices))
        if idx.size:
            mask[idx] = True
        if self.degree == 2:
            pairs = self._edge_pairs
            nv = mesh.n_vertices
            # an edge midpoint is constrained iff its edge lies inside a
            # constrained facet; for the box this is equivalent to both
            # endpoints constrained and the midpoint on the same box face
            both = mask[pairs[:, 0]] & mask[pairs[:, 1]]
            mids = self.dof_coords[nv:]
            on_face = np.zeros(len(pairs), dtype=bool)
            t = mids[:, -1]
            on_face |= np.abs(t) <= 1e-12
            for j in range(mesh.dim - 1):
                x = mids[:, j]
                on_face |= (np.abs(x) <= 1e-12) | (np.abs(x - 1.0) <= 1e-12)
            mask[nv:] = both & on_face
        return mask

    # -- geometry ----------------------------------------------------------

    def geometry(self):
        """Per-element affine maps: (jac, inv_jac_T, absdet)."""
        if self._geom is None:
            X = self.mesh.element_coords()
            jac = np.swapaxes(X[:, 1:, :] - X[:, :1, :], 1, 2)  # columns x_i - x_0
            inv_jac_t = np.swapaxes(np.linalg.inv(jac), 1, 2)
            absdet = np.abs(np.linalg.det(jac))
            self._geom = (jac, inv_jac_t, absdet)
        return self._geom

    def batch(self, order: int):
        """Tabulated data at a quadrature rule of the given order.

        Returns a dict with the rule, physical quadrature points
        (ne, nq, D), shape values (nq, nloc), physical gradients
        (ne, nq, nloc, D), and quadrature scale w*|det| (ne, nq).
        """
        if order not in self._batch_cache:
            D = self.mesh.dim
            rule = simplex_rule(D, order)
            vals, ref_grads = tabulate_shape(D, self.degree, rule.points)
            jac, inv_jac_t, absdet = self.geometry()
            X0 = self.mesh.vertices[self.mesh.elements[:, 0]]
            phys = X0[:, None, :] + np.einsum(
                "eij,qj->eqi", jac, rule.points)
            grads = np.einsum("eij,qaj->eqai", inv_jac_t, ref_grads)
            scale = rule.weights[None, :] * absdet[:, None]
            self._batch_cache[order] = {
                "rule": rule, "values": vals, "points": phys,
                "grads": grads, "scale": scale,
            }
        return self._batch_cache[order]

    def default_order(self) -> int:
        """Quadrature order for nonlinear residual and Jacobian terms."""
        return 2 * self.degree + 2


@dataclass
class FeFunction:
    """Coefficient vector over a finite element space."""

    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise ValueError("coefficient length does not match the space")

    def copy(self) -> "FeFunction":
        return FeFunction(self.space, self.coeffs.copy())

    def eval(self, element: int, ref_point) -> tuple[float, np.ndarray, float]:
        """Value, spatial gradient, and time derivative at a reference point."""
        if element < 0 or element >= self.space.mesh.n_elements:
            raise IndexError(f"element index {element} out of range")
        D = self.space.mesh.dim
        vals, ref_grads = tabulate_shape(D, self.space.degree,
                                         np.atleast_2d(ref_point))
        _jac, inv_jac_t, _det = self.space.geometry()
        dofs = self.space.elem_dofs[element]
        u = self.coeffs[dofs]
        value = float(vals[0] @ u)
        grad = inv_jac_t[element] @ (ref_grads[0].T @ u)
        return value, grad[:-1], float(grad[-1])

    def at_quadrature(self, order: int):
        """Values (ne, nq) and full gradients (ne, nq, D) at quadrature points."""
        b = self.space.batch(order)
        u = self.coeffs[self.space.elem_dofs]
        vals = np.einsum("qa,ea->eq", b["values"], u)
        grads = np.einsum("eqai,ea->eqi", b["grads"], u)
        return vals, grads


def zero_function(space: FeSpace) -> FeFunction:
    return FeFunction(space, np.zeros(space.n_dofs))


def interpolate(space: FeSpace, g) -> FeFunction:
    """Nodal interpolant of a callable g(points (n, D)) -> (n,)."""
    return FeFunction(space, np.asarray(g(space.dof_coords), dtype=float))


def inject(u: FeFunction, fine: FeSpace) -> FeFunction:
    """Embed a degree-1 function into the degree-2 space on the same mesh.

    Exact: vertex coefficients carry over, edge coefficients are the edge
    midpoint values of the linear function.
    """
    coarse = u.space
    if coarse.mesh is not fine.mesh or coarse.degree != 1 or fine.degree != 2:
        raise ValueError("inject expects degree 1 -> 2 on the same mesh")
    coeffs = np.empty(fine.n_dofs)
    nv = coarse.mesh.n_vertices
    coeffs[:nv] = u.coeffs
    pairs = fine._edge_pairs
    coeffs[nv:] = 0.5 * (u.coeffs[pairs[:, 0]] + u.coeffs[pairs[:, 1]])
    return FeFunction(fine, coeffs)


def transfer_p1(u: FeFunction, fine_space: FeSpace) -> FeFunction:
    """Carry a degree-1 function to a space on a refinement of its mesh.

    Exact for bisection refinements: every new vertex is the midpoint of an
    edge of the previous mesh, processed in creation order.
    """
    if u.space.degree != 1 or fine_space.degree != 1:
        raise ValueError("transfer_p1 expects degree-1 spaces")
    fine = fine_space.mesh
    nv_old = u.space.mesh.n_vertices
    coeffs = np.empty(fine.n_vertices)
    coeffs[:nv_old] = u.coeffs
    for v in range(nv_old, fine.n_vertices):
        a, b = fine.vertex_parents[v]
        coeffs[v] = 0.5 * (coeffs[a] + coeffs[b])
    return FeFunction(fine_space, coeffs)


def transfer(u: FeFunction, fine_space: FeSpace) -> FeFunction:
    """Carry a function to a space on a refinement of its mesh, any degree.

    Every fine dof node is evaluated through its element's coarse ancestor,
    so the transfer is exact whenever the coarse function is polynomial on
    each ancestor (always the case for bisection descendants).
    """
    coarse = u.space
    fine = fine_space.mesh
    if fine.parent_leaf is None or fine.parent_mesh is not coarse.mesh:
        raise ValueError("fine mesh is not a recorded refinement of the "
                         "coarse function's mesh")
    if coarse.degree == 1 and fine_space.degree == 1:
        return transfer_p1(u, fine_space)
    _jc, inv_jac_t_c, _dc = coarse.geometry()
    anc = fine.parent_leaf
    nodes = fine_space.dof_coords[fine_space.elem_dofs]  # (ne, nloc, D)
    x0 = coarse.mesh.vertices[coarse.mesh.elements[anc, 0]]
    ref = np.einsum("eij,enj->eni", np.swapaxes(inv_jac_t_c[anc], 1, 2),
                    nodes - x0[:, None, :])
    ne, nloc, D = ref.shape
    vals, _ = tabulate_shape(D, coarse.degree, ref.reshape(-1, D))
    uc = u.coeffs[coarse.elem_dofs[anc]]  # (ne, nloc_c)
    nodal = np.einsum("ena,ea->en", vals.reshape(ne, nloc, -1), uc)
    coeffs = np.empty(fine_space.n_dofs)
    coeffs[fine_space.elem_dofs.ravel()] = nodal.ravel()
    return FeFunction(fine_space, coeffs)


def error_norms(u: FeFunction, exact_value, exact_grad,
                order: int = None) -> tuple[float, float]:
    """L2(Q) error and L2-in-time H1-in-space seminorm error.

    Parameters
    ----------
    exact_value : callable, points (n, D) -> (n,)
    exact_grad : callable, points (n, D) -> (n, d) spatial gradient
    """
    space = u.space
    if order is None:
        order = 2 * space.degree + 4
    b = space.batch(order)
    vals, grads = u.at_quadrature(order)
    pts = b["points"]
    flat = pts.reshape(-1, pts.shape[-1])
    ev = np.asarray(exact_value(flat)).reshape(vals.shape)
    eg = np.asarray(exact_grad(flat)).reshape(grads[..., :-1].shape)
    scale = b["scale"]
    l2 = np.sqrt(np.sum(scale * (vals - ev) ** 2))
    h1 = np.sqrt(np.sum(scale * np.sum((grads[..., :-1] - eg) ** 2, axis=-1)))
    return l2, h1
