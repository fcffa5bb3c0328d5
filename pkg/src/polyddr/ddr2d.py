"""Two-dimensional discrete de Rham complex on polygonal meshes.

Unknowns are polynomial components attached to mesh entities:

* head space ``XGrad``: scalars ``q_F`` of degree ``n_F`` per face, ``q_E``
  of degree ``k-1`` per edge, one real value per vertex;
* middle space ``XRot``: per face a rotational part in ``R^{k-1}`` and a
  complement part in ``Rc^{s_F}``, plus tangential traces of degree ``k``
  per edge;
* tail space ``XL``: broken scalars of degree ``k``.

Local reconstructions (edge and face potentials, face gradient, scalar
rotor, tangential potential) are assembled per cell as dense matrices
acting on the local component vector; the global differentials are sparse
compositions of those with L2 projections.  The standard choice of face
degrees is ``n_F = k - 1`` and ``s_F = k``; the layouts accept generic
degree vectors so the same machinery serves reduced and enriched variants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.linalg import cho_solve, solve

from polyddr import polybasis as pb
from polyddr.polybasis import BasisCache, n_poly_2d, space_dimension

__all__ = [
    "DegreeVectors",
    "XGradLayout",
    "XRotLayout",
    "XLLayout",
    "DdrComplex",
    "edge_potential_matrix",
    "edge_gradient_matrix",
]


@dataclass(frozen=True)
class DegreeVectors:
    """Polynomial degree ``k`` plus per-face head/complement face degrees."""

    k: int
    n: np.ndarray
    s: np.ndarray

    @staticmethod
    def standard(mesh, k: int) -> "DegreeVectors":
        nf = mesh.n_faces
        return DegreeVectors(k, np.full(nf, k - 1, dtype=int), np.full(nf, k, dtype=int))

    @staticmethod
    def uniform(mesh, k: int, n: int, s: int) -> "DegreeVectors":
        nf = mesh.n_faces
        return DegreeVectors(k, np.full(nf, n, dtype=int), np.full(nf, s, dtype=int))


class _Layout:
    """Shared indexing helpers: blocks ordered faces, then edges, then vertices."""

    mesh = None
    face_dims: np.ndarray
    edge_dim: int
    vertex_dim: int

    def _finalize(self):
        mesh = self.mesh
        self.face_offsets = np.concatenate([[0], np.cumsum(self.face_dims)])
        self.edge_base = int(self.face_offsets[-1])
        self.vertex_base = self.edge_base + mesh.n_edges * self.edge_dim
        self.dim = self.vertex_base + mesh.n_vertices * self.vertex_dim

    def face_slice(self, f: int) -> slice:
        return slice(int(self.face_offsets[f]), int(self.face_offsets[f + 1]))

    def edge_slice(self, e: int) -> slice:
        return slice(self.edge_base + e * self.edge_dim,
                     self.edge_base + (e + 1) * self.edge_dim)

    def vertex_index(self, v: int) -> int:
        if self.vertex_dim == 0:
            raise IndexError("layout has no vertex block")
        return self.vertex_base + v

    def local_indices(self, f: int) -> np.ndarray:
        """Global indices of the local component vector on face ``f``."""
        face = self.mesh.faces[f]
        parts = [np.arange(self.face_offsets[f], self.face_offsets[f + 1])]
        for e in face.edges:
            s = self.edge_slice(e)
            parts.append(np.arange(s.start, s.stop))
        if self.vertex_dim:
            parts.append(np.array([self.vertex_index(v) for v in face.vertices],
                                  dtype=int))
        return np.concatenate(parts).astype(int)

    def local_dim(self, f: int) -> int:
        face = self.mesh.faces[f]
        return (int(self.face_dims[f]) + len(face.edges) * self.edge_dim
                + len(face.vertices) * self.vertex_dim)

    def local_face_block(self, f: int) -> slice:
        return slice(0, int(self.face_dims[f]))

    def local_edge_block(self, f: int, local: int) -> slice:
        base = int(self.face_dims[f]) + local * self.edge_dim
        return slice(base, base + self.edge_dim)

    def local_vertex_index(self, f: int, local: int) -> int:
        face = self.mesh.faces[f]
        return int(self.face_dims[f]) + len(face.edges) * self.edge_dim + local

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        for e, edge in enumerate(self.mesh.edges):
            if edge.boundary:
                mask[self.edge_slice(e)] = True
        if self.vertex_dim:
            for v in range(self.mesh.n_vertices):
                if self.mesh.vertex_boundary[v]:
                    mask[self.vertex_index(v)] = True
        return mask


class XGradLayout(_Layout):
    """Discrete H1-type space: face P^{n_F}, edge P^{k-1}, vertex values."""

    def __init__(self, mesh, k: int, n: np.ndarray):
        self.mesh = mesh
        self.k = k
        self.n = np.asarray(n, dtype=int)
        self.face_dims = np.array([n_poly_2d(d) for d in self.n], dtype=int)
        self.edge_dim = max(k, 0)
        self.vertex_dim = 1
        self._finalize()


class XRotLayout(_Layout):
    """Discrete H(rot)-type space: face R^{k-1} x Rc^{s_F}, edge P^k."""

    def __init__(self, mesh, k: int, s: np.ndarray):
        self.mesh = mesh
        self.k = k
        self.s = np.asarray(s, dtype=int)
        self.rdim = space_dimension("R", k - 1)
        self.rc_dims = np.array([space_dimension("Rc", sf) for sf in self.s], dtype=int)
        self.face_dims = self.rdim + self.rc_dims
        self.edge_dim = k + 1
        self.vertex_dim = 0
        self._finalize()

    def face_r_slice(self, f: int) -> slice:
        start = int(self.face_offsets[f])
        return slice(start, start + self.rdim)

    def face_rc_slice(self, f: int) -> slice:
        start = int(self.face_offsets[f]) + self.rdim
        return slice(start, int(self.face_offsets[f + 1]))

    def local_r_block(self, f: int) -> slice:
        return slice(0, self.rdim)

    def local_rc_block(self, f: int) -> slice:
        return slice(self.rdim, self.rdim + int(self.rc_dims[f]))


class XLLayout(_Layout):
    """Broken P^k: one scalar block of degree k per face."""

    def __init__(self, mesh, k: int):
        self.mesh = mesh
        self.k = k
        self.face_dims = np.full(mesh.n_faces, n_poly_2d(k), dtype=int)
        self.edge_dim = 0
        self.vertex_dim = 0
        self._finalize()


# ----------------------------------------------------------------------
# edge-local operators
# ----------------------------------------------------------------------

def edge_potential_matrix(cache: BasisCache, e: int, k: int) -> np.ndarray:
    """Potential of degree ``k+1`` on an edge from endpoint values and moments.

    Returns the matrix mapping ``[q_v0, q_v1, q_E coefficients]`` to the
    coefficients of the unique polynomial matching both endpoint values and
    whose degree-(k-1) L2 projection equals ``q_E``.
    """
    def build():
        mesh = cache.mesh
        edge = mesh.edges[e]
        ends = np.array([mesh.vertices[edge.v0], mesh.vertices[edge.v1]])
        vander = pb.edge_scalar_eval(ends, edge.midpoint, edge.tangent,
                                     edge.length, k + 1)
        rows = [vander]
        rhs = np.zeros((k + 2, k + 2))
        rhs[0, 0] = 1.0
        rhs[1, 1] = 1.0
        if k >= 1:
            w = cache.edge_quad(e).weights
            lo = cache.edge_scalar(e, k - 1)
            hi = cache.edge_scalar(e, k + 1)
            rows.append((lo * w[:, None]).T @ hi)
            rhs[2:, 2:] = cache.edge_gram(e, k - 1)
        return solve(np.vstack(rows), rhs)

    return cache._get(("edge_pot", e, k), build)


def edge_gradient_matrix(cache: BasisCache, e: int, k: int) -> np.ndarray:
    """Derivative along the edge of the edge potential; degree ``k`` output."""
    def build():
        h = cache.mesh.edges[e].length
        deriv = np.zeros((k + 1, k + 2))
        for j in range(1, k + 2):
            deriv[j - 1, j] = j / h
        return deriv @ edge_potential_matrix(cache, e, k)

    return cache._get(("edge_grad", e, k), build)


# ----------------------------------------------------------------------
# face-local operators
# ----------------------------------------------------------------------

class LocalFaceOps:
    """Dense local reconstruction matrices on one face.

    Column layouts follow the restrictions of the global spaces:
    head-type data is ``[q_F | q_E per local edge | q_V per local vertex]``,
    rot-type data is ``[v_R | v_Rc | v_E per local edge]``.
    """

    def __init__(self, mesh, f: int, k: int, n_f: int, s_f: int, cache: BasisCache):
        self.mesh = mesh
        self.f = f
        self.k = k
        self.n_f = n_f
        self.s_f = s_f
        self.cache = cache
        self.face = mesh.faces[f]
        self._memo: dict[str, np.ndarray] = {}

    # -- local dof bookkeeping (head space) -------------------------------
    @property
    def n_face_dofs(self) -> int:
        return n_poly_2d(self.n_f)

    @property
    def n_grad_local(self) -> int:
        m = len(self.face.edges)
        return self.n_face_dofs + m * self.k + m

    def local_edge_block_cols(self, local: int) -> slice:
        """Columns of the degree-(k-1) edge polynomial block in head data."""
        base = self.n_face_dofs + local * self.k
        return slice(base, base + self.k)

    def grad_edge_cols(self, local: int) -> np.ndarray:
        """Columns of the local head vector feeding the edge potential."""
        m = len(self.face.edges)
        base = self.n_face_dofs
        vcols = base + m * self.k
        v0 = vcols + local
        v1 = vcols + (local + 1) % m
        edge = self.mesh.edges[self.face.edges[local]]
        loop_tail = self.face.vertices[local]
        # orient endpoint columns by the edge's own tangent, not the loop
        cols = [v0, v1] if edge.v0 == loop_tail else [v1, v0]
        cols += list(range(base + local * self.k, base + (local + 1) * self.k))
        return np.array(cols, dtype=int)

    def _edge_pot(self, local: int) -> np.ndarray:
        return edge_potential_matrix(self.cache, self.face.edges[local], self.k)

    def edge_potentials_local(self) -> list[np.ndarray]:
        """Edge potentials as maps from the full local head vector."""
        out = []
        for local in range(len(self.face.edges)):
            mat = np.zeros((self.k + 2, self.n_grad_local))
            mat[:, self.grad_edge_cols(local)] = self._edge_pot(local)
            out.append(mat)
        return out

    # -- rot space bookkeeping --------------------------------------------
    @property
    def n_rot_local(self) -> int:
        m = len(self.face.edges)
        return (space_dimension("R", self.k - 1) + space_dimension("Rc", self.s_f)
                + m * (self.k + 1))

    def rot_edge_block(self, local: int) -> slice:
        base = space_dimension("R", self.k - 1) + space_dimension("Rc", self.s_f)
        return slice(base + local * (self.k + 1), base + (local + 1) * (self.k + 1))

    def rot_r_block(self) -> slice:
        return slice(0, space_dimension("R", self.k - 1))

    def rot_rc_block(self) -> slice:
        nr = space_dimension("R", self.k - 1)
        return slice(nr, nr + space_dimension("Rc", self.s_f))

    # -- reconstructions ---------------------------------------------------
    @property
    def grad_mat(self) -> np.ndarray:
        """Face gradient: local head vector -> coefficients in Pvec^k."""
        if "grad" in self._memo:
            return self._memo["grad"]
        k, f, cache = self.k, self.f, self.cache
        rhs = np.zeros((space_dimension("Pvec", k), self.n_grad_local))
        if self.n_face_dofs:
            w = cache.face_quad(f).weights
            div = cache.face_div(f, "Pvec", k)
            sc = cache.face_scalar(f, self.n_f)
            rhs[:, :self.n_face_dofs] = -(div * w[:, None]).T @ sc
        for local, (e, sign) in enumerate(zip(self.face.edges, self.face.signs)):
            n_e = self.mesh.edges[e].normal
            vals = cache.face_vector_at_edge(f, "Pvec", k, e) @ n_e
            w_e = cache.edge_quad(e).weights
            pot = cache.edge_scalar(e, k + 1)
            block = sign * (vals * w_e[:, None]).T @ pot
            emat = self._edge_pot(local)
            cols = self.grad_edge_cols(local)
            rhs[:, cols] += block @ emat
        out = cho_solve(cache.face_chol(f, "Pvec", k), rhs)
        self._memo["grad"] = out
        return out

    @property
    def potential_mat(self) -> np.ndarray:
        """Face potential of degree ``k+1`` from the local head vector."""
        if "pot" in self._memo:
            return self._memo["pot"]
        k, f, cache = self.k, self.f, self.cache
        w = cache.face_quad(f).weights
        divs = cache.face_div(f, "Rc", k + 2)
        sys = (divs * w[:, None]).T @ cache.face_scalar(f, k + 1)
        rhs = -cache.face_mixed(f, "Rc", k + 2, "Pvec", k) @ self.grad_mat
        for local, (e, sign) in enumerate(zip(self.face.edges, self.face.signs)):
            n_e = self.mesh.edges[e].normal
            vals = cache.face_vector_at_edge(f, "Rc", k + 2, e) @ n_e
            w_e = cache.edge_quad(e).weights
            pot = cache.edge_scalar(e, k + 1)
            block = sign * (vals * w_e[:, None]).T @ pot
            rhs[:, self.grad_edge_cols(local)] += block @ self._edge_pot(local)
        out = solve(sys, rhs)
        self._memo["pot"] = out
        return out

    @property
    def rotor_mat(self) -> np.ndarray:
        """Scalar rotor: local rot vector -> coefficients in P^k."""
        if "rot" in self._memo:
            return self._memo["rot"]
        k, f, cache = self.k, self.f, self.cache
        nk = n_poly_2d(k)
        rhs = np.zeros((nk, self.n_rot_local))
        if k >= 1:
            # the R^{k-1} basis consists of the rotated gradients of the
            # non-constant P^k monomials, in matching order
            rhs[1:, self.rot_r_block()] = cache.face_gram(f, "R", k - 1)
        for local, (e, sign) in enumerate(zip(self.face.edges, self.face.signs)):
            w_e = cache.edge_quad(e).weights
            face_sc = cache.face_scalar_at_edge(f, k, e)
            edge_sc = cache.edge_scalar(e, k)
            rhs[:, self.rot_edge_block(local)] -= sign * (face_sc * w_e[:, None]).T @ edge_sc
        out = cho_solve(cache.face_chol(f, "P", k), rhs)
        self._memo["rot"] = out
        return out

    @property
    def tangential_mat(self) -> np.ndarray:
        """Tangential potential: local rot vector -> coefficients in Pvec^k."""
        if "tang" in self._memo:
            return self._memo["tang"]
        k, f, cache = self.k, self.f, self.cache
        n_r = space_dimension("R", k)        # rows from non-constant P^{k+1} tests
        n_w = space_dimension("Rc", k)
        lhs = np.vstack([cache.face_mixed(f, "R", k, "Pvec", k),
                         cache.face_mixed(f, "Rc", k, "Pvec", k)])
        rhs = np.zeros((n_r + n_w, self.n_rot_local))
        mixed_pk = cache.face_mixed(f, "P", k + 1, "P", k)
        rhs[:n_r, :] = (mixed_pk @ self.rotor_mat)[1:, :]
        for local, (e, sign) in enumerate(zip(self.face.edges, self.face.signs)):
            w_e = cache.edge_quad(e).weights
            face_sc = cache.face_scalar_at_edge(f, k + 1, e)
            edge_sc = cache.edge_scalar(e, k)
            block = sign * (face_sc * w_e[:, None]).T @ edge_sc
            rhs[:n_r, self.rot_edge_block(local)] += block[1:, :]
        if n_w and space_dimension("Rc", self.s_f):
            rhs[n_r:, self.rot_rc_block()] = cache.face_mixed(f, "Rc", k, "Rc", self.s_f)
        out = solve(lhs, rhs)
        self._memo["tang"] = out
        return out

    # -- pointwise evaluation helpers ---------------------------------------
    def eval_potential(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the face potential basis expansion at given points."""
        sc = pb.scalar_eval(points, self.face.centroid, self.face.diameter, self.k + 1)
        return sc @ self.potential_mat

    def eval_tangential(self, points: np.ndarray) -> np.ndarray:
        vec = pb.vector_eval(points, self.face.centroid, self.face.diameter,
                             "Pvec", self.k)
        return np.einsum("qjd,jl->qld", vec, self.tangential_mat)


# ----------------------------------------------------------------------
# assembled complex
# ----------------------------------------------------------------------

class DdrComplex:
    """Assembled discrete de Rham complex ``XGrad -> XRot -> XL``."""

    def __init__(self, mesh, k: int, degrees: DegreeVectors | None = None,
                 cache: BasisCache | None = None):
        if degrees is None:
            degrees = DegreeVectors.standard(mesh, k)
        if np.any(degrees.n < k - 1):
            raise ValueError("face gradients require head face degrees >= k - 1")
        self.mesh = mesh
        self.k = k
        self.degrees = degrees
        self.cache = cache if cache is not None else BasisCache(mesh, 2 * k + 4)
        self.xgrad = XGradLayout(mesh, k, degrees.n)
        self.xrot = XRotLayout(mesh, k, degrees.s)
        self.xl = XLLayout(mesh, k)
        self._locals: dict[int, LocalFaceOps] = {}
        self._grad = None
        self._rot = None

    def local(self, f: int) -> LocalFaceOps:
        ops = self._locals.get(f)
        if ops is None:
            ops = LocalFaceOps(self.mesh, f, self.k, int(self.degrees.n[f]),
                               int(self.degrees.s[f]), self.cache)
            self._locals[f] = ops
        return ops

    # -- global differentials ---------------------------------------------
    @property
    def grad_matrix(self) -> sps.csr_array:
        if self._grad is None:
            self._grad = self._assemble_grad()
        return self._grad

    @property
    def rot_matrix(self) -> sps.csr_array:
        if self._rot is None:
            self._rot = self._assemble_rot()
        return self._rot

    def _assemble_grad(self) -> sps.csr_array:
        mesh, k = self.mesh, self.k
        rows, cols, vals = [], [], []

        def scatter(block, rslice, cidx):
            r = np.arange(rslice.start, rslice.stop)
            rr, cc = np.meshgrid(r, cidx, indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(np.asarray(block).ravel())

        for f in range(mesh.n_faces):
            ops = self.local(f)
            cidx = self.xgrad.local_indices(f)
            if self.xrot.rdim:
                pr = self.cache.face_projector(f, "R", k - 1, "Pvec", k)
                scatter(pr @ ops.grad_mat, self.xrot.face_r_slice(f), cidx)
            if self.xrot.rc_dims[f]:
                prc = self.cache.face_projector(f, "Rc", int(self.degrees.s[f]),
                                                "Pvec", k)
                scatter(prc @ ops.grad_mat, self.xrot.face_rc_slice(f), cidx)
        for e, edge in enumerate(mesh.edges):
            gmat = edge_gradient_matrix(self.cache, e, k)
            cidx = np.concatenate([[self.xgrad.vertex_index(edge.v0),
                                    self.xgrad.vertex_index(edge.v1)],
                                   np.arange(self.xgrad.edge_slice(e).start,
                                             self.xgrad.edge_slice(e).stop)])
            scatter(gmat, self.xrot.edge_slice(e), cidx.astype(int))
        mat = sps.coo_array((np.concatenate(vals),
                             (np.concatenate(rows), np.concatenate(cols))),
                            shape=(self.xrot.dim, self.xgrad.dim))
        return mat.tocsr()

    def _assemble_rot(self) -> sps.csr_array:
        rows, cols, vals = [], [], []
        for f in range(self.mesh.n_faces):
            ops = self.local(f)
            block = ops.rotor_mat
            rslice = self.xl.face_slice(f)
            cidx = self.xrot.local_indices(f)
            rr, cc = np.meshgrid(np.arange(rslice.start, rslice.stop), cidx,
                                 indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(block.ravel())
        mat = sps.coo_array((np.concatenate(vals),
                             (np.concatenate(rows), np.concatenate(cols))),
                            shape=(self.xl.dim, self.xrot.dim))
        return mat.tocsr()

    # -- interpolators ------------------------------------------------------
    def interpolate_grad(self, q_fn) -> np.ndarray:
        """Component-wise interpolation of a scalar field onto XGrad."""
        out = np.zeros(self.xgrad.dim)
        for f in range(self.mesh.n_faces):
            if self.xgrad.face_dims[f]:
                pts = self.cache.face_quad(f).points
                out[self.xgrad.face_slice(f)] = self.cache.project_face_values(
                    f, "P", int(self.degrees.n[f]), np.asarray(q_fn(pts)))
        for e in range(self.mesh.n_edges):
            if self.k >= 1:
                pts = self.cache.edge_quad(e).points
                out[self.xgrad.edge_slice(e)] = self.cache.project_edge_values(
                    e, self.k - 1, np.asarray(q_fn(pts)))
        out[self.xgrad.vertex_base:] = np.asarray(q_fn(self.mesh.vertices))
        return out

    def interpolate_rot(self, v_fn) -> np.ndarray:
        """Component-wise interpolation of a vector field onto XRot."""
        out = np.zeros(self.xrot.dim)
        for f in range(self.mesh.n_faces):
            pts = self.cache.face_quad(f).points
            vals = np.asarray(v_fn(pts))
            if self.xrot.rdim:
                out[self.xrot.face_r_slice(f)] = self.cache.project_face_values(
                    f, "R", self.k - 1, vals)
            if self.xrot.rc_dims[f]:
                out[self.xrot.face_rc_slice(f)] = self.cache.project_face_values(
                    f, "Rc", int(self.degrees.s[f]), vals)
        for e, edge in enumerate(self.mesh.edges):
            pts = self.cache.edge_quad(e).points
            vals = np.asarray(v_fn(pts)) @ edge.tangent
            out[self.xrot.edge_slice(e)] = self.cache.project_edge_values(
                e, self.k, vals)
        return out

    def interpolate_l2(self, q_fn) -> np.ndarray:
        out = np.zeros(self.xl.dim)
        for f in range(self.mesh.n_faces):
            pts = self.cache.face_quad(f).points
            out[self.xl.face_slice(f)] = self.cache.project_face_values(
                f, "P", self.k, np.asarray(q_fn(pts)))
        return out

    def finite_complex(self):
        from polyddr.complex_core import FiniteComplex

        return FiniteComplex((self.xgrad.dim, self.xrot.dim, self.xl.dim),
                             [self.grad_matrix, self.rot_matrix])
