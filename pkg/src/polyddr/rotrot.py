"""Enhanced-regularity rot-rot complex and its serendipity version.

The rot-rot complex enriches the discrete de Rham middle space with extra
trace components for the scalar rotor (one degree-(k-1) polynomial per
edge and one value per vertex) and widens the tail space to a full
head-type space of degree ``k``:

* head: the standard head space of the de Rham complex (unchanged);
* middle ``Sigma``: the de Rham middle space times the complement;
* tail ``W``: a head-type space with face degree ``k``, whose face blocks
  are identified with the broken polynomials of the de Rham tail.

The differentials act as the de Rham ones on the first factor and as the
identity on the complement.  The extension and reduction maps to the
de Rham complex are coordinate injections and projections, so the
compatibility conditions hold exactly; the serendipity version is obtained
through :func:`polyddr.complex_core.build_enhanced_serendipity`, and a
direct sparse construction of the same objects is provided for solvers.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps

from polyddr.complex_core import (FiniteComplex, MorphismPair, SerendipityBuild,
                                  build_enhanced_serendipity)
from polyddr.ddr2d import DdrComplex, XGradLayout
from polyddr.sddr2d import SerendipityComplex

__all__ = ["RotRotComplex", "SerendipityRotRot", "build_serendipity_rotrot"]


class _ComplementIndex:
    """Index bookkeeping for the trace complement (edges then vertices)."""

    def __init__(self, mesh, k: int, base: int):
        self.mesh = mesh
        self.k = k
        self.base = base
        self.edge_dim = k
        self.vertex_base = base + mesh.n_edges * k
        self.dim = mesh.n_edges * k + mesh.n_vertices

    def edge_slice(self, e: int) -> slice:
        return slice(self.base + e * self.edge_dim,
                     self.base + (e + 1) * self.edge_dim)

    def vertex_index(self, v: int) -> int:
        return self.vertex_base + v

    def boundary_mask(self, total: int) -> np.ndarray:
        mask = np.zeros(total, dtype=bool)
        for e, edge in enumerate(self.mesh.edges):
            if edge.boundary:
                mask[self.edge_slice(e)] = True
        for v in range(self.mesh.n_vertices):
            if self.mesh.vertex_boundary[v]:
                mask[self.vertex_index(v)] = True
        return mask


class RotRotComplex:
    """Assembled rot-rot complex built on top of a de Rham complex."""

    def __init__(self, ddr: DdrComplex):
        if ddr.k < 1:
            raise ValueError("the rot-rot complex needs degree k >= 1")
        self.ddr = ddr
        self.mesh = ddr.mesh
        self.k = ddr.k
        self.head = ddr.xgrad
        self.w_layout = XGradLayout(self.mesh, self.k,
                                    np.full(self.mesh.n_faces, self.k, dtype=int))
        self.comp = _ComplementIndex(self.mesh, self.k, ddr.xrot.dim)
        self.sigma_dim = ddr.xrot.dim + self.comp.dim
        self._mats: dict[str, sps.csr_array] = {}

    # -- differentials -----------------------------------------------------
    @property
    def grad_matrix(self) -> sps.csr_array:
        """Head -> Sigma: the de Rham gradient padded with a zero complement."""
        if "uG" not in self._mats:
            zero = sps.coo_array((self.comp.dim, self.head.dim))
            self._mats["uG"] = sps.vstack([self.ddr.grad_matrix, zero]).tocsr()
        return self._mats["uG"]

    @property
    def rot_matrix(self) -> sps.csr_array:
        """Sigma -> W: scalar rotor on the first factor, identity complement."""
        if "uR" not in self._mats:
            eye = sps.identity(self.comp.dim, format="csr")
            self._mats["uR"] = sps.bmat([[self.ddr.rot_matrix, None],
                                         [None, eye]], format="csr")
        return self._mats["uR"]

    def finite_complex(self) -> FiniteComplex:
        return FiniteComplex((self.head.dim, self.sigma_dim, self.w_layout.dim),
                             [self.grad_matrix, self.rot_matrix])

    # -- maps to/from the de Rham complex ------------------------------------
    def morphisms(self) -> MorphismPair:
        """Coordinate injections of the de Rham spaces into the rot-rot ones."""
        ddr = self.ddr
        ext0 = sps.identity(self.head.dim, format="csr")
        inj1 = sps.vstack([sps.identity(ddr.xrot.dim, format="csr"),
                           sps.coo_array((self.comp.dim, ddr.xrot.dim))]).tocsr()
        inj2 = sps.vstack([sps.identity(ddr.xl.dim, format="csr"),
                           sps.coo_array((self.w_layout.dim - ddr.xl.dim,
                                          ddr.xl.dim))]).tocsr()
        return MorphismPair([ext0, inj1, inj2],
                            [ext0.T.tocsr(), inj1.T.tocsr(), inj2.T.tocsr()],
                            small=ddr.finite_complex(), big=self.finite_complex())

    def complement_bases(self) -> list[np.ndarray]:
        """Coordinate bases of the reduction kernels (dense columns)."""
        c0 = np.zeros((self.head.dim, 0))
        c1 = np.zeros((self.sigma_dim, self.comp.dim))
        c1[self.ddr.xrot.dim:, :] = np.eye(self.comp.dim)
        nw = self.w_layout.dim
        c2 = np.zeros((nw, nw - self.ddr.xl.dim))
        c2[self.ddr.xl.dim:, :] = np.eye(nw - self.ddr.xl.dim)
        return [c0, c1, c2]

    # -- interpolation and masks ------------------------------------------------
    def interpolate_sigma(self, v_fn, rot_fn) -> np.ndarray:
        """Interpolate a vector field with given scalar rotor onto Sigma."""
        out = np.zeros(self.sigma_dim)
        out[:self.ddr.xrot.dim] = self.ddr.interpolate_rot(v_fn)
        cache = self.ddr.cache
        for e in range(self.mesh.n_edges):
            if self.k >= 1:
                pts = cache.edge_quad(e).points
                out[self.comp.edge_slice(e)] = cache.project_edge_values(
                    e, self.k - 1, np.asarray(rot_fn(pts)))
        verts = np.asarray(rot_fn(self.mesh.vertices))
        for v in range(self.mesh.n_vertices):
            out[self.comp.vertex_index(v)] = verts[v]
        return out

    def interpolate_w(self, q_fn) -> np.ndarray:
        """Interpolate a scalar field onto the tail space."""
        tail = DdrComplex(self.mesh, self.k,
                          degrees=_head_degrees(self.mesh, self.k),
                          cache=self.ddr.cache)
        return tail.interpolate_grad(q_fn)

    def sigma_boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.sigma_dim, dtype=bool)
        mask[:self.ddr.xrot.dim] = self.ddr.xrot.boundary_mask()
        mask |= self.comp.boundary_mask(self.sigma_dim)
        return mask


def _head_degrees(mesh, k: int):
    from polyddr.ddr2d import DegreeVectors

    return DegreeVectors.uniform(mesh, k, k, k)


class SerendipityRotRot:
    """Direct sparse construction of the serendipity rot-rot complex.

    The middle space is the serendipity de Rham middle space times the same
    trace complement; the tail space is unchanged.  Matches the abstract
    construction with coordinate complement bases, which
    :func:`build_serendipity_rotrot` verifies.
    """

    def __init__(self, rot: RotRotComplex, sddr: SerendipityComplex):
        if sddr.ddr is not rot.ddr:
            raise ValueError("serendipity and rot-rot builds must share a complex")
        self.rot = rot
        self.sddr = sddr
        self.mesh = rot.mesh
        self.k = rot.k
        self.head = sddr.sxgrad
        self.comp = _ComplementIndex(self.mesh, self.k, sddr.sxrot.dim)
        self.sigma_dim = sddr.sxrot.dim + self.comp.dim
        self.w_layout = rot.w_layout
        self._mats: dict[str, sps.csr_array] = {}

    @property
    def grad_matrix(self) -> sps.csr_array:
        if "uG" not in self._mats:
            zero = sps.coo_array((self.comp.dim, self.head.dim))
            self._mats["uG"] = sps.vstack([self.sddr.grad_matrix, zero]).tocsr()
        return self._mats["uG"]

    @property
    def rot_matrix(self) -> sps.csr_array:
        if "uR" not in self._mats:
            eye = sps.identity(self.comp.dim, format="csr")
            self._mats["uR"] = sps.bmat([[self.sddr.rot_matrix, None],
                                         [None, eye]], format="csr")
        return self._mats["uR"]

    @property
    def extension_sigma(self) -> sps.csr_array:
        """Serendipity Sigma into the full Sigma (complement untouched)."""
        if "ext" not in self._mats:
            eye = sps.identity(self.comp.dim, format="csr")
            self._mats["ext"] = sps.bmat([[self.sddr.ext_rot, None],
                                          [None, eye]], format="csr")
        return self._mats["ext"]

    @property
    def reduction_sigma(self) -> sps.csr_array:
        if "red" not in self._mats:
            eye = sps.identity(self.comp.dim, format="csr")
            self._mats["red"] = sps.bmat([[self.sddr.red_rot, None],
                                          [None, eye]], format="csr")
        return self._mats["red"]

    def finite_complex(self) -> FiniteComplex:
        return FiniteComplex((self.head.dim, self.sigma_dim, self.w_layout.dim),
                             [self.grad_matrix, self.rot_matrix])

    def interpolate_sigma(self, v_fn, rot_fn) -> np.ndarray:
        out = np.zeros(self.sigma_dim)
        out[:self.sddr.sxrot.dim] = self.sddr.interpolate_rot(v_fn)
        cache = self.sddr.cache
        for e in range(self.mesh.n_edges):
            pts = cache.edge_quad(e).points
            out[self.comp.edge_slice(e)] = cache.project_edge_values(
                e, self.k - 1, np.asarray(rot_fn(pts)))
        verts = np.asarray(rot_fn(self.mesh.vertices))
        for v in range(self.mesh.n_vertices):
            out[self.comp.vertex_index(v)] = verts[v]
        return out

    def sigma_boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.sigma_dim, dtype=bool)
        mask[:self.sddr.sxrot.dim] = self.sddr.sxrot.boundary_mask()
        mask |= self.comp.boundary_mask(self.sigma_dim)
        return mask


def build_serendipity_rotrot(rot: RotRotComplex,
                             sddr: SerendipityComplex) -> SerendipityBuild:
    """Apply the abstract construction to the rot-rot complex.

    Uses coordinate complement bases, so the built differentials coincide
    (up to roundoff) with the direct :class:`SerendipityRotRot` matrices.
    """
    return build_enhanced_serendipity(
        rot.ddr.finite_complex(), sddr.finite_complex(), rot.finite_complex(),
        sddr.morphisms(), rot.morphisms(),
        complement_bases=rot.complement_bases())
