"""Discrete L2-like inner products and the rot-rot bilinear form.

All products follow the potential-plus-stabilization pattern: the
reconstructed potential carries the consistency part, and least-squares
penalties couple the remaining component data to its trace, with weights
chosen to be dimensionally homogeneous and refinement-stable.

* head product: face integral of the scalar potential, plus ``h_F`` times
  the edge mismatch between edge and face potentials, plus ``h_F^2`` times
  the vertex mismatch;
* middle (Sigma) product: face integral of the tangential potential, plus
  ``h_F`` times the edge mismatch of tangential traces, plus complement
  blocks weighted by ``h_E`` on edges and by the squared mean adjacent
  face diameter on vertices;
* rot-rot form: face integral of the reconstructed gradient of the
  auxiliary rotor variable, stabilized by ``1/h_E`` edge mismatch, unit
  vertex mismatch and ``1/h_F^2`` face-component mismatch terms.  The last
  term pins the top-degree face component, making the kernel exactly the
  interpolates of constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from polyddr.ddr2d import LocalFaceOps, XGradLayout
from polyddr.polybasis import n_poly_2d
from polyddr.rotrot import RotRotComplex, SerendipityRotRot

__all__ = ["DiscreteProducts", "build_products", "build_serendipity_products"]


@dataclass
class DiscreteProducts:
    """Symmetric positive (semi)definite matrices of the discrete products."""

    v_mass: sps.csr_array        # head-space inner product
    sigma_mass: sps.csr_array    # middle-space inner product
    w_mass: sps.csr_array        # tail-space inner product
    rotrot_form: sps.csr_array   # rot-rot seminorm form on the middle space


class _Accumulator:
    def __init__(self, dim: int):
        self.dim = dim
        self.rows, self.cols, self.vals = [], [], []

    def add(self, block: np.ndarray, idx: np.ndarray):
        rr, cc = np.meshgrid(idx, idx, indexing="ij")
        self.rows.append(rr.ravel())
        self.cols.append(cc.ravel())
        self.vals.append(np.asarray(block).ravel())

    def tocsr(self) -> sps.csr_array:
        if not self.rows:
            return sps.csr_array((self.dim, self.dim))
        mat = sps.coo_array((np.concatenate(self.vals),
                             (np.concatenate(self.rows), np.concatenate(self.cols))),
                            shape=(self.dim, self.dim))
        mat = mat.tocsr()
        return ((mat + mat.T) * 0.5).tocsr()


def _w_locals(rot: RotRotComplex) -> dict[int, LocalFaceOps]:
    """Local operators for the tail space (head-type with face degree k)."""
    store = getattr(rot.ddr, "_w_local_ops", None)
    if store is None:
        store = {}
        rot.ddr._w_local_ops = store
    return store


def _w_local(rot: RotRotComplex, f: int) -> LocalFaceOps:
    store = _w_locals(rot)
    ops = store.get(f)
    if ops is None:
        ops = LocalFaceOps(rot.mesh, f, rot.k, rot.k, rot.k, rot.ddr.cache)
        store[f] = ops
    return ops


def _head_product(mesh, cache, layout: XGradLayout, local_of) -> sps.csr_array:
    k = layout.k
    acc = _Accumulator(layout.dim)
    for f in range(mesh.n_faces):
        ops = local_of(f)
        face = mesh.faces[f]
        idx = layout.local_indices(f)
        pot = ops.potential_mat
        gram = cache.face_gram(f, "P", k + 1)
        local = pot.T @ gram @ pot
        edge_pots = ops.edge_potentials_local()
        for li, e in enumerate(face.edges):
            w_e = cache.edge_quad(e).weights
            gamma_e = cache.edge_scalar(e, k + 1) @ edge_pots[li]
            gamma_f = cache.face_scalar_at_edge(f, k + 1, e) @ pot
            diff = gamma_e - gamma_f
            local += face.diameter * (diff * w_e[:, None]).T @ diff
        vert_pts = mesh.vertices[list(face.vertices)]
        gamma_v = ops.eval_potential(vert_pts)
        for li in range(len(face.vertices)):
            row = -gamma_v[li]
            row[ops.n_grad_local - len(face.vertices) + li] += 1.0
            local += face.diameter ** 2 * np.outer(row, row)
        acc.add(local, idx)
    return acc.tocsr()


def _sigma_first_factor(rot: RotRotComplex) -> sps.csr_array:
    ddr = rot.ddr
    mesh, cache, k = rot.mesh, ddr.cache, rot.k
    acc = _Accumulator(ddr.xrot.dim)
    for f in range(mesh.n_faces):
        ops = ddr.local(f)
        face = mesh.faces[f]
        idx = ddr.xrot.local_indices(f)
        tang = ops.tangential_mat
        local = tang.T @ cache.face_gram(f, "Pvec", k) @ tang
        for li, e in enumerate(face.edges):
            edge = mesh.edges[e]
            w_e = cache.edge_quad(e).weights
            v_e = np.zeros((len(w_e), ops.n_rot_local))
            v_e[:, ops.rot_edge_block(li)] = cache.edge_scalar(e, k)
            trace = (cache.face_vector_at_edge(f, "Pvec", k, e) @ edge.tangent) @ tang
            diff = v_e - trace
            local += face.diameter * (diff * w_e[:, None]).T @ diff
        acc.add(local, idx)
    return acc.tocsr()


def _vertex_scales(mesh) -> np.ndarray:
    """Mean adjacent face diameter per vertex."""
    total = np.zeros(mesh.n_vertices)
    count = np.zeros(mesh.n_vertices)
    for face in mesh.faces:
        for v in face.vertices:
            total[v] += face.diameter
            count[v] += 1
    return total / np.maximum(count, 1)


def _sigma_product(rot: RotRotComplex) -> sps.csr_array:
    mesh, cache, k = rot.mesh, rot.ddr.cache, rot.k
    first = _sigma_first_factor(rot)
    acc = _Accumulator(rot.sigma_dim)
    hv = _vertex_scales(mesh)
    for e, edge in enumerate(mesh.edges):
        s = rot.comp.edge_slice(e)
        acc.add(edge.length * cache.edge_gram(e, k - 1),
                np.arange(s.start, s.stop))
    for v in range(mesh.n_vertices):
        acc.add(np.array([[hv[v] ** 2]]), np.array([rot.comp.vertex_index(v)]))
    comp = acc.tocsr()
    full = sps.lil_array((rot.sigma_dim, rot.sigma_dim))
    full[:first.shape[0], :first.shape[1]] = first
    return (full.tocsr() + comp).tocsr()


def _rotrot_w_form(rot: RotRotComplex) -> sps.csr_array:
    """Discrete H1-type seminorm form on the tail space (memoized).

    Applied to the image of the discrete rotor it yields the rot-rot form;
    the face-component coupling term is required to make the kernel exactly
    the interpolates of constants.
    """
    cached = getattr(rot.ddr, "_w_form_matrix", None)
    if cached is not None:
        return cached
    mesh, cache, k = rot.mesh, rot.ddr.cache, rot.k
    layout = rot.w_layout
    acc = _Accumulator(layout.dim)
    for f in range(mesh.n_faces):
        ops = _w_local(rot, f)
        face = mesh.faces[f]
        idx = layout.local_indices(f)
        grad = ops.grad_mat
        local = grad.T @ cache.face_gram(f, "Pvec", k) @ grad
        pot = ops.potential_mat
        edge_pots = ops.edge_potentials_local()
        for li, e in enumerate(face.edges):
            edge = mesh.edges[e]
            w_e = cache.edge_quad(e).weights
            gamma_e = cache.edge_scalar(e, k + 1) @ edge_pots[li]
            gamma_f = cache.face_scalar_at_edge(f, k + 1, e) @ pot
            diff = gamma_e - gamma_f
            local += (diff * w_e[:, None]).T @ diff / edge.length
        vert_pts = mesh.vertices[list(face.vertices)]
        gamma_v = ops.eval_potential(vert_pts)
        for li in range(len(face.vertices)):
            row = -gamma_v[li]
            row[ops.n_grad_local - len(face.vertices) + li] += 1.0
            local += np.outer(row, row)
        proj = cache.face_projector(f, "P", k, "P", k + 1)
        diff_f = -proj @ pot
        diff_f[:, :n_poly_2d(k)] += np.eye(n_poly_2d(k))
        local += (diff_f.T @ cache.face_gram(f, "P", k) @ diff_f
                  / face.diameter ** 2)
        acc.add(local, idx)
    out = acc.tocsr()
    rot.ddr._w_form_matrix = out
    return out


def build_products(rot: RotRotComplex) -> DiscreteProducts:
    """Products on the standard rot-rot spaces."""
    ddr = rot.ddr
    v_mass = _head_product(rot.mesh, ddr.cache, ddr.xgrad, ddr.local)
    w_mass = _head_product(rot.mesh, ddr.cache, rot.w_layout,
                           lambda f: _w_local(rot, f))
    sigma_mass = _sigma_product(rot)
    w_form = _rotrot_w_form(rot)
    ur = rot.rot_matrix
    rotrot_form = (ur.T @ w_form @ ur).tocsr()
    return DiscreteProducts(v_mass, sigma_mass, w_mass, rotrot_form)


def build_serendipity_products(srot: SerendipityRotRot,
                               standard: DiscreteProducts) -> DiscreteProducts:
    """Products on the serendipity spaces, induced through the extensions."""
    ext_v = srot.sddr.ext_grad
    ext_s = srot.extension_sigma
    v_mass = (ext_v.T @ standard.v_mass @ ext_v).tocsr()
    sigma_mass = (ext_s.T @ standard.sigma_mass @ ext_s).tocsr()
    ur = srot.rot_matrix
    w_form = _rotrot_w_form(srot.rot)
    rotrot_form = (ur.T @ w_form @ ur).tocsr()
    return DiscreteProducts(v_mass, sigma_mass, standard.w_mass, rotrot_form)
