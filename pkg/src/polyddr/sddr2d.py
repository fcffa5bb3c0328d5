"""Serendipity version of the 2D discrete de Rham complex.

On each face a set of at least two edges with pairwise distinct supporting
lines is selected, with the face entirely on one side of each line; with
``eta`` selected edges the face polynomial degrees drop from ``k-1`` to
``l = k + 1 - eta`` in the head space and from ``k`` to ``l + 1`` in the
middle space.  Boundary components (edge and vertex data) are untouched, so
the reduction removes interior unknowns only.

The serendipity reconstructions recover full polynomial fields from the
reduced component sets.  Both combine a boundary least-squares fit with
moment constraints:

* the head reconstruction is the gradient of a scalar potential fitted to
  the edge-potential derivatives (the selected edges guarantee uniqueness,
  the others improve the constants), subject to moment constraints against
  ``Rc^{l+1}`` that tie it to the retained face component;
* the middle reconstruction matches all rotational moments (computable
  from edge and rotational data through the scalar-rotor identity) and the
  retained complement moments; the unreachable complement moments come
  from the tangential-trace fit, minimally corrected to be exact on
  interpolated polynomial data and on reduced face-gradient data.

These choices make reduction-after-extension the identity and both cochain
identities exact (up to roundoff), which is what the checkers in
:mod:`polyddr.complex_core` verify.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.linalg import cho_solve, solve

from polyddr import polybasis as pb
from polyddr.ddr2d import (DdrComplex, LocalFaceOps, XGradLayout, XRotLayout,
                           edge_gradient_matrix)
from polyddr.polybasis import n_poly_2d, space_dimension

__all__ = [
    "SerendipityError",
    "SerendipityChoice",
    "select_edges",
    "SerendipityComplex",
]


class SerendipityError(RuntimeError):
    """Raised when a serendipity reconstruction system is rank deficient."""


@dataclass(frozen=True)
class SerendipityChoice:
    face: int
    local_edges: tuple[int, ...]
    eta: int
    ell: int


def _same_line(mesh, e1: int, e2: int, scale: float, tol: float = 1e-12) -> bool:
    a, b = mesh.edges[e1], mesh.edges[e2]
    cross_dir = a.tangent[0] * b.tangent[1] - a.tangent[1] * b.tangent[0]
    if abs(cross_dir) > tol:
        return False
    d = b.midpoint - a.midpoint
    return abs(a.tangent[0] * d[1] - a.tangent[1] * d[0]) <= tol * scale


def select_edges(mesh, f: int, k: int) -> SerendipityChoice:
    """Greedy deterministic edge selection on face ``f``.

    Scans the boundary in loop order, keeping edges whose supporting line
    has the whole face on one side and differs from every previously kept
    line; stops once ``k + 2`` edges are kept (smaller face degrees bring
    no further reduction).
    """
    face = mesh.faces[f]
    h = face.diameter
    cap = k + 2
    chosen: list[int] = []
    for local, (e, sign) in enumerate(zip(face.edges, face.signs)):
        if len(chosen) == cap:
            break
        edge = mesh.edges[e]
        n_out = sign * edge.normal
        offsets = (mesh.vertices[list(face.vertices)] - edge.midpoint) @ n_out
        if np.any(offsets > 1e-12 * h):
            continue
        if any(_same_line(mesh, e, face.edges[c], h) for c in chosen):
            continue
        chosen.append(local)
    if len(chosen) < 2:
        raise SerendipityError(
            f"face {f}: fewer than 2 admissible non-collinear edges")
    eta = len(chosen)
    return SerendipityChoice(f, tuple(chosen), eta, k + 1 - eta)


def _grad_coeff_map(k: int, h: float) -> np.ndarray:
    """Map from non-constant P^{k+1} coefficients to Pvec^k coefficients."""
    pows_hi = pb.monomial_powers(k + 1)
    pows_lo = pb.monomial_powers(k)
    index = {p: i for i, p in enumerate(pows_lo)}
    nvec = space_dimension("Pvec", k)
    nlo = len(pows_lo)
    out = np.zeros((nvec, len(pows_hi) - 1))
    for j, (a, b) in enumerate(pows_hi[1:]):
        if a > 0:
            out[index[(a - 1, b)], j] = a / h
        if b > 0:
            out[nlo + index[(a, b - 1)], j] = b / h
    return out


class SerendipityFaceOps:
    """Serendipity reconstructions and extension blocks on one face.

    Local component layouts match restrictions of the reduced spaces:
    head data is ``[q_F in P^l | q_E per edge | q_V per vertex]``, middle
    data is ``[v_R in R^{k-1} | v_c in Rc^{l+1} | v_E per edge]``.
    """

    def __init__(self, mesh, f: int, k: int, choice: SerendipityChoice,
                 ddr_local: LocalFaceOps, cache: pb.BasisCache):
        self.mesh = mesh
        self.f = f
        self.k = k
        self.choice = choice
        self.cache = cache
        self.face = mesh.faces[f]
        self.ddr_local = ddr_local
        self.ell = choice.ell
        # reduced-degree local operator set drives the scalar rotor and the
        # edge potentials on serendipity data
        self.red_local = LocalFaceOps(mesh, f, k, choice.ell, choice.ell + 1, cache)
        self._memo: dict[str, np.ndarray] = {}

    # -- local sizes ---------------------------------------------------------
    @property
    def n_sgrad_local(self) -> int:
        return self.red_local.n_grad_local

    @property
    def n_srot_local(self) -> int:
        return self.red_local.n_rot_local

    # -- head reconstruction ---------------------------------------------------
    @property
    def sgrad_mat(self) -> np.ndarray:
        """Serendipity gradient: reduced head data -> Pvec^k coefficients."""
        if "sgrad" in self._memo:
            return self._memo["sgrad"]
        k, f, cache = self.k, self.f, self.cache
        face = self.face
        n_unk = n_poly_2d(k + 1) - 1
        nloc = self.n_sgrad_local
        # the fit runs over every edge (the selected ones guarantee
        # well-posedness, the others only improve the reconstruction)
        ls_rows, ls_rhs = [], []
        for local in range(len(face.edges)):
            e = face.edges[local]
            edge = self.mesh.edges[e]
            eq = cache.edge_quad(e)
            grads = pb.scalar_grad_eval(eq.points, face.centroid, face.diameter,
                                        k + 1)[:, 1:, :]
            tang_deriv = grads @ edge.tangent
            gmat = edge_gradient_matrix(cache, e, k)
            data = np.zeros((k + 1, nloc))
            data[:, self.red_local.grad_edge_cols(local)] = gmat
            target = cache.edge_scalar(e, k) @ data
            sw = np.sqrt(eq.weights / edge.length)
            ls_rows.append(tang_deriv * sw[:, None])
            ls_rhs.append(target * sw[:, None])
        a_ls = np.vstack(ls_rows)
        b_ls = np.vstack(ls_rhs)
        normal = a_ls.T @ a_ls
        rhs = a_ls.T @ b_ls

        ncon = space_dimension("Rc", self.ell + 1)
        if ncon:
            con = cache.face_mixed(f, "Rc", self.ell + 1, "G", k)
            con_rhs = np.zeros((ncon, nloc))
            w = cache.face_quad(f).weights
            divs = cache.face_div(f, "Rc", self.ell + 1)
            sc = cache.face_scalar(f, self.ell)
            con_rhs[:, :n_poly_2d(self.ell)] = -(divs * w[:, None]).T @ sc
            for local, (e, sign) in enumerate(zip(face.edges, face.signs)):
                n_e = self.mesh.edges[e].normal
                vals = cache.face_vector_at_edge(f, "Rc", self.ell + 1, e) @ n_e
                w_e = cache.edge_quad(e).weights
                lo = cache.edge_scalar(e, k - 1)
                block = sign * (vals * w_e[:, None]).T @ lo
                con_rhs[:, self.red_local.local_edge_block_cols(local)] += block
            kkt = np.zeros((n_unk + ncon, n_unk + ncon))
            kkt[:n_unk, :n_unk] = normal
            kkt[:n_unk, n_unk:] = con.T
            kkt[n_unk:, :n_unk] = con
            kkt_rhs = np.vstack([rhs, con_rhs])
            sol = _checked_solve(kkt, kkt_rhs, self.f, self.choice.eta)[:n_unk]
        else:
            sol = _checked_solve(normal, rhs, self.f, self.choice.eta)
        out = _grad_coeff_map(k, face.diameter) @ sol
        self._memo["sgrad"] = out
        return out

    @property
    def epoly_mat(self) -> np.ndarray:
        """Face component of the head extension, in P^{k-1} coefficients."""
        if "epoly" in self._memo:
            return self._memo["epoly"]
        k, f, cache = self.k, self.f, self.cache
        face = self.face
        nk1 = n_poly_2d(k - 1)
        if nk1 == 0:
            out = np.zeros((0, self.n_sgrad_local))
            self._memo["epoly"] = out
            return out
        w = cache.face_quad(f).weights
        divs = cache.face_div(f, "Rc", k)
        sys = (divs * w[:, None]).T @ cache.face_scalar(f, k - 1)
        rhs = -cache.face_mixed(f, "Rc", k, "Pvec", k) @ self.sgrad_mat
        for local, (e, sign) in enumerate(zip(face.edges, face.signs)):
            n_e = self.mesh.edges[e].normal
            vals = cache.face_vector_at_edge(f, "Rc", k, e) @ n_e
            w_e = cache.edge_quad(e).weights
            lo = cache.edge_scalar(e, k - 1)
            block = sign * (vals * w_e[:, None]).T @ lo
            rhs[:, self.red_local.local_edge_block_cols(local)] += block
        out = solve(sys, rhs)
        self._memo["epoly"] = out
        return out

    def extend_grad_local(self) -> np.ndarray:
        """Reduced head data -> full head data (face block reconstructed)."""
        ddr = self.ddr_local
        out = np.zeros((ddr.n_grad_local, self.n_sgrad_local))
        out[:ddr.n_face_dofs, :] = self.epoly_mat
        m = len(self.face.edges)
        src = n_poly_2d(self.ell)
        dst = ddr.n_face_dofs
        span = m * self.k + m
        out[dst:dst + span, src:src + span] = np.eye(span)
        return out

    # -- middle reconstruction --------------------------------------------------
    @property
    def srot_mat(self) -> np.ndarray:
        """Serendipity rotor-side field: reduced middle data -> Pvec^k."""
        if "srot" in self._memo:
            return self._memo["srot"]
        k, f, cache = self.k, self.f, self.cache
        face = self.face
        ell = self.ell
        nloc = self.n_srot_local
        n_alpha = space_dimension("R", k)
        n_beta = space_dimension("Rc", ell + 1)
        n_rem = space_dimension("Rc", k) - n_beta

        mixed_r = cache.face_mixed(f, "R", k, "Pvec", k)
        mixed_rc = cache.face_mixed(f, "Rc", k, "Pvec", k)
        mfull = np.vstack([mixed_r, mixed_rc])

        rows = np.zeros((n_alpha + space_dimension("Rc", k), nloc))
        # rotational moments from the scalar rotor and edge data
        mixed_pk = cache.face_mixed(f, "P", k + 1, "P", k)
        rows[:n_alpha, :] = (mixed_pk @ self.red_local.rotor_mat)[1:, :]
        for local, (e, sign) in enumerate(zip(face.edges, face.signs)):
            w_e = cache.edge_quad(e).weights
            face_sc = cache.face_scalar_at_edge(f, k + 1, e)
            edge_sc = cache.edge_scalar(e, k)
            block = sign * (face_sc * w_e[:, None]).T @ edge_sc
            rows[:n_alpha, self.red_local.rot_edge_block(local)] += block[1:, :]
        # retained complement moments
        if n_beta:
            rows[n_alpha:n_alpha + n_beta, self.red_local.rot_rc_block()] = \
                cache.face_gram(f, "Rc", ell + 1)
        # unreachable complement moments: start from the natural least-squares
        # reconstruction (tangential-trace fit on the selected edges, subject
        # to the moment constraints above) and apply the minimum-norm
        # correction making the map exact on interpolated polynomial data and
        # on reduced face-gradient data; the correction restores the cochain
        # identities while the least-squares part keeps good approximation
        # behaviour on general data
        if n_rem:
            s_ls = self._least_squares_field(rows[:n_alpha + n_beta],
                                             np.vstack([mixed_r,
                                                        mixed_rc[:n_beta]]))
            fit = mixed_rc[n_beta:, :] @ s_ls
            theta, theta_t = self._poly_data_columns(mixed_rc, n_beta)
            phi, phi_t = self._gradient_data_columns(mixed_rc, n_beta)
            d_mat = np.hstack([theta, phi])
            t_mat = np.hstack([theta_t, phi_t])
            gap = t_mat - fit @ d_mat
            corr, *_ = np.linalg.lstsq(d_mat.T, gap.T, rcond=None)
            fit = fit + corr.T
            res = np.linalg.norm(fit @ d_mat - t_mat)
            if res > 1e-8 * max(np.linalg.norm(t_mat), 1.0):
                raise SerendipityError(
                    f"face {f} (eta={self.choice.eta}): complement moment fit "
                    f"inconsistent (residual {res:.2e})")
            rows[n_alpha + n_beta:, :] = fit
        out = _checked_solve(mfull, rows, self.f, self.choice.eta)
        self._memo["srot"] = out
        return out

    def _least_squares_field(self, moment_rows: np.ndarray,
                             constraints: np.ndarray) -> np.ndarray:
        """Tangential-trace least-squares fit subject to moment constraints.

        Minimizes the weighted mismatch of the tangential trace against the
        edge data over the selected edges, over fields whose moments against
        the constrained directions equal the given data rows.
        """
        k, f, cache = self.k, self.f, self.cache
        face = self.face
        npvec = space_dimension("Pvec", k)
        nloc = self.n_srot_local
        normal = np.zeros((npvec, npvec))
        rhs = np.zeros((npvec, nloc))
        for local in range(len(face.edges)):
            e = face.edges[local]
            edge = self.mesh.edges[e]
            w_e = cache.edge_quad(e).weights / edge.length
            trace = cache.face_vector_at_edge(f, "Pvec", k, e) @ edge.tangent
            normal += (trace * w_e[:, None]).T @ trace
            target = np.zeros((len(w_e), nloc))
            target[:, self.red_local.rot_edge_block(local)] = cache.edge_scalar(e, k)
            rhs += (trace * w_e[:, None]).T @ target
        ncon = constraints.shape[0]
        kkt = np.zeros((npvec + ncon, npvec + ncon))
        kkt[:npvec, :npvec] = normal
        kkt[:npvec, npvec:] = constraints.T
        kkt[npvec:, :npvec] = constraints
        kkt_rhs = np.vstack([rhs, moment_rows])
        return _checked_solve(kkt, kkt_rhs, self.f, self.choice.eta)[:npvec]

    def _poly_data_columns(self, mixed_rc, n_beta):
        """Interpolated data and target tail moments of the Pvec^k basis."""
        k, f, cache = self.k, self.f, self.cache
        face = self.face
        npvec = space_dimension("Pvec", k)
        data = np.zeros((self.n_srot_local, npvec))
        data[self.red_local.rot_r_block(), :] = cache.face_projector(
            f, "R", k - 1, "Pvec", k)
        if n_beta:
            data[self.red_local.rot_rc_block(), :] = cache.face_projector(
                f, "Rc", self.ell + 1, "Pvec", k)
        for local, e in enumerate(face.edges):
            tang = self.mesh.edges[e].tangent
            vals = cache.face_vector_at_edge(f, "Pvec", k, e) @ tang
            w_e = cache.edge_quad(e).weights
            basis = cache.edge_scalar(e, k)
            rhs = (basis * w_e[:, None]).T @ vals
            data[self.red_local.rot_edge_block(local), :] = cho_solve(
                cache.edge_chol(e, k), rhs)
        return data, mixed_rc[n_beta:, :]

    def _gradient_data_columns(self, mixed_rc, n_beta):
        """Reduced data and target tail moments of extended face gradients."""
        k, f, cache = self.k, self.f, self.cache
        g_loc = self.ddr_local.grad_mat @ self.extend_grad_local()
        data = np.zeros((self.n_srot_local, self.n_sgrad_local))
        data[self.red_local.rot_r_block(), :] = cache.face_projector(
            f, "R", k - 1, "Pvec", k) @ g_loc
        if n_beta:
            data[self.red_local.rot_rc_block(), :] = cache.face_projector(
                f, "Rc", self.ell + 1, "Pvec", k) @ g_loc
        for local, e in enumerate(self.face.edges):
            gmat = edge_gradient_matrix(cache, e, k)
            cols = self.red_local.grad_edge_cols(local)
            block = np.zeros((k + 1, self.n_sgrad_local))
            block[:, cols] = gmat
            data[self.red_local.rot_edge_block(local), :] = block
        return data, mixed_rc[n_beta:, :] @ g_loc

    def extend_rot_local(self) -> np.ndarray:
        """Reduced middle data -> full middle data (complement reconstructed)."""
        ddr = self.ddr_local
        k, f, cache = self.k, self.f, self.cache
        out = np.zeros((ddr.n_rot_local, self.n_srot_local))
        nr = space_dimension("R", k - 1)
        out[ddr.rot_r_block(), self.red_local.rot_r_block()] = np.eye(nr)
        n_rc = space_dimension("Rc", k)
        if n_rc:
            out[ddr.rot_rc_block(), :] = cache.face_projector(
                f, "Rc", k, "Pvec", k) @ self.srot_mat
        m = len(self.face.edges)
        span = m * (k + 1)
        out[ddr.rot_edge_block(0).start:ddr.rot_edge_block(0).start + span,
            self.red_local.rot_edge_block(0).start:
            self.red_local.rot_edge_block(0).start + span] = np.eye(span)
        return out


def _checked_solve(mat: np.ndarray, rhs: np.ndarray, face: int, eta: int) -> np.ndarray:
    try:
        sol = solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise SerendipityError(f"face {face} (eta={eta}): singular "
                               f"reconstruction system") from exc
    res = np.linalg.norm(mat @ sol - rhs)
    if res > 1e-8 * max(np.linalg.norm(rhs), 1.0):
        raise SerendipityError(
            f"face {face} (eta={eta}): ill-conditioned reconstruction "
            f"system (residual {res:.2e})")
    return sol


class SerendipityComplex:
    """Assembled serendipity complex with its extension/reduction maps."""

    def __init__(self, ddr: DdrComplex):
        self.ddr = ddr
        self.mesh = ddr.mesh
        self.k = ddr.k
        self.cache = ddr.cache
        self.choices = [select_edges(self.mesh, f, self.k)
                        for f in range(self.mesh.n_faces)]
        self.ell = np.array([c.ell for c in self.choices], dtype=int)
        self.sxgrad = XGradLayout(self.mesh, self.k, self.ell)
        self.sxrot = XRotLayout(self.mesh, self.k, self.ell + 1)
        self.xl = ddr.xl
        self._locals: dict[int, SerendipityFaceOps] = {}
        self._mats: dict[str, sps.csr_array] = {}

    def local(self, f: int) -> SerendipityFaceOps:
        ops = self._locals.get(f)
        if ops is None:
            ops = SerendipityFaceOps(self.mesh, f, self.k, self.choices[f],
                                     self.ddr.local(f), self.cache)
            self._locals[f] = ops
        return ops

    # -- global maps -----------------------------------------------------------
    def _entity_identity(self, rows_layout, cols_layout, rows, cols, vals):
        for e in range(self.mesh.n_edges):
            r, c = rows_layout.edge_slice(e), cols_layout.edge_slice(e)
            idx = np.arange(r.stop - r.start)
            rows.append(idx + r.start)
            cols.append(idx + c.start)
            vals.append(np.ones(len(idx)))
        if rows_layout.vertex_dim and cols_layout.vertex_dim:
            nv = self.mesh.n_vertices
            rows.append(np.arange(nv) + rows_layout.vertex_base)
            cols.append(np.arange(nv) + cols_layout.vertex_base)
            vals.append(np.ones(nv))

    @staticmethod
    def _scatter(rows, cols, vals, block, rslice, cidx):
        block = np.asarray(block)
        if block.size == 0:
            return
        rr, cc = np.meshgrid(np.arange(rslice.start, rslice.stop), cidx,
                             indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(block.ravel())

    def _build(self, name: str) -> sps.csr_array:
        rows, cols, vals = [], [], []
        mesh, k = self.mesh, self.k
        if name == "ext_grad":
            shape = (self.ddr.xgrad.dim, self.sxgrad.dim)
            self._entity_identity(self.ddr.xgrad, self.sxgrad, rows, cols, vals)
            for f in range(mesh.n_faces):
                self._scatter(rows, cols, vals, self.local(f).epoly_mat,
                              self.ddr.xgrad.face_slice(f),
                              self.sxgrad.local_indices(f))
        elif name == "red_grad":
            shape = (self.sxgrad.dim, self.ddr.xgrad.dim)
            self._entity_identity(self.sxgrad, self.ddr.xgrad, rows, cols, vals)
            for f in range(mesh.n_faces):
                if self.sxgrad.face_dims[f]:
                    proj = self.cache.face_projector(
                        f, "P", int(self.ell[f]), "P", int(self.ddr.degrees.n[f]))
                    self._scatter(rows, cols, vals, proj,
                                  self.sxgrad.face_slice(f),
                                  np.arange(self.ddr.xgrad.face_slice(f).start,
                                            self.ddr.xgrad.face_slice(f).stop))
        elif name == "ext_rot":
            shape = (self.ddr.xrot.dim, self.sxrot.dim)
            self._entity_identity(self.ddr.xrot, self.sxrot, rows, cols, vals)
            for f in range(mesh.n_faces):
                r = self.ddr.xrot.face_r_slice(f)
                rs = self.sxrot.face_r_slice(f)
                idx = np.arange(r.stop - r.start)
                rows.append(idx + r.start)
                cols.append(idx + rs.start)
                vals.append(np.ones(len(idx)))
                if self.ddr.xrot.rc_dims[f]:
                    block = self.cache.face_projector(f, "Rc", int(self.ddr.degrees.s[f]),
                                                      "Pvec", k) @ self.local(f).srot_mat
                    self._scatter(rows, cols, vals, block,
                                  self.ddr.xrot.face_rc_slice(f),
                                  self.sxrot.local_indices(f))
        elif name == "red_rot":
            shape = (self.sxrot.dim, self.ddr.xrot.dim)
            self._entity_identity(self.sxrot, self.ddr.xrot, rows, cols, vals)
            for f in range(mesh.n_faces):
                r = self.sxrot.face_r_slice(f)
                rd = self.ddr.xrot.face_r_slice(f)
                idx = np.arange(r.stop - r.start)
                rows.append(idx + r.start)
                cols.append(idx + rd.start)
                vals.append(np.ones(len(idx)))
                if self.sxrot.rc_dims[f]:
                    proj = self.cache.face_projector(
                        f, "Rc", int(self.ell[f]) + 1, "Rc", int(self.ddr.degrees.s[f]))
                    self._scatter(rows, cols, vals, proj,
                                  self.sxrot.face_rc_slice(f),
                                  np.arange(self.ddr.xrot.face_rc_slice(f).start,
                                            self.ddr.xrot.face_rc_slice(f).stop))
        else:
            raise KeyError(name)
        if rows:
            mat = sps.coo_array((np.concatenate(vals),
                                 (np.concatenate(rows).astype(int),
                                  np.concatenate(cols).astype(int))), shape=shape)
        else:
            mat = sps.coo_array(shape)
        return mat.tocsr()

    def _mat(self, name: str) -> sps.csr_array:
        if name not in self._mats:
            self._mats[name] = self._build(name)
        return self._mats[name]

    @property
    def ext_grad(self) -> sps.csr_array:
        return self._mat("ext_grad")

    @property
    def red_grad(self) -> sps.csr_array:
        return self._mat("red_grad")

    @property
    def ext_rot(self) -> sps.csr_array:
        return self._mat("ext_rot")

    @property
    def red_rot(self) -> sps.csr_array:
        return self._mat("red_rot")

    @property
    def grad_matrix(self) -> sps.csr_array:
        if "sG" not in self._mats:
            self._mats["sG"] = (self.red_rot @ self.ddr.grad_matrix
                                @ self.ext_grad).tocsr()
        return self._mats["sG"]

    @property
    def rot_matrix(self) -> sps.csr_array:
        if "sR" not in self._mats:
            self._mats["sR"] = (self.ddr.rot_matrix @ self.ext_rot).tocsr()
        return self._mats["sR"]

    # -- interpolators -----------------------------------------------------------
    def interpolate_grad(self, q_fn) -> np.ndarray:
        out = np.zeros(self.sxgrad.dim)
        for f in range(self.mesh.n_faces):
            if self.sxgrad.face_dims[f]:
                pts = self.cache.face_quad(f).points
                out[self.sxgrad.face_slice(f)] = self.cache.project_face_values(
                    f, "P", int(self.ell[f]), np.asarray(q_fn(pts)))
        for e in range(self.mesh.n_edges):
            if self.k >= 1:
                pts = self.cache.edge_quad(e).points
                out[self.sxgrad.edge_slice(e)] = self.cache.project_edge_values(
                    e, self.k - 1, np.asarray(q_fn(pts)))
        out[self.sxgrad.vertex_base:] = np.asarray(q_fn(self.mesh.vertices))
        return out

    def interpolate_rot(self, v_fn) -> np.ndarray:
        out = np.zeros(self.sxrot.dim)
        for f in range(self.mesh.n_faces):
            pts = self.cache.face_quad(f).points
            vals = np.asarray(v_fn(pts))
            if self.sxrot.rdim:
                out[self.sxrot.face_r_slice(f)] = self.cache.project_face_values(
                    f, "R", self.k - 1, vals)
            if self.sxrot.rc_dims[f]:
                out[self.sxrot.face_rc_slice(f)] = self.cache.project_face_values(
                    f, "Rc", int(self.ell[f]) + 1, vals)
        for e, edge in enumerate(self.mesh.edges):
            pts = self.cache.edge_quad(e).points
            vals = np.asarray(v_fn(pts)) @ edge.tangent
            out[self.sxrot.edge_slice(e)] = self.cache.project_edge_values(
                e, self.k, vals)
        return out

    # -- complex views ------------------------------------------------------------
    def finite_complex(self):
        from polyddr.complex_core import FiniteComplex

        return FiniteComplex((self.sxgrad.dim, self.sxrot.dim, self.xl.dim),
                             [self.grad_matrix, self.rot_matrix])

    def morphisms(self):
        """Extension/reduction pair linking this complex to the full one."""
        from polyddr.complex_core import MorphismPair

        eye = sps.identity(self.xl.dim, format="csr")
        return MorphismPair([self.ext_grad, self.ext_rot, eye],
                            [self.red_grad, self.red_rot, eye],
                            small=self.finite_complex(),
                            big=self.ddr.finite_complex())
