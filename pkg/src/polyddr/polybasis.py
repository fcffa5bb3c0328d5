"""Scaled polynomial bases on mesh cells, quadrature, Gram matrices, projectors.

Scalar bases are monomials in the scaled variable ``(x - x_c)/h_c`` (cell
centroid and diameter), which keeps Gram conditioning independent of the
meshsize.  On an edge the scaled coordinate is ``s = (x - mid) . t / h``,
ranging over ``[-1/2, 1/2]``.

Vector space families on a face, all subspaces of the vector-valued
polynomials ``Pvec``:

``R``    rotated gradients ``perp(grad m)`` of non-constant monomials of
         degree <= l+1 (the image of the scalar-to-vector rotor);
``Rc``   the complement ``(x - x_c) * P^{l-1}``;
``G``    gradients of non-constant monomials of degree <= l+1;
``Gc``   the complement ``perp(x - x_c) * P^{l-1}``.

``perp`` rotates by +90 degrees: ``perp(a, b) = (-b, a)``.  Degrees below
the first nontrivial one give the zero-dimensional space.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "PolySpaceTag",
    "QuadRule",
    "BasisCache",
    "space_dimension",
    "monomial_powers",
    "basis_fields",
    "face_quadrature",
    "edge_quadrature",
    "project",
]

VECTOR_KINDS = ("Pvec", "R", "Rc", "G", "Gc")
SCALAR_KINDS = ("P",)


def n_poly_2d(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2 if degree >= 0 else 0


@dataclass(frozen=True)
class PolySpaceTag:
    """Identifies a polynomial space: kind, degree, and entity dimension."""

    kind: str
    degree: int
    entity_dim: int = 2

    def __post_init__(self):
        if self.entity_dim == 1 and self.kind != "P":
            raise ValueError("edges only carry scalar polynomial spaces")
        if self.kind not in VECTOR_KINDS + SCALAR_KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return space_dimension(self.kind, self.degree, self.entity_dim)


def space_dimension(kind: str, degree: int, entity_dim: int = 2) -> int:
    """Dimension of the tagged space; negative degrees give 0."""
    if entity_dim == 1:
        if kind != "P":
            raise ValueError("edges only carry scalar polynomial spaces")
        return degree + 1 if degree >= 0 else 0
    if kind == "P":
        return n_poly_2d(degree)
    if kind == "Pvec":
        return 2 * n_poly_2d(degree)
    if kind in ("R", "G"):
        return n_poly_2d(degree + 1) - 1 if degree >= 0 else 0
    if kind in ("Rc", "Gc"):
        return n_poly_2d(degree - 1)
    raise ValueError(f"unknown space kind {kind!r}")


@lru_cache(maxsize=None)
def monomial_powers(degree: int) -> tuple[tuple[int, int], ...]:
    """Exponent pairs of the 2D monomials up to ``degree``, graded order."""
    if degree < 0:
        return ()
    return tuple((d - b, b) for d in range(degree + 1) for b in range(d + 1))


def perp(vals: np.ndarray) -> np.ndarray:
    """Rotate 2D vectors by +90 degrees along the last axis."""
    out = np.empty_like(vals)
    out[..., 0] = -vals[..., 1]
    out[..., 1] = vals[..., 0]
    return out


def basis_fields(tag: PolySpaceTag, center, h, midpoint=None, tangent=None):
    """Evaluable basis fields of a tagged space on one cell.

    Returns a list of callables mapping an (n, 2) point array to values,
    scalar (n,) or vector (n, 2) according to the tag.  Edge tags require
    the edge midpoint and unit tangent.
    """
    center = np.asarray(center, dtype=float)
    if tag.entity_dim == 1:
        if midpoint is None or tangent is None:
            raise ValueError("edge bases need the midpoint and tangent")
        mid = np.asarray(midpoint, dtype=float)
        tan = np.asarray(tangent, dtype=float)
        return [lambda pts, j=j: edge_scalar_eval(pts, mid, tan, h,
                                                  tag.degree)[:, j]
                for j in range(tag.dim)]
    if tag.kind == "P":
        return [lambda pts, j=j: scalar_eval(pts, center, h, tag.degree)[:, j]
                for j in range(tag.dim)]
    return [lambda pts, j=j: vector_eval(pts, center, h, tag.kind,
                                         tag.degree)[:, j, :]
            for j in range(tag.dim)]


# ----------------------------------------------------------------------
# pointwise basis evaluation
# ----------------------------------------------------------------------

def scalar_eval(points: np.ndarray, center: np.ndarray, h: float,
                degree: int) -> np.ndarray:
    """Scaled monomials at ``points``; shape (npts, n_poly_2d(degree))."""
    powers = monomial_powers(degree)
    pts = (np.atleast_2d(points) - center) / h
    out = np.empty((len(pts), len(powers)))
    for j, (a, b) in enumerate(powers):
        out[:, j] = pts[:, 0] ** a * pts[:, 1] ** b
    return out


def scalar_grad_eval(points: np.ndarray, center: np.ndarray, h: float,
                     degree: int) -> np.ndarray:
    """Gradients of the scaled monomials; shape (npts, N, 2)."""
    powers = monomial_powers(degree)
    pts = (np.atleast_2d(points) - center) / h
    out = np.zeros((len(pts), len(powers), 2))
    for j, (a, b) in enumerate(powers):
        if a > 0:
            out[:, j, 0] = a / h * pts[:, 0] ** (a - 1) * pts[:, 1] ** b
        if b > 0:
            out[:, j, 1] = b / h * pts[:, 0] ** a * pts[:, 1] ** (b - 1)
    return out


def vector_eval(points: np.ndarray, center: np.ndarray, h: float, kind: str,
                degree: int) -> np.ndarray:
    """Vector basis fields at ``points``; shape (npts, N, 2)."""
    pts = np.atleast_2d(points)
    n = len(pts)
    if kind == "Pvec":
        sc = scalar_eval(pts, center, h, degree)
        nb = sc.shape[1]
        out = np.zeros((n, 2 * nb, 2))
        out[:, :nb, 0] = sc
        out[:, nb:, 1] = sc
        return out
    if kind in ("R", "G"):
        if degree < 0:
            return np.zeros((n, 0, 2))
        grads = scalar_grad_eval(pts, center, h, degree + 1)[:, 1:, :]
        return perp(grads) if kind == "R" else grads
    if kind in ("Rc", "Gc"):
        if degree < 1:
            return np.zeros((n, 0, 2))
        sc = scalar_eval(pts, center, h, degree - 1)
        xc = (pts - center) / h
        out = np.empty((n, sc.shape[1], 2))
        out[:, :, 0] = xc[:, None, 0] * sc
        out[:, :, 1] = xc[:, None, 1] * sc
        return perp(out) if kind == "Gc" else out
    raise ValueError(f"unknown vector kind {kind!r}")


def vector_div_eval(points: np.ndarray, center: np.ndarray, h: float, kind: str,
                    degree: int) -> np.ndarray:
    """Divergence of the vector basis fields; shape (npts, N)."""
    pts = np.atleast_2d(points)
    n = len(pts)
    if kind == "Pvec":
        grads = scalar_grad_eval(pts, center, h, degree)
        nb = grads.shape[1]
        out = np.zeros((n, 2 * nb))
        out[:, :nb] = grads[:, :, 0]
        out[:, nb:] = grads[:, :, 1]
        return out
    if kind == "R":
        return np.zeros((n, space_dimension("R", degree)))
    if kind == "Rc":
        # basis fields are ((x - c)/h) m, so div = (2 m + (x - c) . grad m) / h
        if degree < 1:
            return np.zeros((n, 0))
        sc = scalar_eval(pts, center, h, degree - 1)
        grads = scalar_grad_eval(pts, center, h, degree - 1)
        xc = pts - center
        return (2.0 * sc + xc[:, None, 0] * grads[:, :, 0]
                + xc[:, None, 1] * grads[:, :, 1]) / h
    raise ValueError(f"divergence not implemented for kind {kind!r}")


def edge_scalar_eval(points: np.ndarray, midpoint: np.ndarray, tangent: np.ndarray,
                     h: float, degree: int) -> np.ndarray:
    """Scaled 1D monomials on an edge, evaluated at 2D points on it."""
    if degree < 0:
        return np.zeros((len(np.atleast_2d(points)), 0))
    s = (np.atleast_2d(points) - midpoint) @ tangent / h
    return np.vander(s, degree + 1, increasing=True)


# ----------------------------------------------------------------------
# quadrature
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def _reference_triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss-Legendre x Gauss-Jacobi rule on the unit triangle.

    Exact for total degree <= order on {(u, v): u, v >= 0, u + v <= 1}.
    """
    n = order // 2 + 1
    xa, wa = roots_legendre(n)
    xb, wb = roots_jacobi(n, 1.0, 0.0)
    A, B = np.meshgrid(xa, xb, indexing="ij")
    u = (1.0 + A) * (1.0 - B) / 4.0
    v = (1.0 + B) / 2.0
    w = np.outer(wa, wb) / 8.0
    return np.column_stack([u.ravel(), v.ravel()]), w.ravel()


def face_quadrature(mesh, f: int, order: int) -> QuadRule:
    """Centroid-fan quadrature on face ``f``, exact to the given order.

    Requires the face to be star-shaped with respect to its centroid.
    """
    if not mesh.is_star_shaped(f):
        from polyddr.mesh2d import MeshError

        raise MeshError(f"face {f} is not star-shaped w.r.t. its centroid")
    ref_pts, ref_w = _reference_triangle_rule(order)
    face = mesh.faces[f]
    c = face.centroid
    pts = mesh.face_points(f)
    nxt = np.roll(pts, -1, axis=0)
    all_pts, all_w = [], []
    for p, q in zip(pts, nxt):
        jac = (p[0] - c[0]) * (q[1] - c[1]) - (p[1] - c[1]) * (q[0] - c[0])
        mapped = c + np.outer(ref_pts[:, 0], p - c) + np.outer(ref_pts[:, 1], q - c)
        all_pts.append(mapped)
        all_w.append(ref_w * jac)
    return QuadRule(np.vstack(all_pts), np.concatenate(all_w))


def edge_quadrature(mesh, e: int, order: int) -> QuadRule:
    """Gauss-Legendre rule mapped onto edge ``e``."""
    n = order // 2 + 1
    x, w = roots_legendre(n)
    edge = mesh.edges[e]
    pts = edge.midpoint + np.outer(x, edge.tangent) * (edge.length / 2.0)
    return QuadRule(pts, w * edge.length / 2.0)


# ----------------------------------------------------------------------
# per-mesh cache
# ----------------------------------------------------------------------

class BasisCache:
    """Lazily built per-cell quadrature, basis-evaluation and Gram tables.

    Population is guarded by a lock so concurrent readers may share a cache;
    all stored arrays are treated as immutable once computed.
    """

    def __init__(self, mesh, order: int):
        self.mesh = mesh
        self.order = order
        self._lock = threading.RLock()
        self._store: dict[tuple, object] = {}

    def _get(self, key, builder):
        store = self._store
        if key in store:
            return store[key]
        with self._lock:
            if key not in store:
                store[key] = builder()
            return store[key]

    # quadrature ---------------------------------------------------------
    def face_quad(self, f: int) -> QuadRule:
        return self._get(("fq", f), lambda: face_quadrature(self.mesh, f, self.order))

    def edge_quad(self, e: int) -> QuadRule:
        return self._get(("eq", e), lambda: edge_quadrature(self.mesh, e, self.order))

    # evaluations at face quadrature points -------------------------------
    def face_scalar(self, f: int, degree: int) -> np.ndarray:
        face = self.mesh.faces[f]
        return self._get(("fs", f, degree), lambda: scalar_eval(
            self.face_quad(f).points, face.centroid, face.diameter, degree))

    def face_vector(self, f: int, kind: str, degree: int) -> np.ndarray:
        face = self.mesh.faces[f]
        return self._get(("fv", f, kind, degree), lambda: vector_eval(
            self.face_quad(f).points, face.centroid, face.diameter, kind, degree))

    def face_div(self, f: int, kind: str, degree: int) -> np.ndarray:
        face = self.mesh.faces[f]
        return self._get(("fd", f, kind, degree), lambda: vector_div_eval(
            self.face_quad(f).points, face.centroid, face.diameter, kind, degree))

    # evaluations at edge quadrature points --------------------------------
    def edge_scalar(self, e: int, degree: int) -> np.ndarray:
        edge = self.mesh.edges[e]
        return self._get(("es", e, degree), lambda: edge_scalar_eval(
            self.edge_quad(e).points, edge.midpoint, edge.tangent, edge.length, degree))

    def face_scalar_at_edge(self, f: int, degree: int, e: int) -> np.ndarray:
        face = self.mesh.faces[f]
        return self._get(("fse", f, degree, e), lambda: scalar_eval(
            self.edge_quad(e).points, face.centroid, face.diameter, degree))

    def face_vector_at_edge(self, f: int, kind: str, degree: int, e: int) -> np.ndarray:
        face = self.mesh.faces[f]
        return self._get(("fve", f, kind, degree, e), lambda: vector_eval(
            self.edge_quad(e).points, face.centroid, face.diameter, kind, degree))

    # Gram matrices -------------------------------------------------------
    def face_gram(self, f: int, kind: str, degree: int) -> np.ndarray:
        def build():
            w = self.face_quad(f).weights
            if kind == "P":
                v = self.face_scalar(f, degree)
                return (v * w[:, None]).T @ v
            v = self.face_vector(f, kind, degree)
            return np.einsum("q,qid,qjd->ij", w, v, v)

        return self._get(("fg", f, kind, degree), build)

    def face_chol(self, f: int, kind: str, degree: int):
        return self._get(("fc", f, kind, degree),
                         lambda: cho_factor(self.face_gram(f, kind, degree)))

    def face_mixed(self, f: int, kind_r: str, deg_r: int, kind_c: str,
                   deg_c: int) -> np.ndarray:
        """Cross Gram matrix (rows x cols) of two face families."""
        def build():
            w = self.face_quad(f).weights
            scal_r = kind_r == "P"
            scal_c = kind_c == "P"
            if scal_r != scal_c:
                raise ValueError("mixed Gram requires equal tensor rank")
            if scal_r:
                a = self.face_scalar(f, deg_r)
                b = self.face_scalar(f, deg_c)
                return (a * w[:, None]).T @ b
            a = self.face_vector(f, kind_r, deg_r)
            b = self.face_vector(f, kind_c, deg_c)
            return np.einsum("q,qid,qjd->ij", w, a, b)

        return self._get(("fm", f, kind_r, deg_r, kind_c, deg_c), build)

    def edge_gram(self, e: int, degree: int) -> np.ndarray:
        def build():
            w = self.edge_quad(e).weights
            v = self.edge_scalar(e, degree)
            return (v * w[:, None]).T @ v

        return self._get(("eg", e, degree), build)

    def edge_chol(self, e: int, degree: int):
        return self._get(("ec", e, degree), lambda: cho_factor(self.edge_gram(e, degree)))

    # projections ----------------------------------------------------------
    def face_projector(self, f: int, kind_to: str, deg_to: int, kind_from: str,
                       deg_from: int) -> np.ndarray:
        """Matrix of the L2 projection between coefficient spaces on a face."""
        def build():
            if space_dimension(kind_to, deg_to) == 0:
                return np.zeros((0, space_dimension(kind_from, deg_from)))
            mixed = self.face_mixed(f, kind_to, deg_to, kind_from, deg_from)
            return cho_solve(self.face_chol(f, kind_to, deg_to), mixed)

        return self._get(("fp", f, kind_to, deg_to, kind_from, deg_from), build)

    def project_face_values(self, f: int, kind: str, degree: int,
                            values: np.ndarray) -> np.ndarray:
        """L2-project values sampled at the face quadrature points."""
        if space_dimension(kind, degree) == 0:
            return np.zeros(0)
        w = self.face_quad(f).weights
        if kind == "P":
            rhs = (self.face_scalar(f, degree) * w[:, None]).T @ values
        else:
            rhs = np.einsum("q,qid,qd->i", w, self.face_vector(f, kind, degree), values)
        return cho_solve(self.face_chol(f, kind, degree), rhs)

    def project_edge_values(self, e: int, degree: int, values: np.ndarray) -> np.ndarray:
        if degree < 0:
            return np.zeros(0)
        w = self.edge_quad(e).weights
        rhs = (self.edge_scalar(e, degree) * w[:, None]).T @ values
        return cho_solve(self.edge_chol(e, degree), rhs)


def project(cache: BasisCache, tag: PolySpaceTag, entity: int, func) -> np.ndarray:
    """L2-orthogonal projection of a callable onto a tagged space.

    ``func`` maps an (n, 2) array of points to values: scalars of shape (n,)
    for scalar tags, vectors of shape (n, 2) for vector tags.
    """
    if tag.entity_dim == 1:
        pts = cache.edge_quad(entity).points
        return cache.project_edge_values(entity, tag.degree, np.asarray(func(pts)))
    pts = cache.face_quad(entity).points
    return cache.project_face_values(entity, tag.kind, tag.degree,
                                     np.asarray(func(pts)))
