"""Edge selection, serendipity reconstructions, extension/reduction maps."""

import numpy as np
import pytest

from polyddr import polybasis as pb
from polyddr.complex_core import check_assumption_A
from polyddr.ddr2d import DdrComplex
from polyddr.sddr2d import SerendipityComplex, SerendipityError, select_edges
from polyddr.mesh2d import build_mesh

from test_ddr2d import random_scalar, random_vector


class TestSelection:
    def test_square_k1(self, unit_square_mesh):
        choice = select_edges(unit_square_mesh, 0, 1)
        assert choice.eta == 3
        assert choice.ell == -1

    def test_hexagon_k3(self, hexagon_mesh):
        choice = select_edges(hexagon_mesh, 0, 3)
        assert choice.eta == 5
        assert choice.ell == -1

    @pytest.mark.parametrize("k", [2, 3])
    def test_triangle(self, triangle_mesh, k):
        choice = select_edges(triangle_mesh, 0, k)
        assert choice.eta == 3
        assert choice.ell == k - 2

    def test_collinear_split_edge_not_double_counted(self):
        # square with one side split into two collinear edges: only one of
        # them may count toward the selection
        pts = [(0, 0), (0.5, 0), (1, 0), (1, 1), (0, 1)]
        mesh = build_mesh(pts, [[0, 1, 2, 3, 4]])
        choice = select_edges(mesh, 0, 3)
        assert choice.eta == 4  # five edges but only four distinct lines

    def test_selection_deterministic(self, hexagon_mesh):
        a = select_edges(hexagon_mesh, 0, 2)
        b = select_edges(hexagon_mesh, 0, 2)
        assert a == b


@pytest.mark.parametrize("cell", ["unit_square_mesh", "triangle_mesh",
                                  "hexagon_mesh"])
@pytest.mark.parametrize("k", [1, 2, 3])
class TestReconstructions:
    def test_serendipity_gradient(self, cell, k, request):
        mesh = request.getfixturevalue(cell)
        sddr = SerendipityComplex(DdrComplex(mesh, k))
        ops = sddr.local(0)
        q, grad = random_scalar(mesh.faces[0], k + 1, seed=100 + k)
        data = sddr.interpolate_grad(q)[sddr.sxgrad.local_indices(0)]
        pts = sddr.cache.face_quad(0).points
        face = mesh.faces[0]
        table = pb.vector_eval(pts, face.centroid, face.diameter, "Pvec", k)
        vals = np.einsum("qjd,j->qd", table, ops.sgrad_mat @ data)
        rel = np.abs(vals - grad(pts)).max() / max(np.abs(grad(pts)).max(), 1)
        assert rel < 1e-10

    def test_serendipity_rotor_field(self, cell, k, request):
        mesh = request.getfixturevalue(cell)
        sddr = SerendipityComplex(DdrComplex(mesh, k))
        ops = sddr.local(0)
        v, _ = random_vector(mesh.faces[0], k, seed=200 + k)
        data = sddr.interpolate_rot(v)[sddr.sxrot.local_indices(0)]
        pts = sddr.cache.face_quad(0).points
        face = mesh.faces[0]
        table = pb.vector_eval(pts, face.centroid, face.diameter, "Pvec", k)
        vals = np.einsum("qjd,j->qd", table, ops.srot_mat @ data)
        rel = np.abs(vals - v(pts)).max() / max(np.abs(v(pts)).max(), 1)
        assert rel < 1e-10

    def test_face_extension_is_projection_of_interpolant(self, cell, k, request):
        mesh = request.getfixturevalue(cell)
        sddr = SerendipityComplex(DdrComplex(mesh, k))
        ops = sddr.local(0)
        q, _ = random_scalar(mesh.faces[0], k + 1, seed=300 + k)
        data = sddr.interpolate_grad(q)[sddr.sxgrad.local_indices(0)]
        got = ops.epoly_mat @ data
        pts = sddr.cache.face_quad(0).points
        expected = sddr.cache.project_face_values(0, "P", k - 1, q(pts))
        assert np.allclose(got, expected, atol=1e-10)


def test_constant_data_maps_to_zero_gradient(unit_square_mesh):
    sddr = SerendipityComplex(DdrComplex(unit_square_mesh, 2))
    data = sddr.interpolate_grad(lambda p: np.full(len(p), 2.5))
    local = data[sddr.sxgrad.local_indices(0)]
    assert np.abs(sddr.local(0).sgrad_mat @ local).max() < 1e-12
    got = sddr.local(0).epoly_mat @ local
    expected = np.zeros(pb.n_poly_2d(1))
    expected[0] = 2.5
    assert np.allclose(got, expected, atol=1e-12)


def test_linearity_zero_in_zero_out(hexagon_mesh):
    sddr = SerendipityComplex(DdrComplex(hexagon_mesh, 2))
    assert np.abs(sddr.ext_grad @ np.zeros(sddr.sxgrad.dim)).max() == 0.0
    assert np.abs(sddr.ext_rot @ np.zeros(sddr.sxrot.dim)).max() == 0.0


def test_extension_of_interpolant_is_full_interpolant(ddr_of):
    # extending the reduced interpolant of a polynomial recovers the full one
    ddr = ddr_of("hexagonal", 1, 2)
    sddr = SerendipityComplex(ddr)

    def q(pts):
        return pts[:, 0] ** 2 + 0.3 * pts[:, 0] * pts[:, 1] - pts[:, 1]

    full = ddr.interpolate_grad(q)
    reduced = sddr.interpolate_grad(q)
    assert np.allclose(sddr.ext_grad @ reduced, full, atol=1e-11)

    def v(pts):
        return np.stack([pts[:, 1] ** 2, pts[:, 0] * pts[:, 1]], axis=-1)

    full_v = ddr.interpolate_rot(v)
    red_v = sddr.interpolate_rot(v)
    assert np.allclose(sddr.ext_rot @ red_v, full_v, atol=1e-11)


def test_reduction_after_extension_is_identity(ddr_of):
    ddr = ddr_of("cartesian", 2, 2)
    sddr = SerendipityComplex(ddr)
    eye_g = (sddr.red_grad @ sddr.ext_grad).toarray()
    eye_r = (sddr.red_rot @ sddr.ext_rot).toarray()
    assert np.allclose(eye_g, np.eye(sddr.sxgrad.dim), atol=1e-12)
    assert np.allclose(eye_r, np.eye(sddr.sxrot.dim), atol=1e-12)


def test_reduction_matches_dense_projection_oracle(ddr_of):
    ddr = ddr_of("cartesian", 1, 2)
    sddr = SerendipityComplex(ddr)
    rng = np.random.default_rng(8)
    data = rng.standard_normal(ddr.xgrad.dim)
    reduced = sddr.red_grad @ data
    # oracle: per-face dense weighted least squares onto the lower degree
    for f in range(ddr.mesh.n_faces):
        if not sddr.sxgrad.face_dims[f]:
            continue
        q = ddr.cache.face_quad(f)
        hi = ddr.cache.face_scalar(f, int(ddr.degrees.n[f]))
        lo = ddr.cache.face_scalar(f, int(sddr.ell[f]))
        vals = hi @ data[ddr.xgrad.face_slice(f)]
        sw = np.sqrt(q.weights)
        oracle, *_ = np.linalg.lstsq(lo * sw[:, None], vals * sw, rcond=None)
        assert np.allclose(reduced[sddr.sxgrad.face_slice(f)], oracle, atol=1e-10)


def test_degenerate_reduction_levels_identity(triangle_mesh):
    # on a triangle at k = 3 the reduced face degree is k - 2, strictly
    # smaller, so dimensions drop by the difference of polynomial spaces
    sddr = SerendipityComplex(DdrComplex(triangle_mesh, 3))
    assert sddr.sxgrad.dim == DdrComplex(triangle_mesh, 3).xgrad.dim - (
        pb.n_poly_2d(2) - pb.n_poly_2d(1))


@pytest.mark.parametrize("family,level", [("cartesian", 2), ("triangular", 2),
                                          ("hexagonal", 1), ("annulus", 3)])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_assumption_suite(family, level, k, ddr_of):
    ddr = ddr_of(family, level, k)
    sddr = SerendipityComplex(ddr)
    rep = check_assumption_A(ddr.finite_complex(), sddr.finite_complex(),
                             sddr.morphisms(), tol=1e-9)
    assert rep.ok, "\n".join(r.line() for r in rep.failures())


@pytest.mark.parametrize("family,level,expected", [
    ("cartesian", 2, (1, 0, 0)), ("annulus", 3, (1, 1, 0))])
def test_serendipity_cohomology(family, level, expected, ddr_of):
    sddr = SerendipityComplex(ddr_of(family, level, 1))
    assert sddr.finite_complex().cohomology().betti == expected


def test_dof_monotonicity(ddr_of):
    for family, level in [("cartesian", 2), ("triangular", 2), ("hexagonal", 1)]:
        for k in (1, 2, 3):
            ddr = ddr_of(family, level, k)
            sddr = SerendipityComplex(ddr)
            assert sddr.sxgrad.dim <= ddr.xgrad.dim
            assert sddr.sxrot.dim <= ddr.xrot.dim
            if family == "hexagonal":
                assert sddr.sxgrad.dim < ddr.xgrad.dim
                assert sddr.sxrot.dim < ddr.xrot.dim


def test_triangle_k1_saves_one_head_dof_per_face(ddr_of):
    ddr = ddr_of("triangular", 2, 1)
    sddr = SerendipityComplex(ddr)
    assert ddr.xgrad.dim - sddr.sxgrad.dim == ddr.mesh.n_faces


def test_pathological_cell_rejected():
    # fewer than two admissible one-sided edges: a star-shaped cell whose
    # supporting lines all cut the polygon
    pts = [(0, 0), (2, 1), (4, 0), (3, 2), (4, 4), (2, 3), (0, 4), (1, 2)]
    mesh = build_mesh(pts, [[0, 1, 2, 3, 4, 5, 6, 7]])
    with pytest.raises(SerendipityError, match="fewer than 2"):
        select_edges(mesh, 0, 1)
