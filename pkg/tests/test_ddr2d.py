"""Local reconstructions, global assembly, complex property, cohomology."""

import numpy as np
import pytest

from polyddr import polybasis as pb
from polyddr.complex_core import numeric_rank
from polyddr.ddr2d import (DdrComplex, DegreeVectors, edge_gradient_matrix,
                           edge_potential_matrix)
from polyddr.mesh2d import build_mesh

rng = np.random.default_rng(42)


def random_scalar(face, degree, seed):
    gen = np.random.default_rng(seed)
    coeffs = gen.standard_normal(pb.n_poly_2d(degree))

    def q(pts):
        return pb.scalar_eval(pts, face.centroid, face.diameter, degree) @ coeffs

    def grad(pts):
        table = pb.scalar_grad_eval(pts, face.centroid, face.diameter, degree)
        return np.einsum("qjd,j->qd", table, coeffs)

    return q, grad


def random_vector(face, degree, seed):
    gen = np.random.default_rng(seed)
    nb = pb.n_poly_2d(degree)
    cx, cy = gen.standard_normal(nb), gen.standard_normal(nb)

    def v(pts):
        table = pb.scalar_eval(pts, face.centroid, face.diameter, degree)
        return np.stack([table @ cx, table @ cy], axis=-1)

    def rot(pts):
        table = pb.scalar_grad_eval(pts, face.centroid, face.diameter, degree)
        return np.einsum("qj,j->q", table[:, :, 1], cx) - np.einsum(
            "qj,j->q", table[:, :, 0], cy)

    return v, rot


class TestEdgeOperators:
    def test_constant_reproduced(self, unit_square_mesh):
        ddr = DdrComplex(unit_square_mesh, 1)
        pot = edge_potential_matrix(ddr.cache, 0, 1)
        gamma = pot @ np.array([1.0, 1.0, 1.0])  # q_v0 = q_v1 = moment = 1
        assert np.allclose(gamma, [1.0, 0.0, 0.0], atol=1e-13)
        grad = edge_gradient_matrix(ddr.cache, 0, 1) @ np.array([1.0, 1.0, 1.0])
        assert np.allclose(grad, 0.0, atol=1e-13)

    def test_linear_interpolation_oracle(self, unit_square_mesh):
        # edge (0,0)-(1,0): endpoints 0 and 1, moment of x equals 1/2;
        # direct-solve oracle gives gamma(s) = s in physical coordinates
        ddr = DdrComplex(unit_square_mesh, 1)
        pot = edge_potential_matrix(ddr.cache, 0, 1)
        gamma = pot @ np.array([0.0, 1.0, 0.5])
        pts = ddr.cache.edge_quad(0).points
        vals = ddr.cache.edge_scalar(0, 2) @ gamma
        assert np.allclose(vals, pts[:, 0], atol=1e-13)
        grad = edge_gradient_matrix(ddr.cache, 0, 1) @ np.array([0.0, 1.0, 0.5])
        assert np.allclose(ddr.cache.edge_scalar(0, 1) @ grad, 1.0, atol=1e-13)

    def test_quadratic_gradient(self, unit_square_mesh):
        # q(s) = s^2 on the unit edge interpolated at k=1: gradient is 2s
        ddr = DdrComplex(unit_square_mesh, 1)
        data = np.array([0.0, 1.0, 1.0 / 3.0])  # endpoint values and mean
        grad = edge_gradient_matrix(ddr.cache, 0, 1) @ data
        pts = ddr.cache.edge_quad(0).points
        vals = ddr.cache.edge_scalar(0, 1) @ grad
        assert np.allclose(vals, 2 * pts[:, 0], atol=1e-12)

    def test_edge_potential_uniqueness_on_interpolants(self, unit_square_mesh):
        ddr = DdrComplex(unit_square_mesh, 2)
        k = 2
        pot = edge_potential_matrix(ddr.cache, 0, k)
        gen = np.random.default_rng(0)
        coeffs = gen.standard_normal(k + 2)
        vals = ddr.cache.edge_scalar(0, k + 1) @ coeffs
        mesh = unit_square_mesh
        ends = pb.edge_scalar_eval(np.array([mesh.vertices[0], mesh.vertices[1]]),
                                   mesh.edges[0].midpoint, mesh.edges[0].tangent,
                                   mesh.edges[0].length, k + 1) @ coeffs
        moments = ddr.cache.project_edge_values(0, k - 1, vals)
        data = np.concatenate([ends, moments])
        assert np.allclose(pot @ data, coeffs, atol=1e-12)


@pytest.mark.parametrize("cell", ["unit_square_mesh", "triangle_mesh",
                                  "hexagon_mesh"])
@pytest.mark.parametrize("k", [1, 2, 3])
class TestFaceReconstructions:
    def test_gradient_consistency(self, cell, k, request):
        mesh = request.getfixturevalue(cell)
        ddr = DdrComplex(mesh, k)
        ops = ddr.local(0)
        q, grad = random_scalar(mesh.faces[0], k + 1, seed=k)
        lidx = ddr.xgrad.local_indices(0)
        data = ddr.interpolate_grad(q)[lidx]
        pts = ddr.cache.face_quad(0).points
        table = pb.vector_eval(pts, mesh.faces[0].centroid,
                               mesh.faces[0].diameter, "Pvec", k)
        vals = np.einsum("qjd,j->qd", table, ops.grad_mat @ data)
        assert np.abs(vals - grad(pts)).max() < 1e-11

    def test_potential_consistency(self, cell, k, request):
        mesh = request.getfixturevalue(cell)
        ddr = DdrComplex(mesh, k)
        ops = ddr.local(0)
        q, _ = random_scalar(mesh.faces[0], k + 1, seed=10 + k)
        data = ddr.interpolate_grad(q)[ddr.xgrad.local_indices(0)]
        pts = ddr.cache.face_quad(0).points
        assert np.abs(ops.eval_potential(pts) @ data - q(pts)).max() < 1e-11

    def test_rotor_consistency(self, cell, k, request):
        mesh = request.getfixturevalue(cell)
        ddr = DdrComplex(mesh, k)
        ops = ddr.local(0)
        v, rot = random_vector(mesh.faces[0], k, seed=20 + k)
        data = ddr.interpolate_rot(v)[ddr.xrot.local_indices(0)]
        pts = ddr.cache.face_quad(0).points
        table = pb.scalar_eval(pts, mesh.faces[0].centroid,
                               mesh.faces[0].diameter, k)
        assert np.abs(table @ (ops.rotor_mat @ data) - rot(pts)).max() < 1e-11

    def test_tangential_consistency(self, cell, k, request):
        mesh = request.getfixturevalue(cell)
        ddr = DdrComplex(mesh, k)
        ops = ddr.local(0)
        v, _ = random_vector(mesh.faces[0], k, seed=30 + k)
        data = ddr.interpolate_rot(v)[ddr.xrot.local_indices(0)]
        pts = ddr.cache.face_quad(0).points
        vals = np.einsum("qld,l->qd", ops.eval_tangential(pts), data)
        assert np.abs(vals - v(pts)).max() < 1e-11


def test_gradient_of_constant_is_zero(unit_square_mesh):
    ddr = DdrComplex(unit_square_mesh, 2)
    data = ddr.interpolate_grad(lambda p: np.full(len(p), 3.7))
    assert np.abs(ddr.grad_matrix @ data).max() < 1e-13


def test_face_gradient_of_coordinate(unit_square_mesh):
    ddr = DdrComplex(unit_square_mesh, 1)
    data = ddr.interpolate_grad(lambda p: p[:, 0])
    ops = ddr.local(0)
    coeff = ops.grad_mat @ data[ddr.xgrad.local_indices(0)]
    pts = ddr.cache.face_quad(0).points
    face = unit_square_mesh.faces[0]
    vals = np.einsum("qjd,j->qd",
                     pb.vector_eval(pts, face.centroid, face.diameter, "Pvec", 1),
                     coeff)
    assert np.allclose(vals, [1.0, 0.0], atol=1e-13)


def test_rotor_of_rigid_rotation(unit_square_mesh):
    # v = perp(x - c) has constant scalar rotor of value -2 in the
    # div(perp v) convention used throughout
    ddr = DdrComplex(unit_square_mesh, 1)
    c = unit_square_mesh.faces[0].centroid

    def v(pts):
        d = pts - c
        return np.stack([-d[:, 1], d[:, 0]], axis=-1)

    data = ddr.interpolate_rot(v)
    coeff = ddr.local(0).rotor_mat @ data[ddr.xrot.local_indices(0)]
    pts = ddr.cache.face_quad(0).points
    vals = pb.scalar_eval(pts, c, unit_square_mesh.faces[0].diameter, 1) @ coeff
    assert np.allclose(vals, -2.0, atol=1e-12)


def test_potential_locality(unit_square_mesh):
    mesh = unit_square_mesh
    pts2 = [(0, 0), (1, 0), (1, 1), (0, 1), (2, 0), (3, 0), (3, 1), (2, 1)]
    far = build_mesh(pts2, [[0, 1, 2, 3], [4, 5, 6, 7]])
    pts3 = [(0, 0), (1, 0), (1, 1), (0, 1), (2, 0), (3, 0), (3, 1.5), (2, 1)]
    moved = build_mesh(pts3, [[0, 1, 2, 3], [4, 5, 6, 7]])
    mats = []
    for m in (far, moved):
        ddr = DdrComplex(m, 2)
        mats.append(ddr.local(0).grad_mat)
    assert mats[0].tobytes() == mats[1].tobytes()


@pytest.mark.parametrize("family,level", [("cartesian", 2), ("triangular", 2),
                                          ("hexagonal", 1), ("annulus", 3)])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_complex_property(family, level, k, ddr_of):
    ddr = ddr_of(family, level, k)
    fc = ddr.finite_complex()
    res = fc.composition_residuals()
    assert max(res) <= 1e-10


def test_layout_dimensions(ddr_of):
    ddr = ddr_of("cartesian", 1, 1)
    # single square at k=1: middle space has 2 + 1 face and 4 * 2 edge dofs
    assert ddr.xrot.dim == 11
    assert ddr.xgrad.dim == 9
    assert ddr.grad_matrix.shape == (11, 9)


def test_rot_of_gradient_field_vanishes(ddr_of):
    ddr = ddr_of("hexagonal", 2, 2)
    q = ddr.interpolate_grad(lambda p: np.sin(p[:, 0]) * p[:, 1])
    gq = ddr.grad_matrix @ q
    assert np.abs(ddr.rot_matrix @ gq).max() < 1e-11 * max(np.abs(gq).max(), 1.0)


def test_rot_surjective_on_disk(ddr_of):
    ddr = ddr_of("cartesian", 2, 1)
    assert numeric_rank(ddr.rot_matrix.toarray()) == ddr.xl.dim


@pytest.mark.parametrize("family,level,expected", [
    ("cartesian", 2, (1, 0, 0)),
    ("triangular", 2, (1, 0, 0)),
    ("hexagonal", 1, (1, 0, 0)),
    ("annulus", 3, (1, 1, 0)),
])
@pytest.mark.parametrize("k", [1, 2])
def test_cohomology(family, level, expected, k, ddr_of):
    assert ddr_of(family, level, k).finite_complex().cohomology().betti == expected


def test_generic_degree_vectors_guard(unit_square_mesh):
    degrees = DegreeVectors.uniform(unit_square_mesh, 2, 0, 2)
    with pytest.raises(ValueError, match="head face degrees"):
        DdrComplex(unit_square_mesh, 2, degrees=degrees)


def test_interpolant_potential_identity(ddr_of):
    # the face potential of an interpolated polynomial matches it per face
    ddr = ddr_of("triangular", 2, 2)
    mesh = ddr.mesh

    def q(pts):
        return pts[:, 0] ** 2 - pts[:, 0] * pts[:, 1]

    data = ddr.interpolate_grad(q)
    for f in range(mesh.n_faces):
        pts = ddr.cache.face_quad(f).points
        vals = ddr.local(f).eval_potential(pts) @ data[ddr.xgrad.local_indices(f)]
        assert np.abs(vals - q(pts)).max() < 1e-11
