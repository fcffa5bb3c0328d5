"""Discrete products, manufactured problem, quad-rot solver, benchmark, CLI."""

import subprocess
import sys

import numpy as np
import pytest

from polyddr.products import build_products, build_serendipity_products
from polyddr.quadrot import (CSV_HEADER, BenchConfig, QuadRotScheme,
                             bench_mesh, manufactured_problem, run_benchmark,
                             write_csv)
from polyddr.rotrot import RotRotComplex, SerendipityRotRot
from polyddr.sddr2d import SerendipityComplex


@pytest.fixture(scope="module")
def products_cartesian(ddr_of):
    rot = RotRotComplex(ddr_of("cartesian", 2, 1))
    return rot, build_products(rot)


class TestProducts:
    def test_symmetry_and_psd(self, products_cartesian):
        _, pr = products_cartesian
        for mat in (pr.v_mass, pr.sigma_mass, pr.w_mass, pr.rotrot_form):
            dense = mat.toarray()
            assert np.abs(dense - dense.T).max() < 1e-12
            eigs = np.linalg.eigvalsh(dense)
            assert eigs.min() > -1e-10 * max(eigs.max(), 1.0)

    def test_v_and_sigma_positive_definite(self, products_cartesian):
        _, pr = products_cartesian
        for mat in (pr.v_mass, pr.sigma_mass):
            eigs = np.linalg.eigvalsh(mat.toarray())
            assert eigs.min() > 1e-8

    def test_interpolated_constant_has_domain_norm(self, products_cartesian):
        rot, pr = products_cartesian
        one = rot.ddr.interpolate_grad(lambda p: np.ones(len(p)))
        assert one @ (pr.v_mass @ one) == pytest.approx(1.0, abs=1e-10)

    def test_zero_norm(self, products_cartesian):
        rot, pr = products_cartesian
        z = np.zeros(rot.sigma_dim)
        assert z @ (pr.sigma_mass @ z) == 0.0

    def test_rotrot_form_annihilates_constants(self, products_cartesian):
        rot, pr = products_cartesian
        const = rot.interpolate_sigma(
            lambda p: np.tile([1.0, -2.0], (len(p), 1)),
            lambda p: np.zeros(len(p)))
        assert abs(const @ (pr.rotrot_form @ const)) < 1e-11

    def test_norm_stable_under_refinement(self, ddr_of):
        def q(p):
            return np.sin(np.pi * p[:, 0]) * np.cos(2 * p[:, 1])

        vals = []
        for level in (4, 8):
            rot = RotRotComplex(ddr_of("cartesian", level, 1))
            pr = build_products(rot)
            iq = rot.ddr.interpolate_grad(q)
            vals.append(np.sqrt(iq @ (pr.v_mass @ iq)))
        assert abs(vals[1] / vals[0] - 1.0) < 0.02

    def test_serendipity_products_match_through_extension(self, ddr_of):
        ddr = ddr_of("cartesian", 2, 1)
        rot = RotRotComplex(ddr)
        std = build_products(rot)
        srot = SerendipityRotRot(rot, SerendipityComplex(ddr))
        ser = build_serendipity_products(srot, std)
        rng = np.random.default_rng(0)
        v = rng.standard_normal(srot.sigma_dim)
        ext = srot.extension_sigma @ v
        assert v @ (ser.sigma_mass @ v) == pytest.approx(
            ext @ (std.sigma_mass @ ext), rel=1e-12)


class TestManufactured:
    def test_divergence_free(self):
        prob = manufactured_problem()
        rng = np.random.default_rng(1)
        pts = rng.uniform(0.05, 0.95, size=(20, 2))
        eps = 1e-6
        dx = (prob.u(pts + [eps, 0]) - prob.u(pts - [eps, 0])) / (2 * eps)
        dy = (prob.u(pts + [0, eps]) - prob.u(pts - [0, eps])) / (2 * eps)
        div = dx[:, 0] + dy[:, 1]
        assert np.abs(div).max() < 1e-7

    def test_velocity_vanishes_on_boundary(self):
        prob = manufactured_problem()
        pts = np.array([[0.0, 0.3], [1.0, 0.77], [0.41, 0.0], [0.9, 1.0]])
        assert np.abs(prob.u(pts)).max() < 1e-14

    def test_pressure_zero_mean(self, ddr_of):
        prob = manufactured_problem()
        cache = ddr_of("cartesian", 4, 1).cache
        total = 0.0
        for f in range(cache.mesh.n_faces):
            q = cache.face_quad(f)
            total += q.weights @ prob.p(q.points)
        assert abs(total) < 1e-12

    def test_load_matches_finite_difference_oracle(self):
        # f = rotrot(rotrot u) + grad p recomputed by high-order finite
        # differences of the exact fields at an interior point
        prob = manufactured_problem()
        pt = np.array([[0.37, 0.52]])
        h = 2e-3

        def rot_of(fn):
            def rv(p):
                dy = (fn(p + [0, h]) - fn(p - [0, h])) / (2 * h)
                dx = (fn(p + [h, 0]) - fn(p - [h, 0])) / (2 * h)
                return dy[:, 0] - dx[:, 1]
            return rv

        def vrot_of(fn):
            def vr(p):
                dy = (fn(p + [0, h]) - fn(p - [0, h])) / (2 * h)
                dx = (fn(p + [h, 0]) - fn(p - [h, 0])) / (2 * h)
                return np.stack([-dy, dx], axis=-1)
            return vr

        rotrot_u = vrot_of(rot_of(prob.u))
        quadrot_u = vrot_of(rot_of(rotrot_u))

        def grad_p(p):
            dx = (prob.p(p + [h, 0]) - prob.p(p - [h, 0])) / (2 * h)
            dy = (prob.p(p + [0, h]) - prob.p(p - [0, h])) / (2 * h)
            return np.stack([dx, dy], axis=-1)

        oracle = quadrot_u(pt) + grad_p(pt)
        got = prob.f(pt)
        assert np.abs(got - oracle).max() < 1e-3 * max(np.abs(got).max(), 1.0)

    def test_rot_u_consistent(self):
        prob = manufactured_problem()
        pt = np.array([[0.3, 0.6]])
        h = 1e-5
        dy = (prob.u(pt + [0, h]) - prob.u(pt - [0, h])) / (2 * h)
        dx = (prob.u(pt + [h, 0]) - prob.u(pt - [h, 0])) / (2 * h)
        fd = dy[0, 0] - dx[0, 1]
        assert prob.rot_u(pt)[0] == pytest.approx(fd, abs=1e-8)


@pytest.fixture(scope="module")
def solved_level1():
    prob = manufactured_problem()
    out = {}
    for ser in (False, True):
        scheme = QuadRotScheme(bench_mesh("cartesian", 1), 1, serendipity=ser)
        sol = scheme.solve(prob)
        out[ser] = (scheme, sol)
    return prob, out


class TestSolver:
    def test_zero_data_gives_zero_solution(self):
        mesh = bench_mesh("cartesian", 1)
        scheme = QuadRotScheme(mesh, 1)
        zero = manufactured_problem()
        from polyddr.quadrot import QuadRotProblem

        prob = QuadRotProblem(
            lambda p: np.zeros((len(np.atleast_2d(p)), 2)),
            lambda p: np.zeros(len(np.atleast_2d(p))),
            lambda p: np.zeros(len(np.atleast_2d(p))),
            lambda p: np.zeros((len(np.atleast_2d(p)), 2)))
        sol = scheme.solve(prob)
        assert np.abs(sol.u).max() < 1e-12
        assert np.abs(sol.p).max() < 1e-12

    def test_solver_and_divergence_residuals(self, solved_level1):
        _, out = solved_level1
        for scheme, sol in out.values():
            assert sol.solver_residual < 1e-9
            assert sol.divergence_residual < 1e-9
            assert np.all(np.isfinite(sol.u)) and np.all(np.isfinite(sol.p))

    def test_exact_injected_solution_gives_zero_errors(self, solved_level1):
        prob, out = solved_level1
        scheme, sol = out[False]
        from polyddr.quadrot import QuadRotSolution

        fake = QuadRotSolution(scheme.interpolate_u(prob),
                               scheme.interpolate_p(prob),
                               sol.dim_lin_sys, 0.0, 0.0)
        row = scheme.errors(fake, prob)
        assert row.err_u_l2 == 0.0
        assert row.err_u_rotrot == 0.0
        assert row.err_p_l2 == 0.0
        assert row.err_p_grad == 0.0

    def test_serendipity_system_smaller(self, solved_level1):
        _, out = solved_level1
        assert out[True][1].dim_lin_sys < out[False][1].dim_lin_sys

    def test_saddle_block_inertia(self, solved_level1):
        # dense oracle: the elliptic block must be positive definite on the
        # kernel of the constraint block
        prob, out = solved_level1
        scheme, _ = out[False]
        iu = np.flatnonzero(~scheme.sigma_mask)
        ip = np.flatnonzero(~scheme.head_mask)
        a = scheme.products.rotrot_form.toarray()[np.ix_(iu, iu)]
        b = scheme.b_mat.toarray()[np.ix_(ip, iu)]
        from scipy.linalg import null_space

        z = null_space(b)
        eigs = np.linalg.eigvalsh(z.T @ a @ z)
        assert eigs.min() > 1e-12

    def test_singular_system_reported_with_smallest_singular_value(self):
        import scipy.sparse as sps

        scheme = QuadRotScheme(bench_mesh("cartesian", 1), 1)
        scheme.products.rotrot_form = sps.csr_array(
            scheme.products.rotrot_form.shape)
        with pytest.raises(RuntimeError, match="smallest singular value"):
            scheme.solve(manufactured_problem())

    def test_constraint_block_full_rank(self, solved_level1):
        prob, out = solved_level1
        scheme, _ = out[False]
        iu = np.flatnonzero(~scheme.sigma_mask)
        ip = np.flatnonzero(~scheme.head_mask)
        b = scheme.b_mat.toarray()[np.ix_(ip, iu)]
        from polyddr.complex_core import numeric_rank

        assert numeric_rank(b) == len(ip)


class TestBenchmark:
    def test_config_validation(self):
        with pytest.raises(ValueError, match="nonempty"):
            BenchConfig("cartesian", (), 1)
        with pytest.raises(ValueError, match="k >= 1"):
            BenchConfig("cartesian", (1,), 0)
        with pytest.raises(ValueError, match="not well posed"):
            BenchConfig("annulus", (1,), 1)

    def test_csv_schema_and_determinism(self, tmp_path):
        config = BenchConfig("cartesian", (1,), 1, "both")
        rows = run_benchmark(config)
        path_a, path_b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(rows, path_a)
        write_csv(run_benchmark(config), path_b)
        text = path_a.read_text(encoding="utf-8")
        assert text.splitlines()[0] == CSV_HEADER
        assert len(text.splitlines()) == 3  # header + standard + serendipity
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_rows_sorted_by_level(self, tmp_path):
        config = BenchConfig("cartesian", (2, 1), 1, "standard")
        rows = run_benchmark(config)
        assert [r.level for r in rows] == [1, 2]
        assert rows[0].dim_lin_sys < rows[1].dim_lin_sys


class TestCli:
    def run(self, *args):
        return subprocess.run([sys.executable, "-m", "polyddr.cli", *args],
                              capture_output=True, text=True)

    def test_verify_all_passes(self):
        res = self.run("verify", "--complex", "all", "--family", "cartesian",
                       "--level", "2", "--degree", "1")
        assert res.returncode == 0, res.stdout + res.stderr
        assert "verify passed" in res.stdout
        for line in res.stdout.splitlines():
            if line.startswith(("kernel_identity", "cochain", "image_defect")):
                assert line.split()[-1] == "pass"

    def test_dofs_reports_savings(self):
        res = self.run("dofs", "--complex", "sddr", "--family", "hexagonal",
                       "--levels", "1..2", "--degree", "2")
        assert res.returncode == 0
        lines = res.stdout.strip().splitlines()
        assert "saved-vs-ddr" in lines[0]
        saved = [int(line.split()[-1]) for line in lines[1:]]
        assert all(s > 0 for s in saved)

    def test_bench_writes_csv(self, tmp_path):
        out = tmp_path / "bench.csv"
        res = self.run("bench", "--family", "cartesian", "--levels", "1..1",
                       "--degree", "1", "--variant", "standard", "--out",
                       str(out))
        assert res.returncode == 0
        assert out.read_text().splitlines()[0] == CSV_HEADER

    def test_verify_mesh_file_input(self, tmp_path):
        res = self.run("verify", "--complex", "ddr", "--mesh",
                       "tests/fixtures/hex_level1.txt", "--degree", "1")
        assert res.returncode == 0
