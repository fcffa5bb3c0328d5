"""Quad-rot model problem: manufactured solution, assembly, solve, benchmark.

The continuous problem on the unit square reads: find a vector field ``u``
and a scalar ``p`` with

    rotrot(rotrot(u)) + grad p = f,   div u = 0,

where ``rotrot`` is the rotated gradient of the scalar rotor; ``u`` and
``rot u`` carry Dirichlet data.  The manufactured solution is

    u = perp(grad phi),  phi = sin^2(pi x) sin^2(pi y),
    p = cos(pi x) cos(pi y),

so ``u`` is divergence free and vanishes on the boundary, and the load is
produced symbolically.  The discrete scheme couples the rot-rot bilinear
form with the divergence constraint expressed through the middle-space
product; boundary blocks of both unknowns are eliminated against
interpolated exact data, which pins the pressure constant.

The benchmark harness reruns the solver over a ladder of meshes (the level
parameter ``l`` maps to resolution ``2**l`` so the meshsize halves per
level) and emits rows with the linear-system dimension and four relative
error measures in a fixed CSV schema.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import spsolve

from polyddr.ddr2d import DdrComplex
from polyddr.mesh2d import MeshFamilySpec, generate_family
from polyddr.products import build_products, build_serendipity_products
from polyddr.rotrot import RotRotComplex, SerendipityRotRot
from polyddr.sddr2d import SerendipityComplex

__all__ = [
    "QuadRotProblem",
    "manufactured_problem",
    "QuadRotScheme",
    "QuadRotSolution",
    "ResultRow",
    "BenchConfig",
    "run_benchmark",
    "write_csv",
    "CSV_HEADER",
]

CSV_HEADER = "DimLinSys,h,ErrUL2,ErrURotRot,ErrPL2,ErrPGrad"

BENCH_FAMILIES = ("cartesian", "triangular", "hexagonal")


@dataclass(frozen=True)
class QuadRotProblem:
    """Exact fields of the manufactured quad-rot problem (vectorized callables)."""

    u: callable          # (n, 2) -> (n, 2)
    rot_u: callable      # (n, 2) -> (n,)
    p: callable          # (n, 2) -> (n,)
    f: callable          # (n, 2) -> (n, 2)


@lru_cache(maxsize=1)
def manufactured_problem() -> QuadRotProblem:
    """Build the exact solution and load symbolically, then lambdify."""
    import sympy as sp

    x, y = sp.symbols("x y")
    # the stream function is scaled so the fourth-order part of the load and
    # the pressure gradient have comparable size; both solution fields then
    # see balanced consistency errors (all reported errors are relative)
    phi = sp.sin(sp.pi * x) ** 2 * sp.sin(sp.pi * y) ** 2 / (2 * sp.pi) ** 4
    p_exact = sp.cos(sp.pi * x) * sp.cos(sp.pi * y)

    def vrot(s):
        return (-sp.diff(s, y), sp.diff(s, x))

    def rot(v):
        return sp.diff(v[0], y) - sp.diff(v[1], x)

    u = vrot(phi)
    rot_u = rot(u)
    lap2 = sp.diff(phi, x, 4) + 2 * sp.diff(phi, x, 2, y, 2) + sp.diff(phi, y, 4)
    quadrot_u = vrot(lap2)
    f = (sp.simplify(quadrot_u[0] + sp.diff(p_exact, x)),
         sp.simplify(quadrot_u[1] + sp.diff(p_exact, y)))

    fu = [sp.lambdify((x, y), c, "numpy") for c in u]
    frot = sp.lambdify((x, y), sp.simplify(rot_u), "numpy")
    fp = sp.lambdify((x, y), p_exact, "numpy")
    ff = [sp.lambdify((x, y), c, "numpy") for c in f]

    def eval_u(pts):
        pts = np.atleast_2d(pts)
        return np.stack([fu[0](pts[:, 0], pts[:, 1]),
                         fu[1](pts[:, 0], pts[:, 1])], axis=-1)

    def eval_rot(pts):
        pts = np.atleast_2d(pts)
        return np.broadcast_to(frot(pts[:, 0], pts[:, 1]), (len(pts),)).copy()

    def eval_p(pts):
        pts = np.atleast_2d(pts)
        return np.broadcast_to(fp(pts[:, 0], pts[:, 1]), (len(pts),)).copy()

    def eval_f(pts):
        pts = np.atleast_2d(pts)
        return np.stack([ff[0](pts[:, 0], pts[:, 1]),
                         ff[1](pts[:, 0], pts[:, 1])], axis=-1)

    return QuadRotProblem(eval_u, eval_rot, eval_p, eval_f)


def _smallest_singular_value(mat) -> float:
    if mat.shape[0] <= 600:
        return float(np.linalg.svd(mat.toarray(), compute_uv=False)[-1])
    from scipy.sparse.linalg import svds

    try:
        return float(svds(mat.tocsc().astype(float), k=1, which="SM",
                          return_singular_vectors=False)[0])
    except Exception:
        return float("nan")


@dataclass
class QuadRotSolution:
    u: np.ndarray
    p: np.ndarray
    dim_lin_sys: int
    solver_residual: float
    divergence_residual: float


@dataclass(frozen=True)
class ResultRow:
    level: int
    h: float
    dim_lin_sys: int
    err_u_l2: float
    err_u_rotrot: float
    err_p_l2: float
    err_p_grad: float

    def csv_line(self) -> str:
        return ",".join([str(self.dim_lin_sys), f"{self.h:.16e}",
                         f"{self.err_u_l2:.16e}", f"{self.err_u_rotrot:.16e}",
                         f"{self.err_p_l2:.16e}", f"{self.err_p_grad:.16e}"])


class QuadRotScheme:
    """Discrete quad-rot scheme on one mesh, standard or serendipity spaces.

    A prebuilt de Rham complex may be passed to share local-operator caches
    between the two variants on the same mesh.
    """

    def __init__(self, mesh, k: int, serendipity: bool = False,
                 ddr: DdrComplex | None = None):
        if k < 1:
            raise ValueError("the quad-rot scheme needs k >= 1")
        self.mesh = mesh
        self.k = k
        self.serendipity = serendipity
        self.ddr = ddr if ddr is not None else DdrComplex(mesh, k)
        self.rot = RotRotComplex(self.ddr)
        std_products = build_products(self.rot)
        if serendipity:
            self.sddr = SerendipityComplex(self.ddr)
            self.srot = SerendipityRotRot(self.rot, self.sddr)
            self.products = build_serendipity_products(self.srot, std_products)
            self.grad_op = self.srot.grad_matrix
            self.sigma_dim = self.srot.sigma_dim
            self.head = self.srot.head
            self.sigma_mask = self.srot.sigma_boundary_mask()
            self._ext_sigma = self.srot.extension_sigma
        else:
            self.sddr = None
            self.srot = None
            self.products = std_products
            self.grad_op = self.rot.grad_matrix
            self.sigma_dim = self.rot.sigma_dim
            self.head = self.rot.head
            self.sigma_mask = self.rot.sigma_boundary_mask()
            self._ext_sigma = None
        self.head_mask = self.head.boundary_mask()
        self.b_mat = (self.products.sigma_mass @ self.grad_op).T.tocsr()
        self._interp_cache: dict[tuple, np.ndarray] = {}

    # -- interpolation ------------------------------------------------------
    def interpolate_u(self, problem: QuadRotProblem) -> np.ndarray:
        key = ("u", problem)
        if key not in self._interp_cache:
            src = self.srot if self.serendipity else self.rot
            self._interp_cache[key] = src.interpolate_sigma(problem.u,
                                                            problem.rot_u)
        return self._interp_cache[key]

    def interpolate_p(self, problem: QuadRotProblem) -> np.ndarray:
        key = ("p", problem)
        if key not in self._interp_cache:
            src = self.sddr if self.serendipity else self.ddr
            self._interp_cache[key] = src.interpolate_grad(problem.p)
        return self._interp_cache[key]

    # -- load vector ----------------------------------------------------------
    def load_vector(self, f_fn) -> np.ndarray:
        """Pair the load with the tangential potential of the middle space."""
        ddr, cache = self.ddr, self.ddr.cache
        out = np.zeros(self.rot.sigma_dim)
        for f in range(self.mesh.n_faces):
            quad = cache.face_quad(f)
            fvals = np.asarray(f_fn(quad.points))
            pvec = cache.face_vector(f, "Pvec", self.k)
            rhs = np.einsum("q,qjd,qd->j", quad.weights, pvec, fvals)
            local = ddr.local(f).tangential_mat.T @ rhs
            idx = ddr.xrot.local_indices(f)
            out[idx] += local
        if self.serendipity:
            return np.asarray(self._ext_sigma.T @ out)
        return out

    # -- assembly and solve ------------------------------------------------------
    def solve(self, problem: QuadRotProblem) -> QuadRotSolution:
        a_mat = self.products.rotrot_form
        b_mat = self.b_mat
        load = self.load_vector(problem.f)

        u_full = self.interpolate_u(problem)
        p_full = self.interpolate_p(problem)
        iu = np.flatnonzero(~self.sigma_mask)
        bu = np.flatnonzero(self.sigma_mask)
        ip = np.flatnonzero(~self.head_mask)
        bp = np.flatnonzero(self.head_mask)

        a_mat = a_mat.tocsr()
        b_mat = b_mat.tocsr()
        bt = b_mat.T.tocsr()
        a_ii = a_mat[iu][:, iu]
        a_ib = a_mat[iu][:, bu]
        b_ii = b_mat[ip][:, iu]
        b_ib = b_mat[ip][:, bu]
        bt_ii = bt[iu][:, ip]
        bt_ib = bt[iu][:, bp]

        rhs_u = load[iu] - a_ib @ u_full[bu] - bt_ib @ p_full[bp]
        rhs_p = -(b_ib @ u_full[bu])

        k_mat = sps.bmat([[a_ii, bt_ii], [b_ii, None]], format="csc")
        rhs = np.concatenate([rhs_u, rhs_p])
        try:
            sol = spsolve(k_mat, rhs)
            resid = np.linalg.norm(k_mat @ sol - rhs) / max(np.linalg.norm(rhs),
                                                            1e-300)
            broken = not np.all(np.isfinite(sol)) or resid > 1e-6
        except RuntimeError:
            broken = True
            resid = float("inf")
        if broken:
            smin = _smallest_singular_value(k_mat)
            raise RuntimeError(
                f"singular reduced system (stabilization bug?): relative "
                f"residual {resid:.2e}, smallest singular value {smin:.3e}")

        u_h = u_full.copy()
        u_h[iu] = sol[:len(iu)]
        p_h = p_full.copy()
        p_h[ip] = sol[len(iu):]

        div_res = np.linalg.norm(b_ii @ u_h[iu] + b_ib @ u_h[bu])
        div_scale = max(float(np.linalg.norm(np.abs(b_mat) @ np.abs(u_full))), 1e-12)
        return QuadRotSolution(u_h, p_h, k_mat.shape[0], float(resid),
                               float(div_res / div_scale))

    # -- error measures ------------------------------------------------------------
    def errors(self, sol: QuadRotSolution, problem: QuadRotProblem) -> ResultRow:
        i_u = self.interpolate_u(problem)
        i_p = self.interpolate_p(problem)
        e_u = sol.u - i_u
        e_p = sol.p - i_p
        ms, mv = self.products.sigma_mass, self.products.v_mass
        a = self.products.rotrot_form
        g = self.grad_op

        def norm(mat, vec):
            return float(np.sqrt(max(vec @ (mat @ vec), 0.0)))

        err_u = norm(ms, e_u) / max(norm(ms, i_u), 1e-300)
        err_rr = norm(a, e_u) / max(norm(a, i_u), 1e-300)
        err_p = norm(mv, e_p) / max(norm(mv, i_p), 1e-300)
        err_pg = norm(ms, np.asarray(g @ e_p)) / max(norm(ms, np.asarray(g @ i_p)),
                                                     1e-300)
        return ResultRow(0, float(self.mesh.h_max()), sol.dim_lin_sys,
                         err_u, err_rr, err_p, err_pg)


# ----------------------------------------------------------------------
# benchmark harness
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class BenchConfig:
    family: str
    levels: tuple[int, ...]     # ladder levels; resolution is 3 * 2**(level-1)
    degree: int
    variant: str = "both"       # standard | serendipity | both

    def __post_init__(self):
        if not self.levels:
            raise ValueError("level range must be nonempty")
        if self.degree < 1:
            raise ValueError("the quad-rot benchmark needs degree k >= 1")
        if self.family not in BENCH_FAMILIES:
            raise ValueError(
                f"benchmark supports families {BENCH_FAMILIES}; the one-hole "
                f"family is reserved for cohomology checks (the quad-rot "
                f"problem is not well posed there)")
        if self.variant not in ("standard", "serendipity", "both"):
            raise ValueError("variant must be standard, serendipity or both")


def bench_mesh(family: str, level: int):
    """Benchmark ladder mesh: resolution doubles per level (meshsize halves)."""
    return generate_family(MeshFamilySpec(family, 3 * 2 ** (level - 1)))


def run_benchmark(config: BenchConfig, problem: QuadRotProblem | None = None,
                  collect=None) -> list[ResultRow]:
    """Run the ladder and return rows sorted by level (standard first)."""
    if problem is None:
        problem = manufactured_problem()
    variants = {"standard": (False,), "serendipity": (True,),
                "both": (False, True)}[config.variant]
    rows = []
    for level in sorted(config.levels):
        mesh = bench_mesh(config.family, level)
        shared = DdrComplex(mesh, config.degree)
        for serendipity in variants:
            t0 = time.perf_counter()
            scheme = QuadRotScheme(mesh, config.degree, serendipity=serendipity,
                                   ddr=shared)
            sol = scheme.solve(problem)
            row = scheme.errors(sol, problem)
            row = ResultRow(level, row.h, row.dim_lin_sys, row.err_u_l2,
                            row.err_u_rotrot, row.err_p_l2, row.err_p_grad)
            rows.append(row)
            if collect is not None:
                collect(level, serendipity, scheme, sol, row,
                        time.perf_counter() - t0)
    return rows


def write_csv(rows: list[ResultRow], path) -> None:
    """Write benchmark rows in the fixed CSV schema (UTF-8, LF newlines)."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for row in rows:
        buf.write(row.csv_line() + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())
