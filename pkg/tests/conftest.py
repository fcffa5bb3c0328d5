"""Shared fixtures: single-cell meshes and cached mesh/complex factories."""

import numpy as np
import pytest

from polyddr.ddr2d import DdrComplex
from polyddr.mesh2d import MeshFamilySpec, build_mesh, generate_family


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance criterion pass/fail lines after the run."""
    try:
        from test_acceptance import CRITERION_LINES
    except ImportError:
        return
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit_square_mesh():
    return build_mesh([(0, 0), (1, 0), (1, 1), (0, 1)], [[0, 1, 2, 3]])


@pytest.fixture(scope="session")
def triangle_mesh():
    return build_mesh([(0, 0), (1, 0), (0, 1)], [[0, 1, 2]])


@pytest.fixture(scope="session")
def hexagon_mesh():
    ang = np.linspace(0, 2 * np.pi, 7)[:-1] + 0.3
    return build_mesh([(np.cos(a), np.sin(a)) for a in ang], [[0, 1, 2, 3, 4, 5]])


@pytest.fixture(scope="session")
def mesh_of():
    cache = {}

    def factory(family, level):
        key = (family, level)
        if key not in cache:
            cache[key] = generate_family(MeshFamilySpec(family, level))
        return cache[key]

    return factory


@pytest.fixture(scope="session")
def ddr_of(mesh_of):
    cache = {}

    def factory(family, level, k):
        key = (family, level, k)
        if key not in cache:
            cache[key] = DdrComplex(mesh_of(family, level), k)
        return cache[key]

    return factory


@pytest.fixture(scope="session")
def bench_run():
    """Memoized quad-rot ladder runs shared by app and acceptance tests."""
    from polyddr.quadrot import QuadRotScheme, bench_mesh, manufactured_problem

    problem = manufactured_problem()
    meshes = {}
    shared = {}
    cache = {}

    def factory(family, k, level, serendipity):
        key = (family, k, level, serendipity)
        if key not in cache:
            mkey = (family, level)
            if mkey not in meshes:
                meshes[mkey] = bench_mesh(family, level)
            skey = (family, level, k)
            if skey not in shared:
                shared[skey] = DdrComplex(meshes[mkey], k)
            scheme = QuadRotScheme(meshes[mkey], k, serendipity=serendipity,
                                   ddr=shared[skey])
            sol = scheme.solve(problem)
            row = scheme.errors(sol, problem)
            cache[key] = (row, sol.solver_residual, sol.divergence_residual)
            # the two variants at one configuration share the cached complex;
            # drop it afterwards to bound memory
            if serendipity:
                shared.pop(skey, None)
        return cache[key]

    return factory
