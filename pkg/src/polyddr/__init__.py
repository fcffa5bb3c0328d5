"""Discrete de Rham complexes on polygonal meshes, with serendipity reduction.

The package is organized bottom-up:

* :mod:`polyddr.mesh2d` -- polygonal meshes, canonical families, file I/O;
* :mod:`polyddr.polybasis` -- scaled polynomial bases, quadrature, projections;
* :mod:`polyddr.complex_core` -- finite cochain complexes as matrices,
  extension/reduction checkers, the enhanced-serendipity builder and
  cohomology via numerical rank;
* :mod:`polyddr.ddr2d` -- the two-dimensional discrete de Rham complex;
* :mod:`polyddr.sddr2d` -- its serendipity version and the maps between them;
* :mod:`polyddr.rotrot` -- the enhanced-regularity rot-rot complex and its
  serendipity version;
* :mod:`polyddr.products` / :mod:`polyddr.quadrot` -- discrete inner
  products, the quad-rot model solver and the benchmark harness;
* :mod:`polyddr.cli` -- the ``polyddr`` command line tool.
"""

from polyddr.mesh2d import Mesh2D, MeshFamilySpec, build_mesh, generate_family

__all__ = ["Mesh2D", "MeshFamilySpec", "build_mesh", "generate_family"]

__version__ = "0.1.0"
