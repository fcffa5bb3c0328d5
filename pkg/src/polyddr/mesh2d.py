"""Polygonal mesh representation, canonical mesh families and file I/O.

A :class:`Mesh2D` stores an oriented incidence structure (vertices, edges,
faces) together with the geometric data needed by polytopal discretizations:
unit edge tangents and normals, face areas, centroids and diameters, and
per-face orientation signs ``omega[f][i]`` such that ``omega * normal``
points out of the face.

Conventions
-----------
* Face loops are stored counter-clockwise.
* Each edge carries a global unit tangent ``t`` (direction of first
  traversal) and the global normal ``n = (t_y, -t_x)``, i.e. ``t`` rotated
  by -90 degrees.  A face traversing the edge along ``+t`` has orientation
  sign ``+1``, and ``sign * n`` is then the outward normal of that face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MeshError",
    "MeshFormatError",
    "Edge",
    "Face",
    "Mesh2D",
    "MeshFamilySpec",
    "build_mesh",
    "generate_family",
    "save_mesh",
    "load_mesh",
]

MESH_FORMAT_MAGIC = "polymesh2d v1"


class MeshError(ValueError):
    """Invalid mesh topology or geometry."""


class MeshFormatError(MeshError):
    """Unparseable mesh file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class Edge:
    v0: int
    v1: int
    tangent: np.ndarray
    normal: np.ndarray
    length: float
    midpoint: np.ndarray
    boundary: bool = False


@dataclass(frozen=True)
class Face:
    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    signs: tuple[int, ...]
    area: float
    centroid: np.ndarray
    diameter: float
    boundary: bool = False


def _polygon_area_centroid(pts: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if abs(area) < 1e-300:
        raise MeshError("degenerate polygon with zero area")
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _segments_intersect(p0, p1, q0, q1) -> bool:
    """Proper intersection test for open segments (shared endpoints excluded)."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q0, q1, p0)
    d2 = orient(q0, q1, p1)
    d3 = orient(p0, p1, q0)
    d4 = orient(p0, p1, q1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


class Mesh2D:
    """Immutable polygonal mesh with oriented incidence and geometry.

    Instances are created by :func:`build_mesh`, :func:`generate_family`
    or :func:`load_mesh`; the constructor itself performs no validation.
    """

    def __init__(self, vertices: np.ndarray, edges: list[Edge], faces: list[Face],
                 vertex_boundary: np.ndarray):
        self.vertices = vertices
        self.vertices.setflags(write=False)
        self.edges = tuple(edges)
        self.faces = tuple(faces)
        self.vertex_boundary = vertex_boundary
        self.vertex_boundary.setflags(write=False)

    # counts ------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    # geometry ----------------------------------------------------------
    def face_points(self, f: int) -> np.ndarray:
        return self.vertices[list(self.faces[f].vertices)]

    def total_area(self) -> float:
        return float(sum(face.area for face in self.faces))

    def h_max(self) -> float:
        return float(max(face.diameter for face in self.faces))

    def boundary_edges(self) -> np.ndarray:
        return np.array([i for i, e in enumerate(self.edges) if e.boundary], dtype=int)

    def face_edge_normal(self, f: int, local: int) -> np.ndarray:
        """Outward unit normal of the given local edge of face ``f``."""
        face = self.faces[f]
        return face.signs[local] * self.edges[face.edges[local]].normal

    def is_star_shaped(self, f: int, tol: float = 1e-12) -> bool:
        """Star-shapedness with respect to the centroid (fan test)."""
        face = self.faces[f]
        c = face.centroid
        pts = self.face_points(f)
        nxt = np.roll(pts, -1, axis=0)
        cross = ((pts[:, 0] - c[0]) * (nxt[:, 1] - c[1])
                 - (pts[:, 1] - c[1]) * (nxt[:, 0] - c[0]))
        return bool(np.all(cross > tol * face.diameter ** 2))

    def contains_point(self, f: int, p: np.ndarray) -> bool:
        """Winding-number point-in-polygon test for face ``f``."""
        pts = self.face_points(f)
        nxt = np.roll(pts, -1, axis=0)
        wn = 0
        for a, b in zip(pts, nxt):
            if a[1] <= p[1]:
                if b[1] > p[1] and _cross2(b - a, p - a) > 0:
                    wn += 1
            elif b[1] <= p[1] and _cross2(b - a, p - a) < 0:
                wn -= 1
        return wn != 0

    # validation ----------------------------------------------------------
    def validate(self) -> None:
        """Check the structural invariants; raise :class:`MeshError` if violated."""
        count = np.zeros(self.n_edges, dtype=int)
        sign_sum = np.zeros(self.n_edges, dtype=int)
        for f, face in enumerate(self.faces):
            if face.area <= 0:
                raise MeshError(f"face {f} has nonpositive area")
            for e, s in zip(face.edges, face.signs):
                count[e] += 1
                sign_sum[e] += s
            for local, e in enumerate(face.edges):
                mid = self.edges[e].midpoint
                probe = mid + 1e-6 * face.diameter * self.face_edge_normal(f, local)
                if self.contains_point(f, probe):
                    raise MeshError(
                        f"edge {e} of face {f}: oriented normal does not point outward")
        for e, edge in enumerate(self.edges):
            if edge.boundary:
                if count[e] != 1:
                    raise MeshError(f"boundary edge {e} belongs to {count[e]} faces")
            else:
                if count[e] != 2 or sign_sum[e] != 0:
                    raise MeshError(
                        f"interior edge {e} must belong to two faces with opposite "
                        f"orientation (count={count[e]}, sign sum={sign_sum[e]})")


def _cross2(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _shoelace_area(poly) -> float:
    pts = np.asarray(poly, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def build_mesh(points, face_loops) -> Mesh2D:
    """Build a validated mesh from vertex coordinates and CCW vertex loops.

    Parameters
    ----------
    points:
        Sequence of 2D coordinates.
    face_loops:
        One list of 0-based vertex indices per face, oriented
        counter-clockwise.  Shared edges must be traversed in opposite
        directions by their two faces.
    """
    vertices = np.asarray(points, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("points must be an (n, 2) array")
    nv = len(vertices)

    used = np.zeros(nv, dtype=bool)
    edge_ids: dict[tuple[int, int], int] = {}
    edge_list: list[tuple[int, int]] = []
    edge_sides: list[list[int]] = []
    face_edges: list[tuple[int, ...]] = []
    face_signs: list[tuple[int, ...]] = []

    for f, loop in enumerate(face_loops):
        loop = [int(i) for i in loop]
        if len(loop) < 3:
            raise MeshError(f"face {f}: loop has fewer than 3 vertices")
        if len(set(loop)) != len(loop):
            raise MeshError(f"face {f}: non-simple polygon (repeated vertex)")
        for i in loop:
            if not 0 <= i < nv:
                raise MeshError(f"face {f}: unknown vertex index {i}")
            used[i] = True
        pts = vertices[loop]
        area, _ = _polygon_area_centroid(pts)
        if area <= 0:
            raise MeshError(f"face {f}: loop is not counter-clockwise")
        m = len(loop)
        segs = [(pts[i], pts[(i + 1) % m]) for i in range(m)]
        for i in range(m):
            for j in range(i + 1, m):
                if j == i + 1 or (i == 0 and j == m - 1):
                    continue
                if _segments_intersect(*segs[i], *segs[j]):
                    raise MeshError(f"face {f}: non-simple polygon (self-intersection)")

        es, ss = [], []
        for i in range(m):
            a, b = loop[i], loop[(i + 1) % m]
            key = (min(a, b), max(a, b))
            if key not in edge_ids:
                edge_ids[key] = len(edge_list)
                edge_list.append((a, b))
                edge_sides.append([])
            e = edge_ids[key]
            sign = 1 if edge_list[e] == (a, b) else -1
            if len(edge_sides[e]) >= 2:
                raise MeshError(f"edge {key} shared by more than two faces")
            if edge_sides[e] and edge_sides[e][-1] == sign:
                raise MeshError(
                    f"edge {key}: inconsistent shared-edge orientation")
            edge_sides[e].append(sign)
            es.append(e)
            ss.append(sign)
        face_edges.append(tuple(es))
        face_signs.append(tuple(ss))

    if not np.all(used):
        raise MeshError(f"dangling vertex {int(np.flatnonzero(~used)[0])}")

    edges = []
    vertex_boundary = np.zeros(nv, dtype=bool)
    for e, (a, b) in enumerate(edge_list):
        d = vertices[b] - vertices[a]
        length = float(np.hypot(*d))
        if length <= 0:
            raise MeshError(f"edge ({a},{b}) has zero length")
        t = d / length
        n = np.array([t[1], -t[0]])
        boundary = len(edge_sides[e]) == 1
        if boundary:
            vertex_boundary[a] = vertex_boundary[b] = True
        edges.append(Edge(a, b, t, n, length, 0.5 * (vertices[a] + vertices[b]),
                          boundary))

    faces = []
    for f, loop in enumerate(face_loops):
        pts = vertices[[int(i) for i in loop]]
        area, centroid = _polygon_area_centroid(pts)
        diam = float(max(np.hypot(*(p - q)) for i, p in enumerate(pts)
                         for q in pts[i + 1:]))
        on_bnd = any(edges[e].boundary for e in face_edges[f])
        faces.append(Face(tuple(int(i) for i in loop), face_edges[f],
                          face_signs[f], area, centroid, diam, on_bnd))

    mesh = Mesh2D(vertices, edges, faces, vertex_boundary)
    mesh.validate()
    return mesh


# ----------------------------------------------------------------------
# canonical families
# ----------------------------------------------------------------------

_FAMILIES = ("cartesian", "triangular", "hexagonal", "annulus")


@dataclass(frozen=True)
class MeshFamilySpec:
    """Canonical family selector.

    ``level`` is the resolution parameter: the number of cells per side for
    the grid-based families.  Within a family the meshsize halves (to within
    20%) when the level doubles, so convergence ladders should use doubling
    level sequences.
    """

    family: str
    level: int
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise MeshError(f"unknown family {self.family!r}; expected one of {_FAMILIES}")
        if self.level < 1:
            raise MeshError("level must be >= 1")
        if self.family == "annulus" and self.level < 3:
            raise MeshError("annulus requires level >= 3 to remove a hole")


def generate_family(spec: MeshFamilySpec) -> Mesh2D:
    """Generate one of the canonical deterministic mesh families."""
    x0, y0, x1, y1 = spec.bbox
    n = spec.level
    if spec.family in ("cartesian", "triangular", "annulus"):
        return _grid_family(spec.family, n, x0, y0, x1, y1)
    return _hexagonal_family(n, x0, y0, x1, y1)


def family_mesh(family: str, level: int) -> Mesh2D:
    """Shorthand for ``generate_family(MeshFamilySpec(family, level))``."""
    return generate_family(MeshFamilySpec(family, level))


def _grid_family(family: str, n: int, x0, y0, x1, y1) -> Mesh2D:
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    vid = lambda i, j: j * (n + 1) + i
    points = [(xs[i], ys[j]) for j in range(n + 1) for i in range(n + 1)]

    if family == "annulus":
        lo, hi = n // 3, n - n // 3
        hole = lambda i, j: lo <= i < hi and lo <= j < hi
    else:
        hole = lambda i, j: False

    loops = []
    for j in range(n):
        for i in range(n):
            if hole(i, j):
                continue
            quad = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
            if family == "triangular":
                loops.append([quad[0], quad[1], quad[2]])
                loops.append([quad[0], quad[2], quad[3]])
            else:
                loops.append(quad)

    if family == "annulus":
        keep = sorted({i for loop in loops for i in loop})
        remap = {old: new for new, old in enumerate(keep)}
        points = [points[i] for i in keep]
        loops = [[remap[i] for i in loop] for loop in loops]

    return build_mesh(points, loops)


def _hexagonal_family(n: int, x0, y0, x1, y1) -> Mesh2D:
    """Stretched honeycomb clipped to the box.

    Cell width is ``1/n`` and the row pitch is chosen so the top and bottom
    box edges pass through hexagon centers; boundary cells are then half
    hexagons (quads/pentagons) and no sliver cells appear.
    """
    wx, wy = x1 - x0, y1 - y0
    w = wx / n
    m = max(2, round(2 * n * (wy / wx) / math.sqrt(3.0)))
    p = wy / m
    ry = 2.0 * p / 3.0

    def hexagon(cx, cy):
        return [(cx, cy + ry), (cx - w / 2, cy + ry / 2), (cx - w / 2, cy - ry / 2),
                (cx, cy - ry), (cx + w / 2, cy - ry / 2), (cx + w / 2, cy + ry / 2)]

    cells = []
    for j in range(m + 1):
        cy = y0 + j * p
        offs = 0.0 if j % 2 == 0 else 0.5
        i0 = -1 if offs else 0
        for i in range(i0, n + 1):
            cx = x0 + (i + offs) * w
            poly = _clip_box(hexagon(cx, cy), x0, y0, x1, y1)
            if len(poly) >= 3 and _shoelace_area(poly) > 1e-12 * w * p:
                cells.append(poly)

    # merge coincident vertices produced by independent clips
    tol = 1e-9 * min(w, p)
    points: list[tuple[float, float]] = []
    grid: dict[tuple[int, int], list[int]] = {}

    def vertex_id(pt):
        kx, ky = round(pt[0] / tol), round(pt[1] / tol)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for idx in grid.get((kx + dx, ky + dy), ()):
                    q = points[idx]
                    if abs(q[0] - pt[0]) <= tol and abs(q[1] - pt[1]) <= tol:
                        return idx
        points.append((pt[0], pt[1]))
        grid.setdefault((kx, ky), []).append(len(points) - 1)
        return len(points) - 1

    loops = []
    for poly in cells:
        loop = []
        for pt in poly:
            i = vertex_id(pt)
            if not loop or (loop[-1] != i and loop[0] != i):
                loop.append(i)
            elif loop[-1] != i and loop[0] == i:
                pass  # closing duplicate
        if len(loop) >= 3:
            loops.append(loop)
    return build_mesh(points, loops)


def _clip_box(poly, x0, y0, x1, y1):
    """Sutherland-Hodgman clip of a convex polygon against an axis box."""
    def clip(pts, inside, intersect):
        out = []
        for i, a in enumerate(pts):
            b = pts[(i + 1) % len(pts)]
            ain, bin_ = inside(a), inside(b)
            if ain:
                out.append(a)
                if not bin_:
                    out.append(intersect(a, b))
            elif bin_:
                out.append(intersect(a, b))
        return out

    def x_cut(c):
        return lambda a, b: (c, a[1] + (b[1] - a[1]) * (c - a[0]) / (b[0] - a[0]))

    def y_cut(c):
        return lambda a, b: (a[0] + (b[0] - a[0]) * (c - a[1]) / (b[1] - a[1]), c)

    pts = list(poly)
    for inside, inter in (
        (lambda q: q[0] >= x0, x_cut(x0)),
        (lambda q: q[0] <= x1, x_cut(x1)),
        (lambda q: q[1] >= y0, y_cut(y0)),
        (lambda q: q[1] <= y1, y_cut(y1)),
    ):
        if not pts:
            return []
        pts = clip(pts, inside, inter)
    return pts


# ----------------------------------------------------------------------
# file I/O
# ----------------------------------------------------------------------

def save_mesh(mesh: Mesh2D, path) -> None:
    """Write the mesh in the ``polymesh2d v1`` text format.

    Header line ``polymesh2d v1 <nv> <nf>``; then ``nv`` lines ``x y`` with
    full-precision decimals; then ``nf`` lines ``m i1 ... im`` giving each
    0-based CCW vertex loop.
    """
    lines = [f"{MESH_FORMAT_MAGIC} {mesh.n_vertices} {mesh.n_faces}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    for face in mesh.faces:
        lines.append(" ".join([str(len(face.vertices))]
                              + [str(i) for i in face.vertices]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh2D:
    """Read a ``polymesh2d v1`` file and return the validated mesh."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise MeshFormatError("empty file", line=1)
    head = raw[0].split()
    if len(head) != 4 or " ".join(head[:2]) != MESH_FORMAT_MAGIC:
        raise MeshFormatError(f"bad header, expected '{MESH_FORMAT_MAGIC} <nv> <nf>'",
                              line=1)
    try:
        nv, nf = int(head[2]), int(head[3])
    except ValueError:
        raise MeshFormatError("header counts are not integers", line=1) from None
    if len(raw) < 1 + nv + nf:
        raise MeshFormatError(f"expected {1 + nv + nf} lines, found {len(raw)}",
                              line=len(raw))
    points = []
    for k in range(nv):
        parts = raw[1 + k].split()
        if len(parts) != 2:
            raise MeshFormatError("expected 'x y'", line=2 + k)
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise MeshFormatError("bad coordinate", line=2 + k) from None
    loops = []
    for k in range(nf):
        lineno = 2 + nv + k
        parts = raw[1 + nv + k].split()
        try:
            vals = [int(s) for s in parts]
        except ValueError:
            raise MeshFormatError("bad face line", line=lineno) from None
        if not vals or len(vals) != vals[0] + 1:
            raise MeshFormatError("face line length mismatch", line=lineno)
        loop = vals[1:]
        for i in loop:
            if not 0 <= i < nv:
                raise MeshFormatError(f"unknown vertex index {i}", line=lineno)
        loops.append(loop)
    try:
        return build_mesh(points, loops)
    except MeshError as exc:
        raise MeshFormatError(f"topology validation failure: {exc}") from exc
