"""Mesh construction: uniform base meshes on (-1,1), squares, L-shapes and
polygonal disks, plus exponentially graded extension meshes covering the
dilated truncation domains.

All meshes are immutable after construction.  1D meshes use 2-vertex cells
(intervals), 2D meshes use 4-vertex counterclockwise quadrilaterals.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# boundary facet tags
INTERIOR_DOMAIN_BOUNDARY = "interior_domain_boundary"
EXTENSION_BOUNDARY = "extension_boundary"

_DOMAINS = ("interval", "square", "lshape", "polydisk")


@dataclass(frozen=True)
class Mesh:
    """A conforming subdivision of one of the supported base domains.

    vertices has shape (nv, dim); cells has shape (nc, 2) in 1D and
    (nc, 4) in 2D with counterclockwise vertex ordering.  boundary_marks
    maps a facet (sorted vertex-index tuple; a single index in 1D) to a
    tag string.
    """

    dimension: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_marks: dict
    level: int
    h_max: float
    domain_id: str = ""

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    def boundary_vertices(self, tag=None):
        """Sorted array of vertex indices lying on tagged boundary facets."""
        out = set()
        for facet, mark in self.boundary_marks.items():
            if tag is None or mark == tag:
                out.update(facet)
        return np.array(sorted(out), dtype=int)

    def cell_diameters(self):
        v = self.vertices[self.cells]  # (nc, k, dim)
        if self.dimension == 1:
            return np.abs(v[:, 1, 0] - v[:, 0, 0])
        # max over the two diagonals and four edges
        d = 0.0
        idx = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)]
        diam = np.zeros(self.num_cells)
        for a, b in idx:
            diam = np.maximum(diam, np.linalg.norm(v[:, a] - v[:, b], axis=1))
        return diam

    def cell_measures(self):
        v = self.vertices[self.cells]
        if self.dimension == 1:
            return v[:, 1, 0] - v[:, 0, 0]
        # shoelace formula for quads
        x, y = v[:, :, 0], v[:, :, 1]
        xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
        return 0.5 * np.sum(x * yn - xn * y, axis=1)

    def dump(self):
        """Plain-text dump: header `dim ncells nverts`, vertex coordinates,
        then cell connectivity.  Used by golden tests."""
        lines = ["%d %d %d" % (self.dimension, self.num_cells, self.num_vertices)]
        for p in self.vertices:
            lines.append(" ".join("%.17e" % c for c in p))
        for cell in self.cells:
            lines.append(" ".join(str(i) for i in cell))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExtendedMesh(Mesh):
    """Mesh of a dilated domain whose restriction to the base domain is
    cell-for-cell identical to `base`.  Base vertices come first so that
    node_map is the identity injection."""

    base: Mesh = None
    outer_radius: float = 0.0
    layers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def node_map(self):
        return np.arange(self.base.num_vertices)


def dilation_radius(t, M):
    """Radius of the truncation ball for resolvent parameter t."""
    if t <= 0 or M <= 0:
        raise ConfigurationError("dilation_radius requires t > 0 and M > 0")
    if t >= 1.0:
        return 1.0 + t * (1.0 + M)
    return 2.0 + M


def graded_widths(h, dist):
    """Layer widths doubling outward from h, adjusted to sum to dist exactly.

    The last width absorbs the remainder so widths stay nondecreasing.
    """
    if dist <= 0:
        raise ConfigurationError("extension distance must be positive")
    widths = []
    w, pos = float(h), 0.0
    while pos + w < dist * (1.0 - 1e-12):
        widths.append(w)
        pos += w
        w *= 2.0
    rem = dist - pos
    if widths and rem < widths[-1]:
        widths[-1] += rem
    else:
        widths.append(rem)
    return np.array(widths)


def _boundary_facets(cells, dim):
    """Facets belonging to exactly one cell."""
    count = {}
    if dim == 1:
        for c in cells:
            for v in c:
                count[(int(v),)] = count.get((int(v),), 0) + 1
    else:
        for c in cells:
            for a, b in ((0, 1), (1, 2), (2, 3), (3, 0)):
                key = tuple(sorted((int(c[a]), int(c[b]))))
                count[key] = count.get(key, 0) + 1
    return [f for f, n in count.items() if n == 1]


def _grid_cells(nx, ny, keep):
    """Uniform quad grid connectivity on an (nx+1)x(ny+1) lattice.

    keep(ix, iy) selects cells; returns (vertex lattice coords, cells) with
    vertices compacted to those actually used.
    """
    vid = -np.ones((nx + 1, ny + 1), dtype=int)
    cells = []
    order = []
    for iy in range(ny):
        for ix in range(nx):
            if not keep(ix, iy):
                continue
            quad = []
            for dx, dy in ((0, 0), (1, 0), (1, 1), (0, 1)):
                jx, jy = ix + dx, iy + dy
                if vid[jx, jy] < 0:
                    vid[jx, jy] = len(order)
                    order.append((jx, jy))
                quad.append(vid[jx, jy])
            cells.append(quad)
    return np.array(order, dtype=int), np.array(cells, dtype=int), vid


def _refine_quads(vertices, cells, boundary_project=None):
    """One uniform refinement of a quad mesh (edge midpoints + centroids).

    boundary_project, if given, maps new midpoints of boundary edges back
    onto the curved boundary.
    """
    verts = [p for p in vertices]
    edge_mid = {}
    bfacets = set(_boundary_facets(cells, 2))

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key not in edge_mid:
            p = 0.5 * (vertices[a] + vertices[b])
            if boundary_project is not None and key in bfacets:
                p = boundary_project(p)
            edge_mid[key] = len(verts)
            verts.append(p)
        return edge_mid[key]

    new_cells = []
    for c in cells:
        m01 = midpoint(c[0], c[1])
        m12 = midpoint(c[1], c[2])
        m23 = midpoint(c[2], c[3])
        m30 = midpoint(c[3], c[0])
        ctr = len(verts)
        verts.append(0.25 * (vertices[c[0]] + vertices[c[1]] + vertices[c[2]] + vertices[c[3]]))
        new_cells.extend(
            [
                [c[0], m01, ctr, m30],
                [m01, c[1], m12, ctr],
                [ctr, m12, c[2], m23],
                [m30, ctr, m23, c[3]],
            ]
        )
    return np.array(verts), np.array(new_cells, dtype=int)


def build_base_mesh(domain_id, level):
    """Uniformly refined mesh of one of the built-in domains."""
    if domain_id not in _DOMAINS:
        raise ConfigurationError("unknown domain_id %r (expected one of %s)" % (domain_id, ", ".join(_DOMAINS)))
    if level < 0:
        raise ConfigurationError("level must be nonnegative")

    if domain_id == "interval":
        n = 2 * 2**level
        verts = np.linspace(-1.0, 1.0, n + 1).reshape(-1, 1)
        cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        marks = {(0,): INTERIOR_DOMAIN_BOUNDARY, (n,): INTERIOR_DOMAIN_BOUNDARY}
        # dyadic convention h_j = (1/2) * 2^-j on (-1,1), i.e. half the cell width
        return Mesh(1, verts, cells, marks, level, 0.5 / 2**level, domain_id)

    if domain_id in ("square", "lshape"):
        n = 2 * 2**level if domain_id == "square" else 4 * 2**level
        delta = 1.0 / n  # lattice spacing on the bounding square (-1/2,1/2)^2

        if domain_id == "square":
            keep = lambda ix, iy: True
        else:
            # remove the quadrant (0,1/2) x (-1/2,0); the kept region holds
            # the positivity bump of the built-in L-shape obstacle and keeps
            # the obstacle nonpositive up to the Dirichlet boundary
            half = n // 2

            def keep(ix, iy):
                return not (ix >= half and iy < half)

        lattice, cells, _ = _grid_cells(n, n, keep)
        verts = -0.5 + delta * lattice.astype(float)
        marks = {f: INTERIOR_DOMAIN_BOUNDARY for f in _boundary_facets(cells, 2)}
        return Mesh(2, verts, cells, marks, level, delta * math.sqrt(2.0), domain_id)

    # polydisk: 3-quad coarse layout around the center, boundary vertices on
    # the unit circle; refinement projects new boundary vertices back onto it.
    angles = np.deg2rad(np.arange(0, 360, 60))
    hexagon = np.column_stack([np.cos(angles), np.sin(angles)])
    verts = np.vstack([[0.0, 0.0], hexagon])
    cells = np.array([[0, 1, 2, 3], [0, 3, 4, 5], [0, 5, 6, 1]])

    def project(p):
        return p / np.linalg.norm(p)

    for _ in range(level):
        verts, cells = _refine_quads(verts, cells, boundary_project=project)
    marks = {f: INTERIOR_DOMAIN_BOUNDARY for f in _boundary_facets(cells, 2)}
    m = Mesh(2, verts, cells, marks, level, 0.0, domain_id)
    h = float(m.cell_diameters().max())
    return Mesh(2, verts, cells, marks, level, h, domain_id)


def _base_cell_width(base):
    """Width of the base cells used to seed the geometric grading."""
    if base.dimension == 1:
        return float(np.min(base.cell_measures()))
    return float(np.sqrt(np.min(np.abs(base.cell_measures()))))


def build_extended_mesh(base, radius):
    """Extend `base` with geometrically graded layers out to `radius`.

    In 2D the extended domain is the axis-aligned square [-radius, radius]^2
    circumscribing the truncation ball; layers are concentric scaled copies
    of the outermost base boundary.
    """
    circum = float(np.max(np.linalg.norm(base.vertices, axis=1)))
    if radius <= circum:
        raise ConfigurationError(
            "extension radius %g must exceed the base circumradius %g" % (radius, circum)
        )

    if base.dimension == 1:
        h = _base_cell_width(base)
        widths = graded_widths(h, radius - 1.0)
        right = 1.0 + np.cumsum(widths)
        left = -right
        nv = base.num_vertices
        verts = np.vstack([base.vertices, right.reshape(-1, 1), left.reshape(-1, 1)])
        i_one = int(np.argmin(np.abs(base.vertices[:, 0] - 1.0)))
        i_mone = int(np.argmin(np.abs(base.vertices[:, 0] + 1.0)))
        cells = [c for c in base.cells]
        prev = i_one
        for j in range(len(widths)):
            cells.append([prev, nv + j])
            prev = nv + j
        prev = i_mone
        for j in range(len(widths)):
            cells.append([nv + len(widths) + j, prev])
            prev = nv + len(widths) + j
        cells = np.array(cells, dtype=int)
        marks = dict(base.boundary_marks)
        marks[(nv + len(widths) - 1,)] = EXTENSION_BOUNDARY
        marks[(nv + 2 * len(widths) - 1,)] = EXTENSION_BOUNDARY
        h_max = float(np.max(widths))
        return ExtendedMesh(
            1, verts, cells, marks, base.level, max(h_max, base.h_max), base.domain_id,
            base=base, outer_radius=float(radius), layers=widths,
        )

    # --- 2D ---
    verts = [p for p in base.vertices]
    cells = [list(c) for c in base.cells]

    if base.domain_id in ("square", "lshape"):
        a0 = float(np.max(np.abs(base.vertices)))
        delta = _base_cell_width(base)
        n = int(round(2 * a0 / delta))
        # fill the bounding square (adds the notch for the L-shape)
        lookup = {}
        for i, p in enumerate(base.vertices):
            lookup[(int(round((p[0] + a0) / delta)), int(round((p[1] + a0) / delta)))] = i
        covered = set()
        for c in base.cells:
            ctr = np.mean([verts[v] for v in c], axis=0)
            covered.add((int(math.floor((ctr[0] + a0) / delta)), int(math.floor((ctr[1] + a0) / delta))))

        def vert_at(ix, iy):
            key = (ix, iy)
            if key not in lookup:
                lookup[key] = len(verts)
                verts.append(np.array([-a0 + ix * delta, -a0 + iy * delta]))
            return lookup[key]

        for iy in range(n):
            for ix in range(n):
                if (ix, iy) in covered:
                    continue
                cells.append([vert_at(ix, iy), vert_at(ix + 1, iy), vert_at(ix + 1, iy + 1), vert_at(ix, iy + 1)])
        # inner ring boundary: the bounding square, lattice-ordered CCW
        path = []
        for ix in range(n):
            path.append((ix, 0))
        for iy in range(n):
            path.append((n, iy))
        for ix in range(n, 0, -1):
            path.append((ix, n))
        for iy in range(n, 0, -1):
            path.append((0, iy))
        inner = [vert_at(ix, iy) for ix, iy in path]
        a_in = a0
        seed = delta
    elif base.domain_id == "polydisk":
        bverts = base.boundary_vertices(INTERIOR_DOMAIN_BOUNDARY)
        ang = np.arctan2(base.vertices[bverts, 1], base.vertices[bverts, 0])
        inner = [int(v) for v in bverts[np.argsort(ang)]]
        a_in = 1.0
        seed = float(np.linalg.norm(base.vertices[inner[1]] - base.vertices[inner[0]]))
    else:
        raise ConfigurationError("no extension rule for domain %r" % base.domain_id)

    widths = graded_widths(seed, radius - a_in)
    inner_pts = np.array([verts[i] for i in inner])
    ring = list(inner)
    a = a_in
    for w in widths:
        a += w
        scale = a / a_in
        new_ring = []
        for p in inner_pts:
            new_ring.append(len(verts))
            verts.append(p * scale)
        m = len(ring)
        for i in range(m):
            j = (i + 1) % m
            cells.append([ring[i], new_ring[i], new_ring[j], ring[j]])
        ring = new_ring

    verts = np.array(verts)
    cells = np.array(cells, dtype=int)
    marks = dict(base.boundary_marks)
    m = len(ring)
    for i in range(m):
        j = (i + 1) % m
        marks[tuple(sorted((ring[i], ring[j])))] = EXTENSION_BOUNDARY
    ext = ExtendedMesh(
        2, verts, cells, marks, base.level, 0.0, base.domain_id,
        base=base, outer_radius=float(radius), layers=widths,
    )
    h_max = float(ext.cell_diameters().max())
    return ExtendedMesh(
        2, verts, cells, marks, base.level, h_max, base.domain_id,
        base=base, outer_radius=float(radius), layers=widths,
    )
