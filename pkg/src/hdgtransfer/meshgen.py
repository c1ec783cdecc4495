"""Triangulations of the computational domain.

Three constructions are provided: a uniform mesh of the unit square (fitted,
no boundary gap), a concentric-ring mesh of the unit disk whose boundary
vertices lie on the circle (boundary interpolated by chords), and an immersed
mesh made of the background triangles lying completely inside a level-set
domain.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import MeshGenerationError, PreconditionError
from .geometry import EPS_IN

BOUNDARY = -1


class Mesh:
    """Conforming triangulation with edge connectivity and cell metrics.

    Local edge ``i`` of a cell is the edge opposite its vertex ``i``. Global
    edges are stored as vertex pairs ``(a, b)`` with ``a < b``; this pair fixes
    the orientation of every edge-based quantity (trace bases, quadrature
    points). ``edge_cells[e] = (left, right)`` with ``right == BOUNDARY`` on
    the boundary, where ``left`` is then the owner cell.
    """

    def __init__(self, vertices, cells, edges=None, edge_cells=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        cells = np.ascontiguousarray(cells, dtype=np.int64)
        area = _signed_area(self.vertices[cells])
        flip = area < 0
        if np.any(flip):
            cells = cells.copy()
            cells[flip] = cells[flip][:, [0, 2, 1]]
        self.cells = cells
        if edges is None:
            edges, edge_cells = _build_edges(self.cells)
        self.edges = np.ascontiguousarray(edges, dtype=np.int64)
        self.edge_cells = np.ascontiguousarray(edge_cells, dtype=np.int64)
        self.cell_edges = self._cell_edges()
        self._compute_metrics()

    # -- connectivity --------------------------------------------------------

    def _cell_edges(self):
        lookup = {tuple(sorted(e)): i for i, e in enumerate(self.edges.tolist())}
        ce = np.empty((self.n_cells, 3), dtype=np.int64)
        for c, (i, j, k) in enumerate(self.cells.tolist()):
            try:
                ce[c] = (lookup[(min(j, k), max(j, k))], lookup[(min(i, k), max(i, k))],
                         lookup[(min(i, j), max(i, j))])
            except KeyError:
                raise MeshGenerationError(f"cell {c} references an edge missing from the edge list")
        return ce

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def boundary_edges(self):
        return np.nonzero(self.edge_cells[:, 1] == BOUNDARY)[0]

    @property
    def interior_edges(self):
        return np.nonzero(self.edge_cells[:, 1] != BOUNDARY)[0]

    def local_edge_index(self, cell, edge):
        return int(np.nonzero(self.cell_edges[cell] == edge)[0][0])

    # -- metrics ---------------------------------------------------------------

    def _compute_metrics(self):
        p = self.vertices[self.cells]
        self.areas = _signed_area(p)
        lengths = np.stack([np.linalg.norm(p[:, (i + 2) % 3] - p[:, (i + 1) % 3], axis=1)
                            for i in range(3)], axis=1)
        self.cell_diameters = lengths.max(axis=1)
        self.inradii = 2.0 * self.areas / lengths.sum(axis=1)
        self.h = float(self.cell_diameters.max()) if self.n_cells else 0.0
        self.shape_regularity = float(np.max(self.cell_diameters / self.inradii)) if self.n_cells else 0.0
        ev = self.vertices[self.edges]
        self.edge_lengths = np.linalg.norm(ev[:, 1] - ev[:, 0], axis=1)

        self.edge_normals = np.zeros((self.n_edges, 2))
        bnd = self.boundary_edges
        tangent = ev[bnd, 1] - ev[bnd, 0]
        normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / self.edge_lengths[bnd, None]
        owner = self.edge_cells[bnd, 0]
        opposite = np.array([self.vertices[self.cells[c, self.local_edge_index(c, e)]]
                             for c, e in zip(owner, bnd)]).reshape(-1, 2)
        wrong = np.einsum("ij,ij->i", opposite - ev[bnd, 0], normal) > 0
        normal[wrong] *= -1.0
        self.edge_normals[bnd] = normal

    def edge_height(self, e):
        """Distance from the owner cell's opposite vertex to the line of edge ``e``."""
        c = self.edge_cells[e, 0]
        return 2.0 * self.areas[c] / self.edge_lengths[e]

    def total_area(self):
        return float(self.areas.sum())

    def boundary_loop_area(self):
        """Area enclosed by the oriented boundary edges (shoelace formula)."""
        total = 0.0
        for e in self.boundary_edges:
            a, b = self.vertices[self.edges[e]]
            n = self.edge_normals[e]
            t = b - a
            # orient counterclockwise: outward normal on the right of the tangent
            if t[0] * n[1] - t[1] * n[0] > 0:
                a, b = b, a
            total += a[0] * b[1] - b[0] * a[1]
        return 0.5 * total

    # -- point location --------------------------------------------------------

    def _tree(self):
        if not hasattr(self, "_kdtree"):
            self._centroids = self.vertices[self.cells].mean(axis=1)
            self._kdtree = cKDTree(self._centroids)
        return self._kdtree

    def locate(self, points, tol=1e-12):
        """Index of a cell containing each point (closed cells, ``tol`` slack), or -1."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        tree = self._tree()
        out = np.full(len(points), -1, dtype=np.int64)
        candidates = tree.query_ball_point(points, r=self.h * (1.0 + 1e-9))
        for i, cand in enumerate(candidates):
            for c in cand:
                lam = barycentric(self.vertices[self.cells[c]], points[i])
                if lam.min() >= -tol:
                    out[i] = c
                    break
        return out

    def contains(self, points, tol=1e-12):
        return self.locate(points, tol) >= 0

    # -- checks ----------------------------------------------------------------

    def check_conformity(self):
        """Every interior edge is shared by two cells traversing it in opposite directions."""
        seen = {}
        for c, tri in enumerate(self.cells.tolist()):
            for i in range(3):
                a, b = tri[(i + 1) % 3], tri[(i + 2) % 3]
                seen.setdefault((min(a, b), max(a, b)), []).append((c, a < b))
        for key, uses in seen.items():
            if len(uses) > 2:
                return False
            if len(uses) == 2 and uses[0][1] == uses[1][1]:
                return False
        return len(seen) == self.n_edges


def barycentric(tri, x):
    """Barycentric coordinates of ``x`` in triangle ``tri`` (3x2)."""
    T = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    l12 = np.linalg.solve(T, np.asarray(x, float) - tri[0])
    return np.array([1.0 - l12.sum(), l12[0], l12[1]])


def _signed_area(p):
    d1 = p[..., 1, :] - p[..., 0, :]
    d2 = p[..., 2, :] - p[..., 0, :]
    return 0.5 * (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])


def _build_edges(cells):
    nc = len(cells)
    local = np.stack([cells[:, [1, 2]], cells[:, [0, 2]], cells[:, [0, 1]]], axis=1).reshape(-1, 2)
    local = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(local, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise MeshGenerationError("non-manifold edge shared by more than two cells")
    owner = np.repeat(np.arange(nc), 3)
    edge_cells = np.full((len(edges), 2), BOUNDARY, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    first = np.ones(len(order), dtype=bool)
    first[1:] = inverse[order][1:] != inverse[order][:-1]
    edge_cells[inverse[order][first], 0] = owner[order][first]
    edge_cells[inverse[order][~first], 1] = owner[order][~first]
    return edges, edge_cells


# -- constructions ---------------------------------------------------------------

def build_square_mesh(n):
    """Uniform mesh of [0,1]^2: n x n squares, each split along its main diagonal."""
    n = int(n)
    if n < 1:
        raise MeshGenerationError("square mesh needs n >= 1")
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    idx = lambda i, j: j * (n + 1) + i
    cells = []
    for j in range(n):
        for i in range(n):
            v00, v10, v01, v11 = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    return Mesh(vertices, np.array(cells))


def build_fitted_disk_mesh(rings):
    """Concentric-ring mesh of the unit disk.

    Ring ``i`` (radius ``i/rings``) carries ``6 i`` equally spaced vertices and
    consecutive rings are stitched by merging their angular orderings, giving
    ``6 rings^2`` cells. Outer vertices lie exactly on the unit circle.
    """
    rings = int(rings)
    if rings < 1:
        raise MeshGenerationError("disk mesh needs rings >= 1")
    vertices = [np.zeros(2)]
    ring_ids = [[0]]
    ring_angles = [np.zeros(1)]
    for i in range(1, rings + 1):
        m = 6 * i
        theta = 2.0 * np.pi * np.arange(m) / m
        r = 1.0 if i == rings else i / rings
        start = len(vertices)
        for th in theta:
            vertices.append(r * np.array([np.cos(th), np.sin(th)]))
        if i == rings:
            # exact placement on the circle
            for j, th in enumerate(theta):
                c, s = np.cos(th), np.sin(th)
                nrm = np.hypot(c, s)
                vertices[start + j] = np.array([c / nrm, s / nrm])
        ring_ids.append(list(range(start, start + m)))
        ring_angles.append(theta)

    cells = []
    for j in range(6):
        outer = ring_ids[1]
        cells.append((0, outer[j], outer[(j + 1) % 6]))
    for i in range(2, rings + 1):
        inner, outer = ring_ids[i - 1], ring_ids[i]
        ti, to = ring_angles[i - 1], ring_angles[i]
        ni, no = len(inner), len(outer)
        a = b = 0
        while a < ni or b < no:
            next_inner = ti[a + 1] if a + 1 < ni else 2.0 * np.pi
            next_outer = to[b + 1] if b + 1 < no else 2.0 * np.pi
            if a < ni and (b >= no or next_inner <= next_outer):
                cells.append((inner[a], inner[(a + 1) % ni], outer[b % no]))
                a += 1
            else:
                cells.append((inner[a % ni], outer[b], outer[(b + 1) % no]))
                b += 1
    return Mesh(np.array(vertices), np.array(cells))


def build_immersed_mesh(g, n, inflate=0.1):
    """Background triangles lying completely inside the level-set domain ``g``.

    The background grid covers ``g.bbox`` inflated by ``inflate`` (relative,
    per side) with ``n x n`` rectangles split along one diagonal. A triangle is
    kept when every point of an order-4 barycentric lattice on it (vertices
    and edge midpoints included) satisfies ``phi <= -EPS_IN``.
    """
    n = int(n)
    if n < 1:
        raise MeshGenerationError("background grid needs n >= 1")
    x0, x1, y0, y1 = g.bbox
    dx, dy = (x1 - x0) * inflate, (y1 - y0) * inflate
    xs = np.linspace(x0 - dx, x1 + dx, n + 1)
    ys = np.linspace(y0 - dy, y1 + dy, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    bg_vertices = np.column_stack([X.ravel(), Y.ravel()])
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    v00 = jj * (n + 1) + ii
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    bg_cells = np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])

    lattice = np.array([(a, b, 4 - a - b) for a in range(5) for b in range(5 - a)], float) / 4.0
    pts = np.einsum("sl,cld->csd", lattice, bg_vertices[bg_cells])
    keep = np.all(g.value(pts) <= -EPS_IN, axis=1)
    if not np.any(keep):
        raise MeshGenerationError("no background triangle lies inside the domain")
    cells = bg_cells[keep]
    used, cells = np.unique(cells, return_inverse=True)
    cells = cells.reshape(-1, 3)
    mesh = Mesh(bg_vertices[used], cells)

    interior = mesh.interior_edges
    a, b = mesh.edge_cells[interior, 0], mesh.edge_cells[interior, 1]
    adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(mesh.n_cells, mesh.n_cells))
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise MeshGenerationError(f"immersed computational domain has {ncomp} components; "
                                  f"increase the background resolution (n={n})")
    return mesh


# -- metrics ---------------------------------------------------------------------

@dataclass
class MeshMetrics:
    """Boundary-gap ratios: per boundary edge ``h_perp``, ``H_perp``, ``r_e``."""

    edges: np.ndarray
    h_perp: np.ndarray
    H_perp: np.ndarray
    r: np.ndarray
    R: float
    gap: float
    gamma: float = field(default=0.0)


def compute_mesh_metrics(m, paths):
    """Ratios r_e = H_perp / h_perp over boundary edges, and R = max r_e.

    ``H_perp`` is the largest transfer-path length among the edge's
    quadrature points; ``gap`` is the largest path length overall.
    """
    bnd = m.boundary_edges
    missing = [int(e) for e in bnd if e not in paths.by_edge]
    if missing:
        raise PreconditionError(f"transfer paths missing for boundary edges {missing[:5]}")
    h_perp = np.array([m.edge_height(e) for e in bnd])
    H_perp = np.array([max(p.l for p in paths.by_edge[int(e)]) for e in bnd])
    r = H_perp / h_perp
    return MeshMetrics(edges=bnd, h_perp=h_perp, H_perp=H_perp, r=r,
                       R=float(r.max()) if len(r) else 0.0,
                       gap=float(H_perp.max()) if len(r) else 0.0,
                       gamma=m.shape_regularity)


# -- text format -------------------------------------------------------------------

def write_mesh(m, fh):
    """Write the line-oriented text format (17 significant digits)."""
    fh.write(f"{m.n_vertices} {m.n_cells} {m.n_edges}\n")
    for x, y in m.vertices:
        fh.write(f"{x:.17g} {y:.17g}\n")
    for i, j, k in m.cells:
        fh.write(f"{i} {j} {k}\n")
    for (a, b), (left, right) in zip(m.edges, m.edge_cells):
        fh.write(f"{a} {b} {left} {right}\n")


def read_mesh(fh):
    lines = [ln for ln in (line.strip() for line in fh) if ln]
    nv, nc, ne = (int(t) for t in lines[0].split())
    if len(lines) != 1 + nv + nc + ne:
        raise MeshGenerationError("mesh file length does not match its header")
    body = lines[1:]
    vertices = np.array([[float(t) for t in ln.split()] for ln in body[:nv]])
    cells = np.array([[int(t) for t in ln.split()] for ln in body[nv:nv + nc]], dtype=np.int64)
    rows = np.array([[int(t) for t in ln.split()] for ln in body[nv + nc:]], dtype=np.int64)
    return Mesh(vertices, cells, edges=rows[:, :2], edge_cells=rows[:, 2:])
