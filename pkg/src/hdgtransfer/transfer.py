"""Transfer paths from the computational boundary to the physical boundary.

For each quadrature point x on a boundary edge, a straight segment x -> xbar
with xbar on the curved boundary carries the Dirichlet datum back to x:

    g_tilde(x) = g(xbar) - int_0^l (A sigma + rho)(x + s t) t ds,

with sigma and rho the owner cell's polynomials evaluated outside the cell.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, PathConstructionError
from .geometry import closest_point, ray_boundary_intersection
from .material import apply_A
from .spaces import ROTATION, cell_maps, stress_basis, to_reference

ON_BOUNDARY_TOL = 1e-12
N_SEGMENT_SAMPLES = 16
# fallback ray directions (degrees from the edge normal), tried shortest path first
_FAN_ANGLES = np.arange(-87.5, 87.6, 2.5)


@dataclass
class TransferPath:
    edge: int
    qp: int
    x: np.ndarray
    xbar: np.ndarray
    l: float
    t: np.ndarray
    owner_cell: int
    cell_vertices: np.ndarray
    rule: str = "closest-point"


@dataclass
class TransferPathSet:
    by_edge: dict
    non_crossing: bool = True
    crossings: list = field(default_factory=list)
    valid: bool = True

    def __iter__(self):
        for e in sorted(self.by_edge):
            yield from self.by_edge[e]

    def __len__(self):
        return sum(len(v) for v in self.by_edge.values())

    @property
    def max_length(self):
        return max((p.l for p in self), default=0.0)


def edge_quadrature_points(mesh, e, s):
    a, b = mesh.vertices[mesh.edges[e]]
    return a[None, :] + np.asarray(s)[:, None] * (b - a)[None, :]


# -- validity checks ---------------------------------------------------------------

def _segment_samples(x, xbar):
    s = np.arange(1, N_SEGMENT_SAMPLES + 1) / (N_SEGMENT_SAMPLES + 1.0)
    return x[None, :] + s[:, None] * (xbar - x)[None, :]


def path_is_valid(mesh, g, x, xbar):
    """Segment leaves the closed computational domain and stays inside the physical one."""
    pts = _segment_samples(x, xbar)
    if np.any(mesh.contains(pts, tol=1e-12)):
        return False
    return bool(np.all(g.value(pts) <= ON_BOUNDARY_TOL))


def segments_cross(p0, p1, q0, q1, tol=1e-12):
    """True if segments p0p1 and q0q1 meet anywhere except at their common end on the boundary."""
    r, s = p1 - p0, q1 - q0
    denom = r[0] * s[1] - r[1] * s[0]
    qp = q0 - p0
    lr, ls = np.linalg.norm(r), np.linalg.norm(s)
    if lr == 0.0 or ls == 0.0:
        return False
    if abs(denom) <= tol * lr * ls:
        # parallel: crossing only if collinear and overlapping
        if abs(qp[0] * r[1] - qp[1] * r[0]) > tol * lr * max(np.linalg.norm(qp), 1.0):
            return False
        t0 = (qp @ r) / (lr * lr)
        t1 = t0 + (s @ r) / (lr * lr)
        lo, hi = min(t0, t1), max(t0, t1)
        return hi > tol and lo < 1.0 - tol
    alpha = (qp[0] * s[1] - qp[1] * s[0]) / denom
    beta = (qp[0] * r[1] - qp[1] * r[0]) / denom
    if not (-tol <= alpha <= 1.0 + tol and -tol <= beta <= 1.0 + tol):
        return False
    return not (alpha >= 1.0 - 1e-9 and beta >= 1.0 - 1e-9)


# -- construction -----------------------------------------------------------------------

def _rotate(v, degrees):
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _vertex_directions(mesh, by_vertex):
    """Unit pseudo-normal at each boundary vertex (mean of its edges' outward normals)."""
    out = {}
    for v, edges in by_vertex.items():
        d = mesh.edge_normals[edges].sum(axis=0)
        nd = np.linalg.norm(d)
        out[v] = d / nd if len(edges) == 2 and nd > 1e-12 else None
    return out


def _ray(g, x, d, s_max):
    try:
        return ray_boundary_intersection(g, x, d, s_max)[1]
    except GeometryError:
        return None


def _candidate_paths(g, x, n_e, s_max, interp_dir, interp_first):
    """Yield ``(xbar, rule)`` candidates in order of preference."""
    def interpolated():
        if interp_dir is not None:
            xbar = _ray(g, x, interp_dir, s_max)
            if xbar is not None:
                yield xbar, "interpolated-ray"

    if interp_first:
        yield from interpolated()
    try:
        yield closest_point(g, x), "closest-point"
    except GeometryError:
        pass
    xbar = _ray(g, x, n_e, s_max)
    if xbar is not None:
        yield xbar, "normal-ray"
    if not interp_first:
        yield from interpolated()
    fan = [_ray(g, x, _rotate(n_e, a), s_max) for a in _FAN_ANGLES if a != 0.0]
    fan = [xb for xb in fan if xb is not None]
    for xbar in sorted(fan, key=lambda xb: np.linalg.norm(xb - x)):
        yield xbar, "fan-ray"


def build_paths(mesh, g, tables, max_rounds=4):
    """Transfer paths for every boundary-edge quadrature point.

    Candidates, in order: the closest-point projection, a ray along the
    outward edge normal, a ray along the direction interpolated between the
    pseudo-normals at the edge's vertices, and a fan of rays around the
    normal ordered by path length. The first candidate whose segment lies
    outside the computational domain and crosses no accepted path of the
    same edge or of a boundary edge sharing a vertex wins; as a last resort
    the path aims between two accepted endpoints. If some edge has no admissible candidate, it
    and its neighbours are rebuilt with the interpolated ray tried first.
    Points already on the boundary get a zero-length path with ``t = n_e``.
    """
    by_vertex = _boundary_edges_by_vertex(mesh)
    vdir = _vertex_directions(mesh, by_vertex)
    prefer = set()
    for _ in range(max_rounds):
        try:
            paths = _build_paths_once(mesh, g, tables, by_vertex, vdir, prefer)
        except PathConstructionError as exc:
            grown = prefer | {f for v in mesh.edges[exc.edge] for f in by_vertex[int(v)]}
            if grown == prefer:
                raise
            prefer = grown
            continue
        certify_non_crossing(mesh, paths)
        return paths
    raise PathConstructionError("transfer path construction did not settle", edge=None)


def _gap_target(mesh, g, x, others):
    """Aim between already accepted endpoints: closest points of their pairwise midpoints."""
    ends = [p.xbar for p in others]
    targets = []
    for i in range(len(ends)):
        for j in range(i + 1, len(ends)):
            try:
                targets.append(closest_point(g, 0.5 * (ends[i] + ends[j])))
            except GeometryError:
                continue
    for xbar in sorted(targets, key=lambda xb: np.linalg.norm(xb - x)):
        if not path_is_valid(mesh, g, x, xbar):
            continue
        if any(segments_cross(x, xbar, p.x, p.xbar) for p in others):
            continue
        return xbar, "gap-target"
    return None


def _build_paths_once(mesh, g, tables, by_vertex, vdir, prefer):
    s_q = tables.gauss_points
    x0, x1, y0, y1 = g.bbox
    s_max = 2.0 * np.hypot(x1 - x0, y1 - y0)
    by_edge = {}
    for e in mesh.boundary_edges:
        e = int(e)
        owner = int(mesh.edge_cells[e, 0])
        n_e = mesh.edge_normals[e]
        tri = mesh.vertices[mesh.cells[owner]]
        da, db = (vdir[int(v)] for v in mesh.edges[e])
        accepted = []
        neighbours = [p for v in mesh.edges[e] for f in by_vertex[int(v)]
                      if f != e and f in by_edge for p in by_edge[f] if p.l > 0]
        for q, x in enumerate(edge_quadrature_points(mesh, e, s_q)):
            if abs(g.phi(x)) <= ON_BOUNDARY_TOL:
                accepted.append(TransferPath(e, q, x, x.copy(), 0.0, n_e.copy(), owner, tri, "on-boundary"))
                continue
            interp = None
            if da is not None and db is not None:
                d = (1.0 - s_q[q]) * da + s_q[q] * db
                interp = d / np.linalg.norm(d)
            chosen = None
            for xbar, rule in _candidate_paths(g, x, n_e, s_max, interp, e in prefer):
                if not path_is_valid(mesh, g, x, xbar):
                    continue
                if any(segments_cross(x, xbar, p.x, p.xbar) for p in accepted if p.l > 0):
                    continue
                if any(segments_cross(x, xbar, p.x, p.xbar) for p in neighbours):
                    continue
                chosen = (xbar, rule)
                break
            if chosen is None:
                chosen = _gap_target(mesh, g, x, [p for p in accepted if p.l > 0] + neighbours)
            if chosen is None:
                raise PathConstructionError(f"no valid transfer path for edge {e}, quadrature point {q} at {x}",
                                            edge=e, point=x)
            xbar, rule = chosen
            d = xbar - x
            l = float(np.linalg.norm(d))
            accepted.append(TransferPath(e, q, x, xbar, l, d / l, owner, tri, rule))
        by_edge[e] = accepted
    return TransferPathSet(by_edge)


def _boundary_edges_by_vertex(mesh):
    by_vertex = {}
    for e in mesh.boundary_edges:
        for v in mesh.edges[e]:
            by_vertex.setdefault(int(v), []).append(int(e))
    return by_vertex


def certify_non_crossing(mesh, paths):
    """Pairwise crossing test within each edge family and its boundary neighbours."""
    bnd = [int(e) for e in mesh.boundary_edges]
    by_vertex = _boundary_edges_by_vertex(mesh)
    crossings = []
    for e in bnd:
        family = set()
        for v in mesh.edges[e]:
            family.update(by_vertex[int(v)])
        mine = [p for p in paths.by_edge[e] if p.l > 0]
        others = [p for f in sorted(family) if f >= e for p in paths.by_edge[f] if p.l > 0]
        for p in mine:
            for q in others:
                if q is p or (q.edge == e and q.qp <= p.qp):
                    continue
                if segments_cross(p.x, p.xbar, q.x, q.xbar):
                    crossings.append(((p.edge, p.qp), (q.edge, q.qp)))
    paths.crossings = crossings
    paths.non_crossing = not crossings
    return paths.non_crossing


def validate_paths(mesh, g, paths):
    """Recheck every certificate; returns a dict of booleans."""
    lengths = all(abs(np.linalg.norm(p.xbar - p.x) - p.l) <= 1e-13 * max(1.0, p.l) for p in paths)
    tangents = all(p.l == 0 or abs(p.t @ (p.xbar - p.x) - p.l) <= 1e-13 for p in paths)
    on_gamma = all(abs(g.phi(p.xbar)) <= 1e-10 for p in paths)
    outside = all(p.l == 0 or path_is_valid(mesh, g, p.x, p.xbar) for p in paths)
    counts = all(len(paths.by_edge.get(int(e), ())) > 0 for e in mesh.boundary_edges)
    non_crossing = certify_non_crossing(mesh, paths)
    out = {"lengths": lengths, "tangents": tangents, "on_boundary": on_gamma,
           "outside_domain": outside, "complete": counts, "non_crossing": non_crossing}
    paths.valid = all(out.values())
    return out


# -- line-integral moments ----------------------------------------------------------------

def _segment_points(path, tables):
    s, w = tables.gauss_points, tables.gauss_weights
    pts = path.x[None, :] + (path.l * s)[:, None] * path.t[None, :]
    return pts, path.l * w


def _basis_on_segment(path, tables):
    pts, w = _segment_points(path, tables)
    v0, J, Jinv, _ = cell_maps(path.cell_vertices[None])
    ref = to_reference(pts[None], v0, Jinv)
    S = stress_basis(tables, Jinv, ref)[0]  # (P, ns, 2, 2)
    psi = tables.scalar(ref[0])  # (P, ds)
    return S, psi, w


def segment_moment(path, coeffs_sigma, coeffs_rho, m, tables):
    """int_0^l (A sigma_h + rho_h)(x + s t) t ds for the owner cell's fields."""
    if path.l == 0.0:
        return np.zeros(2)
    S, psi, w = _basis_on_segment(path, tables)
    sigma = np.einsum("a,paij->pij", np.asarray(coeffs_sigma, float), S)
    rho = (psi @ np.asarray(coeffs_rho, float))[:, None, None] * ROTATION
    integrand = np.einsum("pij,j->pi", apply_A(sigma, m) + rho, path.t)
    return w @ integrand


def transfer_row_blocks(path, tables, m):
    """Matrices with ``B_sigma @ c_sigma + B_rho @ c_rho == segment_moment(...)``."""
    if path.l == 0.0:
        return np.zeros((2, tables.n_sigma)), np.zeros((2, tables.n_rho))
    S, psi, w = _basis_on_segment(path, tables)
    AS = apply_A(S, m)
    B_sigma = np.einsum("p,paij,j->ia", w, AS, path.t)
    Jt = ROTATION @ path.t
    B_rho = np.einsum("p,pq,i->iq", w, psi, Jt)
    return B_sigma, B_rho


def dump_paths_csv(paths, fh):
    writer = csv.writer(fh)
    writer.writerow(["edge", "qp", "x0", "y0", "x1", "y1", "l"])
    for p in paths:
        writer.writerow([p.edge, p.qp, f"{p.x[0]:.17g}", f"{p.x[1]:.17g}",
                         f"{p.xbar[0]:.17g}", f"{p.xbar[1]:.17g}", f"{p.l:.17g}"])
