"""Per-boundary-edge constants measuring how far the owner cell's polynomials
are extrapolated: r_e, C_ext, C_inv, C_tr, and the global ratio R."""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .meshgen import compute_mesh_metrics
from .spaces import cell_maps, stress_basis, stress_gradient, to_reference

R_MIN = 1e-14


@dataclass
class EdgeConstants:
    edge: int
    r_e: float
    C_ext: float  # nan when the edge is skipped (r_e < R_MIN)
    C_inv: float
    C_tr: float


def max_generalized_eigenvalue(num, den, rel_cut=1e-12):
    """Largest lambda with num x = lambda den x on the range of ``den``.

    ``den`` may be singular (e.g. linearly dependent spanning sets); its
    near-null directions are dropped before the reduced pencil is solved.
    """
    num = 0.5 * (num + num.T)
    den = 0.5 * (den + den.T)
    w, V = eigh(den)
    keep = w > rel_cut * w.max()
    W = V[:, keep] / np.sqrt(w[keep])
    return float(np.linalg.eigvalsh(W.T @ num @ W).max())


def _eta_basis(tables, Jinv, ref, n):
    """sigma n for every stress basis function, shape ``(P, n_sigma, 2)``."""
    S = stress_basis(tables, Jinv[None], ref[None])[0]
    return np.einsum("paij,j->pai", S, n)


def _gram(vals, w):
    return np.einsum("p,pai,pbi->ab", w, vals, vals)


def edge_constants(mesh, e, paths, tables):
    """Constants for boundary edge ``e``; ``paths`` may be ``None`` (then C_ext is skipped)."""
    e = int(e)
    owner = int(mesh.edge_cells[e, 0])
    tri = mesh.vertices[mesh.cells[owner]]
    v0, J, Jinv, det = cell_maps(tri[None])
    n_e = mesh.edge_normals[e]
    h_perp = mesh.edge_height(e)
    length = mesh.edge_lengths[e]

    qp, qw = tables.tri_points, tables.tri_weights
    wK = abs(det[0]) * qw
    eta = _eta_basis(tables, Jinv[0], qp, n_e)
    G_K = _gram(eta, wK)

    dS = stress_gradient(tables, Jinv, qp[None])[0]  # (P, ns, 2, 2, 2)
    deta = np.einsum("paijl,j,l->pai", dS, n_e, n_e)
    C_inv = h_perp * np.sqrt(max_generalized_eigenvalue(_gram(deta, wK), G_K))

    # trace inequality on scalar P_k: ||p||_e <= C_tr |e|^{-1/2} ||p||_K
    psi_K = tables.scalar(qp)
    a, b = mesh.vertices[mesh.edges[e]]
    xe = a[None, :] + tables.gauss_points[:, None] * (b - a)[None, :]
    psi_e = tables.scalar(to_reference(xe[None], v0, Jinv)[0])
    M_K = np.einsum("p,pa,pb->ab", wK, psi_K, psi_K)
    M_e = np.einsum("p,pa,pb->ab", length * tables.gauss_weights, psi_e, psi_e)
    C_tr = np.sqrt(length * max_generalized_eigenvalue(M_e, M_K))

    r_e, C_ext = 0.0, float("nan")
    if paths is not None and e in paths.by_edge:
        plist = paths.by_edge[e]
        r_e = max(p.l for p in plist) / h_perp
        if r_e >= R_MIN:
            xs, ws = _swept_rule(plist, tables, length, n_e)
            eta_ext = _eta_basis(tables, Jinv[0], to_reference(xs[None], v0, Jinv)[0], n_e)
            ratio = max_generalized_eigenvalue(_gram(eta_ext, ws), G_K)
            C_ext = np.sqrt(ratio) / np.sqrt(r_e)
    return EdgeConstants(e, float(r_e), float(C_ext), float(C_inv), float(C_tr))


def _swept_rule(plist, tables, length, n_e):
    s, w = tables.gauss_points, tables.gauss_weights
    pts, wts = [], []
    for p, we in zip(plist, w):
        if p.l == 0.0:
            continue
        pts.append(p.x[None, :] + (p.l * s)[:, None] * p.t[None, :])
        wts.append(length * we * p.l * abs(p.t @ n_e) * w)
    if not pts:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(pts), np.concatenate(wts)


def swept_area(plist, tables, length, n_e):
    """Area of the swept region by the same rule (integral of 1)."""
    return float(_swept_rule(plist, tables, length, n_e)[1].sum())


def diagnostics_constants(mesh, paths, tables):
    """Constants for every boundary edge plus the global ratio ``R``."""
    rows = [edge_constants(mesh, e, paths, tables) for e in mesh.boundary_edges]
    R = compute_mesh_metrics(mesh, paths).R if paths is not None else 0.0
    return rows, R


def write_diagnostics_csv(rows, fh):
    writer = csv.writer(fh)
    writer.writerow(["edge", "r_e", "C_ext", "C_inv", "C_tr"])
    for r in rows:
        c_ext = "" if np.isnan(r.C_ext) else f"{r.C_ext:.12g}"
        writer.writerow([r.edge, f"{r.r_e:.12g}", c_ext, f"{r.C_inv:.12g}", f"{r.C_tr:.12g}"])
