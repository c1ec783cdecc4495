"""HDG discretisation of A sigma - grad u + rho = 0, div sigma = f on the
computational domain, with Dirichlet data transferred from the curved boundary.

Per cell the unknowns are X = (sigma, u, rho) ordered as

    sigma: 4 * ds tensor coefficients (component-major, row-major components)
           followed by k + 1 bubble coefficients
    u:     2 * ds  (component-major)
    rho:   ds      (rho = q [[0, 1], [-1, 0]])

and per edge the trace uhat has 2 (k + 1) coefficients (component-major) in
the orthonormal Legendre basis along the edge's global orientation.

Local equations, for all test functions (v, w, eta) on a cell K:

    (A sigma, v) + (u, div v) + (rho, v) - <uhat, v n> = 0
    (sigma, grad w) - <sigma n - tau (u - uhat), w> = -(f, w)
    (sigma, eta) = 0

Edge equations: on interior edges the sum over both cells of
<sigma n - tau (u - uhat), mu> vanishes; on boundary edges
<uhat, mu> = <g_tilde, mu>, where g_tilde involves the owner cell's sigma and
rho through the transfer-path integrals. Both kinds of edge rows only touch
a single cell's unknowns, so every cell is condensed onto its three edges.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite
from scipy.sparse.linalg import splu, spsolve

from .errors import AssemblyError, InvalidParameterError, PreconditionError, SolverError
from .material import apply_A
from .spaces import (ROTATION, cell_maps, scalar_physical_grad, space_tables, stress_basis,
                     stress_divergence, to_physical, to_reference)
from .transfer import edge_quadrature_points, transfer_row_blocks

DENSE_LIMIT = 2000

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HdgConfig:
    k: int = 1
    tau: float = 1.0
    tol: float = 1e-12
    chunk: int = 256

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidParameterError(f"stabilisation tau must be positive, got {self.tau}")
        if self.k < 1:
            raise InvalidParameterError(f"degree k must be >= 1, got {self.k}")


def zero_field(x):
    return np.zeros(np.shape(x)[:-1] + (2,))


class HdgProblem:
    """Mesh, spaces, material, data and transfer paths bundled for assembly.

    ``f`` and ``g`` map points ``(N, 2)`` to vectors ``(N, 2)``; ``g`` is
    evaluated at the far ends of the transfer paths.
    """

    def __init__(self, mesh, material, cfg, paths, f=None, g=None):
        self.mesh = mesh
        self.material = material
        self.cfg = cfg
        self.tables = space_tables(cfg.k)
        self.paths = paths
        self.f = f if f is not None else zero_field
        self.g = g if g is not None else zero_field
        t = self.tables
        self.ns, self.nu, self.nr = t.n_sigma, t.n_u, t.n_rho
        self.nl = self.ns + self.nu + self.nr
        self.nt = t.n_trace
        self.ne_dofs = 2 * self.nt
        self.v0, self.J, self.Jinv, self.detJ = cell_maps(mesh.vertices[mesh.cells])
        self._edge_geometry()
        missing = [int(e) for e in mesh.boundary_edges if int(e) not in paths.by_edge]
        if missing:
            raise PreconditionError(f"no transfer paths for boundary edges {missing[:5]}")
        self._boundary_blocks = None

    @property
    def n_global(self):
        return self.mesh.n_edges * self.ne_dofs

    def edge_dofs(self, cells):
        """Global trace dof indices of each cell's three edges, shape ``(C, 3 * 2(k+1))``."""
        base = self.mesh.cell_edges[cells] * self.ne_dofs  # (C, 3)
        return (base[:, :, None] + np.arange(self.ne_dofs)[None, None, :]).reshape(len(cells), -1)

    def _edge_geometry(self):
        m = self.mesh
        s = self.tables.gauss_points
        nc = m.n_cells
        ce = m.cell_edges
        ends = m.vertices[m.edges[ce]]  # (nc, 3, 2, 2) global orientation
        tang = ends[:, :, 1] - ends[:, :, 0]
        length = np.linalg.norm(tang, axis=-1)
        normal = np.stack([tang[..., 1], -tang[..., 0]], axis=-1) / length[..., None]
        opposite = m.vertices[m.cells]  # local edge i is opposite vertex i
        inward = np.einsum("cid,cid->ci", opposite - ends[:, :, 0], normal) > 0
        normal[inward] *= -1.0
        pts = ends[:, :, 0, None, :] + s[None, None, :, None] * tang[:, :, None, :]  # (nc, 3, q, 2)
        self.edge_length = length
        self.edge_normal = normal
        self.edge_points = pts
        self.edge_ref = to_reference(pts.reshape(nc, -1, 2), self.v0, self.Jinv).reshape(pts.shape)
        self.edge_weights = length[..., None] * self.tables.gauss_weights[None, None, :]
        self.is_boundary = m.edge_cells[ce, 1] < 0  # (nc, 3)

    # -- boundary transfer rows ------------------------------------------------------

    def boundary_blocks(self):
        """Per boundary edge: ``(M_e, Q_sigma, Q_rho, r_e)`` realising
        ``M_e uhat_e + Q_sigma c_sigma + Q_rho c_rho = r_e``."""
        if self._boundary_blocks is None:
            self._boundary_blocks = {int(e): assemble_boundary_transfer(self, int(e))
                                     for e in self.mesh.boundary_edges}
        return self._boundary_blocks


def assemble_boundary_transfer(problem, e):
    """Rows of <uhat, mu>_e = <g(xbar) - transfer integral, mu>_e for boundary edge ``e``."""
    t, mat = problem.tables, problem.material
    try:
        paths = problem.paths.by_edge[e]
    except KeyError:
        raise PreconditionError(f"no transfer paths for boundary edge {e}") from None
    if len(paths) != len(t.gauss_points):
        raise PreconditionError(f"edge {e} has {len(paths)} paths, expected {len(t.gauss_points)}")
    length = problem.mesh.edge_lengths[e]
    w = length * t.gauss_weights
    phi = t.trace(t.gauss_points)  # (q, nt)
    nt = problem.nt
    M = np.zeros((2 * nt, 2 * nt))
    mass = np.einsum("q,qm,qn->mn", w, phi, phi)
    M[:nt, :nt] = mass
    M[nt:, nt:] = mass
    Qs = np.zeros((2, nt, problem.ns))
    Qr = np.zeros((2, nt, problem.nr))
    gbar = problem.g(np.array([p.xbar for p in paths]))  # (q, 2)
    r = np.einsum("q,qm,qi->im", w, phi, gbar).reshape(-1)
    for q, path in enumerate(paths):
        if path.l == 0.0:
            continue
        Bs, Br = transfer_row_blocks(path, t, mat)
        Qs += w[q] * phi[q][None, :, None] * Bs[:, None, :]
        Qr += w[q] * phi[q][None, :, None] * Br[:, None, :]
    return M, Qs.reshape(2 * nt, -1), Qr.reshape(2 * nt, -1), r


# -- local blocks ------------------------------------------------------------------------

@dataclass
class LocalSystem:
    """Batched per-cell blocks.

    ``A X + B uhat_loc = F`` are the cell equations; ``R X + S uhat_loc = r``
    are the rows the cell contributes to its three edges' equations.
    """

    cells: np.ndarray
    A: np.ndarray
    B: np.ndarray
    F: np.ndarray
    R: np.ndarray
    S: np.ndarray
    r: np.ndarray
    # pieces reused by the certificates
    sym_terms: np.ndarray = field(default=None)


def assemble_local(problem, cells):
    """Local blocks for a batch of cells (integrals by quadrature, exact for polynomials)."""
    p = problem
    t = p.tables
    mat = p.material
    tau = p.cfg.tau
    cells = np.asarray(cells, dtype=np.int64)
    C = len(cells)
    ds, ns, nu, nr, nl, nt = t.ds, p.ns, p.nu, p.nr, p.nl, p.nt
    Jinv = p.Jinv[cells]
    absdet = np.abs(p.detJ[cells])

    # volume terms
    qp, qw = t.tri_points, t.tri_weights
    W = absdet[:, None] * qw[None, :]  # (C, P)
    S = stress_basis(t, Jinv, qp)  # (C, P, ns, 2, 2)
    AS = apply_A(S, mat)
    divS = stress_divergence(t, Jinv, qp)  # (C, P, ns, 2)
    psi = t.scalar(qp)  # (P, ds)
    gpsi = scalar_physical_grad(t, Jinv, qp)  # (C, P, ds, 2)
    skewS = S[..., 0, 1] - S[..., 1, 0]  # (C, P, ns)

    A = np.zeros((C, nl, nl))
    su, uu, ru = slice(ns, ns + nu), slice(ns, ns + nu), slice(ns + nu, nl)
    A[:, :ns, :ns] = np.einsum("cp,cpaij,cpbij->cab", W, AS, S)
    A[:, :ns, su] = np.einsum("cp,cpai,pj->caij", W, divS, psi).reshape(C, ns, nu)
    A_sr = np.einsum("cp,cpa,pj->caj", W, skewS, psi)
    A[:, :ns, ru] = A_sr
    A[:, ru, :ns] = A_sr.transpose(0, 2, 1)
    # (sigma, grad w) with w = psi_j e_i
    A[:, uu, :ns] = np.einsum("cp,cpail,cpjl->cija", W, S, gpsi).reshape(C, nu, ns)

    xq = to_physical(np.broadcast_to(qp, (C,) + qp.shape), p.v0[cells], p.J[cells])
    fq = p.f(xq.reshape(-1, 2)).reshape(C, -1, 2)
    F = np.zeros((C, nl))
    F[:, uu] = -np.einsum("cp,cpi,pj->cij", W, fq, psi).reshape(C, nu)

    # boundary-of-cell terms
    nq = len(t.gauss_points)
    eref = p.edge_ref[cells].reshape(C, 3 * nq, 2)
    Se = stress_basis(t, Jinv, eref).reshape(C, 3, nq, ns, 2, 2)
    psie = t.scalar(eref).reshape(C, 3, nq, ds)
    n = p.edge_normal[cells]  # (C, 3, 2)
    we = p.edge_weights[cells]  # (C, 3, q)
    phi = t.trace(t.gauss_points)  # (q, nt)
    Sn = np.einsum("ceqaij,cej->ceqai", Se, n)  # (C, 3, q, ns, 2)

    A[:, uu, :ns] -= np.einsum("ceq,ceqai,ceqj->cija", we, Sn, psie).reshape(C, nu, ns)
    mass_u = tau * np.einsum("ceq,ceqj,ceqk->cjk", we, psie, psie)
    A[:, ns:ns + ds, ns:ns + ds] += mass_u
    A[:, ns + ds:ns + nu, ns + ds:ns + nu] += mass_u

    ned = 2 * nt
    B = np.zeros((C, nl, 3 * ned))
    # -<uhat, v n>
    Bs = -np.einsum("ceq,ceqai,qm->caeim", we, Sn, phi)  # (C, ns, 3, 2, nt)
    B[:, :ns, :] = Bs.reshape(C, ns, 3 * ned)
    # -tau <uhat, w>
    cross = tau * np.einsum("ceq,ceqj,qm->cejm", we, psie, phi)  # (C, 3, ds, nt)
    Bw = np.zeros((C, 2, ds, 3, 2, nt))
    for i in range(2):
        Bw[:, i, :, :, i, :] = -cross.transpose(0, 2, 1, 3)
    B[:, uu, :] = Bw.reshape(C, nu, 3 * ned)

    # edge rows
    R = np.zeros((C, 3, 2, nt, nl))
    Sd = np.zeros((C, 3, 2, nt, 3, 2, nt))
    rr = np.zeros((C, 3, 2, nt))
    edge_mass = np.einsum("ceq,qm,qn->cemn", we, phi, phi)
    flux_s = np.einsum("ceq,ceqai,qm->ceima", we, Sn, phi)  # <sigma n, mu>
    for le in range(3):
        interior = ~p.is_boundary[cells, le]
        R[interior, le, :, :, :ns] = flux_s[interior, le]
        for i in range(2):
            R[interior, le, i, :, ns + i * ds:ns + (i + 1) * ds] = -cross[interior, le].transpose(0, 2, 1)
            Sd[interior, le, i, :, le, i, :] = tau * edge_mass[interior, le]
        bidx = np.nonzero(~interior)[0]
        if len(bidx):
            blocks = p.boundary_blocks()
            for ci in bidx:
                e = int(p.mesh.cell_edges[cells[ci], le])
                M, Qs, Qr, r_e = blocks[e]
                R[ci, le, :, :, :ns] = Qs.reshape(2, nt, ns)
                R[ci, le, :, :, ns + nu:] = Qr.reshape(2, nt, nr)
                Sd[ci, le, :, :, le, :, :] = M.reshape(2, nt, 2, nt)
                rr[ci, le] = r_e.reshape(2, nt)

    sym_terms = np.stack([np.einsum("cp,cpa,pj->caj", W, S[..., 0, 1], psi),
                          np.einsum("cp,cpa,pj->caj", W, S[..., 1, 0], psi)], axis=1)
    return LocalSystem(cells=cells, A=A, B=B, F=F, R=R.reshape(C, 3 * ned, nl),
                       S=Sd.reshape(C, 3 * ned, 3 * ned), r=rr.reshape(C, 3 * ned),
                       sym_terms=sym_terms)


def _local_solve(local, rhs):
    if rhs.ndim == 2:
        return _local_solve(local, rhs[:, :, None])[:, :, 0]
    try:
        return np.linalg.solve(local.A, rhs)
    except np.linalg.LinAlgError:
        for i, c in enumerate(local.cells):
            try:
                np.linalg.solve(local.A[i], rhs[i])
            except np.linalg.LinAlgError:
                raise AssemblyError(f"singular local matrix on cell {int(c)}", cell=int(c)) from None
        raise


def _local_operators(local):
    """``(A^-1 B, A^-1 F)`` per cell, shared by condensation and back-substitution."""
    rhs = np.concatenate([local.B, local.F[:, :, None]], axis=2)
    sol = _local_solve(local, rhs)
    return sol[:, :, :-1], sol[:, :, -1]


def condense(local):
    """Eliminate (sigma, u, rho) per cell: returns ``(K_loc, rhs_loc)`` on the cell's edge dofs."""
    AinvB, AinvF = _local_operators(local)
    K = local.S - np.einsum("cij,cjk->cik", local.R, AinvB)
    b = local.r - np.einsum("cij,cj->ci", local.R, AinvF)
    return K, b


@dataclass
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: np.ndarray  # (n_edges, 2(k+1))


def _chunks(n, size):
    for start in range(0, n, size):
        yield np.arange(start, min(n, start + size))


def assemble_global(problem):
    rows, cols, vals = [], [], []
    rhs = np.zeros(problem.n_global)
    for cells in _chunks(problem.mesh.n_cells, problem.cfg.chunk):
        K, b = condense(assemble_local(problem, cells))
        dofs = problem.edge_dofs(cells)
        rows.append(np.repeat(dofs, dofs.shape[1], axis=1).ravel())
        cols.append(np.tile(dofs, (1, dofs.shape[1])).ravel())
        vals.append(K.ravel())
        np.add.at(rhs, dofs.ravel(), b.ravel())
    n = problem.n_global
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n)).tocsr()
    mat.sum_duplicates()
    dof_map = np.arange(n).reshape(problem.mesh.n_edges, problem.ne_dofs)
    return GlobalSystem(mat, rhs, dof_map)


def rounding_floor(A, x, b):
    """Smallest relative residual ``||b - A x|| / ||b||`` float64 can certify:
    10 eps ||(|A| |x| + |b|)|| / ||b||."""
    return 10.0 * np.finfo(float).eps * np.linalg.norm(abs(A) @ np.abs(x) + np.abs(b)) / np.linalg.norm(b)


def solve(gs, cfg, refinements=3):
    """Row-equilibrated LU solve with iterative refinement.

    Boundary rows are O(|e|) while interior flux rows grow like lambda |e|,
    so rows are scaled to unit max-norm before factorising. The relative
    residual must reach ``cfg.tol``, or the rounding floor of ``b - A x`` when
    that is larger (cancellation in A x grows with lambda / mu).
    """
    A, b = gs.matrix, gs.rhs
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    row_max = abs(A).max(axis=1).toarray().ravel()
    if np.any(row_max == 0.0):
        raise SolverError("global matrix has an empty row")
    As, bs = (sp.diags(1.0 / row_max) @ A).tocsr(), b / row_max
    bsnorm = np.linalg.norm(bs)
    try:
        if A.shape[0] < DENSE_LIMIT:
            dense = As.toarray()
            solver = lambda rhs: np.linalg.solve(dense, rhs)
        else:
            lu = splu(As.tocsc())
            solver = lu.solve
        x = solver(bs)
        for _ in range(refinements):
            res = bs - As @ x
            if np.linalg.norm(res) <= 0.1 * cfg.tol * bsnorm:
                break
            x = x + solver(res)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"factorisation failed: {exc}") from None
    rel = np.linalg.norm(b - A @ x) / bnorm
    if not np.isfinite(rel):
        raise SolverError("non-finite solution", residual=rel)
    if rel > cfg.tol:
        floor = rounding_floor(A, x, b)
        if rel > floor:
            raise SolverError(f"relative residual {rel:.3e} exceeds tolerance {cfg.tol:.1e}", residual=rel)
        log.warning("relative residual %.3e above tolerance %.1e but within the rounding floor %.3e",
                    rel, cfg.tol, floor)
    return x


# -- reconstruction ------------------------------------------------------------------------

@dataclass
class SolutionFields:
    problem: HdgProblem
    sigma: np.ndarray  # (nc, n_sigma)
    u: np.ndarray  # (nc, 2 ds)
    rho: np.ndarray  # (nc, ds)
    uhat: np.ndarray  # (n_edges, 2(k+1))
    certificates: dict = field(default_factory=dict)

    def evaluate(self, cells, ref_pts):
        """Fields at reference points ``ref_pts (C, P, 2)`` of ``cells``.

        Returns ``(sigma (C,P,2,2), u (C,P,2), rho (C,P,2,2))``.
        """
        p = self.problem
        t = p.tables
        S = stress_basis(t, p.Jinv[cells], ref_pts)
        psi = t.scalar(ref_pts)
        if psi.ndim == 2:
            psi = np.broadcast_to(psi, (len(cells),) + psi.shape)
        sigma = np.einsum("ca,cpaij->cpij", self.sigma[cells], S)
        u = np.einsum("cij,cpj->cpi", self.u[cells].reshape(len(cells), 2, t.ds), psi)
        q = np.einsum("cj,cpj->cp", self.rho[cells], psi)
        return sigma, u, q[..., None, None] * ROTATION

    def numerical_flux(self):
        """sigma_hat n = sigma n - tau (u - uhat) at every cell's edge quadrature points, ``(nc, 3, q, 2)``."""
        p = self.problem
        t = p.tables
        nc = p.mesh.n_cells
        nq = len(t.gauss_points)
        cells = np.arange(nc)
        sigma, u, _ = self.evaluate(cells, p.edge_ref.reshape(nc, 3 * nq, 2))
        sigma = sigma.reshape(nc, 3, nq, 2, 2)
        u = u.reshape(nc, 3, nq, 2)
        phi = t.trace(t.gauss_points)
        uh = self.uhat[p.mesh.cell_edges].reshape(nc, 3, 2, p.nt)
        uhq = np.einsum("ceim,qm->ceqi", uh, phi)
        return np.einsum("ceqij,cej->ceqi", sigma, p.edge_normal) - p.cfg.tau * (u - uhq)


def reconstruct(problem, uhat):
    """Back-substitute the cell unknowns and evaluate the post-solve certificates."""
    p = problem
    nc = p.mesh.n_cells
    X = np.zeros((nc, p.nl))
    local_res, local_scale = 0.0, 0.0
    sym_res, sym_scale = 0.0, 0.0
    edge_res = np.zeros(p.n_global)
    edge_scale = np.zeros(p.n_global)
    for cells in _chunks(nc, p.cfg.chunk):
        loc = assemble_local(p, cells)
        dofs = p.edge_dofs(cells)
        ul = uhat[dofs]
        AinvB, AinvF = _local_operators(loc)
        Xc = AinvF - np.einsum("cij,cj->ci", AinvB, ul)
        X[cells] = Xc
        AX = np.einsum("cij,cj->ci", loc.A, Xc)
        BU = np.einsum("cij,cj->ci", loc.B, ul)
        local_res = max(local_res, np.abs(AX + BU - loc.F).max(initial=0.0))
        local_scale = max(local_scale, np.abs(loc.A * Xc[:, None, :]).max(initial=0.0),
                          np.abs(loc.F).max(initial=0.0))
        sig = Xc[:, :p.ns]
        t12 = np.einsum("ca,caj->cj", sig, loc.sym_terms[:, 0])
        t21 = np.einsum("ca,caj->cj", sig, loc.sym_terms[:, 1])
        sym_res = max(sym_res, np.abs(t12 - t21).max(initial=0.0))
        sym_scale = max(sym_scale, np.abs(t12).max(initial=0.0), np.abs(t21).max(initial=0.0))
        RX = np.einsum("cij,cj->ci", loc.R, Xc)
        SU = np.einsum("cij,cj->ci", loc.S, ul)
        np.add.at(edge_res, dofs.ravel(), (RX + SU - loc.r).ravel())
        contrib = np.maximum(np.maximum(np.abs(RX), np.abs(SU)), np.abs(loc.r))
        np.maximum.at(edge_scale, dofs.ravel(), contrib.ravel())

    uhat2 = uhat.reshape(p.mesh.n_edges, p.ne_dofs)
    interior = p.mesh.interior_edges
    boundary = p.mesh.boundary_edges
    res2 = edge_res.reshape(p.mesh.n_edges, -1)
    scale2 = edge_scale.reshape(p.mesh.n_edges, -1)

    def rel(res, scale):
        res = float(np.abs(res).max(initial=0.0))
        scale = float(np.max(scale, initial=0.0))
        return res / scale if scale > 0 else res

    certificates = {
        "local_equations": local_res / local_scale if local_scale > 0 else local_res,
        "weak_symmetry": sym_res / sym_scale if sym_scale > 0 else sym_res,
        "interior_flux": rel(res2[interior], scale2[interior]),
        "boundary_rows": rel(res2[boundary], scale2[boundary]),
    }
    ds = p.tables.ds
    return SolutionFields(problem=p, sigma=X[:, :p.ns], u=X[:, p.ns:p.ns + 2 * ds],
                          rho=X[:, p.ns + 2 * ds:], uhat=uhat2, certificates=certificates)


def solve_problem(problem):
    """Assemble, condense, solve and reconstruct."""
    gs = assemble_global(problem)
    uhat = solve(gs, problem.cfg)
    sol = reconstruct(problem, uhat)
    sol.certificates["global_residual"] = (np.linalg.norm(gs.rhs - gs.matrix @ uhat)
                                           / max(np.linalg.norm(gs.rhs), 1e-300))
    return sol


def solve_monolithic(problem):
    """Solve the uncondensed system in all unknowns at once (reference route)."""
    p = problem
    nc = p.mesh.n_cells
    nX = nc * p.nl
    n = nX + p.n_global
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for cells in _chunks(nc, p.cfg.chunk):
        loc = assemble_local(p, cells)
        xd = cells[:, None] * p.nl + np.arange(p.nl)[None, :]
        ud = nX + p.edge_dofs(cells)
        for blk, r_idx, c_idx in [(loc.A, xd, xd), (loc.B, xd, ud), (loc.R, ud, xd), (loc.S, ud, ud)]:
            rows.append(np.repeat(r_idx, c_idx.shape[1], axis=1).ravel())
            cols.append(np.tile(c_idx, (1, r_idx.shape[1])).ravel())
            vals.append(blk.ravel())
        rhs[xd.ravel()] += loc.F.ravel()
        np.add.at(rhs, ud.ravel(), loc.r.ravel())
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n)).tocsc()
    x = spsolve(mat, rhs)
    X = x[:nX].reshape(nc, p.nl)
    ds = p.tables.ds
    return SolutionFields(problem=p, sigma=X[:, :p.ns], u=X[:, p.ns:p.ns + 2 * ds],
                          rho=X[:, p.ns + 2 * ds:], uhat=x[nX:].reshape(p.mesh.n_edges, p.ne_dofs))


def export_matrix_market(gs, path):
    """Write the condensed global matrix in matrix-market coordinate format."""
    mmwrite(path, gs.matrix)
