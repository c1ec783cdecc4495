"""Manufactured solutions, error norms, convergence rates and the drivers
behind the command line interface."""

import csv
import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, HdgError
from .geometry import custom_level_set, kidney, unit_disk, unit_square
from .hdg import HdgConfig, HdgProblem, assemble_global, export_matrix_market, reconstruct, solve
from .material import MaterialParams, apply_Ainv, lame_from_E_nu
from .meshgen import build_fitted_disk_mesh, build_immersed_mesh, build_square_mesh, compute_mesh_metrics
from .spaces import _check_degree, gauss_rule, space_tables, to_physical, triangle_rule
from .transfer import build_paths, validate_paths

log = logging.getLogger(__name__)

CSV_COLUMNS = ["level", "N_elem", "h", "R", "err_sigma", "err_rho", "err_u", "err_uhat",
               "eoc_sigma", "eoc_rho", "eoc_u", "eoc_uhat"]
ERROR_KEYS = ["sigma", "rho", "u", "uhat"]
EOC_FLOOR = 1e2 * np.finfo(float).eps


# -- manufactured solutions ------------------------------------------------------------

@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form fields; every callable maps points ``(..., 2)`` to arrays."""

    name: str
    u: Callable
    grad_u: Callable
    sigma: Callable
    rho: Callable
    f: Callable

    def g(self, x):
        return self.u(x)


def _stack2(a, b):
    return np.stack([a, b], axis=-1)


def _tensor(a11, a12, a21, a22):
    return np.stack([_stack2(a11, a12), _stack2(a21, a22)], axis=-2)


def manufactured_catalog(name, m: MaterialParams, c=1.0):
    """``paper-trig``: u = (sin pi x cos pi y, cos pi x sin pi y), rho = 0.
    ``rotational``: u = c (-y^3, x^3), a field with nonzero rotation."""
    pi = np.pi
    if name == "paper-trig":
        def u(x):
            X, Y = x[..., 0], x[..., 1]
            return _stack2(np.sin(pi * X) * np.cos(pi * Y), np.cos(pi * X) * np.sin(pi * Y))

        def grad_u(x):
            X, Y = x[..., 0], x[..., 1]
            cc = pi * np.cos(pi * X) * np.cos(pi * Y)
            ss = -pi * np.sin(pi * X) * np.sin(pi * Y)
            return _tensor(cc, ss, ss, cc)

        def f(x):
            return -2.0 * pi**2 * (m.lam + 2.0 * m.mu) * u(x)

    elif name == "rotational":
        def u(x):
            X, Y = x[..., 0], x[..., 1]
            return c * _stack2(-Y**3, X**3)

        def grad_u(x):
            X, Y = x[..., 0], x[..., 1]
            z = np.zeros_like(X)
            return c * _tensor(z, -3.0 * Y**2, 3.0 * X**2, z)

        def f(x):
            X, Y = x[..., 0], x[..., 1]
            return 2.0 * m.mu * c * _stack2(-3.0 * Y, 3.0 * X)

    else:
        raise ConfigurationError(f"unknown manufactured solution {name!r}; use paper-trig or rotational")

    def sigma(x):
        G = grad_u(x)
        return apply_Ainv(0.5 * (G + np.swapaxes(G, -1, -2)), m)

    def rho(x):
        G = grad_u(x)
        return 0.5 * (G - np.swapaxes(G, -1, -2))

    return ManufacturedSolution(name, u, grad_u, sigma, rho, f)


# -- error norms ---------------------------------------------------------------------------

def error_norms(sol, ex, chunk=256):
    """L2 errors of sigma, rho, u over the computational domain and the trace error
    (sum_K h_K ||P_M u - uhat||^2_dK)^(1/2)."""
    p = sol.problem
    mesh = p.mesh
    k = p.cfg.k
    pts, wts = triangle_rule(2 * k + 10)
    sq = {"sigma": 0.0, "rho": 0.0, "u": 0.0}
    for start in range(0, mesh.n_cells, chunk):
        cells = np.arange(start, min(mesh.n_cells, start + chunk))
        W = np.abs(p.detJ[cells])[:, None] * wts[None, :]
        s_h, u_h, r_h = sol.evaluate(cells, pts)
        x = to_physical(np.broadcast_to(pts, (len(cells),) + pts.shape), p.v0[cells], p.J[cells])
        sq["sigma"] += float(np.sum(W * np.sum((s_h - ex.sigma(x)) ** 2, axis=(-2, -1))))
        sq["rho"] += float(np.sum(W * np.sum((r_h - ex.rho(x)) ** 2, axis=(-2, -1))))
        sq["u"] += float(np.sum(W * np.sum((u_h - ex.u(x)) ** 2, axis=-1)))

    # edgewise L2 projection onto the trace space, compared with uhat
    s, w = gauss_rule(2 * k + 10)
    phi = p.tables.trace(s)  # (q, nt)
    ends = mesh.vertices[mesh.edges]  # (ne, 2, 2)
    xe = ends[:, 0, None, :] + s[None, :, None] * (ends[:, 1] - ends[:, 0])[:, None, :]
    coeff = np.einsum("q,eqi,qm->eim", w, ex.u(xe), phi)  # (1/|e|) int_e u phi_m
    diff = coeff.reshape(mesh.n_edges, -1) - sol.uhat
    per_edge = mesh.edge_lengths * np.sum(diff**2, axis=1)
    hK = mesh.cell_diameters
    uhat_sq = float(np.sum(hK[:, None] * per_edge[mesh.cell_edges]))
    out = {key: math.sqrt(v) for key, v in sq.items()}
    out["uhat"] = math.sqrt(uhat_sq)
    return out


def eoc(e0, e1, n0, n1):
    """Order against N_elem^(-1/2); ``None`` when either error is at round-off level."""
    if e0 is None or e1 is None or e0 <= EOC_FLOOR or e1 <= EOC_FLOOR or n1 <= n0:
        return None
    return math.log(e0 / e1) / math.log(math.sqrt(n1 / n0))


# -- configuration -------------------------------------------------------------------------

DOMAINS = ("square", "disk-fitted", "disk-immersed", "kidney-immersed")


@dataclass(frozen=True)
class StudyConfig:
    domain: str = "square"
    k: int = 1
    nu: float = 0.3
    E: float = 1.0
    tau: float = 1.0
    levels: int = 4
    base_resolution: int = 4
    solution: str = "paper-trig"
    out: str = "results"
    level: int = 0  # level used by single-run commands
    inflate: float = 0.1  # immersed background box margin
    export_matrix: str = ""  # optional matrix-market path for single runs

    def __post_init__(self):
        if self.domain not in DOMAINS and not self.domain.endswith("-immersed"):
            raise ConfigurationError(f"unknown domain {self.domain!r}; choose from {DOMAINS}")
        _check_degree(self.k)
        if self.levels < 1 or self.base_resolution < 1 or self.level < 0:
            raise ConfigurationError("levels and base_resolution must be positive, level non-negative")
        if self.solution not in ("paper-trig", "rotational"):
            raise ConfigurationError(f"unknown solution {self.solution!r}")
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")

    @property
    def material(self):
        return lame_from_E_nu(self.E, self.nu)


def parse_config(text):
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    types = {f.name: f.type for f in fields(StudyConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = types[key](value)
        except ValueError:
            raise ConfigurationError(f"line {lineno}: bad value {value!r} for {key}") from None
    return StudyConfig(**values)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


# -- drivers ---------------------------------------------------------------------------------

def geometry_for(domain):
    if domain == "square":
        return unit_square()
    if domain in ("disk-fitted", "disk-immersed"):
        return unit_disk()
    if domain == "kidney-immersed":
        return kidney()
    return custom_level_set(domain[: -len("-immersed")])


def build_level(cfg: StudyConfig, level):
    """Mesh, geometry and transfer paths for refinement ``level``.

    The resolution parameter (cells per side, disk rings, or background
    cells per side) is ``base_resolution * 2**level``.
    """
    n = cfg.base_resolution * 2**level
    g = geometry_for(cfg.domain)
    if cfg.domain == "square":
        mesh = build_square_mesh(n)
    elif cfg.domain == "disk-fitted":
        mesh = build_fitted_disk_mesh(n)
    else:
        mesh = build_immersed_mesh(g, n, inflate=cfg.inflate)
    paths = build_paths(mesh, g, space_tables(cfg.k))
    return mesh, g, paths


@dataclass
class LevelResult:
    level: int
    n_elem: int
    h: float
    R: float
    errors: dict
    eocs: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    paths_valid: bool = True

    def csv_row(self):
        def fmt(v):
            return "" if v is None else f"{v:.12e}"
        return ([self.level, self.n_elem, f"{self.h:.12e}", f"{self.R:.12e}"]
                + [fmt(self.errors[k]) for k in ERROR_KEYS]
                + [fmt(self.eocs.get(k)) for k in ERROR_KEYS])


def solve_level(cfg: StudyConfig, level, export_path: Optional[str] = None):
    """Build, solve and measure one level; returns ``(LevelResult, SolutionFields)``."""
    m = cfg.material
    ex = manufactured_catalog(cfg.solution, m)
    try:
        mesh, g, paths = build_level(cfg, level)
        checks = validate_paths(mesh, g, paths)
        problem = HdgProblem(mesh, m, HdgConfig(k=cfg.k, tau=cfg.tau), paths, f=ex.f, g=ex.g)
        gs = assemble_global(problem)
        if export_path:
            export_matrix_market(gs, export_path)
        uhat = solve(gs, problem.cfg)
        sol = reconstruct(problem, uhat)
    except HdgError as exc:
        if exc.args:
            exc.args = (f"level {level}: {exc.args[0]}",) + exc.args[1:]
        raise
    sol.certificates["global_residual"] = float(np.linalg.norm(gs.rhs - gs.matrix @ uhat)
                                                / max(np.linalg.norm(gs.rhs), 1e-300))
    metrics = compute_mesh_metrics(mesh, paths)
    res = LevelResult(level, mesh.n_cells, mesh.h, metrics.R, error_norms(sol, ex),
                      certificates=dict(sol.certificates), paths_valid=all(checks.values()))
    log.info("level %d: N=%d h=%.3e R=%.3e errors=%s", level, mesh.n_cells, mesh.h, metrics.R, res.errors)
    return res, sol


def run_convergence(cfg: StudyConfig, csv_path: Optional[str] = None):
    """Solve every level and attach EOCs; writes the CSV when ``csv_path`` is given."""
    results = []
    for level in range(cfg.levels):
        res, _ = solve_level(cfg, level)
        if results:
            prev = results[-1]
            res.eocs = {k: eoc(prev.errors[k], res.errors[k], prev.n_elem, res.n_elem) for k in ERROR_KEYS}
        results.append(res)
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            write_results_csv(results, fh)
    return results


def write_results_csv(results, fh):
    writer = csv.writer(fh)
    writer.writerow(CSV_COLUMNS)
    for r in results:
        writer.writerow(r.csv_row())


def read_results_csv(fh):
    rows = []
    for rec in csv.DictReader(fh):
        rows.append({k: (None if v == "" else (int(v) if k in ("level", "N_elem") else float(v)))
                     for k, v in rec.items()})
    return rows


def with_overrides(cfg: StudyConfig, **kw):
    return replace(cfg, **kw)
