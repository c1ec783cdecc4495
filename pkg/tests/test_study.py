import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hdgtransfer.errors import ConfigurationError
from hdgtransfer.hdg import SolutionFields
from hdgtransfer.material import lame_from_E_nu
from hdgtransfer.study import (
    CSV_COLUMNS, EOC_FLOOR, LevelResult, StudyConfig, build_level, eoc, error_norms, manufactured_catalog,
    parse_config, read_results_csv, run_convergence, solve_level, with_overrides, write_results_csv)

MAT = lame_from_E_nu(1.0, 0.3)


def fd_divergence(sigma, x, h=1e-5):
    dx = (sigma(x + [h, 0]) - sigma(x - [h, 0])) / (2 * h)
    dy = (sigma(x + [0, h]) - sigma(x - [0, h])) / (2 * h)
    return dx[..., :, 0] + dy[..., :, 1]


def interpolated_fields(cfg, level, ex):
    """SolutionFields holding the exact polynomial fields (L2 projections are exact for them)."""
    from hdgtransfer.hdg import HdgConfig, HdgProblem
    from hdgtransfer.spaces import stress_basis, to_physical
    mesh, g, paths = build_level(cfg, level)
    p = HdgProblem(mesh, cfg.material, HdgConfig(k=cfg.k), paths)
    t = p.tables
    pts, w = t.tri_points, t.tri_weights
    nc = mesh.n_cells
    x = to_physical(np.broadcast_to(pts, (nc,) + pts.shape), p.v0, p.J)
    S = stress_basis(t, p.Jinv, pts)
    psi = t.scalar(pts)
    cs = np.linalg.solve(np.einsum("p,cpaij,cpbij->cab", w, S, S), np.einsum("p,cpaij,cpij->ca", w, S, ex.sigma(x))[..., None])[..., 0]
    cu = np.einsum("p,pj,cpi->cij", w, psi, ex.u(x)).reshape(nc, -1)
    cr = np.einsum("p,pj,cp->cj", w, psi, ex.rho(x)[..., 0, 1])
    s, wq = t.gauss_points, t.gauss_weights
    phi = t.trace(s)
    ends = mesh.vertices[mesh.edges]
    xe = ends[:, 0, None, :] + s[None, :, None] * (ends[:, 1] - ends[:, 0])[:, None, :]
    uhat = np.einsum("q,eqi,qm->eim", wq, ex.u(xe), phi).reshape(mesh.n_edges, -1)
    return SolutionFields(p, cs, cu, cr, uhat)


class TestCatalog:
    def test_paper_trig_source(self):
        ex = manufactured_catalog("paper-trig", MAT)
        x = np.array([[0.3, 0.7], [-0.2, 0.45]])
        X, Y = x[:, 0], x[:, 1]
        u = np.column_stack([np.sin(np.pi * X) * np.cos(np.pi * Y), np.cos(np.pi * X) * np.sin(np.pi * Y)])
        np.testing.assert_allclose(ex.u(x), u, atol=1e-15)
        np.testing.assert_allclose(ex.f(x), -2 * np.pi**2 * (MAT.lam + 2 * MAT.mu) * u, atol=1e-13)
        np.testing.assert_array_equal(ex.g(x), ex.u(x))

    def test_paper_trig_rotation_vanishes(self, rng):
        ex = manufactured_catalog("paper-trig", MAT)
        x = rng.uniform(-1, 1, size=(50, 2))
        assert np.abs(ex.rho(x)).max() <= 1e-14
        G = ex.grad_u(x)
        np.testing.assert_allclose(G[:, 0, 1], -np.pi * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]), atol=1e-14)

    def test_rotational(self, rng):
        c = 0.7
        ex = manufactured_catalog("rotational", MAT, c=c)
        x = rng.uniform(-1, 1, size=(50, 2))
        r = ex.rho(x)
        np.testing.assert_allclose(r[:, 0, 1], c * (-3 * x[:, 1] ** 2 - 3 * x[:, 0] ** 2) / 2, atol=1e-14)
        np.testing.assert_allclose(r + np.swapaxes(r, 1, 2), 0.0, atol=0)
        assert np.all(np.abs(r[:, 0, 1]) > 0)

    @pytest.mark.parametrize("name", ["paper-trig", "rotational"])
    @pytest.mark.parametrize("nu", [0.3, 0.4999])
    def test_source_is_divergence(self, name, nu, rng):
        m = lame_from_E_nu(1.0, nu)
        ex = manufactured_catalog(name, m)
        x = rng.uniform(-1, 1, size=(100, 2))
        f = ex.f(x)
        np.testing.assert_allclose(fd_divergence(ex.sigma, x), f, rtol=1e-6, atol=1e-6 * np.abs(f).max())

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            manufactured_catalog("gaussian", MAT)


class TestEoc:
    def test_formula(self):
        assert eoc(1.0, 0.25, 100, 400) == pytest.approx(2.0)
        assert eoc(1.0, 0.125, 8, 32) == pytest.approx(3.0)

    def test_floor_and_order(self):
        assert eoc(1e-20, 1e-21, 10, 40) is None
        assert eoc(1.0, 0.5, 40, 40) is None
        assert eoc(EOC_FLOOR * 0.5, 1.0, 1, 4) is None

    @given(e0=st.floats(1e-8, 1e3), ratio=st.floats(1.01, 1e3), scale=st.floats(1e-3, 1e3),
           n0=st.integers(1, 10**5), factor=st.integers(2, 16))
    def test_scale_invariance(self, e0, ratio, scale, n0, factor):
        e1 = e0 / ratio
        a = eoc(e0, e1, n0, n0 * factor)
        b = eoc(scale * e0, scale * e1, n0, n0 * factor)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-10)


class TestErrorNorms:
    def test_zero_solution_on_square(self):
        cfg = StudyConfig(domain="square", k=1, base_resolution=4)
        mesh, g, paths = build_level(cfg, 0)
        from hdgtransfer.hdg import HdgConfig, HdgProblem
        p = HdgProblem(mesh, MAT, HdgConfig(k=1), paths)
        zero = SolutionFields(p, np.zeros((mesh.n_cells, p.ns)), np.zeros((mesh.n_cells, p.nu)),
                              np.zeros((mesh.n_cells, p.nr)), np.zeros((mesh.n_edges, p.ne_dofs)))
        err = error_norms(zero, manufactured_catalog("paper-trig", MAT))
        assert err["u"] == pytest.approx(math.sqrt(0.5), rel=1e-12)
        assert err["rho"] == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("domain", ["square", "disk-immersed"])
    def test_exact_fields(self, domain, rng):
        """Fields of degree <= k injected directly give vanishing errors."""
        k = 2
        cfg = StudyConfig(domain=domain, k=k, base_resolution=4 if domain == "square" else 10)
        c = rng.normal(size=(2, 3, 3))
        c[:, 1:, 2] = c[:, 2, 1:] = 0.0

        from numpy.polynomial import polynomial as P
        from hdgtransfer.study import ManufacturedSolution
        from hdgtransfer.material import apply_Ainv

        def u(x):
            return np.stack([P.polyval2d(x[..., 0], x[..., 1], c[i]) for i in range(2)], -1)

        def grad(x):
            return np.stack([np.stack([P.polyval2d(x[..., 0], x[..., 1], P.polyder(c[i], axis=j))
                                       for j in range(2)], -1) for i in range(2)], -2)

        sym = lambda x: apply_Ainv(0.5 * (grad(x) + np.swapaxes(grad(x), -1, -2)), MAT)
        skew = lambda x: 0.5 * (grad(x) - np.swapaxes(grad(x), -1, -2))
        ex = ManufacturedSolution("poly", u, grad, sym, skew, None)
        sol = interpolated_fields(cfg, 0, ex)
        err = error_norms(sol, ex)
        assert max(err.values()) <= 1e-12 * max(1.0, np.abs(c).max() * (MAT.lam + MAT.mu))


class TestConfig:
    def test_parse(self):
        cfg = parse_config("""
            # comment
            domain = kidney-immersed
            k = 2   # trailing comment
            nu=0.4999
            levels = 3
            out = /tmp/x
        """)
        assert (cfg.domain, cfg.k, cfg.nu, cfg.levels, cfg.out) == ("kidney-immersed", 2, 0.4999, 3, "/tmp/x")
        assert cfg.tau == 1.0 and cfg.E == 1.0 and cfg.inflate == 0.1

    @pytest.mark.parametrize("text,match", [
        ("k = 1\ncolour = red", "line 2: unknown key"),
        ("k = two", "line 1: bad value"),
        ("k 1", "line 1: expected key=value"),
        ("k = 4", "not supported"),
        ("domain = torus", "unknown domain"),
        ("domain = torus-immersed", None),
        ("solution = plane", "unknown solution"),
        ("tau = 0", "tau must be positive"),
        ("levels = 0", "levels"),
    ])
    def test_errors(self, text, match):
        if match is None:
            cfg = parse_config(text)
            with pytest.raises(ConfigurationError, match="unknown custom level set"):
                build_level(cfg, 0)
            return
        with pytest.raises(ConfigurationError, match=match):
            parse_config(text)

    def test_custom_level_set_domain(self):
        cfg = parse_config("domain = ellipse-immersed\nbase_resolution = 12")
        mesh, g, paths = build_level(cfg, 0)
        assert g.name == "ellipse" and paths.non_crossing

    def test_material_and_overrides(self):
        cfg = StudyConfig(nu=0.25, E=2.0)
        assert cfg.material.mu == pytest.approx(0.8)
        assert with_overrides(cfg, k=3).k == 3 and cfg.k == 1


class TestCsv:
    def test_columns_and_round_trip(self):
        results = [LevelResult(0, 8, 0.5, 0.0, {"sigma": 1.0, "rho": 0.5, "u": 0.25, "uhat": 0.1}),
                   LevelResult(1, 32, 0.25, 0.0, {"sigma": 0.25, "rho": 0.125, "u": 0.0625, "uhat": 0.01},
                               eocs={"sigma": 2.0, "rho": 2.0, "u": 2.0, "uhat": None})]
        buf = io.StringIO()
        write_results_csv(results, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "level,N_elem,h,R,err_sigma,err_rho,err_u,err_uhat,eoc_sigma,eoc_rho,eoc_u,eoc_uhat"
        assert lines[0].split(",") == CSV_COLUMNS
        assert lines[1].endswith(",,,,")
        rows = read_results_csv(io.StringIO(buf.getvalue()))
        assert rows[0]["eoc_sigma"] is None and rows[1]["eoc_sigma"] == 2.0 and rows[1]["eoc_uhat"] is None
        assert rows[1]["N_elem"] == 32 and rows[1]["err_uhat"] == 0.01


class TestRuns:
    def test_square_k1_rates(self, tmp_path):
        cfg = StudyConfig(domain="square", k=1, base_resolution=16, levels=3)
        results = run_convergence(cfg, csv_path=str(tmp_path / "r.csv"))
        last = results[-1].eocs
        for key in ("sigma", "rho", "u"):
            assert 1.8 <= last[key] <= 2.2, (key, last[key])
        assert last["rho"] >= 1.8  # exact rho = 0: |rho_h| itself decays
        with open(tmp_path / "r.csv") as fh:
            rows = read_results_csv(fh)
        assert [r["level"] for r in rows] == [0, 1, 2]
        assert rows[0]["eoc_u"] is None and rows[2]["eoc_u"] == pytest.approx(last["u"], rel=1e-10)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_square_monotone(self, k):
        results = run_convergence(StudyConfig(domain="square", k=k, base_resolution=2, levels=4))
        for key in ("sigma", "rho", "u", "uhat"):
            errs = [r.errors[key] for r in results]
            assert all(a > b for a, b in zip(errs[1:], errs[2:])), (key, errs)
        assert all(r.R == 0.0 and r.paths_valid for r in results)

    def test_square_k3_magnitude(self):
        res, _ = solve_level(StudyConfig(domain="square", k=3, base_resolution=4), 3)
        assert res.errors["u"] < 1e-6

    def test_rotational_solution(self):
        results = run_convergence(StudyConfig(domain="disk-immersed", k=2, base_resolution=8, levels=3,
                                              solution="rotational"))
        last = results[-1]
        assert last.eocs["rho"] >= 2.6 and last.eocs["sigma"] >= 2.6
        assert max(last.certificates.values()) <= 1e-9

    def test_level_context_in_errors(self):
        cfg = StudyConfig(domain="disk-immersed", base_resolution=1)
        with pytest.raises(Exception, match="level 0"):
            solve_level(cfg, 0)

    def test_deterministic(self):
        cfg = StudyConfig(domain="kidney-immersed", k=1, base_resolution=12, levels=1)
        a, _ = solve_level(cfg, 0)
        b, _ = solve_level(cfg, 0)
        assert a.errors == b.errors
