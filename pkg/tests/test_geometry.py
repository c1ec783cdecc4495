import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdgtransfer.errors import ConfigurationError, NoIntersectionError
from hdgtransfer.geometry import (
    EPS_IN, alignment_angle, closest_point, custom_level_set, geometry_by_name, kidney,
    level_set_eval, ray_boundary_intersection, unit_disk, unit_square)

KIDNEY_CENTER = np.array([0.5, 0.0])


def bisect_zero(f, a, b, iters=200):
    """Plain bisection oracle, f(a) < 0 < f(b)."""
    for _ in range(iters):
        m = 0.5 * (a + b)
        if f(m) < 0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def kidney_zero_samples(n=24):
    """Zero-set points found by bisection along rays from an interior point."""
    g = kidney()
    out = []
    for th in np.linspace(0, 2 * np.pi, n, endpoint=False):
        d = np.array([np.cos(th), np.sin(th)])
        s = np.linspace(0, 2.0, 4001)
        vals = g.phi(KIDNEY_CENTER + s[:, None] * d)
        i = np.argmax(vals > 0)
        t = bisect_zero(lambda t: g.phi(KIDNEY_CENTER + t * d), s[i - 1], s[i])
        out.append(KIDNEY_CENTER + t * d)
    return np.array(out)


class TestLevelSet:
    def test_disk_values(self):
        g = unit_disk()
        v, grad = level_set_eval(g, [0.0, 0.0])
        assert v == -1.0 and np.array_equal(grad, [0.0, 0.0])
        v, grad = level_set_eval(g, [1.0, 0.0])
        assert v == 0.0 and np.array_equal(grad, [2.0, 0.0])

    def test_kidney_formula(self):
        # phi = 2 (r^2 - x - 1/2)^2 - r^2 + 0.1, r^2 = (x + 1/2)^2 + y^2
        x, y = 0.3, -0.7
        r2 = (x + 0.5) ** 2 + y**2
        assert kidney().phi([x, y]) == pytest.approx(2 * (r2 - x - 0.5) ** 2 - r2 + 0.1, abs=1e-15)

    def test_kidney_zero_set(self):
        g = kidney()
        pts = kidney_zero_samples()
        assert np.all(np.abs(g.phi(pts)) <= 1e-12)

    @pytest.mark.parametrize("g", [unit_disk(), kidney(), custom_level_set("ellipse")], ids=lambda g: g.name)
    def test_gradient_matches_finite_differences(self, g, rng):
        x0, x1, y0, y1 = g.bbox
        pts = np.column_stack([rng.uniform(x0, x1, 100), rng.uniform(y0, y1, 100)])
        h = 1e-6
        fd = np.stack([(g.phi(pts + h * e) - g.phi(pts - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
        grad = g.gradient(pts)
        np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-6 * np.abs(grad).max())
        fdH = np.stack([(g.gradient(pts + h * e) - g.gradient(pts - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
        np.testing.assert_allclose(g.hessian(pts), fdH, rtol=1e-6, atol=1e-6 * np.abs(fdH).max())

    @pytest.mark.parametrize("g", [unit_disk(), kidney()], ids=lambda g: g.name)
    def test_bbox_contains_domain_and_gradient_nonzero(self, g):
        x0, x1, y0, y1 = g.bbox
        X, Y = np.meshgrid(np.linspace(x0, x1, 401), np.linspace(y0, y1, 401))
        vals = g.phi(np.stack([X, Y], -1))
        assert np.all(vals[[0, -1], :] > 0) and np.all(vals[:, [0, -1]] > 0)
        if g.name == "kidney":
            pts = kidney_zero_samples()
        else:
            th = np.linspace(0, 2 * np.pi, 50)
            pts = np.column_stack([np.cos(th), np.sin(th)])
        assert np.all(np.linalg.norm(g.gradient(pts), axis=-1) > 1e-8)

    def test_inside_convention(self):
        g = unit_disk()
        assert g.inside([0.0, 0.0])
        assert not g.inside([1.0, 0.0])
        assert not g.inside([1.0 - 0.1 * EPS_IN, 0.0])

    def test_registry(self):
        assert geometry_by_name("disk").name == "unit-disk"
        assert geometry_by_name("ellipse").kind == "custom-level-set"
        with pytest.raises(ConfigurationError):
            geometry_by_name("torus")


class TestClosestPoint:
    def test_disk_examples(self):
        g = unit_disk()
        np.testing.assert_allclose(closest_point(g, [0.9, 0.0]), [1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(closest_point(g, 0.95 * np.array([0.6, 0.8])), [0.6, 0.8], atol=1e-14)

    def test_kidney_postconditions(self, rng):
        g = kidney()
        for p in kidney_zero_samples(16):
            n = g.gradient(p) / np.linalg.norm(g.gradient(p))
            x = p - rng.uniform(0.005, 0.05) * n
            xbar = closest_point(g, x)
            assert abs(g.phi(xbar)) <= 1e-12
            assert alignment_angle(g, x, xbar) <= 1e-6
            # brute-force distance oracle on a dense sample of the zero set
            assert np.linalg.norm(xbar - x) <= np.linalg.norm(p - x) + 1e-12

    def test_square_projector(self):
        g = unit_square()
        np.testing.assert_allclose(closest_point(g, [0.2, 0.05]), [0.2, 0.0])
        np.testing.assert_allclose(closest_point(g, [0.97, 0.5]), [1.0, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(theta=st.floats(0, 2 * np.pi), depth=st.floats(0.0, 0.1))
    def test_idempotent(self, theta, depth):
        for g in (unit_disk(), kidney()):
            c = np.array([0.0, 0.0]) if g.name == "unit-disk" else KIDNEY_CENTER
            d = np.array([np.cos(theta), np.sin(theta)])
            s, p = ray_boundary_intersection(g, c, d, 2.5)
            x = c + max(s - depth, 0.0) * d
            xbar = closest_point(g, x)
            np.testing.assert_allclose(closest_point(g, xbar), xbar, atol=1e-10)


class TestRay:
    def test_disk_examples(self):
        g = unit_disk()
        s, p = ray_boundary_intersection(g, [0.9, 0.0], [1.0, 0.0], 1.0)
        assert s == pytest.approx(0.1, abs=1e-12)
        np.testing.assert_allclose(p, [1.0, 0.0], atol=1e-12)
        s, p = ray_boundary_intersection(g, [0.0, 0.0], [0.0, 1.0], 2.0)
        assert s == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(p, [0.0, 1.0], atol=1e-12)

    def test_inward_ray_raises(self):
        with pytest.raises(NoIntersectionError):
            ray_boundary_intersection(unit_disk(), [0.9, 0.0], [-1.0, 0.0], 0.5)

    @given(r=st.floats(0.0, 0.999), theta=st.floats(0, 2 * np.pi))
    def test_radial_distance(self, r, theta):
        d = np.array([np.cos(theta), np.sin(theta)])
        s, p = ray_boundary_intersection(unit_disk(), r * d, d, 1.5)
        assert s == pytest.approx(1.0 - r, abs=1e-12)
        assert abs(unit_disk().phi(p)) <= 1e-12
