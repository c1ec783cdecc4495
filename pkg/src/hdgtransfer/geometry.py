"""Curved domains described by level sets (phi < 0 inside) and the geometric
queries needed to build computational meshes and transfer paths."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, GeometryError, NoIntersectionError

EPS_IN = 1e-12


@dataclass(frozen=True)
class DomainGeometry:
    """A domain {phi < 0} with closed-form value, gradient and Hessian.

    All callables are vectorised over points of shape ``(..., 2)``.
    ``projector`` is an optional exact closest-point map used instead of the
    Newton iteration (the unit square, whose level set is not smooth).
    """

    kind: str
    name: str
    value: Callable
    gradient: Callable
    hessian: Callable
    bbox: tuple
    projector: Optional[Callable] = None

    def phi(self, x):
        return self.value(np.asarray(x, dtype=float))

    def inside(self, x, eps=EPS_IN):
        return self.phi(x) <= -eps


# -- built-in level sets -----------------------------------------------------

def _disk_value(p):
    return p[..., 0] ** 2 + p[..., 1] ** 2 - 1.0


def _disk_gradient(p):
    return 2.0 * p


def _disk_hessian(p):
    return np.broadcast_to(2.0 * np.eye(2), p.shape[:-1] + (2, 2)).copy()


def _kidney_value(p):
    x, y = p[..., 0], p[..., 1]
    r2 = (x + 0.5) ** 2 + y**2
    s = r2 - x - 0.5
    return 2.0 * s**2 - r2 + 0.1


def _kidney_gradient(p):
    x, y = p[..., 0], p[..., 1]
    s = (x + 0.5) ** 2 + y**2 - x - 0.5
    return np.stack([8.0 * s * x - 2.0 * x - 1.0, 8.0 * s * y - 2.0 * y], axis=-1)


def _kidney_hessian(p):
    x, y = p[..., 0], p[..., 1]
    s = (x + 0.5) ** 2 + y**2 - x - 0.5
    hxx = 16.0 * x**2 + 8.0 * s - 2.0
    hxy = 16.0 * x * y
    hyy = 16.0 * y**2 + 8.0 * s - 2.0
    return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


def _square_value(p):
    x, y = p[..., 0], p[..., 1]
    return np.max(np.stack([-x, x - 1.0, -y, y - 1.0], axis=-1), axis=-1)


_SQUARE_NORMALS = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])


def _square_gradient(p):
    x, y = p[..., 0], p[..., 1]
    idx = np.argmax(np.stack([-x, x - 1.0, -y, y - 1.0], axis=-1), axis=-1)
    return _SQUARE_NORMALS[idx]


def _square_hessian(p):
    return np.zeros(p.shape[:-1] + (2, 2))


def _square_projector(x):
    x = np.asarray(x, dtype=float)
    c = np.clip(x, 0.0, 1.0)
    if np.any(c != x):
        return c
    d = np.array([c[0], 1.0 - c[0], c[1], 1.0 - c[1]])
    side = int(np.argmin(d))
    y = c.copy()
    y[side // 2] = 0.0 if side % 2 == 0 else 1.0
    return y


_ELLIPSE_AXES = (1.2, 0.8)


def _ellipse_value(p):
    a, b = _ELLIPSE_AXES
    return (p[..., 0] / a) ** 2 + (p[..., 1] / b) ** 2 - 1.0


def _ellipse_gradient(p):
    a, b = _ELLIPSE_AXES
    return np.stack([2.0 * p[..., 0] / a**2, 2.0 * p[..., 1] / b**2], axis=-1)


def _ellipse_hessian(p):
    a, b = _ELLIPSE_AXES
    h = np.diag([2.0 / a**2, 2.0 / b**2])
    return np.broadcast_to(h, p.shape[:-1] + (2, 2)).copy()


def unit_disk():
    return DomainGeometry("unit-disk", "unit-disk", _disk_value, _disk_gradient,
                          _disk_hessian, (-1.1, 1.1, -1.1, 1.1))


def kidney():
    # Zero set spans roughly [-0.524, 1.194] x [-1.03, 1.03].
    return DomainGeometry("kidney", "kidney", _kidney_value, _kidney_gradient,
                          _kidney_hessian, (-0.6, 1.25, -1.1, 1.1))


def unit_square():
    return DomainGeometry("unit-square", "unit-square", _square_value, _square_gradient,
                          _square_hessian, (0.0, 1.0, 0.0, 1.0), projector=_square_projector)


# Custom level sets are only reachable by name; no expression parsing.
CUSTOM_LEVEL_SETS = {
    "ellipse": (_ellipse_value, _ellipse_gradient, _ellipse_hessian, (-1.2, 1.2, -0.8, 0.8)),
}


def custom_level_set(name):
    try:
        value, grad, hess, bbox = CUSTOM_LEVEL_SETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown custom level set {name!r}; "
                                 f"registered: {sorted(CUSTOM_LEVEL_SETS)}") from None
    return DomainGeometry("custom-level-set", name, value, grad, hess, bbox)


def geometry_by_name(name):
    builtin = {"unit-disk": unit_disk, "disk": unit_disk, "kidney": kidney,
               "unit-square": unit_square, "square": unit_square}
    if name in builtin:
        return builtin[name]()
    return custom_level_set(name)


# -- queries -------------------------------------------------------------------

def level_set_eval(g, x):
    """Return ``(phi(x), grad phi(x))``."""
    x = np.asarray(x, dtype=float)
    return g.value(x), g.gradient(x)


def closest_point(g, x, tol=1e-12, max_iter=50):
    """Closest point of ``x`` on the zero set of ``g``.

    Damped Newton on the optimality system y - x + lam grad(phi)(y) = 0,
    phi(y) = 0, seeded by a gradient projection of ``x``. Raises
    :class:`GeometryError` carrying the last iterate when it fails to converge.
    """
    x = np.asarray(x, dtype=float)
    if g.projector is not None:
        return g.projector(x)

    phi0 = float(g.value(x))
    g0 = g.gradient(x)
    y = x - phi0 * g0 / max(g0 @ g0, 1e-300)
    gy = g.gradient(y)
    lam = -((y - x) @ gy) / max(gy @ gy, 1e-300)

    def residual(y, lam):
        gy = g.gradient(y)
        return np.array([y[0] - x[0] + lam * gy[0], y[1] - x[1] + lam * gy[1], g.value(y)])

    F = residual(y, lam)
    scale = max(1.0, np.linalg.norm(x))
    for _ in range(max_iter):
        if abs(F[2]) <= tol and np.linalg.norm(F[:2]) <= tol * scale:
            break
        gy = g.gradient(y)
        H = g.hessian(y)
        J = np.zeros((3, 3))
        J[:2, :2] = np.eye(2) + lam * H
        J[:2, 2] = gy
        J[2, :2] = gy
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise GeometryError("singular Newton matrix in closest-point search", y) from None
        alpha = 1.0
        norm0 = np.linalg.norm(F)
        while True:
            y_new = y + alpha * step[:2]
            lam_new = lam + alpha * step[2]
            F_new = residual(y_new, lam_new)
            if np.linalg.norm(F_new) < norm0 or alpha < 1e-6:
                break
            alpha *= 0.5
        y, lam, F = y_new, lam_new, F_new
    else:
        if not (abs(F[2]) <= tol and np.linalg.norm(F[:2]) <= tol * scale):
            raise GeometryError("closest-point Newton iteration did not converge", y)

    # polish onto the zero set along the gradient
    for _ in range(3):
        if abs(g.value(y)) <= tol:
            break
        gy = g.gradient(y)
        y = y - g.value(y) * gy / (gy @ gy)
    if abs(g.value(y)) > tol:
        raise GeometryError("closest point is not on the boundary", y)
    return y


def alignment_angle(g, x, xbar):
    """Angle between ``xbar - x`` and the level-set normal at ``xbar`` (radians)."""
    d = np.asarray(xbar, float) - np.asarray(x, float)
    nd = np.linalg.norm(d)
    if nd == 0.0:
        return 0.0
    n = g.gradient(np.asarray(xbar, float))
    c = (d[0] * n[1] - d[1] * n[0]) / (nd * np.linalg.norm(n))
    return float(np.arcsin(min(1.0, abs(c))))


def ray_boundary_intersection(g, x, d, s_max, n_samples=256):
    """First crossing of the boundary along ``x + s d`` for ``s`` in ``(0, s_max]``.

    Returns ``(s, point)``. Raises :class:`NoIntersectionError` when phi does
    not change sign on the interval.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    f = lambda s: float(g.value(x + s * d))
    s_grid = np.linspace(0.0, s_max, n_samples + 1)
    vals = g.value(x[None, :] + s_grid[:, None] * d[None, :])
    vals[0] = min(vals[0], 0.0)
    crossing = np.nonzero((vals[:-1] <= 0.0) & (vals[1:] >= 0.0))[0]
    crossing = [i for i in crossing if s_grid[i + 1] > 0.0]
    if not crossing:
        raise NoIntersectionError(f"ray from {x} along {d} does not reach the boundary "
                                  f"within s_max={s_max}")
    i = crossing[0]
    a, b = s_grid[i], s_grid[i + 1]
    if vals[i + 1] == 0.0:
        s = b
    elif i == 0 and f(0.0) == 0.0 and vals[1] > 0:
        s = 0.0
    else:
        s = brentq(f, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    p = x + s * d
    # Newton polish along the ray
    for _ in range(5):
        v = g.value(p)
        if abs(v) <= 1e-12:
            break
        slope = g.gradient(p) @ d
        if slope == 0.0:
            break
        s -= v / slope
        p = x + s * d
    if abs(g.value(p)) > 1e-12:
        raise GeometryError("ray intersection did not reach |phi| <= 1e-12", p)
    return s, p
