"""Reference-element polynomial spaces and quadrature.

Polynomials on the reference triangle {xi >= 0, eta >= 0, xi + eta <= 1} are
stored as dense coefficient grids ``c[a, b]`` in the centred monomials
``(xi - 1/3)^a (eta - 1/3)^b``; evaluation, differentiation and
multiplication are then exact and also valid outside the triangle, which is
what extrapolation along transfer paths needs.

Local stress space per cell: the 4 row-major components of tensor P_k, each
spanned by the orthonormal scalar basis, followed by ``k + 1`` divergence-free
bubbles curl(b grad q), b the cubic bubble and q a degree-exactly-k basis
function. Rotations are q * [[0, 1], [-1, 0]] with q in P_k.
"""

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import mpmath
import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly
from scipy.signal import convolve2d
from scipy.special import roots_jacobi

from .errors import ConfigurationError, GeometryError

SUPPORTED_DEGREES = (1, 2, 3)
CENTER = 1.0 / 3.0
ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


# -- quadrature ----------------------------------------------------------------

@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed Gauss-Jacobi rule on the reference triangle, exact to ``degree``.

    Returns ``(points (n, 2), weights (n,))``; weights are positive and sum to 1/2.
    """
    n = max(1, (degree + 2) // 2)
    x, wx = roots_jacobi(n, 1.0, 0.0)  # weight (1 - x) on [-1, 1]
    u = 0.5 * (x + 1.0)
    wu = wx / 4.0
    v, wv = gauss_rule(2 * n - 1)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    pts.setflags(write=False)
    W = W.ravel()
    W.setflags(write=False)
    return pts, W


@lru_cache(maxsize=None)
def gauss_rule(degree):
    """Gauss-Legendre rule on [0, 1] exact to ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = npleg.leggauss(n)
    s, ws = 0.5 * (x + 1.0), 0.5 * w
    s.setflags(write=False)
    ws.setflags(write=False)
    return s, ws


def quadrature_rules(k):
    """Rules used by the solver for degree ``k``.

    The triangle rule is exact to degree 2k + 6; the 1D rule has
    ceil((2k + 6)/2) = k + 3 points (exact to 2k + 5) and serves both edge
    integrals and transfer segments.
    """
    _check_degree(k)
    tri = triangle_rule(2 * k + 6)
    seg = gauss_rule(2 * k + 5)
    return {"triangle": tri, "edge": seg, "segment": seg}


def reference_monomial_integral(a, b):
    """Exact integral of xi^a eta^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


# -- polynomial grids ------------------------------------------------------------

def _check_degree(k):
    if k not in SUPPORTED_DEGREES:
        raise ConfigurationError(f"polynomial degree k={k} is not supported; use one of {SUPPORTED_DEGREES}")


def graded_exponents(degree):
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


def poly_eval(coeffs, ref_pts):
    """Evaluate grids ``coeffs (..., D+1, D+1)`` at ``ref_pts (P..., 2)``.

    Returns an array of shape ``P... + coeffs.shape[:-2]``.
    """
    D = coeffs.shape[-1] - 1
    ref_pts = np.asarray(ref_pts, dtype=float)
    V = nppoly.polyvander2d(ref_pts[..., 0] - CENTER, ref_pts[..., 1] - CENTER, [D, D])
    flat = coeffs.reshape(coeffs.shape[:-2] + (-1,))
    return np.tensordot(V, flat, axes=([-1], [-1]))


def poly_der(coeffs, axis):
    """Partial derivative along reference axis 0 (xi) or 1 (eta), same grid size."""
    out = np.zeros_like(coeffs)
    D = coeffs.shape[-1] - 1
    f = np.arange(1, D + 1, dtype=float)
    if axis == 0:
        out[..., :-1, :] = coeffs[..., 1:, :] * f[:, None]
    else:
        out[..., :, :-1] = coeffs[..., :, 1:] * f[None, :]
    return out


def poly_mul(p, q, size):
    """Product of two grids, truncated to ``size x size`` (must not lose terms)."""
    full = convolve2d(p, q)
    if np.any(full[size:, :]) or np.any(full[:, size:]):
        raise ValueError("polynomial product exceeds the grid size")
    return full[:size, :size]


def _centred_monomial_gram(exps):
    """Exact Gram matrix of centred monomials over the reference triangle."""
    c = Fraction(1, 3)

    def expand(a, b):
        # (xi - c)^a (eta - c)^b = sum_i sum_j comb * xi^i eta^j * (-c)^(a-i) (-c)^(b-j)
        terms = {}
        for i in range(a + 1):
            for j in range(b + 1):
                terms[(i, j)] = comb(a, i) * comb(b, j) * (-c) ** (a - i) * (-c) ** (b - j)
        return terms

    def integral(a, b):
        return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))

    n = len(exps)
    G = [[Fraction(0)] * n for _ in range(n)]
    for r, (a1, b1) in enumerate(exps):
        for s, (a2, b2) in enumerate(exps):
            G[r][s] = sum((coef * integral(i, j) for (i, j), coef in expand(a1 + a2, b1 + b2).items()),
                          Fraction(0))
    return G


@lru_cache(maxsize=None)
def _orthonormal_coefficients(k):
    """Gram-Schmidt of graded centred monomials, done in 40-digit arithmetic."""
    exps = graded_exponents(k)
    G = _centred_monomial_gram(exps)
    with mpmath.workdps(40):
        Gm = mpmath.matrix([[mpmath.mpf(x.numerator) / x.denominator for x in row] for row in G])
        L = mpmath.cholesky(Gm)
        T = L ** -1
        T = np.array([[float(T[i, j]) for j in range(len(exps))] for i in range(len(exps))])
    return exps, T


class SpaceTables:
    """Bases and quadrature for one polynomial degree ``k``.

    Coefficient grids have size ``k + 4`` in each direction, enough for the
    degree ``k + 2`` products b * grad(q) and their derivatives.
    """

    def __init__(self, k):
        _check_degree(k)
        self.k = k
        self.ds = (k + 1) * (k + 2) // 2
        self.n_bubbles = k + 1
        self.n_sigma = 4 * self.ds + self.n_bubbles
        self.n_u = 2 * self.ds
        self.n_rho = self.ds
        self.n_trace = k + 1
        self.n_uhat_per_edge = 2 * self.n_trace
        self.size = k + 4

        exps, T = _orthonormal_coefficients(k)
        scalar = np.zeros((self.ds, self.size, self.size))
        for i in range(self.ds):
            for j, (a, b) in enumerate(exps):
                scalar[i, a, b] = T[i, j]
        self.scalar_coeffs = scalar
        self.scalar_grad_coeffs = np.stack([poly_der(scalar, 0), poly_der(scalar, 1)], axis=1)
        # top-degree slice: the last k+1 Gram-Schmidt functions
        self.top_degree = np.arange(self.ds - self.n_bubbles, self.ds)

        # b = xi * eta * (1 - xi - eta) in centred monomials X = xi - 1/3, Y = eta - 1/3
        bub = np.zeros((self.size, self.size))
        xi = np.zeros((2, 2)); xi[0, 0] = CENTER; xi[1, 0] = 1.0
        eta = np.zeros((2, 2)); eta[0, 0] = CENTER; eta[0, 1] = 1.0
        rest = np.zeros((2, 2)); rest[0, 0] = CENTER; rest[1, 0] = -1.0; rest[0, 1] = -1.0
        prod = convolve2d(convolve2d(xi, eta), rest)
        bub[:prod.shape[0], :prod.shape[1]] = prod
        self.cubic_bubble = bub

        # p[j, m] = b * d_m q_j (reference derivatives); P[j, n, m] = d_n p[j, m]
        p = np.zeros((self.n_bubbles, 2, self.size, self.size))
        for jj, j in enumerate(self.top_degree):
            for m in range(2):
                p[jj, m] = poly_mul(bub, self.scalar_grad_coeffs[j, m], self.size)
        self.bubble_p = p
        self.bubble_P = np.stack([poly_der(p, 0), poly_der(p, 1)], axis=1)  # (nb, n, m, ., .)
        self.bubble_dP = np.stack([poly_der(self.bubble_P, 0), poly_der(self.bubble_P, 1)], axis=1)

        rules = quadrature_rules(k)
        self.tri_points, self.tri_weights = rules["triangle"]
        self.gauss_points, self.gauss_weights = rules["edge"]

        # bubbles are rescaled per cell by |det J| / (reference L2 norm) so they stay O(1)
        self.bubble_ref_scale = np.ones(self.n_bubbles)
        T = bubble_values(self, np.eye(2)[None], self.tri_points)[0]
        norms = np.sqrt(np.einsum("pbij,pbij,p->b", T, T, self.tri_weights))
        self.bubble_ref_scale = 1.0 / norms

    # -- scalar basis on the reference element ---------------------------------

    def scalar(self, ref_pts):
        return poly_eval(self.scalar_coeffs, ref_pts)

    def scalar_grad_ref(self, ref_pts):
        """Reference gradients, shape ``P... + (ds, 2)``."""
        return poly_eval(self.scalar_grad_coeffs, ref_pts)

    def trace(self, s):
        """Orthonormal Legendre basis on [0, 1], shape ``s.shape + (k+1,)``."""
        s = np.asarray(s, dtype=float)
        V = npleg.legvander(2.0 * s - 1.0, self.k)
        return V * np.sqrt(2.0 * np.arange(self.k + 1) + 1.0)


@lru_cache(maxsize=None)
def space_tables(k):
    return SpaceTables(k)


def local_dof_counts(k):
    t = space_tables(k)
    return {"n_sigma": t.n_sigma, "n_u": t.n_u, "n_rho": t.n_rho,
            "n_uhat_per_edge": t.n_uhat_per_edge}


# -- physical cells ----------------------------------------------------------------

def cell_maps(tri):
    """Affine maps x = v0 + J xi for cells ``tri (..., 3, 2)``.

    Returns ``v0, J, Jinv, detJ``; raises :class:`GeometryError` on degenerate cells.
    """
    tri = np.asarray(tri, dtype=float)
    v0 = tri[..., 0, :]
    J = np.stack([tri[..., 1, :] - v0, tri[..., 2, :] - v0], axis=-1)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    scale = np.maximum(np.abs(J).max(axis=(-2, -1)) ** 2, 1e-300)
    if np.any(np.abs(det) <= 1e-14 * scale):
        raise GeometryError("degenerate cell (zero area)")
    Jinv = np.stack([np.stack([J[..., 1, 1], -J[..., 0, 1]], -1),
                     np.stack([-J[..., 1, 0], J[..., 0, 0]], -1)], -2) / det[..., None, None]
    return v0, J, Jinv, det


def to_reference(x, v0, Jinv):
    """Map physical points ``x (C, P, 2)`` into each cell's reference frame."""
    return np.einsum("cij,cpj->cpi", Jinv, x - v0[:, None, :])


def to_physical(ref, v0, J):
    return v0[:, None, :] + np.einsum("cij,cpj->cpi", J, ref)


def scalar_physical_grad(tables, Jinv, ref_pts):
    """Physical gradients of the scalar basis, shape ``(C, P, ds, 2)``."""
    g = tables.scalar_grad_ref(ref_pts)  # (C, P, ds, 2) or (P, ds, 2)
    if g.ndim == 3:
        return np.einsum("pdn,cnl->cpdl", g, Jinv)
    return np.einsum("cpdn,cnl->cpdl", g, Jinv)


def bubble_values(tables, Jinv, ref_pts):
    """Bubble tensors T_j = curl(b grad q_j) in physical coordinates.

    Returns shape ``(C, P, k+1, 2, 2)``. With w_i = b d_{x_i} q,
    T[i, 0] = -d_y w_i and T[i, 1] = d_x w_i. Each bubble is multiplied by
    the constant ``|det J| * tables.bubble_ref_scale``.
    """
    P = poly_eval(tables.bubble_P, ref_pts)  # (C?, P, nb, n, m)
    sign = np.array([-1.0, 1.0])
    Jswap = Jinv[:, :, ::-1]  # Jswap[c, n, col] = Jinv[c, n, 1 - col]
    sub = "pbnm" if P.ndim == 4 else "cpbnm"
    scale = _bubble_scale(tables, Jinv)
    return np.einsum(f"{sub},cnk,cmi,k,cb->cpbik", P, Jswap, Jinv, sign, scale)


def bubble_gradients(tables, Jinv, ref_pts):
    """Physical gradients d_{x_l} T_j[i, c], shape ``(C, P, k+1, 2, 2, 2)`` (last axis l)."""
    dP = poly_eval(tables.bubble_dP, ref_pts)  # (..., P, nb, r, n, m)
    sign = np.array([-1.0, 1.0])
    Jswap = Jinv[:, :, ::-1]
    sub = "pbrnm" if dP.ndim == 5 else "cpbrnm"
    scale = _bubble_scale(tables, Jinv)
    return np.einsum(f"{sub},crl,cnk,cmi,k,cb->cpbikl", dP, Jinv, Jswap, Jinv, sign, scale)


def _bubble_scale(tables, Jinv):
    detinv = Jinv[:, 0, 0] * Jinv[:, 1, 1] - Jinv[:, 0, 1] * Jinv[:, 1, 0]
    return np.abs(1.0 / detinv)[:, None] * tables.bubble_ref_scale[None, :]


def stress_basis(tables, Jinv, ref_pts):
    """All stress basis functions at points, shape ``(C, P, n_sigma, 2, 2)``."""
    C = Jinv.shape[0]
    psi = tables.scalar(ref_pts)
    if psi.ndim == 2:
        psi = np.broadcast_to(psi, (C,) + psi.shape)
    npts = psi.shape[1]
    ds = tables.ds
    out = np.zeros((C, npts, tables.n_sigma, 2, 2))
    for comp in range(4):
        i, j = divmod(comp, 2)
        out[:, :, comp * ds:(comp + 1) * ds, i, j] = psi
    out[:, :, 4 * ds:] = bubble_values(tables, Jinv, ref_pts)
    return out


def stress_divergence(tables, Jinv, ref_pts):
    """Row-wise divergence of every stress basis function, shape ``(C, P, n_sigma, 2)``.

    The polynomial part is exact; the bubble part is evaluated from its
    closed-form derivatives (and vanishes up to rounding).
    """
    grad = scalar_physical_grad(tables, Jinv, ref_pts)  # (C, P, ds, 2)
    C, npts = grad.shape[:2]
    ds = tables.ds
    out = np.zeros((C, npts, tables.n_sigma, 2))
    for comp in range(4):
        i, j = divmod(comp, 2)
        out[:, :, comp * ds:(comp + 1) * ds, i] = grad[..., j]
    dT = bubble_gradients(tables, Jinv, ref_pts)
    out[:, :, 4 * ds:, :] = np.einsum("cpbill->cpbi", dT)
    return out


def stress_gradient(tables, Jinv, ref_pts):
    """Physical gradients of every stress basis function, shape ``(C, P, n_sigma, 2, 2, 2)``."""
    grad = scalar_physical_grad(tables, Jinv, ref_pts)
    C, npts = grad.shape[:2]
    ds = tables.ds
    out = np.zeros((C, npts, tables.n_sigma, 2, 2, 2))
    for comp in range(4):
        i, j = divmod(comp, 2)
        out[:, :, comp * ds:(comp + 1) * ds, i, j, :] = grad
    out[:, :, 4 * ds:] = bubble_gradients(tables, Jinv, ref_pts)
    return out


def cubic_bubble(tables, ref_pts):
    return poly_eval(tables.cubic_bubble, ref_pts)
