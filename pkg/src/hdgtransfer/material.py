"""Isotropic Hooke's law in two dimensions.

Tensors are ``(..., 2, 2)`` arrays; flattened blocks elsewhere in the package
use row-major order ``(s11, s12, s21, s22)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

DIM = 2


@dataclass(frozen=True)
class MaterialParams:
    E: float
    nu: float
    mu: float
    lam: float

    @property
    def trace_coefficient(self):
        """Coefficient c with A(xi) = xi / (2 mu) - c tr(xi) I."""
        return self.lam / (2.0 * self.mu * (DIM * self.lam + 2.0 * self.mu))


def lame_from_E_nu(E, nu):
    """Build :class:`MaterialParams` from Young's modulus and Poisson ratio."""
    E = float(E)
    nu = float(nu)
    if not np.isfinite(E) or E <= 0.0:
        raise InvalidParameterError(f"Young's modulus must be positive, got {E}")
    if not np.isfinite(nu) or not 0.0 < nu < 0.5:
        raise InvalidParameterError(f"Poisson ratio must lie in (0, 1/2), got {nu}")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return MaterialParams(E=E, nu=nu, mu=mu, lam=lam)


def _trace_identity(xi):
    tr = xi[..., 0, 0] + xi[..., 1, 1]
    return tr[..., None, None] * np.eye(DIM)


def apply_A(xi, m):
    """Compliance tensor: A(xi) = xi/(2 mu) - lam tr(xi) I / (2 mu (2 lam + 2 mu))."""
    xi = np.asarray(xi, dtype=float)
    return xi / (2.0 * m.mu) - m.trace_coefficient * _trace_identity(xi)


def apply_Ainv(xi, m):
    """Stiffness tensor: A^{-1}(xi) = 2 mu xi + lam tr(xi) I."""
    xi = np.asarray(xi, dtype=float)
    return 2.0 * m.mu * xi + m.lam * _trace_identity(xi)
