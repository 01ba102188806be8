"""
Tridiagonal finite-difference operators on the interior nodes of [0, L]
with homogeneous Dirichlet boundaries.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from models.errors import ParameterError

logger = logging.getLogger(__name__)

# cell Péclet number above which central differences oscillate
PECLET_LIMIT = 2.0


@dataclass(frozen=True)
class TridiagonalOperator:
    """
    Matrix with lower, diagonal and upper bands, all of length n.

    lower[0] and upper[-1] are unused (set to 0).
    """
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def size(self) -> int:
        return len(self.diag)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply the operator to a vector or to each column of a matrix."""
        v = np.asarray(v, dtype=float)
        d = self.diag.reshape((-1,) + (1,) * (v.ndim - 1))
        lo = self.lower.reshape(d.shape)
        up = self.upper.reshape(d.shape)
        out = d * v
        out[1:] += lo[1:] * v[:-1]
        out[:-1] += up[:-1] * v[1:]
        return out

    def shifted(self, identity_weight: float, scale: float) -> 'TridiagonalOperator':
        """Return identity_weight * I + scale * self."""
        return TridiagonalOperator(
            lower=scale * self.lower,
            diag=identity_weight + scale * self.diag,
            upper=scale * self.upper,
        )

    def banded(self) -> np.ndarray:
        """Band storage expected by scipy.linalg.solve_banded with (1, 1)."""
        ab = np.zeros((3, self.size))
        ab[0, 1:] = self.upper[:-1]
        ab[1, :] = self.diag
        ab[2, :-1] = self.lower[1:]
        return ab

    def solve(self, rhs: np.ndarray, ab: np.ndarray = None) -> np.ndarray:
        """Solve self @ x = rhs; rhs may hold several right-hand sides as columns."""
        if ab is None:
            ab = self.banded()
        return solve_banded((1, 1), ab, rhs, check_finite=False)


def choose_scheme(eta: float, drift: float, dx: float, scheme: str = 'hybrid') -> str:
    """
    Pick the first-derivative discretisation.

    'hybrid' uses central differences while the cell Péclet number |drift| dx / eta
    stays at or below 2, and upwind differences above.
    """
    if scheme in ('central', 'upwind'):
        return scheme
    if scheme != 'hybrid':
        raise ParameterError(f"Unknown convection scheme {scheme!r}")
    if drift == 0:
        return 'central'
    if eta <= 0:
        return 'upwind'
    return 'central' if abs(drift) * dx / eta <= PECLET_LIMIT else 'upwind'


def convection_diffusion_operator(n_interior: int, dx: float, eta: float, drift: float,
                                  reaction: float, scheme: str = 'hybrid') -> TridiagonalOperator:
    """
    Discretise eta * d²/dx² + drift * d/dx + reaction on interior nodes.

    Args:
        n_interior: Number of interior nodes
        dx: Grid step
        eta: Diffusion coefficient (≥ 0)
        drift: Coefficient of the first derivative
        reaction: Zeroth-order coefficient
        scheme: 'hybrid', 'central' or 'upwind'

    Returns:
        TridiagonalOperator
    """
    used = choose_scheme(eta, drift, dx, scheme)
    diff = eta / dx ** 2

    if used == 'central':
        lower = diff - drift / (2 * dx)
        upper = diff + drift / (2 * dx)
        diag = -2 * diff + reaction
    elif drift > 0:
        # information travels from the right: forward difference
        lower = diff
        upper = diff + drift / dx
        diag = -2 * diff - drift / dx + reaction
    else:
        lower = diff - drift / dx
        upper = diff
        diag = -2 * diff + drift / dx + reaction

    logger.debug(f"Operator n={n_interior}, dx={dx:g}, scheme={used}")

    lower_band = np.full(n_interior, lower)
    upper_band = np.full(n_interior, upper)
    lower_band[0] = 0.0
    upper_band[-1] = 0.0
    return TridiagonalOperator(lower=lower_band, diag=np.full(n_interior, float(diag)), upper=upper_band)
