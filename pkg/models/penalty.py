"""
Penalty models g(x, z): the exchange's cost density for offering incentive z at x.
"""

from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from models.errors import ParameterError
from models.params import PenaltyParams
from utils.validators import validate_distances


class PenaltyModel(ABC):
    """
    Contract for incentive cost functions.

    g(x, 0) = 0, nondecreasing in both arguments, convex in z.
    """

    @abstractmethod
    def evaluate(self, x, z):
        """Cost density of incentive z at distance x."""

    @abstractmethod
    def dz(self, x, z):
        """Partial derivative of evaluate in z."""

    def check_assumptions(self, xs, zs, rel_tol: float = 1e-6) -> List[str]:
        """
        Verify g(x,0)=0, monotonicity in x and z, and midpoint convexity in z.

        Args:
            xs: Sample distances
            zs: Sample incentives
            rel_tol: Relative tolerance of the centered-difference check

        Returns:
            List of violation messages
        """
        violations = []
        xs = np.sort(np.asarray(xs, dtype=float))
        zs = np.sort(np.asarray(zs, dtype=float))

        if np.any(np.asarray(self.evaluate(xs, 0.0)) != 0):
            violations.append("g(x, 0) is not identically 0")

        grid = np.asarray(self.evaluate(xs[:, None], zs[None, :]), dtype=float)
        if np.any(np.diff(grid, axis=0) < 0):
            violations.append("g decreases in x")
        if np.any(np.diff(grid, axis=1) < 0):
            violations.append("g decreases in z")

        mid = np.asarray(self.evaluate(xs[:, None], 0.5 * (zs[:-1] + zs[1:])[None, :]), dtype=float)
        chord = 0.5 * (grid[:, :-1] + grid[:, 1:])
        if np.any(mid > chord + 1e-12 * np.abs(chord)):
            violations.append("g is not midpoint convex in z")

        positive = zs[zs > 0]
        for x in xs:
            h = 1e-5 * positive
            fd = (np.asarray(self.evaluate(x, positive + h)) -
                  np.asarray(self.evaluate(x, positive - h))) / (2 * h)
            exact = np.asarray(self.dz(x, positive), dtype=float)
            if np.any(np.abs(fd - exact) > rel_tol * np.maximum(np.abs(exact), 1e-300)):
                violations.append(f"dz inconsistent with evaluate at x={x:g}")

        return violations


class LinearExpPenalty(PenaltyModel):
    """g(x, z) = A_bar * z * exp(a_bar x)."""

    def __init__(self, params: PenaltyParams):
        self.params = params

    def weight(self, x):
        """Marginal cost of one dollar of incentive at distance x."""
        return self.params.A_bar * np.exp(self.params.a_bar * np.asarray(x, dtype=float))

    def evaluate(self, x, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < 0):
            raise ParameterError(f"Incentive z must be ≥ 0 (got min {float(np.min(z))})")
        return self.weight(x) * z

    def dz(self, x, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < 0):
            raise ParameterError(f"Incentive z must be ≥ 0 (got min {float(np.min(z))})")
        return self.weight(x) * np.ones_like(z)


def penalty_eval(params: PenaltyParams, x, z, L: Optional[float] = None):
    """Cost density g(x, z) of the linear-exponential family; x in (0, L) when L is given."""
    _check_distances(x, L)
    return LinearExpPenalty(params).evaluate(x, z)


def penalty_dz(params: PenaltyParams, x, z, L: Optional[float] = None):
    """Partial derivative of g in z."""
    _check_distances(x, L)
    return LinearExpPenalty(params).dz(x, z)


def _check_distances(x, L: Optional[float]):
    ok, error = validate_distances('x', x, L)
    if not ok:
        raise ParameterError(error)
