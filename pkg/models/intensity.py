"""
Order-arrival intensity models f(x, z).

f(x, z) is the arrival rate density (per dollar per minute) of new limit orders at
distance x from the mid-price when the exchange promises an incentive z per executed
unit order. Any model must be increasing and concave in z.
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, List, Optional

import numpy as np
from scipy import integrate

from models.errors import ParameterError, UnboundedDerivativeError
from models.params import IntensityParams
from utils.validators import validate_distances

logger = logging.getLogger(__name__)


def _check_incentive(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ParameterError(f"Incentive z must be ≥ 0 (got min {float(np.min(z))})")
    return z


class IntensityModel(ABC):
    """
    Contract for arrival-rate families.

    Subclasses must be C¹, nondecreasing and concave in z for every x.
    """

    @abstractmethod
    def evaluate(self, x, z):
        """Arrival rate density at distance x under incentive z."""

    @abstractmethod
    def dz(self, x, z):
        """Partial derivative of evaluate in z."""

    def integrate(self, a: float, b: float, z: float) -> float:
        """Integral of f(., z) over [a, b]."""
        value, _ = integrate.quad(lambda s: float(self.evaluate(s, z)), a, b)
        return value

    def check_assumptions(self, xs, zs, rel_tol: float = 1e-6) -> List[str]:
        """
        Verify monotonicity, midpoint concavity and derivative consistency on samples.

        Args:
            xs: Sample distances
            zs: Sample incentives (strictly positive for the derivative check)
            rel_tol: Relative tolerance of the centered-difference check

        Returns:
            List of violation messages (empty when every check passes)
        """
        violations = []
        zs = np.sort(np.asarray(zs, dtype=float))

        for x in np.asarray(xs, dtype=float):
            values = np.asarray(self.evaluate(x, zs), dtype=float)
            if np.any(np.diff(values) < -1e-12 * np.abs(values[1:])):
                violations.append(f"f(x={x:g}, .) decreases in z")

            lo, hi = zs[:-1], zs[1:]
            mid = np.asarray(self.evaluate(x, 0.5 * (lo + hi)), dtype=float)
            chord = 0.5 * (values[:-1] + values[1:])
            if np.any(mid < chord - 1e-12 * np.abs(chord)):
                violations.append(f"f(x={x:g}, .) is not midpoint concave")

            positive = zs[zs > 0]
            h = 1e-5 * positive
            fd = (np.asarray(self.evaluate(x, positive + h)) -
                  np.asarray(self.evaluate(x, positive - h))) / (2 * h)
            exact = np.asarray(self.dz(x, positive), dtype=float)
            scale = np.maximum(np.abs(exact), 1e-300)
            if np.any(np.abs(fd - exact) > rel_tol * scale):
                violations.append(f"dz inconsistent with evaluate at x={x:g}")

        return violations


class PowerIntensity(IntensityModel):
    """
    f(x, z) = lam * z**r * exp(-kappa x) + lam0(x)

    The baseline lam0(x) defaults to lam0 * exp(-kappa0 x); any nonnegative callable
    may replace it.
    """

    def __init__(self, params: IntensityParams, baseline: Optional[Callable] = None):
        """
        Initialize the power-law intensity.

        Args:
            params: Intensity parameters
            baseline: Optional replacement for the no-incentive arrival density
        """
        self.params = params
        self._baseline = baseline

    def baseline(self, x):
        """Arrival density in the absence of incentives."""
        x = np.asarray(x, dtype=float)
        if self._baseline is not None:
            return np.asarray(self._baseline(x), dtype=float)
        return self.params.lam0 * np.exp(-self.params.kappa0 * x)

    def incentive_part(self, x, z):
        """Extra arrival density generated by the incentive z."""
        p = self.params
        z = _check_incentive(z)
        return p.lam * np.power(z, p.r) * np.exp(-p.kappa * np.asarray(x, dtype=float))

    def evaluate(self, x, z):
        return self.incentive_part(x, z) + self.baseline(x)

    def dz(self, x, z):
        p = self.params
        z = _check_incentive(z)
        if p.lam > 0 and np.any(z == 0):
            raise UnboundedDerivativeError("unbounded derivative: dz f diverges at z = 0 for r < 1")
        with np.errstate(divide='ignore'):
            slope = p.r * np.power(z, p.r - 1.0)
        return p.lam * np.where(z > 0, slope, 0.0) * np.exp(-p.kappa * np.asarray(x, dtype=float))

    def integrate(self, a: float, b: float, z: float) -> float:
        if self._baseline is not None:
            return super().integrate(a, b, z)
        p = self.params
        z = float(_check_incentive(z))
        incentive = p.lam * z ** p.r * (np.exp(-p.kappa * a) - np.exp(-p.kappa * b)) / p.kappa
        base = p.lam0 * (np.exp(-p.kappa0 * a) - np.exp(-p.kappa0 * b)) / p.kappa0
        return float(incentive + base)


def _check_distances(x, L: Optional[float]):
    ok, error = validate_distances('x', x, L)
    if not ok:
        raise ParameterError(error)


def intensity_eval(params: IntensityParams, x, z, L: Optional[float] = None):
    """Arrival rate density f(x, z) of the power family; x must lie in (0, L) when L is given."""
    _check_distances(x, L)
    return PowerIntensity(params).evaluate(x, z)


def intensity_dz(params: IntensityParams, x, z, L: Optional[float] = None):
    """Partial derivative of f in z; raises UnboundedDerivativeError at z = 0."""
    _check_distances(x, L)
    return PowerIntensity(params).dz(x, z)


def per_limit_rate(params: IntensityParams, tick: float, k: int, z: float,
                   L: Optional[float] = None, convention: str = 'point',
                   model: Optional[IntensityModel] = None) -> float:
    """
    Arrival rate (per minute) of unit orders at the k-th limit.

    Args:
        params: Intensity parameters
        tick: Tick size in dollars
        k: Limit index, 1-based
        z: Incentive in dollars per unit order
        L: Domain half-width; when given, k * tick must stay below it
        convention: 'point' (tick * f(k tick, z)) or 'interval' (integral over the
            k-th tick interval)
        model: Optional alternative intensity model

    Returns:
        Rate in 1/min

    Example:
        >>> per_limit_rate(BASELINE_INTENSITY, 0.01, 1, 0.0)  # about 303
    """
    if k < 1:
        raise ParameterError(f"Limit index must be ≥ 1 (got {k})")
    if L is not None and k * tick >= L:
        raise ParameterError(f"Limit {k} at distance {k * tick:g} lies outside (0, {L:g})")

    model = model or PowerIntensity(params)
    if convention == 'point':
        return float(tick * model.evaluate(k * tick, z))
    if convention == 'interval':
        return model.integrate((k - 1) * tick, k * tick, z)

    raise ParameterError(f"Unknown convention {convention!r} (use 'point' or 'interval')")
