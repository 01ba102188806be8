"""
Optimal incentives.

The Hamiltonian of the exchange's problem is

    H(x, u, z, p, q) = u - g(x, z) + (alpha u + f(x, z)) p + sigma u q

and the optimal incentive maximises it in z: -dz g + p dz f = 0, or z = 0 when the
map is negative on (0, +inf). For the power intensity and linear-exponential penalty
the root is explicit:

    z*(x) = (p(x) lam r / (A_bar exp((a_bar + kappa) x)))**(1 / (1 - r))
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy import integrate, optimize

from models.errors import NoInteriorRootError, ParameterError
from models.intensity import IntensityModel, PowerIntensity
from models.params import IntensityParams, PenaltyParams, SideParams
from models.penalty import LinearExpPenalty, PenaltyModel
from models.value import StationaryValue, ValueField

logger = logging.getLogger(__name__)

Z_MAX = 1e6
Z_LO = 1e-30


def hamiltonian(x, u, z, p, q, side: SideParams, intensity: IntensityModel, penalty: PenaltyModel):
    """
    Pointwise criterion maximised by the optimal incentive.

    Args:
        x: Distance from the mid-price
        u: Book density (≥ 0)
        z: Incentive (≥ 0)
        p, q: Adjoint pair
        side: Side parameters (alpha, sigma)
        intensity: Arrival model f
        penalty: Cost model g

    Returns:
        H(x, u, z, p, q)
    """
    if np.any(np.asarray(u) < 0):
        raise ParameterError("u must be ≥ 0")
    return (u - penalty.evaluate(x, z) + (side.alpha * u + intensity.evaluate(x, z)) * p
            + side.sigma * u * q)


def foc_map(x: float, z: float, p_value: float, intensity: IntensityModel, penalty: PenaltyModel) -> float:
    """dz H = -dz g(x, z) + p dz f(x, z), strictly decreasing in z for the admitted families."""
    return float(-penalty.dz(x, z) + p_value * intensity.dz(x, z))


def foc_solve(x: float, p_value: float, intensity: IntensityModel, penalty: PenaltyModel,
              z_max: float = Z_MAX, z_lo: float = Z_LO) -> float:
    """
    Root of the first-order condition, bracketed by geometric expansion from z_lo.

    Args:
        x: Distance from the mid-price
        p_value: Adjoint value p(t, x) (≥ 0)
        intensity: Arrival model
        penalty: Cost model
        z_max: Incentive cap
        z_lo: Smallest incentive tried

    Returns:
        Optimal incentive (0 when the supremum sits on the boundary)

    Raises:
        NoInteriorRootError: the map is still positive at z_max
    """
    if p_value < 0:
        raise ParameterError(f"p_value must be ≥ 0 (got {p_value})")
    if p_value == 0:
        return 0.0

    lo = z_lo
    if foc_map(x, lo, p_value, intensity, penalty) <= 0:
        return 0.0

    hi = lo * 10
    while foc_map(x, hi, p_value, intensity, penalty) > 0:
        if hi >= z_max:
            raise NoInteriorRootError(
                f"no interior root and boundary not optimal at x={x:g}: dz H > 0 up to z_max={z_max:g}")
        lo, hi = hi, min(hi * 10, z_max)

    return optimize.brentq(lambda z: foc_map(x, z, p_value, intensity, penalty), lo, hi,
                           xtol=1e-300, rtol=1e-15, maxiter=500)


def closed_form_incentive(x, p, intensity: IntensityParams, penalty: PenaltyParams):
    """(p lam r / (A_bar exp((a_bar + kappa) x)))**(1/(1-r)), zero where p <= 0."""
    p = np.maximum(np.asarray(p, dtype=float), 0.0)
    x = np.asarray(x, dtype=float)
    ratio = p * intensity.lam * intensity.r / (penalty.A_bar * np.exp((penalty.a_bar + intensity.kappa) * x))
    return np.power(ratio, 1.0 / (1.0 - intensity.r))


def stationary_incentive(x, sv: StationaryValue, intensity: IntensityParams, penalty: PenaltyParams):
    """Large-horizon optimal incentive at distance x in (0, L)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x >= sv.L):
        raise ParameterError(f"x must lie in (0, {sv.L:g})")
    z = closed_form_incentive(x, sv(x), intensity, penalty)
    return float(z) if z.ndim == 0 else z


class IncentiveSchedule(ABC):
    """Admissible control Z(t, x) ≥ 0 on [0, T] x (0, L)."""

    @abstractmethod
    def evaluate(self, t: float, x) -> np.ndarray:
        """Incentive at time t on distances x."""

    @abstractmethod
    def scaled(self, factor: float) -> 'IncentiveSchedule':
        """Schedule multiplied pointwise by a nonnegative factor."""

    def time_key(self, t: float):
        """Key under which evaluate(t, .) is constant; None when time independent."""
        return None

    def to_frame(self, t_grid, x_grid) -> pd.DataFrame:
        """Long table with columns t, x, z."""
        rows = [(t, x, z) for t in t_grid for x, z in zip(x_grid, self.evaluate(t, x_grid))]
        return pd.DataFrame(rows, columns=['t', 'x', 'z'])


class StationarySchedule(IncentiveSchedule):
    """Time-independent closed-form schedule built from the stationary value."""

    def __init__(self, sv: StationaryValue, intensity: IntensityParams, penalty: PenaltyParams,
                 factor: float = 1.0):
        self.sv = sv
        self.intensity = intensity
        self.penalty = penalty
        self.factor = factor

    def evaluate(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x < self.sv.L)
        z = np.zeros_like(x)
        z[inside] = closed_form_incentive(x[inside], self.sv(x[inside]), self.intensity, self.penalty)
        return self.factor * z

    def scaled(self, factor: float) -> 'StationarySchedule':
        return StationarySchedule(self.sv, self.intensity, self.penalty, self.factor * factor)


class GridSchedule(IncentiveSchedule):
    """
    Schedule stored on a (t, x) grid; nearest time node, linear in x.

    When built with its intensity model the schedule carries the admissibility
    integral, and scaled copies recompute it.
    """

    def __init__(self, t: np.ndarray, x: np.ndarray, values: np.ndarray,
                 admissibility: Optional[float] = None, intensity: Optional[IntensityModel] = None):
        if np.any(values < 0):
            raise ParameterError("incentive schedule must be ≥ 0 everywhere")
        self.t = t
        self.x = x
        self.values = values
        self.intensity = intensity
        if admissibility is None and intensity is not None:
            admissibility = admissibility_integral(t, x, values, intensity)
        self.admissibility = admissibility

    def _index(self, t: float) -> int:
        if len(self.t) == 1:
            return 0
        step = self.t[1] - self.t[0]
        return int(np.clip(np.rint((t - self.t[0]) / step), 0, len(self.t) - 1))

    def time_key(self, t: float):
        return self._index(t)

    def evaluate(self, t: float, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.x, self.values[self._index(t)])

    def scaled(self, factor: float) -> 'GridSchedule':
        return GridSchedule(self.t, self.x, factor * self.values, intensity=self.intensity)

    def to_frame(self, t_grid=None, x_grid=None) -> pd.DataFrame:
        """Long table with columns t, x, z; defaults to the schedule's own grid."""
        if t_grid is not None or x_grid is not None:
            return super().to_frame(self.t if t_grid is None else t_grid, self.x if x_grid is None else x_grid)
        tt, xx = np.meshgrid(self.t, self.x, indexing='ij')
        return pd.DataFrame({'t': tt.ravel(), 'x': xx.ravel(), 'z': self.values.ravel()})


def admissibility_integral(t: np.ndarray, x: np.ndarray, values: np.ndarray,
                           intensity: IntensityModel) -> float:
    """Trapezoidal approximation of the double integral of f(x, Z(t, x))² over the grid."""
    rates = np.asarray(intensity.evaluate(x[None, :], values), dtype=float) ** 2
    inner = integrate.trapezoid(rates, x, axis=1)
    return float(integrate.trapezoid(inner, t)) if len(t) > 1 else float(inner[0])


def incentive_schedule(field: ValueField, intensity, penalty) -> GridSchedule:
    """
    Optimal incentives node by node from a value field.

    Uses the explicit formula for the power/linear-exponential families and the
    first-order-condition root finder otherwise.

    Args:
        field: Value field p(t, x)
        intensity: IntensityParams or IntensityModel
        penalty: PenaltyParams or PenaltyModel

    Returns:
        GridSchedule carrying its admissibility integral
    """
    intensity_model = PowerIntensity(intensity) if isinstance(intensity, IntensityParams) else intensity
    penalty_model = LinearExpPenalty(penalty) if isinstance(penalty, PenaltyParams) else penalty

    closed = (type(intensity_model) is PowerIntensity and intensity_model._baseline is None
              and type(penalty_model) is LinearExpPenalty)

    values = np.zeros_like(field.values)
    inner = slice(1, -1)
    if closed:
        values[:, inner] = closed_form_incentive(field.x[None, inner], field.values[:, inner],
                                                 intensity_model.params, penalty_model.params)
    else:
        for i in range(len(field.t)):
            for j in range(1, len(field.x) - 1):
                values[i, j] = foc_solve(field.x[j], max(field.values[i, j], 0.0),
                                         intensity_model, penalty_model)

    admissibility = admissibility_integral(field.t, field.x, values, intensity_model)
    if not math.isfinite(admissibility):
        raise ParameterError("schedule is not admissible: integral of f(x, Z)² is not finite")

    logger.info(f"Incentive schedule built on {values.shape[0]}x{values.shape[1]} nodes, "
                f"admissibility integral {admissibility:.4e}")
    return GridSchedule(field.t, field.x, values, admissibility=admissibility, intensity=intensity_model)


@dataclass(frozen=True)
class LimitTable:
    """Incentive per unit order at each limit of one side."""
    limits: np.ndarray
    distances: np.ndarray
    incentives: np.ndarray
    side: str = 'ask'

    def __post_init__(self):
        if np.any(self.incentives < 0):
            raise ParameterError("limit incentives must be ≥ 0")
        if np.any(np.diff(self.distances) <= 0):
            raise ParameterError("limit distances must be strictly increasing")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'limit': self.limits, 'distance': self.distances,
                             'incentive': self.incentives})


def per_limit_incentive_table(schedule: IncentiveSchedule, tick: float, n_limits: int,
                              convention: str = 'point', L: Optional[float] = None,
                              t: float = 0.0, side: str = 'ask',
                              samples_per_tick: int = 64) -> LimitTable:
    """
    Incentive per unit order at limits k = 1..n_limits.

    Args:
        schedule: Incentive schedule
        tick: Tick size
        n_limits: Number of limits
        convention: 'point' (Z at k * tick) or 'interval' (average over the k-th tick)
        L: Domain width; n_limits * tick must not exceed it
        t: Time at which the schedule is read
        side: Label carried by the table

    Returns:
        LimitTable
    """
    if L is None:
        L = getattr(getattr(schedule, 'sv', None), 'L', None)
        if L is None and isinstance(schedule, GridSchedule):
            L = float(schedule.x[-1])
    if n_limits < 1:
        raise ParameterError(f"n_limits must be ≥ 1 (got {n_limits})")
    if L is not None and n_limits * tick > L * (1 + 1e-12):
        raise ParameterError(f"{n_limits} limits of tick {tick:g} exceed the domain (0, {L:g})")

    limits = np.arange(1, n_limits + 1)
    distances = limits * tick

    if convention == 'point':
        incentives = schedule.evaluate(t, distances)
    elif convention == 'interval':
        incentives = np.empty(n_limits)
        for k in limits:
            xs = np.linspace((k - 1) * tick, k * tick, samples_per_tick + 1)
            incentives[k - 1] = integrate.trapezoid(schedule.evaluate(t, xs), xs) / tick
    else:
        raise ParameterError(f"Unknown convention {convention!r} (use 'point' or 'interval')")

    return LimitTable(limits=limits, distances=distances, incentives=np.asarray(incentives, dtype=float),
                      side=side)
