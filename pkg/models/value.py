"""
Adjoint value function p(t, x) of the incentive problem.

p solves the backward linear parabolic PDE

    dp/dt + eta p'' - beta p' + alpha p + 1 = 0 on (0, L),  p(T, .) = 0,  p(., 0) = p(., L) = 0

and equals the expected discounted occupation time of X (dX = -beta ds + sqrt(2 eta) dW)
in (0, L). Three independent solvers are provided: the stationary closed form, a
theta-scheme finite-difference solver and Feynman-Kac Monte Carlo.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from models.errors import GridError, ParameterError, StabilityError
from models.params import SideParams
from utils import rng
from utils.tridiag import convection_diffusion_operator
from utils.validators import validate_closed_interval, validate_divides

logger = logging.getLogger(__name__)

# Monte Carlo paths per random stream; fixed so results do not depend on worker count
MC_BATCH_SIZE = 4096

# barrier-shift constant of discretely monitored Brownian exits
BARRIER_SHIFT = 0.5826

# backward-Euler steps before the theta scheme takes over
STARTUP_STEPS = 2


@dataclass(frozen=True)
class StationaryValue:
    """
    Closed-form large-horizon value

        p̄(x) = -1/alpha + mu_plus exp(nu_plus x) + mu_minus exp(nu_minus x)
    """
    nu_plus: float
    nu_minus: float
    mu_plus: float
    mu_minus: float
    alpha: float
    L: float

    def __call__(self, x):
        return stationary_value_eval(self, x)

    def derivative(self, x):
        """p̄'(x), evaluated in the same overflow-safe form as the value."""
        x = np.asarray(x, dtype=float)
        gap = math.expm1((self.nu_minus - self.nu_plus) * self.L)
        plus = -math.expm1(self.nu_minus * self.L) * np.exp(self.nu_plus * (x - self.L)) / (-gap)
        minus = -math.expm1(-self.nu_plus * self.L) * np.exp(self.nu_minus * x) / (-gap)
        return (self.nu_plus * plus + self.nu_minus * minus) / self.alpha


@dataclass(frozen=True)
class ValueField:
    """p(t_i, x_j) on a rectangular grid; values has shape (len(t), len(x))."""
    t: np.ndarray
    x: np.ndarray
    values: np.ndarray
    side: SideParams

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def upper_bound(self) -> np.ndarray:
        """(1 - exp(alpha (T - t))) / |alpha| per time node (T - t when alpha = 0)."""
        remaining = self.T - self.t
        if self.side.alpha == 0:
            return remaining
        return -np.expm1(self.side.alpha * remaining) / abs(self.side.alpha)

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns t, x, p (one row per node)."""
        tt, xx = np.meshgrid(self.t, self.x, indexing='ij')
        return pd.DataFrame({'t': tt.ravel(), 'x': xx.ravel(), 'p': self.values.ravel()})


@dataclass(frozen=True)
class ExitTimeEstimate:
    """Monte Carlo estimate of p(t, x)."""
    mean: float
    stderr: float
    n_paths: int


@dataclass(frozen=True)
class OracleCheck:
    """One pairwise comparison between value solvers."""
    name: str
    x: float
    computed: float
    reference: float
    tolerance: float

    @property
    def delta(self) -> float:
        return abs(self.computed - self.reference)

    @property
    def passed(self) -> bool:
        return self.delta <= self.tolerance


def stationary_coefficients(side: SideParams, L: float) -> StationaryValue:
    """
    Exponents and coefficients of the stationary closed form.

    Args:
        side: Side parameters (alpha < 0, eta > 0)
        L: Domain width in dollars

    Returns:
        StationaryValue

    Raises:
        ParameterError: alpha = 0 (the 1/alpha terms degenerate) or eta <= 0
    """
    if side.alpha >= 0:
        raise ParameterError("stationary closed form requires α < 0")
    if side.eta <= 0:
        raise ParameterError(f"eta must be > 0 (got {side.eta})")

    root = math.sqrt(side.beta ** 2 - 4 * side.eta * side.alpha)
    nu_plus = (side.beta + root) / (2 * side.eta)
    nu_minus = (side.beta - root) / (2 * side.eta)

    # mu_minus = (1/alpha) (e^{nu+ L} - 1) / (e^{nu+ L} - e^{nu- L}), divided through by e^{nu+ L}
    gap = -math.expm1((nu_minus - nu_plus) * L)
    mu_minus = -math.expm1(-nu_plus * L) / gap / side.alpha
    mu_plus = 1.0 / side.alpha - mu_minus

    return StationaryValue(nu_plus=nu_plus, nu_minus=nu_minus, mu_plus=mu_plus,
                           mu_minus=mu_minus, alpha=side.alpha, L=L)


def stationary_value_eval(sv: StationaryValue, x):
    """
    Evaluate p̄(x) on [0, L].

    The growing exponential is evaluated as exp(nu_plus (x - L)) so large nu_plus L
    never overflows.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-12) or np.any(x > sv.L + 1e-12):
        raise ParameterError(f"x must lie in [0, {sv.L:g}]")
    x = np.clip(x, 0.0, sv.L)

    gap = -math.expm1((sv.nu_minus - sv.nu_plus) * sv.L)
    plus = -math.expm1(sv.nu_minus * sv.L) / gap * np.exp(sv.nu_plus * (x - sv.L))
    minus = -math.expm1(-sv.nu_plus * sv.L) / gap * np.exp(sv.nu_minus * x)
    value = (plus + minus - 1.0) / sv.alpha
    return float(value) if value.ndim == 0 else value


def exit_time_reference(x, L: float, eta: float):
    """Mean exit time x(L - x)/(2 eta) of a driftless diffusion with generator eta d²."""
    x = np.asarray(x, dtype=float)
    return x * (L - x) / (2 * eta)


def _grid_count(name: str, step: float, span: float) -> int:
    ok, error = validate_divides(name, step, span)
    if not ok:
        raise GridError(error)
    return int(round(span / step))


def solve_value_pde(side: SideParams, L: float, T: float, dx: float, dt: float,
                    theta: float = 0.5, scheme: str = 'hybrid', safety: float = 1.0,
                    startup_steps: int = STARTUP_STEPS) -> ValueField:
    """
    March the value PDE backward from p(T, .) = 0 with a theta scheme.

    Args:
        side: Side parameters
        L: Domain width
        T: Horizon in minutes
        dx: Space step (must divide L)
        dt: Time step (must divide T)
        theta: Implicit weight (0.5 = Crank-Nicolson, 1 = backward Euler)
        scheme: First-derivative discretisation ('hybrid', 'central', 'upwind')
        safety: Divisor applied to the explicit stability bound when theta < 1/2
        startup_steps: Backward-Euler steps taken first from the terminal data

    Returns:
        ValueField over [0, T] x [0, L]
    """
    ok, error = validate_closed_interval('theta', theta, 0.0, 1.0)
    if not ok:
        raise ParameterError(error)

    n_x = _grid_count('dx', dx, L)
    n_t = _grid_count('dt', dt, T)
    if n_x < 2:
        raise GridError(f"dx={dx:g} leaves no interior node on [0, {L:g}]")

    if theta < 0.5 and side.eta > 0:
        bound = dx ** 2 / (2 * side.eta * (1 - theta) * safety)
        if dt > bound:
            raise StabilityError(f"dt={dt:g} exceeds the explicit stability bound {bound:g} for theta={theta}")

    operator = convection_diffusion_operator(n_x - 1, dx, side.eta, -side.beta, side.alpha, scheme)
    implicit = operator.shifted(1.0, -theta * dt)
    explicit = operator.shifted(1.0, (1 - theta) * dt)
    ab = implicit.banded()
    euler = operator.shifted(1.0, -dt)
    euler_ab = euler.banded()

    values = np.zeros((n_t + 1, n_x + 1))
    interior = np.zeros(n_x - 1)
    for step, i in enumerate(range(n_t - 1, -1, -1)):
        if step < startup_steps and theta < 1:
            interior = euler.solve(interior + dt, euler_ab)
        else:
            interior = implicit.solve(explicit.matvec(interior) + dt, ab)
        values[i, 1:-1] = interior

    logger.info(f"Value PDE solved: {n_t} steps x {n_x - 1} interior nodes, theta={theta}")

    t = np.linspace(0.0, T, n_t + 1)
    x = np.linspace(0.0, L, n_x + 1)
    return ValueField(t=t, x=x, values=values, side=side)


def _feynman_kac_batch(side: SideParams, L: float, t: float, x: float, T: float,
                       n_paths: int, dt_mc: float, seed: int, batch: int) -> np.ndarray:
    generator = rng.stream(seed, rng.FEYNMAN_KAC_BATCH, batch)
    acc = np.zeros(n_paths)
    if not (0.0 < x < L):
        return acc

    position = np.full(n_paths, float(x))
    alive = np.arange(n_paths)
    vol = math.sqrt(2 * side.eta)
    s = t

    while alive.size and s < T - 1e-15:
        h = min(dt_mc, T - s)
        # exact integral of exp(alpha (u - t)) over [s, s + h]
        if side.alpha == 0:
            weight = h
        else:
            weight = math.exp(side.alpha * (s - t)) * math.expm1(side.alpha * h) / side.alpha
        acc[alive] += weight

        position = position - side.beta * h + vol * math.sqrt(h) * generator.standard_normal(alive.size)
        inside = (position > 0.0) & (position < L)
        alive = alive[inside]
        position = position[inside]
        s += h

    return acc


def feynman_kac_estimate(side: SideParams, L: float, t: float, x: float, T: float,
                         n_paths: int, dt_mc: float, seed: int, n_jobs: int = 1) -> ExitTimeEstimate:
    """
    Estimate p(t, x) by simulating the exit of X from (0, L).

    Exits are checked at step ends (no Brownian-bridge correction), so the estimate is
    biased upward by O(sqrt(dt_mc)); see barrier_allowance.

    Args:
        side: Side parameters
        L: Domain width
        t: Start time
        x: Start point in [0, L]
        T: Horizon
        n_paths: Number of paths (≥ 1)
        dt_mc: Euler step
        seed: Master seed; batch b of MC_BATCH_SIZE paths uses stream (seed, b)
        n_jobs: joblib workers

    Returns:
        ExitTimeEstimate
    """
    if not (0.0 <= x <= L):
        raise ParameterError(f"x must lie in [0, {L:g}] (got {x})")
    if n_paths < 1:
        raise ParameterError(f"n_paths must be ≥ 1 (got {n_paths})")
    if dt_mc <= 0:
        raise ParameterError(f"dt_mc must be > 0 (got {dt_mc})")

    sizes = [min(MC_BATCH_SIZE, n_paths - start) for start in range(0, n_paths, MC_BATCH_SIZE)]
    chunks = Parallel(n_jobs=n_jobs)(
        delayed(_feynman_kac_batch)(side, L, t, x, T, size, dt_mc, seed, b)
        for b, size in enumerate(sizes)
    )
    samples = np.concatenate(chunks)

    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    logger.info(f"Feynman-Kac p({t:g}, {x:g}) = {mean:.6f} ± {stderr:.2e} ({n_paths} paths)")
    return ExitTimeEstimate(mean=mean, stderr=stderr, n_paths=n_paths)


def barrier_allowance(sv: StationaryValue, eta: float, dt_mc: float) -> float:
    """First-order bias of step-end exit checks: barrier shift times boundary slopes."""
    shift = BARRIER_SHIFT * math.sqrt(2 * eta * dt_mc)
    slopes = abs(float(sv.derivative(0.0))) + abs(float(sv.derivative(sv.L)))
    return shift * slopes


def discrete_stationary_value(side: SideParams, L: float, dx: float, scheme: str = 'hybrid') -> np.ndarray:
    """
    Steady state of the finite-difference operator: A p = -1 with p(0) = p(L) = 0.

    This is the limit of solve_value_pde as T grows on the same space grid, so the
    distance to it isolates the horizon effect from the space discretisation error.
    """
    n_x = _grid_count('dx', dx, L)
    if n_x < 2:
        raise GridError(f"dx={dx:g} leaves no interior node on [0, {L:g}]")
    operator = convection_diffusion_operator(n_x - 1, dx, side.eta, -side.beta, side.alpha, scheme)
    values = np.zeros(n_x + 1)
    values[1:-1] = operator.solve(-np.ones(n_x - 1))
    return values


def horizon_convergence(side: SideParams, L: float, horizons: Sequence[float],
                        dx: float, dt: float, theta: float = 0.5) -> Dict[float, float]:
    """
    Sup-norm distance between p(0, .; T) and the steady state of the same scheme.

    Measured against the discrete steady state so the space discretisation floor does
    not mask the decay in T; the closed-form comparison lives in oracle_triangle.

    Returns:
        Mapping horizon -> sup error
    """
    steady = discrete_stationary_value(side, L, dx)
    errors = {}
    for T in horizons:
        field = solve_value_pde(side, L, T, dx, dt, theta)
        errors[float(T)] = float(np.max(np.abs(field.values[0] - steady)))
        logger.info(f"Horizon {T:g} min: sup |p - p_steady| = {errors[float(T)]:.3e}")
    return errors


def oracle_triangle(side: SideParams, L: float, points: Sequence[float], T: float,
                    dx: float, dt: float, mc_paths: int, mc_dt: float, seed: int,
                    theta: float = 0.5, n_jobs: int = 1,
                    field: Optional[ValueField] = None) -> List[OracleCheck]:
    """
    Compare closed form, PDE and Monte Carlo values pairwise.

    Tolerances: PDE vs closed form in sup norm within 1e-3 / |alpha|; Monte Carlo vs
    closed form within 3 standard errors plus the barrier allowance; Monte Carlo vs
    PDE likewise plus the PDE tolerance.

    Returns:
        List of OracleCheck
    """
    sv = stationary_coefficients(side, L)
    if field is None:
        field = solve_value_pde(side, L, T, dx, dt, theta)
    pde_tol = 1e-3 / abs(side.alpha)
    p0 = field.values[0]

    worst = int(np.argmax(np.abs(p0 - sv(field.x))))
    checks = [OracleCheck('pde_vs_closed_form_sup', float(field.x[worst]), float(p0[worst]),
                          float(sv(field.x[worst])), pde_tol)]

    allowance = barrier_allowance(sv, side.eta, mc_dt)
    for b, x in enumerate(points):
        estimate = feynman_kac_estimate(side, L, 0.0, x, T, mc_paths, mc_dt, seed + b, n_jobs)
        closed = float(sv(x))
        pde = float(np.interp(x, field.x, p0))
        mc_tol = 3 * estimate.stderr + allowance
        checks.append(OracleCheck('mc_vs_closed_form', float(x), estimate.mean, closed, mc_tol))
        checks.append(OracleCheck('mc_vs_pde', float(x), estimate.mean, pde, mc_tol + pde_tol))
        checks.append(OracleCheck('pde_vs_closed_form', float(x), pde, closed, pde_tol))

    for check in checks:
        status = 'ok' if check.passed else 'FAILED'
        logger.info(f"{check.name} at x={check.x:g}: delta {check.delta:.3e} (tol {check.tolerance:.3e}) {status}")
    return checks
