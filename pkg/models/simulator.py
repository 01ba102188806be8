"""
Controlled order-book SPDE simulator.

Ask side on (0, L):

    du = (eta u'' + beta u' + alpha u + f(x, Z)) dt + sigma u dW

The bid side obeys the same equation in mirrored coordinates y = -x for v = -u, so
both sides share one stepping routine. Each step treats the linear operator with a
theta = 1/2 weight through a tridiagonal solve, adds the source explicitly and applies
one multiplicative Gaussian increment per side; the two increments are correlated
with rho. Negative values are truncated to zero and counted.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import integrate

from models.errors import GridError, ParameterError, StabilityError
from models.incentives import IncentiveSchedule
from models.intensity import IntensityModel, PowerIntensity
from models.params import BookParams, IntensityParams, PenaltyParams, SideParams
from models.penalty import LinearExpPenalty, PenaltyModel
from utils import rng
from utils.statistics import mean_and_stderr
from utils.tridiag import convection_diffusion_operator
from utils.validators import validate_divides

logger = logging.getLogger(__name__)

SIDES = ('ask', 'bid')

# paths advanced together; fixed so results do not depend on the worker count
SIM_BATCH_SIZE = 50

# sigma² dt above this is rejected
NOISE_STABILITY_LIMIT = 0.1

# truncated node-steps fraction above which a run is flagged
NOISE_DOMINATED_FRACTION = 0.05

THETA = 0.5


@dataclass(frozen=True)
class BookState:
    """
    Order-book density on both sides at time t.

    ask holds u on the nodes of [0, L]; bid holds u on the nodes of [-L, 0], both
    including the boundary nodes, which are always 0.
    """
    ask: np.ndarray
    bid: np.ndarray
    dx: float
    t: float = 0.0

    def __post_init__(self):
        if self.ask.shape != self.bid.shape:
            raise GridError("ask and bid grids must have the same number of nodes")
        if np.any(self.ask < 0) or np.any(self.bid > 0):
            raise ParameterError("ask density must be ≥ 0 and bid density ≤ 0")
        if self.ask[0] != 0 or self.ask[-1] != 0 or self.bid[0] != 0 or self.bid[-1] != 0:
            raise ParameterError("book density must vanish on the four boundary nodes")

    @property
    def L(self) -> float:
        return self.dx * (len(self.ask) - 1)

    @property
    def x_ask(self) -> np.ndarray:
        return np.linspace(0.0, self.L, len(self.ask))

    @property
    def x_bid(self) -> np.ndarray:
        return np.linspace(-self.L, 0.0, len(self.bid))

    def mirrored(self, side: str) -> np.ndarray:
        """Nonnegative density on [0, L] in the side's own coordinates."""
        if side == 'ask':
            return self.ask
        return -self.bid[::-1]

    @classmethod
    def from_mirrored(cls, ask: np.ndarray, bid_mirrored: np.ndarray, dx: float, t: float = 0.0) -> 'BookState':
        return cls(ask=ask, bid=-bid_mirrored[::-1], dx=dx, t=t)

    @classmethod
    def empty(cls, L: float, dx: float) -> 'BookState':
        """All-zero book."""
        n = _node_count(dx, L)
        return cls(ask=np.zeros(n + 1), bid=np.zeros(n + 1), dx=dx)

    @classmethod
    def half_filled(cls, book: BookParams, intensity, dx: float) -> 'BookState':
        """Half of the no-incentive stationary mean profile on each side."""
        ask = 0.5 * stationary_mean_profile(book.ask, book.L, dx, intensity)
        bid = 0.5 * stationary_mean_profile(book.bid, book.L, dx, intensity)
        return cls.from_mirrored(ask, bid, dx)


def _node_count(dx: float, L: float) -> int:
    ok, error = validate_divides('dx', dx, L)
    if not ok:
        raise GridError(error)
    n = int(round(L / dx))
    if n < 2:
        raise GridError(f"dx={dx:g} leaves no interior node on [0, {L:g}]")
    return n


def _as_model(intensity) -> IntensityModel:
    return PowerIntensity(intensity) if isinstance(intensity, IntensityParams) else intensity


def stationary_mean_profile(side: SideParams, L: float, dx: float, intensity, z: float = 0.0) -> np.ndarray:
    """
    Solve eta u'' + beta u' + alpha u + f(x, z) = 0 with u(0) = u(L) = 0.

    The mean of the multiplicative-noise SPDE obeys the noiseless equation, so this is
    the long-run expected book under a constant incentive z.
    """
    n = _node_count(dx, L)
    x = np.linspace(0.0, L, n + 1)
    operator = convection_diffusion_operator(n - 1, dx, side.eta, side.beta, side.alpha)
    source = np.asarray(_as_model(intensity).evaluate(x[1:-1], z), dtype=float)
    profile = np.zeros(n + 1)
    profile[1:-1] = np.maximum(operator.solve(-source), 0.0)
    return profile


@dataclass
class BookPath:
    """Recorded snapshots of one path."""
    t: List[float] = field(default_factory=list)
    states: List[BookState] = field(default_factory=list)

    def to_frame(self, side: str = 'ask') -> pd.DataFrame:
        """Long table with columns t, x, u."""
        frames = []
        for state in self.states:
            x = state.x_ask if side == 'ask' else state.x_bid
            u = state.ask if side == 'ask' else state.bid
            frames.append(pd.DataFrame({'t': state.t, 'x': x, 'u': u}))
        return pd.concat(frames, ignore_index=True)


@dataclass(frozen=True)
class EnsembleStats:
    """Node-wise moments at T and per-limit volumes over an ensemble of paths."""
    x: np.ndarray
    mean: Dict[str, np.ndarray]
    std: Dict[str, np.ndarray]
    limit_volumes: Dict[str, np.ndarray]
    path_limit_volumes: Dict[str, np.ndarray]
    path_total_volumes: Dict[str, np.ndarray]
    n_paths: int
    truncation_events: int
    node_steps: int

    @property
    def truncation_fraction(self) -> float:
        return self.truncation_events / self.node_steps if self.node_steps else 0.0

    @property
    def noise_dominated(self) -> bool:
        return self.truncation_fraction >= NOISE_DOMINATED_FRACTION

    def shape_frame(self, side: str = 'ask') -> pd.DataFrame:
        """Columns x, mean_u, std_u; bid rows use x in [-L, 0] and u ≤ 0."""
        if side == 'ask':
            return pd.DataFrame({'x': self.x, 'mean_u': self.mean['ask'], 'std_u': self.std['ask']})
        return pd.DataFrame({'x': -self.x[::-1], 'mean_u': -self.mean['bid'][::-1],
                             'std_u': self.std['bid'][::-1]})

    def limits_frame(self) -> pd.DataFrame:
        """Columns limit, side, volume (volumes are order counts, ≥ 0 on both sides)."""
        rows = []
        for side in SIDES:
            for k, volume in enumerate(self.limit_volumes[side], start=1):
                rows.append((k, side, volume))
        return pd.DataFrame(rows, columns=['limit', 'side', 'volume'])


@dataclass(frozen=True)
class ObjectiveEstimate:
    """Monte Carlo estimate of the exchange's objective on the ask side."""
    mean: float
    stderr: float
    n_paths: int
    per_path: np.ndarray
    penalty_integral: float
    book_integral: float


def limit_volumes(profile: np.ndarray, dx: float, tick: float, n_limits: int) -> np.ndarray:
    """
    Trapezoidal volume of each limit cell [(k-1) tick, k tick].

    The last cell [n_limits tick, L] is folded into limit n_limits, so the volumes add
    up to the integral over (0, L). Works on the last axis.
    """
    ok, error = validate_divides('dx', dx, tick)
    if not ok:
        raise GridError(error)
    per_tick = int(round(tick / dx))
    profile = np.asarray(profile, dtype=float)
    n_nodes = profile.shape[-1]

    volumes = []
    for k in range(1, n_limits + 1):
        start = (k - 1) * per_tick
        stop = n_nodes - 1 if k == n_limits else k * per_tick
        volumes.append(integrate.trapezoid(profile[..., start:stop + 1], dx=dx, axis=-1))
    return np.stack(volumes, axis=-1)


class BookSimulator:
    """
    Steps both sides of the book for a batch of paths.

    Attributes:
        book: Book parameters
        dx: Space step
        dt: Time step
        T: Horizon
    """

    def __init__(self, book: BookParams, intensity, dx: float, dt: float, T: float,
                 schedules: Optional[Tuple[Optional[IncentiveSchedule], Optional[IncentiveSchedule]]] = None,
                 scheme: str = 'hybrid'):
        """
        Initialize the simulator and factor the implicit operators.

        Args:
            book: Book parameters
            intensity: IntensityParams or IntensityModel (shared by both sides)
            dx: Space step (must divide L)
            dt: Time step (must divide T)
            T: Horizon in minutes
            schedules: (ask, bid) incentive schedules; None means no incentives
            scheme: First-derivative discretisation
        """
        self.book = book
        self.intensity = _as_model(intensity)
        self.dx = dx
        self.dt = dt
        self.T = T
        self.schedules = schedules if schedules is not None else (None, None)

        self.n = _node_count(dx, book.L)
        ok, error = validate_divides('dt', dt, T)
        if not ok:
            raise GridError(error)
        self.n_steps = int(round(T / dt))

        for name in SIDES:
            side = book.side(name)
            if side.sigma ** 2 * dt > NOISE_STABILITY_LIMIT:
                raise StabilityError(
                    f"{name}: sigma² dt = {side.sigma ** 2 * dt:g} exceeds {NOISE_STABILITY_LIMIT}")

        self.x = np.linspace(0.0, book.L, self.n + 1)
        self._interior = self.x[1:-1]
        self._explicit = {}
        self._implicit = {}
        self._banded = {}
        for name in SIDES:
            side = book.side(name)
            operator = convection_diffusion_operator(self.n - 1, dx, side.eta, side.beta, side.alpha, scheme)
            self._explicit[name] = operator.shifted(1.0, (1 - THETA) * dt)
            self._implicit[name] = operator.shifted(1.0, -THETA * dt)
            self._banded[name] = self._implicit[name].banded()

        self._source_cache: Dict[Tuple[str, object], np.ndarray] = {}
        rho = book.rho
        self._cholesky = np.array([[1.0, 0.0], [rho, math.sqrt(max(1.0 - rho ** 2, 0.0))]])

        logger.info(f"Book simulator: {self.n_steps} steps, {self.n - 1} interior nodes per side")

    def incentive(self, side: str, t: float) -> np.ndarray:
        """Incentive on the interior nodes of one side at time t (zero without a schedule)."""
        schedule = self.schedules[SIDES.index(side)]
        if schedule is None:
            return np.zeros(self.n - 1)
        return np.asarray(schedule.evaluate(t, self._interior), dtype=float)

    def source(self, side: str, t: float) -> np.ndarray:
        """f(x, Z(t, x)) on the interior nodes, cached per schedule time node."""
        schedule = self.schedules[SIDES.index(side)]
        key = (side, None if schedule is None else schedule.time_key(t))
        if key not in self._source_cache:
            z = self.incentive(side, t)
            self._source_cache[key] = np.asarray(self.intensity.evaluate(self._interior, z), dtype=float)
        return self._source_cache[key]

    def draw_noise(self, seed: int, path_indices) -> np.ndarray:
        """Correlated Brownian increments, shape (n_steps, 2, n_paths)."""
        columns = []
        for index in path_indices:
            generator = rng.stream(seed, rng.BOOK_PATH, index)
            normals = generator.standard_normal((self.n_steps, 2))
            columns.append(normals @ self._cholesky.T)
        return math.sqrt(self.dt) * np.stack(columns, axis=-1)

    def run(self, u0: BookState, seed: int, path_indices, penalty: Optional[PenaltyModel] = None,
            record_every: Optional[int] = None) -> Dict:
        """
        Advance a batch of paths from u0 to T.

        Args:
            u0: Initial book
            seed: Master seed
            path_indices: Indices of the paths in this batch (one random stream each)
            penalty: When given, accumulate the ask-side objective per path
            record_every: Record snapshots of the first path every this many steps

        Returns:
            Dict with 'ask' and 'bid' terminal interior values (nodes x paths),
            'truncations', 'book_integral', 'objective', 'penalty_integral' and 'path'
        """
        if abs(u0.dx - self.dx) > 1e-12 * self.dx or len(u0.ask) != self.n + 1:
            raise GridError("initial book does not conform to the simulation grid")

        path_indices = list(path_indices)
        n_paths = len(path_indices)
        noise = self.draw_noise(seed, path_indices)

        state = {name: np.repeat(u0.mirrored(name)[1:-1, None], n_paths, axis=1) for name in SIDES}
        sigma = {name: self.book.side(name).sigma for name in SIDES}

        truncations = 0
        book_integral = np.zeros(n_paths)
        penalty_integral = 0.0
        path = BookPath() if record_every else None

        for step in range(self.n_steps):
            t = step * self.dt

            if path is not None and step % record_every == 0:
                self._record(path, state, t)

            if penalty is not None:
                # left rectangle in t, trapezoid in x (u and Z vanish on the boundary)
                book_integral += self.dt * self.dx * state['ask'].sum(axis=0)
                z = np.concatenate(([0.0], self.incentive('ask', t), [0.0]))
                cost = np.asarray(penalty.evaluate(self.x, z), dtype=float)
                penalty_integral += self.dt * integrate.trapezoid(cost, dx=self.dx)

            for k, name in enumerate(SIDES):
                u = state[name]
                rhs = (self._explicit[name].matvec(u) + self.dt * self.source(name, t)[:, None]
                       + sigma[name] * u * noise[step, k][None, :])
                u = self._implicit[name].solve(rhs, self._banded[name])
                negative = u < 0
                truncations += int(np.count_nonzero(negative))
                state[name] = np.where(negative, 0.0, u)

        if path is not None:
            self._record(path, state, self.T)

        result = {
            'ask': state['ask'],
            'bid': state['bid'],
            'truncations': truncations,
            'path': path,
        }
        if penalty is not None:
            result['book_integral'] = book_integral
            result['penalty_integral'] = penalty_integral
            result['objective'] = book_integral - penalty_integral
        return result

    def _record(self, path: BookPath, state: Dict[str, np.ndarray], t: float):
        full = {name: np.concatenate(([0.0], state[name][:, 0], [0.0])) for name in SIDES}
        path.t.append(t)
        path.states.append(BookState.from_mirrored(full['ask'], full['bid'], self.dx, t))


def _batches(n_paths: int) -> List[range]:
    return [range(start, min(start + SIM_BATCH_SIZE, n_paths)) for start in range(0, n_paths, SIM_BATCH_SIZE)]


def simulate_book(book: BookParams, intensity, schedules, u0: BookState, T: float, dx: float,
                  dt: float, seed: int, path_index: int = 0,
                  record_every: Optional[int] = None) -> Tuple[BookState, Optional[BookPath]]:
    """
    Simulate one path of the controlled book.

    Args:
        book: Book parameters
        intensity: Arrival model shared by both sides
        schedules: (ask, bid) schedules or None for no incentives
        u0: Initial book
        T: Horizon
        dx: Space step
        dt: Time step
        seed: Master seed
        path_index: Which random stream of the master seed to use
        record_every: Optional snapshot interval in steps

    Returns:
        (terminal BookState, recorded BookPath or None)
    """
    simulator = BookSimulator(book, intensity, dx, dt, T, schedules)
    result = simulator.run(u0, seed, [path_index], record_every=record_every)
    full = {name: np.concatenate(([0.0], result[name][:, 0], [0.0])) for name in SIDES}
    terminal = BookState.from_mirrored(full['ask'], full['bid'], dx, T)
    return terminal, result['path']


def _run_batch(simulator: BookSimulator, u0: BookState, seed: int, indices: range,
               penalty: Optional[PenaltyModel]) -> Dict:
    return simulator.run(u0, seed, indices, penalty=penalty)


def _run_all(simulator: BookSimulator, u0: BookState, seed: int, n_paths: int,
             penalty: Optional[PenaltyModel], n_jobs: int) -> List[Dict]:
    return Parallel(n_jobs=n_jobs)(
        delayed(_run_batch)(simulator, u0, seed, indices, penalty) for indices in _batches(n_paths)
    )


def ensemble_average(n_paths: int, book: BookParams, intensity, schedules, u0: BookState,
                     T: float, dx: float, dt: float, seed: int, n_jobs: int = 1) -> EnsembleStats:
    """
    Independent paths with streams (seed, path index); node-wise moments at T.

    Args:
        n_paths: Number of paths (≥ 2)
        book: Book parameters
        intensity: Arrival model
        schedules: (ask, bid) schedules or None
        u0: Initial book
        T: Horizon
        dx: Space step
        dt: Time step
        seed: Master seed
        n_jobs: joblib workers

    Returns:
        EnsembleStats
    """
    if n_paths < 2:
        raise ParameterError(f"n_paths must be ≥ 2 (got {n_paths})")

    simulator = BookSimulator(book, intensity, dx, dt, T, schedules)
    results = _run_all(simulator, u0, seed, n_paths, None, n_jobs)

    n_limits = book.n_limits
    mean, std, volumes, path_volumes, totals = {}, {}, {}, {}, {}
    for name in SIDES:
        interior = np.concatenate([r[name] for r in results], axis=1).T
        profiles = np.zeros((n_paths, simulator.n + 1))
        profiles[:, 1:-1] = interior
        mean[name] = profiles.mean(axis=0)
        std[name] = profiles.std(axis=0, ddof=1)
        volumes[name] = limit_volumes(mean[name], dx, book.tick, n_limits)
        path_volumes[name] = limit_volumes(profiles, dx, book.tick, n_limits)
        totals[name] = integrate.trapezoid(profiles, dx=dx, axis=1)

    truncations = sum(r['truncations'] for r in results)
    node_steps = 2 * (simulator.n - 1) * simulator.n_steps * n_paths
    stats = EnsembleStats(x=simulator.x, mean=mean, std=std, limit_volumes=volumes,
                          path_limit_volumes=path_volumes, path_total_volumes=totals,
                          n_paths=n_paths, truncation_events=truncations, node_steps=node_steps)

    logger.info(f"Ensemble of {n_paths} paths: truncation fraction {stats.truncation_fraction:.3%}")
    if stats.noise_dominated:
        logger.warning(f"Run is noise-dominated: {stats.truncation_fraction:.2%} of node-steps truncated")
    return stats


def estimate_objective(book: BookParams, intensity, penalty, schedules, u0: BookState, T: float,
                       dx: float, dt: float, n_paths: int, seed: int, n_jobs: int = 1) -> ObjectiveEstimate:
    """
    Estimate J = E[int_0^T int_0^L (u - g(x, Z)) dx dt] on the ask side.

    Args:
        book: Book parameters
        intensity: Arrival model
        penalty: PenaltyParams or PenaltyModel
        schedules: (ask, bid) schedules or None
        u0: Initial book
        T: Horizon
        dx: Space step
        dt: Time step
        n_paths: Number of paths
        seed: Master seed (paired across calls with the same seed)
        n_jobs: joblib workers

    Returns:
        ObjectiveEstimate
    """
    if n_paths < 1:
        raise ParameterError(f"n_paths must be ≥ 1 (got {n_paths})")
    penalty_model = LinearExpPenalty(penalty) if isinstance(penalty, PenaltyParams) else penalty

    simulator = BookSimulator(book, intensity, dx, dt, T, schedules)
    results = _run_all(simulator, u0, seed, n_paths, penalty_model, n_jobs)

    per_path = np.concatenate([r['objective'] for r in results])
    book_integral = np.concatenate([r['book_integral'] for r in results])
    mean, stderr = mean_and_stderr(per_path)

    logger.info(f"Objective over {n_paths} paths: {mean:.6e} ± {stderr:.2e}")
    return ObjectiveEstimate(mean=mean, stderr=stderr, n_paths=n_paths, per_path=per_path,
                             penalty_integral=float(results[0]['penalty_integral']),
                             book_integral=float(np.mean(book_integral)))
