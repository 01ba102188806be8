"""
Validation suite: oracle comparisons and statistical property checks.

Hard checks decide the exit status of the `validate` command. Soft entries (published
table magnitudes and published sensitivity directions that the closed form does not
reproduce) are recorded in validation.txt only.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from data.storage import ArtifactStore
from models.incentives import closed_form_incentive, foc_solve, hamiltonian
from models.intensity import PowerIntensity, per_limit_rate
from models.params import BookParams, IntensityParams, ModelBundle, SideParams
from models.penalty import LinearExpPenalty
from models.scenarios import (
    GridSettings,
    ORACLE_POINTS,
    builtin_scenarios,
    published_comparison_lines,
    sensitivity_checks,
    stationary_schedules,
    stationary_tables,
)
from models.simulator import BookState, ensemble_average, estimate_objective, simulate_book
from models.value import (
    discrete_stationary_value,
    exit_time_reference,
    horizon_convergence,
    oracle_triangle,
    solve_value_pde,
    stationary_coefficients,
)
from utils import rng
from utils.statistics import paired_comparison

logger = logging.getLogger(__name__)

# (limit, incentive, published per-limit rate in 1/min; increments are against z = 0)
PUBLISHED_RATES = (
    (1, 0.0, 303.0),
    (5, 0.0, 41.0),
)
PUBLISHED_INCREMENTS = (
    (1, 0.01, 232.0),
    (5, 0.01, 4.0),
)

CONVERGENCE_HORIZONS = (5.0, 10.0, 20.0, 30.0)
EXIT_TIME_HORIZON = 30.0
FOC_SAMPLES = 50
FOC_GRID = 10_000
OPTIMALITY_FACTORS = (0.0, 0.5, 2.0)
LIQUIDITY_LIMITS = 3
LIQUIDITY_Z = 3.0
DECAY_TOLERANCE = 1e-6
TRUNCATION_LIMIT = 0.05
INITIAL_BOOK_TOLERANCE = 1e-3

# absolute slack of the horizon monotonicity check at round-off level
HORIZON_SLACK = 1e-12

# error reduction required when both steps are halved
GRID_REFINEMENT_RATIO = 2.0

# scheme tolerance of the upper value bound
VALUE_BOUND_SLACK = 1e-6


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one validation check."""
    name: str
    passed: bool
    hard: bool
    detail: str

    @property
    def status(self) -> str:
        if not self.hard:
            return 'REPORT'
        return 'PASS' if self.passed else 'FAIL'


class ValidationSuite:
    """
    Runs every oracle and property check on one parameter set.
    """

    def __init__(self, bundle: ModelBundle, grid: GridSettings, seed: int):
        """
        Initialize the suite.

        Args:
            bundle: Baseline parameters
            grid: Grids and path counts
            seed: Master seed
        """
        self.bundle = bundle
        self.grid = grid
        self.seed = seed
        self.results: List[CheckResult] = []
        self.notes: List[str] = []

        logger.info(f"Validation suite: seed {seed}, {grid.n_paths} book paths, {grid.mc_paths} MC paths")

    @property
    def book(self) -> BookParams:
        return self.bundle.book

    @property
    def hard_failures(self) -> List[CheckResult]:
        return [r for r in self.results if r.hard and not r.passed]

    def _record(self, name: str, passed: bool, detail: str, hard: bool = True):
        result = CheckResult(name=name, passed=bool(passed), hard=hard, detail=detail)
        self.results.append(result)
        log = logger.info if result.passed or not hard else logger.error
        log(f"{result.status} {name}: {detail}")

    def run(self, checks: Optional[List[str]] = None) -> List[CheckResult]:
        """
        Run the checks (all of them by default) in a fixed order.

        Args:
            checks: Optional subset of check names

        Returns:
            List of CheckResult
        """
        steps: List[tuple] = [
            ('arrival_rates', self.check_arrival_rates),
            ('value_oracle', self.check_value_oracle),
            ('exit_time', self.check_exit_time),
            ('foc', self.check_foc),
            ('value_bounds', self.check_value_bounds),
            ('grid_convergence', self.check_grid_convergence),
            ('sensitivity', self.check_sensitivity),
            ('simulator', self.check_simulator),
            ('liquidity', self.check_liquidity),
            ('scenario_shape', self.check_scenario_shape),
            ('optimality', self.check_optimality),
            ('determinism', self.check_determinism),
        ]
        for name, step in steps:
            if checks is None or name in checks:
                logger.info(f"Running check group {name}")
                step()
        return self.results

    # ==================== MODEL ====================

    def check_arrival_rates(self):
        """Per-limit rates against the published values, to their printed precision."""
        intensity, tick, L = self.bundle.intensity, self.book.tick, self.book.L
        for k, z, published in PUBLISHED_RATES:
            rate = per_limit_rate(intensity, tick, k, z, L=L)
            self._record(f"rate_k{k}_z{z:g}", abs(rate - published) <= 0.5,
                         f"{rate:.2f} /min vs published {published:g}")
        for k, z, published in PUBLISHED_INCREMENTS:
            increment = per_limit_rate(intensity, tick, k, z, L=L) - per_limit_rate(intensity, tick, k, 0.0, L=L)
            self._record(f"increment_k{k}_z{z:g}", abs(increment - published) <= 0.5,
                         f"{increment:.2f} /min vs published {published:g}")

    # ==================== VALUE ====================

    def check_value_oracle(self):
        grid = self.grid
        field = solve_value_pde(self.book.ask, self.book.L, grid.horizon, grid.value_dx, grid.value_dt, grid.theta)
        checks = oracle_triangle(self.book.ask, self.book.L, ORACLE_POINTS, grid.horizon, grid.value_dx,
                                 grid.value_dt, grid.mc_paths, grid.mc_dt, self.seed, grid.theta, grid.n_jobs,
                                 field=field)
        for check in checks:
            self._record(f"{check.name}@{check.x:g}", check.passed,
                         f"delta {check.delta:.3e} (tol {check.tolerance:.3e})")

    def check_exit_time(self):
        """alpha = beta = 0: the value is the mean exit time x(L - x)/(2 eta)."""
        side = replace(self.book.ask, alpha=0.0, beta=0.0)
        field = solve_value_pde(side, self.book.L, EXIT_TIME_HORIZON, self.grid.value_dx, self.grid.value_dt,
                                self.grid.theta)
        reference = exit_time_reference(field.x[1:-1], self.book.L, side.eta)
        error = float(np.max(np.abs(field.values[0, 1:-1] - reference) / reference))
        self._record("exit_time_reference", error <= 0.01, f"max relative error {error:.3e} (tol 1e-2)")

    def check_value_bounds(self):
        grid = self.grid
        side, L = self.book.ask, self.book.L
        field = solve_value_pde(side, L, grid.horizon, grid.value_dx, grid.value_dt, grid.theta)
        low = float(field.values.min())
        excess = float(np.max(field.values - field.upper_bound()[:, None]))
        self._record("value_nonnegative", low >= -1e-12, f"min p = {low:.3e}")
        self._record("value_upper_bound", excess <= VALUE_BOUND_SLACK,
                     f"max p - (1 - exp(alpha (T - t)))/|alpha| = {excess:.3e}")
        self._record("value_below_inverse_alpha", float(field.values.max()) <= 1 / abs(side.alpha),
                     f"max p = {float(field.values.max()):.6f}, 1/|alpha| = {1 / abs(side.alpha):g}")

        errors = horizon_convergence(side, L, CONVERGENCE_HORIZONS, grid.value_dx, grid.value_dt, grid.theta)
        values = list(errors.values())
        monotone = all(b <= a + HORIZON_SLACK for a, b in zip(values, values[1:]))
        detail = ", ".join(f"T={T:g}: {e:.3e}" for T, e in errors.items())
        self._record("horizon_convergence", monotone, detail)

        steady = discrete_stationary_value(side, L, grid.value_dx)
        x = np.linspace(0.0, L, len(steady))
        floor = float(np.max(np.abs(steady - stationary_coefficients(side, L)(x))))
        self._record("steady_state_floor", floor <= 1e-3 / abs(side.alpha),
                     f"sup |discrete steady state - closed form| = {floor:.3e}")

    def check_grid_convergence(self):
        """Halving dx and dt at least halves the sup error against the closed form."""
        grid = self.grid
        side, L = self.book.ask, self.book.L
        sv = stationary_coefficients(side, L)
        errors = []
        for factor in (1, 2):
            field = solve_value_pde(side, L, CONVERGENCE_HORIZONS[-1], grid.value_dx / factor, grid.value_dt / factor,
                                    grid.theta)
            errors.append(float(np.max(np.abs(field.values[0] - sv(field.x)))))
        ratio = errors[0] / errors[1] if errors[1] > 0 else math.inf
        self._record("grid_convergence", ratio >= GRID_REFINEMENT_RATIO,
                     f"sup error {errors[0]:.3e} -> {errors[1]:.3e} (ratio {ratio:.2f})")

    # ==================== INCENTIVES ====================

    def check_foc(self):
        """Root finder against the explicit incentive, and a brute-force maximisation of H."""
        intensity = PowerIntensity(self.bundle.intensity)
        penalty = LinearExpPenalty(self.bundle.penalty)
        side, L = self.book.ask, self.book.L
        generator = rng.stream(self.seed, rng.VALIDATION, 0)
        xs = generator.uniform(0.01 * L, 0.99 * L, FOC_SAMPLES)
        ps = generator.uniform(0.01, 1 / abs(side.alpha), FOC_SAMPLES)

        worst_rel, worst_excess = 0.0, -math.inf
        for x, p in zip(xs, ps):
            z_root = foc_solve(x, p, intensity, penalty)
            z_closed = float(closed_form_incentive(x, p, self.bundle.intensity, self.bundle.penalty))
            worst_rel = max(worst_rel, abs(z_root - z_closed) / z_closed)

            zs = np.linspace(0.0, 100 * z_closed, FOC_GRID)
            h_grid = hamiltonian(x, 0.0, zs, p, 0.0, side, intensity, penalty)
            h_star = float(hamiltonian(x, 0.0, z_root, p, 0.0, side, intensity, penalty))
            excess = (float(np.max(h_grid)) - h_star) / max(abs(h_star), 1.0)
            worst_excess = max(worst_excess, excess)

        self._record("foc_vs_closed_form", worst_rel <= 1e-10, f"max relative gap {worst_rel:.3e} (tol 1e-10)")
        self._record("foc_brute_force", worst_excess <= 1e-9,
                     f"best grid H above H(z*) by at most {worst_excess:.3e} (relative)")

    def check_sensitivity(self):
        tables = {}
        for spec in builtin_scenarios(self.bundle, self.grid, self.seed):
            tables[spec.name] = stationary_tables(spec.bundle(), self.grid.convention)['ask']
            self.notes.extend(published_comparison_lines(spec.name, tables[spec.name]))
            self.notes.append("")

        for check in sensitivity_checks(tables):
            detail = (f"limit {check.limit}: {check.baseline:.4e} -> {check.perturbed:.4e} "
                      f"({check.computed_direction})")
            if check.asserted:
                self._record(f"sensitivity_{check.scenario}_k{check.limit}", check.passed,
                             f"{detail}, expected {check.expected_direction}")
            if check.published_direction is not None and check.published_direction != check.expected_direction:
                self._record(f"published_direction_{check.scenario}_k{check.limit}", bool(check.matches_published),
                             f"{detail}, published {check.published_direction}", hard=False)

        decreasing = bool(np.all(np.diff(tables['baseline'].incentives) < 0))
        self._record("baseline_table_decreasing", decreasing, "ask incentives strictly decreasing over all limits")

    # ==================== SIMULATOR ====================

    def check_simulator(self):
        grid = self.grid
        L = self.book.L

        # η = β = σ = 0 and f ≡ 0: pure exponential decay
        still = SideParams(eta=0.0, beta=0.0, alpha=self.book.ask.alpha, sigma=0.0)
        still_book = BookParams(ask=still, bid=still, rho=0.0, L=L, tick=self.book.tick)
        silent = IntensityParams(lam=0.0, kappa=1.0, lam0=0.0, kappa0=1.0, r=0.5)
        x = np.linspace(0.0, L, int(round(L / grid.sim_dx)) + 1)
        profile = np.sin(np.pi * x / L)
        profile[0] = profile[-1] = 0.0
        u0 = BookState.from_mirrored(profile, profile, grid.sim_dx)
        terminal, _ = simulate_book(still_book, silent, None, u0, grid.horizon, grid.sim_dx, grid.sim_dt, self.seed)
        expected = profile[1:-1] * math.exp(still.alpha * grid.horizon)
        error = float(np.max(np.abs(terminal.ask[1:-1] - expected) / expected))
        self._record("degenerate_decay", error <= DECAY_TOLERANCE,
                     f"max relative error {error:.3e} (tol {DECAY_TOLERANCE:g})")

        # boundary nodes along a recorded baseline path
        schedules = stationary_schedules(self.bundle)
        _, path = simulate_book(self.book, self.bundle.intensity, (schedules['ask'], schedules['bid']),
                                BookState.empty(L, grid.sim_dx), grid.horizon, grid.sim_dx, grid.sim_dt,
                                self.seed, record_every=max(1, int(round(1.0 / grid.sim_dt))))
        boundary_ok = all(s.ask[0] == 0 and s.ask[-1] == 0 and s.bid[0] == 0 and s.bid[-1] == 0
                          for s in path.states)
        signs_ok = all(np.all(s.ask >= 0) and np.all(s.bid <= 0) for s in path.states)
        self._record("boundary_nodes_zero", boundary_ok, f"{len(path.states)} recorded snapshots")
        self._record("sign_convention", signs_ok, "ask ≥ 0 and bid ≤ 0 on every snapshot")

    def _paired_ensembles(self):
        if not hasattr(self, '_ensembles'):
            grid = self.grid
            schedules = stationary_schedules(self.bundle)
            common = dict(book=self.book, intensity=self.bundle.intensity,
                          u0=BookState.empty(self.book.L, grid.sim_dx), T=grid.horizon, dx=grid.sim_dx,
                          dt=grid.sim_dt, seed=self.seed, n_jobs=grid.n_jobs)
            with_incentives = ensemble_average(grid.n_paths, schedules=(schedules['ask'], schedules['bid']), **common)
            without = ensemble_average(grid.n_paths, schedules=None, **common)
            self._ensembles = (with_incentives, without)
        return self._ensembles

    def check_liquidity(self):
        with_incentives, without = self._paired_ensembles()
        self._record("truncation_fraction", with_incentives.truncation_fraction < TRUNCATION_LIMIT,
                     f"{with_incentives.truncation_fraction:.4%} of node-steps truncated")
        for k in range(LIQUIDITY_LIMITS):
            comparison = paired_comparison(with_incentives.path_limit_volumes['ask'][:, k],
                                           without.path_limit_volumes['ask'][:, k])
            self._record(f"liquidity_limit_{k + 1}", comparison.mean_diff > 0 and comparison.z > LIQUIDITY_Z,
                         f"volume gain {comparison.mean_diff:.4e}, z = {comparison.z:.2f}")

        grid = self.grid
        schedules = stationary_schedules(self.bundle)
        refilled = ensemble_average(grid.n_paths, self.book, self.bundle.intensity, (schedules['ask'], schedules['bid']),
                                    BookState.half_filled(self.book, self.bundle.intensity, grid.sim_dx),
                                    grid.horizon, grid.sim_dx, grid.sim_dt, self.seed, grid.n_jobs)
        empty = with_incentives.path_limit_volumes['ask'].mean(axis=0)
        start = refilled.path_limit_volumes['ask'].mean(axis=0)
        gap = float(np.max(np.abs(start - empty) / np.abs(empty)))
        self._record("initial_book_forgotten", gap < INITIAL_BOOK_TOLERANCE,
                     f"half-filled vs empty start: max relative gap {gap:.3e} in mean limit volumes")

    def check_scenario_shape(self):
        """Faster convection toward the mid-price leaves less total volume in the book."""
        grid = self.grid
        faster = next(spec for spec in builtin_scenarios(self.bundle, grid, self.seed) if spec.name == 'beta_x5')
        bundle = faster.bundle()
        schedules = stationary_schedules(bundle)
        wide = ensemble_average(grid.n_paths, bundle.book, bundle.intensity, (schedules['ask'], schedules['bid']),
                                BookState.empty(bundle.book.L, grid.sim_dx), grid.horizon, grid.sim_dx,
                                grid.sim_dt, self.seed, grid.n_jobs)
        base, _ = self._paired_ensembles()
        comparison = paired_comparison(wide.path_total_volumes['ask'], base.path_total_volumes['ask'])
        self._record("beta_x5_total_volume", comparison.mean_diff < 0 and comparison.z < -LIQUIDITY_Z,
                     f"beta_x5 minus baseline total ask volume {comparison.mean_diff:.4e}, z = {comparison.z:.2f}")

    def check_optimality(self):
        grid = self.grid
        schedules = stationary_schedules(self.bundle)
        u0 = BookState.empty(self.book.L, grid.sim_dx)

        def objective(factor: float):
            pair = (schedules['ask'].scaled(factor), schedules['bid'].scaled(factor))
            return estimate_objective(self.book, self.bundle.intensity, self.bundle.penalty, pair, u0,
                                      grid.horizon, grid.sim_dx, grid.sim_dt, grid.n_paths, self.seed, grid.n_jobs)

        optimal = objective(1.0)
        for factor in OPTIMALITY_FACTORS:
            other = objective(factor)
            comparison = paired_comparison(optimal.per_path, other.per_path)
            self._record(f"optimality_c{factor:g}", comparison.mean_diff >= -comparison.stderr,
                         f"J(Z) - J({factor:g} Z) = {comparison.mean_diff:.4e} ± {comparison.stderr:.2e}")

    def check_determinism(self):
        grid = self.grid
        schedules = stationary_schedules(self.bundle)
        common = dict(book=self.book, intensity=self.bundle.intensity,
                      schedules=(schedules['ask'], schedules['bid']),
                      u0=BookState.empty(self.book.L, grid.sim_dx), T=grid.horizon, dx=grid.sim_dx,
                      dt=grid.sim_dt, seed=self.seed)
        first = ensemble_average(2, n_jobs=1, **common)
        second = ensemble_average(2, n_jobs=grid.n_jobs, **common)
        identical = all(np.array_equal(first.mean[s], second.mean[s]) and np.array_equal(first.std[s], second.std[s])
                        for s in ('ask', 'bid'))
        self._record("determinism", identical, "repeated ensemble bit-identical")

    # ==================== REPORT ====================

    def lines(self) -> List[str]:
        """validation.txt content."""
        out = ["=" * 60, "Validation report", "=" * 60, f"seed = {self.seed}", ""]
        for result in self.results:
            out.append(f"[{result.status}] {result.name}: {result.detail}")
        out.append("")
        out.append(f"hard failures: {len(self.hard_failures)}")
        if self.notes:
            out.append("")
            out.extend(self.notes)
        return out

    def write(self, store: ArtifactStore, name: str = 'validation.txt'):
        return store.save_lines(name, self.lines())
