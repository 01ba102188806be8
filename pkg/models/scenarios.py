"""
Scenario harness: baseline and perturbed parameter sets, run orchestration and reports.

A scenario computes the stationary incentives of both sides, the per-limit tables,
paired ensembles of the book with and without incentives, objective estimates and
the closed-form / PDE / Monte Carlo value comparison, then writes every artifact into
its own directory.
"""

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from data.storage import ArtifactStore
from models.errors import ParameterError
from models.incentives import LimitTable, StationarySchedule, per_limit_incentive_table
from models.params import (
    ModelBundle,
    PARAMETER_KEYS,
    apply_overrides,
    baseline_bundle,
    bundle_from_parser,
    read_parameter_file,
)
from models.simulator import (
    SIDES,
    BookState,
    EnsembleStats,
    ObjectiveEstimate,
    ensemble_average,
    estimate_objective,
)
from models.value import OracleCheck, oracle_triangle, solve_value_pde, stationary_coefficients
from utils.helpers import format_scientific, format_table, relative_deviation
from utils.statistics import GainAnalyzer, paired_comparison
from utils.visualizer import ChartWriter

logger = logging.getLogger(__name__)

OUTPUTS = ('incentives', 'shapes', 'objective', 'oracle')
FORMATS = ('csv', 'csv+svg')

ORACLE_POINTS = (0.02, 0.035, 0.05, 0.065, 0.08)

# Published ask-side incentives per limit ($ per unit order), limits 1..10
PUBLISHED_TABLES: Dict[str, Tuple[float, ...]] = {
    'baseline': (1.90e-3, 8.56e-6, 2.11e-8, 4.01e-11, 6.41e-14, 8.96e-17, 1.09e-19, 1.12e-22, 8.86e-26, 3.84e-29),
    'eta_half': (3.51e-2, 1.73e-4, 4.77e-7, 1.03e-9, 1.90e-12, 3.15e-15, 4.68e-18, 6.02e-21, 6.14e-24, 3.55e-27),
    'beta_x5': (2.21e-3, 1.18e-5, 3.53e-8, 8.37e-11, 1.74e-13, 3.29e-16, 5.80e-19, 9.36e-22, 1.28e-24, 1.09e-27),
    'alpha_x2': (1.64e-2, 7.57e-5, 1.95e-7, 3.90e-10, 6.69e-13, 1.01e-15, 1.36e-18, 1.57e-21, 1.41e-24, 7.07e-28),
}

# Published direction of the first-limit incentive relative to the baseline
PUBLISHED_DIRECTIONS = {'eta_half': 'increase', 'beta_x5': 'increase', 'alpha_x2': 'increase'}

# Direction implied by the closed-form value; None means reported only
EXPECTED_DIRECTIONS = {'eta_half': 'increase', 'beta_x5': None, 'alpha_x2': 'decrease'}

SENSITIVITY_LIMITS = 3


@dataclass(frozen=True)
class GridSettings:
    """Discretisation and sampling settings of a run."""
    value_dx: float = 1e-3
    value_dt: float = 1e-2
    theta: float = 0.5
    sim_dx: float = 1e-3
    sim_dt: float = 1e-3
    horizon: float = 30.0
    n_paths: int = 200
    mc_paths: int = 100_000
    mc_dt: float = 1e-3
    convention: str = 'point'
    n_jobs: int = 1

    @classmethod
    def from_config(cls, config) -> 'GridSettings':
        """Settings of a Config class."""
        return cls(value_dx=config.VALUE_DX, value_dt=config.VALUE_DT, theta=config.THETA,
                   sim_dx=config.SIM_DX, sim_dt=config.SIM_DT, horizon=config.HORIZON,
                   n_paths=config.N_PATHS, mc_paths=config.MC_PATHS, mc_dt=config.MC_DT,
                   convention=config.TABLE_CONVENTION, n_jobs=config.N_JOBS)

    def with_overrides(self, **overrides) -> 'GridSettings':
        """Copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass(frozen=True)
class ScenarioSpec:
    """One named parameter set with the outputs to compute."""
    name: str
    base: ModelBundle
    overrides: Tuple[Tuple[str, float], ...] = ()
    outputs: Tuple[str, ...] = OUTPUTS
    seed: int = 20240601
    grid: GridSettings = field(default_factory=GridSettings)

    def validate(self):
        if not self.name or '/' in self.name:
            raise ParameterError(f"Invalid scenario name {self.name!r}")
        for key, _ in self.overrides:
            if key not in PARAMETER_KEYS:
                raise ParameterError(f"Scenario {self.name}: unknown override key {key!r}")
        for output in self.outputs:
            if output not in OUTPUTS:
                raise ParameterError(f"Scenario {self.name}: unknown output {output!r} (use {', '.join(OUTPUTS)})")

    def bundle(self) -> ModelBundle:
        """Base parameters with the overrides applied, validated."""
        self.validate()
        return apply_overrides(self.base, dict(self.overrides))


def builtin_scenarios(base: Optional[ModelBundle] = None, grid: Optional[GridSettings] = None,
                      seed: int = 20240601) -> List[ScenarioSpec]:
    """
    Reference scenario set: baseline, halved diffusion, quintupled convection and
    doubled cancellation, applied symmetrically to both sides.

    Returns:
        List of four ScenarioSpec
    """
    base = base or baseline_bundle()
    grid = grid or GridSettings()
    ask = base.book.ask

    def symmetric(name: str, value: float) -> Tuple[Tuple[str, float], ...]:
        return ((f'{name}_a', value), (f'{name}_b', value))

    return [
        ScenarioSpec('baseline', base, (), seed=seed, grid=grid),
        ScenarioSpec('eta_half', base, symmetric('eta', ask.eta / 2), seed=seed, grid=grid),
        ScenarioSpec('beta_x5', base, symmetric('beta', ask.beta * 5), seed=seed, grid=grid),
        ScenarioSpec('alpha_x2', base, symmetric('alpha', ask.alpha * 2), seed=seed, grid=grid),
    ]


def _parse_overrides(raw: str) -> Tuple[Tuple[str, float], ...]:
    overrides = []
    for item in filter(None, (part.strip() for part in raw.replace('\n', ',').split(','))):
        if '=' not in item:
            raise ParameterError(f"Override {item!r} must read key=value")
        key, value = (s.strip() for s in item.split('=', 1))
        try:
            overrides.append((key, float(value)))
        except ValueError:
            raise ParameterError(f"Override {key} must be a number, got {value!r}")
    return tuple(overrides)


GRID_KEYS = {
    'value_dx': float, 'value_dt': float, 'theta': float, 'sim_dx': float, 'sim_dt': float,
    'horizon': float, 'n_paths': int, 'mc_paths': int, 'mc_dt': float, 'convention': str,
}


def load_scenario_file(path, grid: Optional[GridSettings] = None, seed: int = 20240601) -> ScenarioSpec:
    """
    Read a scenario: model sections plus [scenario] (name, overrides, n_paths, seed,
    outputs) and an optional [grid] section.

    Args:
        path: Scenario file
        grid: Settings the file's [grid] and n_paths entries refine
        seed: Seed used when the file names none

    Returns:
        Validated ScenarioSpec
    """
    parser = read_parameter_file(path)
    base = bundle_from_parser(parser)
    grid = grid or GridSettings()

    section = parser['scenario'] if parser.has_section('scenario') else {}
    name = section.get('name', Path(path).stem)
    overrides = _parse_overrides(section.get('overrides', ''))
    outputs = tuple(o.strip() for o in section.get('outputs', ','.join(OUTPUTS)).split(',') if o.strip())

    grid_overrides = {}
    if parser.has_section('grid'):
        for key, raw in parser['grid'].items():
            if key not in GRID_KEYS:
                raise ParameterError(f"Unknown key {key!r} in [grid] of {path}")
            try:
                grid_overrides[key] = GRID_KEYS[key](raw)
            except ValueError:
                raise ParameterError(f"[grid] {key} has an invalid value {raw!r}")
    try:
        if 'n_paths' in section:
            grid_overrides['n_paths'] = int(section['n_paths'])
        if 'seed' in section:
            seed = int(section['seed'])
    except ValueError as e:
        raise ParameterError(f"[scenario] of {path}: {e}")

    spec = ScenarioSpec(name=name, base=base, overrides=overrides, outputs=outputs, seed=seed,
                        grid=grid.with_overrides(**grid_overrides))
    spec.validate()
    logger.info(f"Loaded scenario {spec.name} from {path}")
    return spec


@dataclass
class RunReport:
    """Everything one scenario run produced."""
    name: str
    bundle: ModelBundle
    grid: GridSettings
    seed: int
    tables: Dict[str, LimitTable]
    stats_with: Optional[EnsembleStats] = None
    stats_without: Optional[EnsembleStats] = None
    objectives: Dict[str, ObjectiveEstimate] = field(default_factory=dict)
    oracle_checks: List[OracleCheck] = field(default_factory=list)
    wall_clock: float = 0.0
    files: List[Path] = field(default_factory=list)

    @property
    def oracle_passed(self) -> bool:
        return all(check.passed for check in self.oracle_checks)

    @property
    def first_limit_incentive(self) -> float:
        return float(self.tables['ask'].incentives[0])

    def gain(self, side: str = 'ask') -> Optional[Dict]:
        if self.stats_with is None or self.stats_without is None:
            return None
        return GainAnalyzer(self.stats_with, self.stats_without, side).calculate_all_metrics()


def stationary_schedules(bundle: ModelBundle) -> Dict[str, StationarySchedule]:
    """Closed-form stationary schedule of each side (bid in mirrored coordinates)."""
    book = bundle.book
    return {
        side: StationarySchedule(stationary_coefficients(book.side(side), book.L), bundle.intensity, bundle.penalty)
        for side in SIDES
    }


def stationary_tables(bundle: ModelBundle, convention: str = 'point') -> Dict[str, LimitTable]:
    """Per-limit stationary incentives of both sides."""
    book = bundle.book
    return {
        side: per_limit_incentive_table(schedule, book.tick, book.n_limits, convention, L=book.L, side=side)
        for side, schedule in stationary_schedules(bundle).items()
    }


class ScenarioRunner:
    """
    Runs scenarios with shared grid settings.
    """

    def __init__(self, grid: Optional[GridSettings] = None):
        """
        Initialize the runner.

        Args:
            grid: Settings used when a spec carries none of its own
        """
        self.grid = grid or GridSettings()

    def run(self, spec: ScenarioSpec) -> RunReport:
        """
        Compute every requested output of a scenario.

        Args:
            spec: Scenario to run

        Returns:
            RunReport (nothing is written)
        """
        started = time.perf_counter()
        grid = spec.grid or self.grid
        try:
            bundle = spec.bundle()
        except ParameterError as e:
            raise ParameterError(f"Scenario {spec.name}: {e}")
        book = bundle.book

        logger.info(f"Running scenario {spec.name}: outputs {', '.join(spec.outputs)}")

        schedules = stationary_schedules(bundle)
        tables = stationary_tables(bundle, grid.convention)
        report = RunReport(name=spec.name, bundle=bundle, grid=grid, seed=spec.seed, tables=tables)

        controlled = (schedules['ask'], schedules['bid'])
        u0 = BookState.empty(book.L, grid.sim_dx)

        if 'shapes' in spec.outputs:
            common = dict(book=book, intensity=bundle.intensity, u0=u0, T=grid.horizon, dx=grid.sim_dx,
                          dt=grid.sim_dt, seed=spec.seed, n_jobs=grid.n_jobs)
            report.stats_with = ensemble_average(grid.n_paths, schedules=controlled, **common)
            report.stats_without = ensemble_average(grid.n_paths, schedules=None, **common)

        if 'objective' in spec.outputs:
            common = dict(book=book, intensity=bundle.intensity, penalty=bundle.penalty, u0=u0, T=grid.horizon,
                          dx=grid.sim_dx, dt=grid.sim_dt, n_paths=grid.n_paths, seed=spec.seed, n_jobs=grid.n_jobs)
            report.objectives['optimal'] = estimate_objective(schedules=controlled, **common)
            report.objectives['none'] = estimate_objective(schedules=None, **common)

        if 'oracle' in spec.outputs:
            field_ = solve_value_pde(book.ask, book.L, grid.horizon, grid.value_dx, grid.value_dt, grid.theta)
            report.oracle_checks = oracle_triangle(book.ask, book.L, ORACLE_POINTS, grid.horizon, grid.value_dx,
                                                   grid.value_dt, grid.mc_paths, grid.mc_dt, spec.seed,
                                                   grid.theta, grid.n_jobs, field=field_)

        report.wall_clock = time.perf_counter() - started
        logger.info(f"Scenario {spec.name} done in {report.wall_clock:.1f}s")
        return report


def published_comparison_lines(name: str, table: LimitTable) -> List[str]:
    """Per-limit published vs computed incentives with relative deviation."""
    published = PUBLISHED_TABLES.get(name)
    lines = [f"[incentive table: {name}, ask side]"]
    if published is None:
        lines.append("no published table for this scenario")
        rows = [(k, format_scientific(v), 'n/a', 'n/a') for k, v in zip(table.limits, table.incentives)]
    else:
        rows = [(k, format_scientific(v), format_scientific(p), f"{relative_deviation(v, p):+.3e}")
                for k, v, p in zip(table.limits, table.incentives, published)]
    lines.extend(format_table(rows, ('limit', 'computed', 'published', 'rel_deviation')))
    lines.append("published magnitudes are reported for reference and never asserted")
    return lines


def _validation_lines(report: RunReport) -> List[str]:
    lines = [f"scenario = {report.name}", f"seed = {report.seed}", ""]
    lines.extend(published_comparison_lines(report.name, report.tables['ask']))
    lines.append("")

    decreasing = bool(np.all(np.diff(report.tables['ask'].incentives) < 0))
    lines.append(f"[structure] ask incentives strictly decreasing across limits: {'PASS' if decreasing else 'FAIL'}")

    if report.oracle_checks:
        lines.append("")
        lines.append("[value oracle]")
        rows = [(c.name, f"{c.x:g}", f"{c.computed:.6e}", f"{c.reference:.6e}", f"{c.delta:.3e}",
                 f"{c.tolerance:.3e}", 'PASS' if c.passed else 'FAIL') for c in report.oracle_checks]
        lines.extend(format_table(rows, ('check', 'x', 'computed', 'reference', 'delta', 'tolerance', 'status')))

    if report.stats_with is not None:
        lines.append("")
        for label, stats in (('with', report.stats_with), ('without', report.stats_without)):
            flag = 'noise-dominated' if stats.noise_dominated else 'ok'
            lines.append(f"[truncation] {label} incentives: {stats.truncation_fraction:.4%} of node-steps ({flag})")
    return lines


def _summary_lines(report: RunReport) -> List[str]:
    book = report.bundle.book
    lines = ["=" * 60, f"Scenario {report.name}", "=" * 60]
    for key, value in report.bundle.as_flat_dict().items():
        lines.append(f"{key} = {value:g}")
    lines.append("")
    for side in SIDES:
        table = report.tables[side]
        lines.append(f"{side} incentive, first limit ({book.tick:g} $): {format_scientific(table.incentives[0])} $")

    gain = report.gain('ask')
    if gain is not None:
        lines.append("")
        lines.append("Liquidity with vs without incentives (ask, paired paths)")
        frame = gain['table']
        rows = [(int(r.limit), f"{r.volume_with:.4f}", f"{r.volume_without:.4f}", f"{r.z:.2f}")
                for r in frame.itertuples()]
        lines.extend(format_table(rows, ('limit', 'with', 'without', 'z')))
        lines.append(f"first limit fullness rank: {gain['first_limit_rank_without']} without, "
                     f"{gain['first_limit_rank_with']} with incentives")

    for label, estimate in report.objectives.items():
        lines.append(f"objective ({label}): {estimate.mean:.6e} ± {estimate.stderr:.2e} "
                     f"(book {estimate.book_integral:.6e}, penalty {estimate.penalty_integral:.6e})")

    if report.oracle_checks:
        lines.append(f"value oracle: {'all checks passed' if report.oracle_passed else 'FAILED'}")
    return lines


def emit_reports(report: RunReport, store: ArtifactStore, fmt: str = 'csv') -> List[Path]:
    """
    Write the artifacts of a run.

    Args:
        report: Scenario results
        store: Destination (the scenario's own directory)
        fmt: 'csv' or 'csv+svg'

    Returns:
        Paths of the written files
    """
    if fmt not in FORMATS:
        raise ParameterError(f"Unknown format {fmt!r} (use {' or '.join(FORMATS)})")

    files = [
        store.save_limit_table(report.tables['ask'], 'incentives.csv'),
        store.save_limit_table(report.tables['bid'], 'incentives_bid.csv'),
    ]
    if report.stats_with is not None:
        files.append(store.save_shape(report.stats_with, 'shape_with.csv'))
        files.append(store.save_shape(report.stats_without, 'shape_without.csv'))
        files.append(store.save_limit_volumes(report.stats_with, 'limit_volumes.csv'))
        files.append(store.save_limit_volumes(report.stats_without, 'limit_volumes_without.csv'))
        files.append(store.save_frame('gain.csv', report.gain('ask')['table']))
    if report.objectives:
        files.append(store.save_objectives(report.objectives))
    if report.oracle_checks:
        files.append(store.save_oracle_checks(report.oracle_checks))

    files.append(store.save_lines('validation.txt', _validation_lines(report)))
    files.append(store.save_lines('summary.txt', _summary_lines(report)))

    if fmt == 'csv+svg':
        charts = ChartWriter()
        files.append(charts.plot_incentives(report.tables, store.path('incentives.svg')))
        if report.stats_with is not None:
            files.append(charts.plot_shapes(report.stats_with, report.stats_without, store.path('shape.svg')))

    report.files.extend(files)
    return files


def run_scenario(spec: ScenarioSpec, out_dir, fmt: str = 'csv') -> RunReport:
    """
    Run a scenario and write its artifacts into out_dir.

    Args:
        spec: Scenario
        out_dir: Output directory (created if needed)
        fmt: 'csv' or 'csv+svg'

    Returns:
        RunReport
    """
    store = out_dir if isinstance(out_dir, ArtifactStore) else ArtifactStore(out_dir)
    report = ScenarioRunner(spec.grid).run(spec)
    emit_reports(report, store, fmt)
    return report


@dataclass(frozen=True)
class SensitivityCheck:
    """Incentive at one limit of a perturbed scenario against the baseline."""
    scenario: str
    limit: int
    baseline: float
    perturbed: float
    published_direction: Optional[str]
    expected_direction: Optional[str]

    @property
    def computed_direction(self) -> str:
        if self.perturbed > self.baseline:
            return 'increase'
        if self.perturbed < self.baseline:
            return 'decrease'
        return 'unchanged'

    @property
    def asserted(self) -> bool:
        return self.expected_direction is not None

    @property
    def passed(self) -> bool:
        return not self.asserted or self.computed_direction == self.expected_direction

    @property
    def matches_published(self) -> Optional[bool]:
        if self.published_direction is None:
            return None
        return self.computed_direction == self.published_direction


def sensitivity_checks(tables: Mapping[str, LimitTable], n_limits: int = SENSITIVITY_LIMITS) -> List[SensitivityCheck]:
    """
    Compare each perturbed scenario's ask incentives with the baseline at the first limits.

    Args:
        tables: Scenario name -> ask LimitTable; must contain 'baseline'

    Returns:
        One SensitivityCheck per (scenario, limit)
    """
    if 'baseline' not in tables:
        raise ParameterError("sensitivity checks need a 'baseline' scenario")
    base = tables['baseline']
    checks = []
    for name, table in tables.items():
        if name == 'baseline':
            continue
        for k in range(min(n_limits, len(table.incentives))):
            checks.append(SensitivityCheck(
                scenario=name,
                limit=k + 1,
                baseline=float(base.incentives[k]),
                perturbed=float(table.incentives[k]),
                published_direction=PUBLISHED_DIRECTIONS.get(name),
                expected_direction=EXPECTED_DIRECTIONS.get(name),
            ))
    return checks


def sensitivity_frame(checks: Sequence[SensitivityCheck]) -> pd.DataFrame:
    return pd.DataFrame([
        {'scenario': c.scenario, 'limit': c.limit, 'baseline': c.baseline, 'perturbed': c.perturbed,
         'computed_direction': c.computed_direction, 'published_direction': c.published_direction or '',
         'asserted': c.asserted, 'passed': c.passed}
        for c in checks
    ], columns=['scenario', 'limit', 'baseline', 'perturbed', 'computed_direction', 'published_direction',
                'asserted', 'passed'])


def run_sweep(specs: Sequence[ScenarioSpec], store: ArtifactStore, fmt: str = 'csv') -> Dict[str, RunReport]:
    """
    Run scenarios one after another, each into its own subdirectory, then compare them.

    Writes sensitivity.csv when a baseline is present and, when both the baseline and
    beta_x5 carry ensembles, the paired total-volume comparison in sweep_summary.txt.

    Returns:
        Scenario name -> RunReport
    """
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        raise ParameterError(f"Scenario names must be unique within a sweep: {names}")

    reports = {}
    for spec in specs:
        reports[spec.name] = run_scenario(spec, store.child(spec.name), fmt)

    lines = ["=" * 60, "Sweep summary", "=" * 60]
    for name, report in reports.items():
        lines.append(f"{name}: first-limit incentive {format_scientific(report.first_limit_incentive)} $")

    if 'baseline' in reports:
        checks = sensitivity_checks({name: r.tables['ask'] for name, r in reports.items()})
        store.save_frame('sensitivity.csv', sensitivity_frame(checks))
        for check in checks:
            status = 'PASS' if check.passed else 'FAIL'
            if not check.asserted:
                status = 'reported'
            lines.append(f"{check.scenario} limit {check.limit}: {check.computed_direction} "
                         f"(published: {check.published_direction}) {status}")

        base, wide = reports['baseline'], reports.get('beta_x5')
        if wide is not None and base.stats_with is not None and wide.stats_with is not None:
            total = paired_comparison(wide.stats_with.path_total_volumes['ask'],
                                      base.stats_with.path_total_volumes['ask'])
            lines.append(f"beta_x5 minus baseline total ask volume: {total.mean_diff:.4e} (z = {total.z:.2f})")

    store.save_lines('sweep_summary.txt', lines)
    return reports
