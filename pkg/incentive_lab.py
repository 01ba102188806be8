#!/usr/bin/env python3
"""
Incentive lab command line.

Subcommands:
    value       value field p(t, x), stationary comparison, horizon study, oracle checks
    incentives  per-limit incentive tables and the optimal schedule
    simulate    book ensembles with and without incentives, objective estimates
    sweep       built-in or user scenarios, each in its own subdirectory
    validate    full oracle and property suite; exit status 4 on any hard failure

Exit status: 0 success, 2 configuration or parameter error, 3 numerical stability or
grid error, 4 validation failure, 5 output error.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from data.storage import ArtifactStore
from models.errors import (
    ArtifactWriteError,
    GridError,
    NoInteriorRootError,
    ParameterError,
    StabilityError,
    UnboundedDerivativeError,
)
from models.params import ModelBundle, baseline_bundle, load_params
from models.scenarios import (
    FORMATS,
    ORACLE_POINTS,
    GridSettings,
    ScenarioSpec,
    builtin_scenarios,
    emit_reports,
    load_scenario_file,
    run_sweep,
    stationary_tables,
    ScenarioRunner,
)
from models.incentives import incentive_schedule
from models.validation import CONVERGENCE_HORIZONS, ValidationSuite
from models.value import horizon_convergence, oracle_triangle, solve_value_pde, stationary_coefficients
from utils.helpers import format_duration, format_scientific, print_banner
from utils.visualizer import ChartWriter

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VALIDATION = 4
EXIT_IO = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='incentive_lab',
        description='Optimal exchange incentives for a limit order book SPDE',
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='parameter file with [book], [intensity], [penalty]')
    common.add_argument('--out', type=Path, help='output directory (default: LOBLAB_OUTPUT_DIR)')
    common.add_argument('--seed', type=int, help='64-bit unsigned master seed')
    common.add_argument('--paths', type=int, help='book paths per ensemble')
    common.add_argument('--mc-paths', type=int, help='Feynman-Kac Monte Carlo paths')
    common.add_argument('--dx', type=float, help='space step of every grid ($)')
    common.add_argument('--dt', type=float,
                        help='time step (value solver for value/incentives, book simulator otherwise)')
    common.add_argument('--horizon', type=float, help='horizon T (min)')
    common.add_argument('--format', choices=FORMATS, default='csv', help='artifact format')
    common.add_argument('--jobs', type=int, help='joblib workers')
    common.add_argument('--profile', choices=('full', 'quick'), help='settings profile')

    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('value', parents=[common], help='solve and cross-check the value function')
    sub.add_parser('incentives', parents=[common], help='per-limit incentive tables and schedule')
    sub.add_parser('simulate', parents=[common], help='book ensembles and objective estimates')
    sweep = sub.add_parser('sweep', parents=[common], help='run a set of scenarios')
    sweep.add_argument('--builtin', action='store_true', help='baseline, eta_half, beta_x5, alpha_x2')
    sweep.add_argument('--scenario', type=Path, action='append', default=[], help='scenario file (repeatable)')
    sub.add_parser('validate', parents=[common], help='full oracle and property suite')
    return parser


class Invocation:
    """Resolved settings of one command-line run."""

    def __init__(self, args: argparse.Namespace):
        from config import get_config

        self.args = args
        self.command = args.command
        self.config = get_config(args.profile)
        self.seed = self.config.SEED if args.seed is None else args.seed
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError(f"--seed must be a 64-bit unsigned integer (got {self.seed})")
        self.out = args.out or Path(self.config.OUTPUT_DIR)
        self.format = args.format
        self.bundle: ModelBundle = load_params(args.config) if args.config else baseline_bundle()

        value_step = self.command in ('value', 'incentives')
        self.grid = GridSettings.from_config(self.config).with_overrides(
            value_dx=args.dx, sim_dx=args.dx,
            value_dt=args.dt if value_step else None,
            sim_dt=None if value_step else args.dt,
            horizon=args.horizon, n_paths=args.paths, mc_paths=args.mc_paths, n_jobs=args.jobs,
        )

    def effective_config(self) -> Dict[str, object]:
        values: Dict[str, object] = {'command': self.command, 'seed': self.seed, 'format': self.format,
                                     'profile': self.config.PROFILE,
                                     'config_file': str(self.args.config) if self.args.config else '(baseline)'}
        values.update({f'grid.{k}': v for k, v in self.grid.as_dict().items()})
        values.update({f'param.{k}': v for k, v in self.bundle.as_flat_dict().items()})
        return values


def cmd_value(inv: Invocation, store: ArtifactStore) -> int:
    grid, book = inv.grid, inv.bundle.book
    field = solve_value_pde(book.ask, book.L, grid.horizon, grid.value_dx, grid.value_dt, grid.theta)
    sv = stationary_coefficients(book.ask, book.L)

    store.save_value_field(field, 'value_field.csv')
    store.save_frame('stationary_value.csv', pd.DataFrame({'x': field.x, 'p_stationary': sv(field.x),
                                                           'p_t0': field.values[0]}))
    store.save_horizon_convergence(horizon_convergence(book.ask, book.L, CONVERGENCE_HORIZONS,
                                                       grid.value_dx, grid.value_dt, grid.theta))
    checks = oracle_triangle(book.ask, book.L, ORACLE_POINTS, grid.horizon, grid.value_dx, grid.value_dt,
                             grid.mc_paths, grid.mc_dt, inv.seed, grid.theta, grid.n_jobs, field=field)
    store.save_oracle_checks(checks)

    print(f"   ν+ = {sv.nu_plus:.4f}, ν- = {sv.nu_minus:.4f}")
    for check in checks:
        print(f"   {'✅' if check.passed else '❌'} {check.name} at x={check.x:g}: delta {check.delta:.3e}")
    return EXIT_OK


def cmd_incentives(inv: Invocation, store: ArtifactStore) -> int:
    grid, bundle = inv.grid, inv.bundle
    tables = stationary_tables(bundle, grid.convention)
    store.save_limit_table(tables['ask'], 'incentives.csv')
    store.save_limit_table(tables['bid'], 'incentives_bid.csv')

    field = solve_value_pde(bundle.book.ask, bundle.book.L, grid.horizon, grid.value_dx, grid.value_dt, grid.theta)
    schedule = incentive_schedule(field, bundle.intensity, bundle.penalty)
    store.save_schedule(schedule.to_frame(), 'schedule.csv')

    if inv.format == 'csv+svg':
        ChartWriter().plot_incentives(tables, store.path('incentives.svg'))

    for k, z in zip(tables['ask'].limits, tables['ask'].incentives):
        print(f"   limit {k:2d}: {format_scientific(z)} $")
    return EXIT_OK


def _baseline_spec(inv: Invocation, outputs) -> ScenarioSpec:
    name = inv.args.config.stem if inv.args.config else 'baseline'
    return ScenarioSpec(name=name, base=inv.bundle, outputs=outputs, seed=inv.seed, grid=inv.grid)


def cmd_simulate(inv: Invocation, store: ArtifactStore) -> int:
    spec = _baseline_spec(inv, ('incentives', 'shapes', 'objective'))
    report = ScenarioRunner(inv.grid).run(spec)
    emit_reports(report, store, inv.format)
    stats = report.stats_with
    print(f"   truncation: {stats.truncation_fraction:.3%} of node-steps")
    for label, estimate in report.objectives.items():
        print(f"   objective ({label}): {estimate.mean:.4e} ± {estimate.stderr:.1e}")
    return EXIT_OK


def cmd_sweep(inv: Invocation, store: ArtifactStore) -> int:
    specs: List[ScenarioSpec] = []
    if inv.args.builtin:
        specs.extend(builtin_scenarios(inv.bundle, inv.grid, inv.seed))
    for path in inv.args.scenario:
        specs.append(load_scenario_file(path, inv.grid, inv.seed))
    if not specs:
        raise ParameterError("sweep needs --builtin or at least one --scenario file")

    reports = run_sweep(specs, store, inv.format)
    for name, report in reports.items():
        print(f"   {name}: first limit {format_scientific(report.first_limit_incentive)} $")
    return EXIT_OK


def cmd_validate(inv: Invocation, store: ArtifactStore) -> int:
    suite = ValidationSuite(inv.bundle, inv.grid, inv.seed)
    suite.run()
    suite.write(store)

    failures = suite.hard_failures
    print(f"   {len(suite.results)} checks, {len(failures)} hard failures")
    for failure in failures:
        print(f"   ❌ {failure.name}: {failure.detail}")
    return EXIT_VALIDATION if failures else EXIT_OK


HANDLERS = {
    'value': cmd_value,
    'incentives': cmd_incentives,
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
    'validate': cmd_validate,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Execute one invocation.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Process exit status
    """
    args = build_parser().parse_args(argv)
    started = time.perf_counter()

    try:
        inv = Invocation(args)
        logging.basicConfig(level=getattr(logging, inv.config.LOG_LEVEL.upper()),
                            format='%(asctime)s - %(levelname)s - %(message)s')
        print_banner(f"Incentive lab: {inv.command}")

        store = ArtifactStore(inv.out)
        store.save_effective_config(inv.effective_config())
        status = HANDLERS[inv.command](inv, store)
    except ArtifactWriteError as e:
        logger.error(f"❌ Output error at {e.path}: {e}")
        return EXIT_IO
    except (GridError, StabilityError, UnboundedDerivativeError, NoInteriorRootError) as e:
        logger.error(f"❌ Numerical error: {e}")
        return EXIT_NUMERIC
    except (ParameterError, ValueError) as e:
        logger.error(f"❌ Configuration error: {e}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"❌ Output error: {e}")
        return EXIT_IO

    print(f"⏱️  {format_duration(time.perf_counter() - started)} | outputs in {inv.out}")
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
