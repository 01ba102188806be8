"""
Market parameters for the order-book incentives model.

All quantities use dollars for distances and minutes for time. The ask side lives on
(0, L); the bid side is stored in mirrored coordinates so that every solver works on
the positive half-line.
"""

import configparser
import logging
import math
from dataclasses import dataclass, replace, asdict
from pathlib import Path
from typing import Dict, List, Mapping, Tuple

from models.errors import ParameterError
from utils.validators import (
    validate_closed_interval,
    validate_nonnegative,
    validate_nonpositive,
    validate_open_interval,
    validate_positive,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SideParams:
    """Diffusion, convection, cancellation and noise of one side of the book."""
    eta: float
    beta: float
    alpha: float
    sigma: float


@dataclass(frozen=True)
class BookParams:
    """Both sides of the book plus domain and tick geometry."""
    ask: SideParams
    bid: SideParams
    rho: float
    L: float
    tick: float

    @property
    def n_limits(self) -> int:
        """Number of limits k with k * tick < L (10 for L = 0.11, tick = 0.01)."""
        return int(math.ceil(self.L / self.tick - 1e-9)) - 1

    def side(self, name: str) -> SideParams:
        if name == 'ask':
            return self.ask
        if name == 'bid':
            return self.bid
        raise ParameterError(f"side must be 'ask' or 'bid', got {name!r}")


@dataclass(frozen=True)
class IntensityParams:
    """Arrival rate f(x, z) = lam * z**r * exp(-kappa x) + lam0 * exp(-kappa0 x)."""
    lam: float
    kappa: float
    lam0: float
    kappa0: float
    r: float


@dataclass(frozen=True)
class PenaltyParams:
    """Incentive cost g(x, z) = A_bar * z * exp(a_bar x)."""
    A_bar: float
    a_bar: float


@dataclass(frozen=True)
class ModelBundle:
    """Validated parameter set shared by every solver."""
    book: BookParams
    intensity: IntensityParams
    penalty: PenaltyParams

    def as_flat_dict(self) -> Dict[str, float]:
        """Parameters keyed by their configuration-file names."""
        flat = {}
        for side_name in ('ask', 'bid'):
            side = self.book.side(side_name)
            suffix = side_name[0]
            for field, value in asdict(side).items():
                flat[f"{field}_{suffix}"] = value
        flat['rho'] = self.book.rho
        flat['L'] = self.book.L
        flat['tick'] = self.book.tick
        flat['lambda'] = self.intensity.lam
        flat['kappa'] = self.intensity.kappa
        flat['lambda0'] = self.intensity.lam0
        flat['kappa0'] = self.intensity.kappa0
        flat['r'] = self.intensity.r
        flat['A_bar'] = self.penalty.A_bar
        flat['a_bar'] = self.penalty.a_bar
        return flat


# Reference parameter set of the numerical study (dollars, minutes)
BASELINE_SIDE = SideParams(eta=1e-3, beta=2e-2, alpha=-0.2, sigma=0.3)
BASELINE_BOOK = BookParams(ask=BASELINE_SIDE, bid=BASELINE_SIDE, rho=-0.05, L=0.11, tick=0.01)
BASELINE_INTENSITY = IntensityParams(lam=630000.0, kappa=100.0, lam0=50000.0, kappa0=50.0, r=0.5)
BASELINE_PENALTY = PenaltyParams(A_bar=4200.0, a_bar=50.0)

# configuration key -> (section, attribute path)
PARAMETER_KEYS: Dict[str, Tuple[str, Tuple[str, ...]]] = {
    'eta_a': ('book', ('book', 'ask', 'eta')),
    'beta_a': ('book', ('book', 'ask', 'beta')),
    'alpha_a': ('book', ('book', 'ask', 'alpha')),
    'sigma_a': ('book', ('book', 'ask', 'sigma')),
    'eta_b': ('book', ('book', 'bid', 'eta')),
    'beta_b': ('book', ('book', 'bid', 'beta')),
    'alpha_b': ('book', ('book', 'bid', 'alpha')),
    'sigma_b': ('book', ('book', 'bid', 'sigma')),
    'rho': ('book', ('book', 'rho')),
    'L': ('book', ('book', 'L')),
    'tick': ('book', ('book', 'tick')),
    'lambda': ('intensity', ('intensity', 'lam')),
    'kappa': ('intensity', ('intensity', 'kappa')),
    'lambda0': ('intensity', ('intensity', 'lam0')),
    'kappa0': ('intensity', ('intensity', 'kappa0')),
    'r': ('intensity', ('intensity', 'r')),
    'A_bar': ('penalty', ('penalty', 'A_bar')),
    'a_bar': ('penalty', ('penalty', 'a_bar')),
}


def baseline_bundle() -> ModelBundle:
    """Return the reference parameter set, already validated."""
    return validate_params(BASELINE_BOOK, BASELINE_INTENSITY, BASELINE_PENALTY)


def _side_checks(prefix: str, side: SideParams) -> List[Tuple[bool, str]]:
    return [
        validate_positive(f"{prefix}.eta", side.eta),
        validate_nonnegative(f"{prefix}.beta", side.beta),
        validate_nonpositive(f"{prefix}.alpha", side.alpha),
        validate_positive(f"{prefix}.sigma", side.sigma),
    ]


def validate_params(book: BookParams, intensity: IntensityParams,
                    penalty: PenaltyParams) -> ModelBundle:
    """
    Check every structural assumption on the parameters.

    Args:
        book: Book dynamics and geometry
        intensity: Arrival-rate family parameters
        penalty: Penalty family parameters

    Returns:
        The validated ModelBundle (inputs unchanged)

    Raises:
        ParameterError: on the first violated constraint, naming field and value
    """
    checks = _side_checks('ask', book.ask) + _side_checks('bid', book.bid)
    checks += [
        validate_closed_interval('rho', book.rho, -1.0, 1.0),
        validate_positive('L', book.L),
        validate_positive('tick', book.tick),
        validate_nonnegative('lambda', intensity.lam),
        validate_positive('kappa', intensity.kappa),
        validate_nonnegative('lambda0', intensity.lam0),
        validate_positive('kappa0', intensity.kappa0),
        validate_open_interval('r', intensity.r, 0.0, 1.0),
        validate_positive('A_bar', penalty.A_bar),
        validate_nonnegative('a_bar', penalty.a_bar),
    ]

    for is_valid, error in checks:
        if not is_valid:
            raise ParameterError(error)

    if book.tick >= book.L:
        raise ParameterError(f"tick must be < L (got tick={book.tick}, L={book.L})")

    return ModelBundle(book=book, intensity=intensity, penalty=penalty)


def _set_path(bundle: ModelBundle, path: Tuple[str, ...], value: float) -> ModelBundle:
    if len(path) == 1:
        return replace(bundle, **{path[0]: value})
    child = getattr(bundle, path[0])
    return replace(bundle, **{path[0]: _set_path(child, path[1:], value)})


def apply_overrides(bundle: ModelBundle, overrides: Mapping[str, float]) -> ModelBundle:
    """
    Return a new validated bundle with configuration keys replaced.

    Args:
        bundle: Starting parameters
        overrides: Mapping from configuration key (e.g. 'eta_a') to new value

    Returns:
        Validated ModelBundle

    Raises:
        ParameterError: unknown key or violated constraint
    """
    updated = bundle
    for key, value in overrides.items():
        if key not in PARAMETER_KEYS:
            raise ParameterError(f"Unknown parameter key {key!r}")
        _, path = PARAMETER_KEYS[key]
        updated = _set_path(updated, path, float(value))

    return validate_params(updated.book, updated.intensity, updated.penalty)


def _read_float(parser: configparser.ConfigParser, section: str, key: str, default: float) -> float:
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return float(raw)
    except ValueError:
        raise ParameterError(f"[{section}] {key} must be a number, got {raw!r}")


def read_parameter_file(path) -> configparser.ConfigParser:
    """Parse a key-value parameter file, keeping key case (A_bar differs from a_bar)."""
    path = Path(path)
    if not path.is_file():
        raise ParameterError(f"Parameter file not found: {path}")

    parser = configparser.ConfigParser(inline_comment_prefixes=('#', ';'))
    parser.optionxform = str
    try:
        parser.read(path, encoding='utf-8')
    except configparser.Error as e:
        raise ParameterError(f"Could not parse {path}: {e}")

    for section in parser.sections():
        if section not in ('book', 'intensity', 'penalty', 'scenario', 'grid'):
            raise ParameterError(f"Unknown section [{section}] in {path}")
        if section in ('book', 'intensity', 'penalty'):
            for key in parser.options(section):
                if key not in PARAMETER_KEYS or PARAMETER_KEYS[key][0] != section:
                    raise ParameterError(f"Unknown key {key!r} in [{section}] of {path}")

    return parser


def bundle_from_parser(parser: configparser.ConfigParser) -> ModelBundle:
    """Build a validated bundle; missing keys fall back to the reference set, bid to ask."""
    base = BASELINE_BOOK

    def side(suffix: str, fallback: SideParams) -> SideParams:
        return SideParams(
            eta=_read_float(parser, 'book', f'eta_{suffix}', fallback.eta),
            beta=_read_float(parser, 'book', f'beta_{suffix}', fallback.beta),
            alpha=_read_float(parser, 'book', f'alpha_{suffix}', fallback.alpha),
            sigma=_read_float(parser, 'book', f'sigma_{suffix}', fallback.sigma),
        )

    ask = side('a', base.ask)
    bid = side('b', ask)

    book = BookParams(
        ask=ask,
        bid=bid,
        rho=_read_float(parser, 'book', 'rho', base.rho),
        L=_read_float(parser, 'book', 'L', base.L),
        tick=_read_float(parser, 'book', 'tick', base.tick),
    )
    intensity = IntensityParams(
        lam=_read_float(parser, 'intensity', 'lambda', BASELINE_INTENSITY.lam),
        kappa=_read_float(parser, 'intensity', 'kappa', BASELINE_INTENSITY.kappa),
        lam0=_read_float(parser, 'intensity', 'lambda0', BASELINE_INTENSITY.lam0),
        kappa0=_read_float(parser, 'intensity', 'kappa0', BASELINE_INTENSITY.kappa0),
        r=_read_float(parser, 'intensity', 'r', BASELINE_INTENSITY.r),
    )
    penalty = PenaltyParams(
        A_bar=_read_float(parser, 'penalty', 'A_bar', BASELINE_PENALTY.A_bar),
        a_bar=_read_float(parser, 'penalty', 'a_bar', BASELINE_PENALTY.a_bar),
    )
    return validate_params(book, intensity, penalty)


def load_params(path) -> ModelBundle:
    """
    Load and validate model parameters from a [book]/[intensity]/[penalty] file.

    Args:
        path: Path to the parameter file

    Returns:
        Validated ModelBundle
    """
    bundle = bundle_from_parser(read_parameter_file(path))
    logger.info(f"Loaded parameters from {path}")
    return bundle
