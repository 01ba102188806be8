"""
Ensemble statistics for Monte Carlo comparisons.
Paired differences under common random numbers and the incentive gain summary.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def mean_and_stderr(samples) -> Tuple[float, float]:
    """Sample mean and standard error (0 for a single sample)."""
    samples = np.asarray(samples, dtype=float)
    mean = float(np.mean(samples))
    if samples.size < 2:
        return mean, 0.0
    return mean, float(np.std(samples, ddof=1) / math.sqrt(samples.size))


@dataclass(frozen=True)
class PairedComparison:
    """Mean of a - b over paired samples with its standard error and z-statistic."""
    mean_diff: float
    stderr: float
    n: int

    @property
    def z(self) -> float:
        if self.stderr == 0:
            if self.mean_diff == 0:
                return 0.0
            return math.copysign(math.inf, self.mean_diff)
        return self.mean_diff / self.stderr


def paired_comparison(a, b) -> PairedComparison:
    """
    Compare two samples drawn with the same random streams.

    Args:
        a: Samples of the first configuration
        b: Samples of the second configuration, paired with a

    Returns:
        PairedComparison of a - b
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"paired samples must have the same shape ({a.shape} vs {b.shape})")
    mean, stderr = mean_and_stderr(a - b)
    return PairedComparison(mean_diff=mean, stderr=stderr, n=a.size)


def fullness_rank(volumes, limit: int = 1) -> int:
    """1-based rank of a limit among all limits ordered by decreasing volume."""
    volumes = np.asarray(volumes, dtype=float)
    order = np.argsort(-volumes, kind='stable')
    return int(np.nonzero(order == limit - 1)[0][0]) + 1


class GainAnalyzer:
    """
    Summarises how incentives change the book, limit by limit.
    """

    def __init__(self, with_incentives, without_incentives, side: str = 'ask'):
        """
        Initialize the analyzer.

        Args:
            with_incentives: EnsembleStats of the controlled book
            without_incentives: EnsembleStats of the uncontrolled book, same seeds
            side: 'ask' or 'bid'
        """
        self.with_incentives = with_incentives
        self.without_incentives = without_incentives
        self.side = side

        logger.info(f"Analyzing incentive gain on the {side} side over {with_incentives.n_paths} paired paths")

    def limit_comparisons(self):
        """PairedComparison per limit of per-path volumes (with minus without)."""
        a = self.with_incentives.path_limit_volumes[self.side]
        b = self.without_incentives.path_limit_volumes[self.side]
        return [paired_comparison(a[:, k], b[:, k]) for k in range(a.shape[1])]

    def total_comparison(self) -> PairedComparison:
        return paired_comparison(self.with_incentives.path_total_volumes[self.side],
                                 self.without_incentives.path_total_volumes[self.side])

    def calculate_all_metrics(self) -> Dict:
        """
        Gain metrics for the report.

        Returns:
            Dictionary with the per-limit table, total-volume comparison and the
            fullness rank of the first limit with and without incentives
        """
        metrics = {
            'table': self.to_frame(),
            'total': self.total_comparison(),
            'first_limit_rank_with': fullness_rank(self.with_incentives.limit_volumes[self.side]),
            'first_limit_rank_without': fullness_rank(self.without_incentives.limit_volumes[self.side]),
        }
        logger.info(f"First limit rank: {metrics['first_limit_rank_without']} without incentives, "
                    f"{metrics['first_limit_rank_with']} with")
        return metrics

    def to_frame(self) -> pd.DataFrame:
        """Columns limit, volume_with, volume_without, diff, stderr, z."""
        rows = []
        for k, comparison in enumerate(self.limit_comparisons(), start=1):
            rows.append({
                'limit': k,
                'volume_with': float(self.with_incentives.limit_volumes[self.side][k - 1]),
                'volume_without': float(self.without_incentives.limit_volumes[self.side][k - 1]),
                'diff': comparison.mean_diff,
                'stderr': comparison.stderr,
                'z': comparison.z,
            })
        return pd.DataFrame(rows, columns=['limit', 'volume_with', 'volume_without', 'diff', 'stderr', 'z'])
