"""
Artifact store for incentive-lab runs.
Owns one output directory and writes every CSV and text artifact with byte-stable
formatting.
"""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, List, Mapping

import pandas as pd

from models.errors import ArtifactWriteError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'


class ArtifactStore:
    """
    High-level writer for run artifacts.
    Keeps track of every file written so reports can list their outputs.
    """

    def __init__(self, root):
        """
        Initialize the store, creating the output directory.

        Args:
            root: Output directory
        """
        self.root = Path(root)
        self.written: List[Path] = []
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactWriteError(self.root, e.strerror or str(e))

        logger.info(f"ArtifactStore initialized at {self.root}")

    def child(self, name: str) -> 'ArtifactStore':
        """Store for a subdirectory (one per scenario)."""
        return ArtifactStore(self.root / name)

    def path(self, name: str) -> Path:
        return self.root / name

    @contextmanager
    def open_text(self, name: str):
        """
        Context manager for a text artifact.
        Failures are re-raised as ArtifactWriteError carrying the path.
        """
        target = self.path(name)
        try:
            with open(target, 'w', encoding='utf-8', newline='\n') as handle:
                yield handle
        except OSError as e:
            logger.error(f"❌ Could not write {target}: {e}")
            raise ArtifactWriteError(target, e.strerror or str(e))
        self.written.append(target)
        logger.info(f"Wrote {target}")

    # ==================== TABLES ====================

    def save_frame(self, name: str, frame: pd.DataFrame) -> Path:
        """
        Write a DataFrame as CSV without index, 12 significant digits.

        Args:
            name: File name inside the store
            frame: Table to write

        Returns:
            Path of the written file
        """
        with self.open_text(name) as handle:
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        return self.path(name)

    def save_value_field(self, field, name: str = 'value_field.csv') -> Path:
        return self.save_frame(name, field.to_frame())

    def save_limit_table(self, table, name: str = 'incentives.csv') -> Path:
        return self.save_frame(name, table.to_frame())

    def save_schedule(self, frame: pd.DataFrame, name: str = 'schedule.csv') -> Path:
        return self.save_frame(name, frame)

    def save_shape(self, stats, name: str) -> Path:
        """Both sides on one signed axis; the bid's x = 0 row is dropped, the ask frame starts there."""
        frame = pd.concat([stats.shape_frame('bid').iloc[:-1], stats.shape_frame('ask')], ignore_index=True)
        return self.save_frame(name, frame)

    def save_limit_volumes(self, stats, name: str = 'limit_volumes.csv') -> Path:
        return self.save_frame(name, stats.limits_frame())

    def save_oracle_checks(self, checks, name: str = 'oracle_checks.csv') -> Path:
        frame = pd.DataFrame([
            {'check': c.name, 'x': c.x, 'computed': c.computed, 'reference': c.reference,
             'delta': c.delta, 'tolerance': c.tolerance, 'passed': c.passed}
            for c in checks
        ], columns=['check', 'x', 'computed', 'reference', 'delta', 'tolerance', 'passed'])
        return self.save_frame(name, frame)

    def save_objectives(self, estimates: Mapping[str, object], name: str = 'objective.csv') -> Path:
        frame = pd.DataFrame([
            {'schedule': label, 'mean': e.mean, 'stderr': e.stderr, 'n_paths': e.n_paths,
             'book_integral': e.book_integral, 'penalty_integral': e.penalty_integral}
            for label, e in estimates.items()
        ], columns=['schedule', 'mean', 'stderr', 'n_paths', 'book_integral', 'penalty_integral'])
        return self.save_frame(name, frame)

    def save_horizon_convergence(self, errors: Mapping[float, float],
                                 name: str = 'horizon_convergence.csv') -> Path:
        frame = pd.DataFrame({'horizon': list(errors.keys()), 'sup_error': list(errors.values())})
        return self.save_frame(name, frame)

    # ==================== TEXT ====================

    def save_lines(self, name: str, lines: Iterable[str]) -> Path:
        with self.open_text(name) as handle:
            for line in lines:
                handle.write(f"{line}\n")
        return self.path(name)

    def save_effective_config(self, values: Dict[str, object], name: str = 'effective_config') -> Path:
        """Sorted key = value lines describing every setting of the run."""
        return self.save_lines(name, (f"{key} = {values[key]}" for key in sorted(values)))
