"""
Chart writer for incentive-lab reports.
Writes self-contained SVG line charts: incentive per limit and mean book shape.
"""

import logging
from pathlib import Path
from typing import Dict, Optional

import matplotlib
matplotlib.use('Agg')  # no display
import matplotlib.pyplot as plt
import numpy as np

from models.errors import ArtifactWriteError

logger = logging.getLogger(__name__)

# fixed id salt and no date metadata so repeated runs give identical files
SVG_SALT = 'incentive-lab'


class ChartWriter:
    """
    Creates SVG charts for scenario results.
    """

    def __init__(self, style: str = 'default'):
        """
        Initialize the writer.

        Args:
            style: Matplotlib style
        """
        self.style = style
        self.colors = {
            'with': '#1f77b4',
            'without': '#ff7f0e',
            'ask': '#d62728',
            'bid': '#2ca02c',
        }

    def _save(self, fig, filename) -> Path:
        target = Path(filename)
        try:
            with matplotlib.rc_context({'svg.hashsalt': SVG_SALT, 'svg.fonttype': 'path'}):
                fig.savefig(target, format='svg', metadata={'Date': None})
        except OSError as e:
            raise ArtifactWriteError(target, e.strerror or str(e))
        finally:
            plt.close(fig)
        logger.info(f"Chart saved to {target}")
        return target

    def plot_incentives(self, tables: Dict[str, object], filename, title: str = 'Optimal incentive per limit') -> Path:
        """
        Plot incentive against limit index on a log scale, one line per side.

        Args:
            tables: Mapping side -> LimitTable
            filename: Output path

        Returns:
            Path to the saved chart
        """
        with plt.style.context(self.style):
            fig, ax = plt.subplots(figsize=(8, 5))
            for side, table in tables.items():
                values = np.where(table.incentives > 0, table.incentives, np.nan)
                ax.plot(table.limits, values, marker='o', label=side, color=self.colors.get(side))
            ax.set_yscale('log')
            ax.set_title(title)
            ax.set_xlabel('Limit')
            ax.set_ylabel('Incentive ($ per unit order)')
            ax.set_xticks(list(next(iter(tables.values())).limits))
            ax.legend()
            ax.grid(alpha=0.3, linestyle='--')
            fig.tight_layout()
        return self._save(fig, filename)

    def plot_shapes(self, with_incentives, without_incentives, filename,
                    title: Optional[str] = 'Mean shape of the order book at T') -> Path:
        """
        Plot the mean book density over [-L, L] with and without incentives.

        Args:
            with_incentives: EnsembleStats of the controlled book
            without_incentives: EnsembleStats of the uncontrolled book
            filename: Output path

        Returns:
            Path to the saved chart
        """
        with plt.style.context(self.style):
            fig, ax = plt.subplots(figsize=(9, 5))
            for label, stats in (('with incentives', with_incentives), ('without incentives', without_incentives)):
                color = self.colors['with'] if stats is with_incentives else self.colors['without']
                for side in ('ask', 'bid'):
                    frame = stats.shape_frame(side)
                    ax.plot(frame['x'], frame['mean_u'], color=color,
                            label=label if side == 'ask' else None)
            ax.axhline(0.0, color='black', linewidth=0.5)
            ax.set_title(title)
            ax.set_xlabel('Distance to mid-price ($)')
            ax.set_ylabel('Mean density u')
            ax.legend()
            ax.grid(alpha=0.3, linestyle='--')
            fig.tight_layout()
        return self._save(fig, filename)
