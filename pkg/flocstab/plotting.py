"""
SVG rendering of sweep results
"""

from pathlib import Path
from typing import Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .logging_config import logger
from .reports import sweep_frame

VERDICT_COLORS = {
    'stable': 'tab:green',
    'unstable': 'tab:red',
    'inconclusive': 'tab:gray',
    'not-converged': 'tab:orange',
    'failed': 'black',
}


def _region_panel(ax, frame: pd.DataFrame, a: float):
    grid = frame.pivot_table(index='c', columns='b', values='feasible', aggfunc='max')
    if grid.shape[0] >= 2 and grid.shape[1] >= 2:
        B, C = np.meshgrid(grid.columns.to_numpy(), grid.index.to_numpy())
        ax.contourf(B, C, grid.to_numpy(dtype=float), levels=[0.5, 1.5], colors=['tab:green'], alpha=0.3)
    feasible = frame['feasible'].astype(bool)
    ax.scatter(frame.loc[feasible, 'b'], frame.loc[feasible, 'c'], s=12, color='tab:green', label='feasible')
    ax.scatter(frame.loc[~feasible, 'b'], frame.loc[~feasible, 'c'], s=12, facecolors='none',
               edgecolors='tab:gray', label='not feasible')
    ax.set_title(f"a = {a:g}")
    ax.set_xlabel('b')
    ax.set_ylabel('c')


def plot_sweep(result, path: Union[str, Path]) -> Path:
    """
    Write an SVG of a sweep

    example2: one panel per a with the feasible (b, c) region shaded.
    example1: spectral abscissa against b, colored by verdict.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = sweep_frame(result)

    if result.preset == 'example2':
        a_values = sorted(frame['a'].dropna().unique())
        fig, axes = plt.subplots(ncols=max(1, len(a_values)), figsize=(4 * max(1, len(a_values)), 4),
                                 squeeze=False)
        for ax, a in zip(axes[0], a_values):
            _region_panel(ax, frame[np.isclose(frame['a'], a)], a)
        axes[0][0].legend(loc='upper right', fontsize='small')
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        for verdict, group in frame.groupby('verdict'):
            ax.scatter(group['b'], group['spectral_abscissa'], s=14,
                       color=VERDICT_COLORS.get(verdict, 'black'), label=verdict)
        ax.axhline(0.0, color='black', linewidth=0.8)
        ax.set_xlabel('b')
        ax.set_ylabel('spectral abscissa')
        ax.legend(fontsize='small')

    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path
