from __future__ import annotations

import logging
from pathlib import Path
from typing import Set, Union

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from spectra_select.errors import PreconditionError
from spectra_select.models import ChannelRanking, WavelengthGrid

logger = logging.getLogger(__name__)

BAR_COLOR = "#9aa5b1"
TOP_COLOR = "#d1495b"


def plot_importance(
    ranking: ChannelRanking,
    grid: WavelengthGrid,
    top_n: int,
    path: Union[str, Path],
) -> Path:
    """
    Bar chart of per-channel importance, one bar per channel in wavelength order.

    Bars carry the SVG ids `channel-<i>`, the top-N ones `top-channel-<i>`.
    Identical input gives identical bytes.
    """
    if not ranking.entries:
        raise PreconditionError("cannot plot an empty ranking")
    if ranking.channel_count != len(grid):
        raise PreconditionError(
            f"ranking covers {ranking.channel_count} channels, grid has {len(grid)}"
        )
    top = set(ranking.top(top_n))
    scores = ranking.scores_by_channel()
    step = float(grid.points[1] - grid.points[0])

    with rc_context({"svg.hashsalt": "spectra-select"}):
        path = _render(ranking, grid, top, scores, step, Path(path))
    logger.info("Wrote importance chart to %s", path)
    return path


def _render(
    ranking: ChannelRanking,
    grid: WavelengthGrid,
    top: Set[int],
    scores: np.ndarray,
    step: float,
    path: Path,
) -> Path:
    fig = Figure(figsize=(12, 4))
    ax = fig.add_subplot()
    bars = ax.bar(
        grid.points,
        scores,
        width=0.9 * step,
        color=[TOP_COLOR if j in top else BAR_COLOR for j in range(len(scores))],
    )
    for j, bar in enumerate(bars):
        bar.set_gid(f"top-channel-{j}" if j in top else f"channel-{j}")
    ax.set_xlabel("Wavelength (nm)")
    ax.set_ylabel(f"{ranking.method.label} importance")
    ax.set_title(f"{ranking.method.label} channel importance (top {len(top)} highlighted)")
    ax.set_xlim(grid.points[0] - step, grid.points[-1] + step)
    fig.tight_layout()

    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path
