from __future__ import annotations

from typing import List

import numpy as np

from spectra_select.models import ChannelRanking, WavelengthGrid
from spectra_select.reduction.pca import PcaModel


def top_channel_lines(ranking: ChannelRanking, grid: WavelengthGrid, top_n: int) -> List[str]:
    return [
        f"{rank:>3}. channel {entry.channel:>3}  {grid.points[entry.channel]:7.1f} nm  importance {entry.importance:.6f}"
        for rank, entry in enumerate(ranking.entries[:top_n], start=1)
    ]


def explain_ranking(ranking: ChannelRanking, grid: WavelengthGrid, top_n: int) -> str:
    """
    Short plain-language summary of a channel ranking.

    Template text for now; it states how much of the total importance the kept
    channels carry and which part of the spectrum they sit in.
    """
    kept = ranking.entries[:top_n]
    scores = np.array([e.importance for e in ranking.entries])
    positive = scores.clip(min=0.0).sum()
    share = sum(max(e.importance, 0.0) for e in kept) / positive if positive > 0 else 0.0
    wavelengths = sorted(grid.points[e.channel] for e in kept)

    base = (
        f"{ranking.method.label} keeps {len(kept)} of {ranking.channel_count} channels "
        f"({100.0 * (1 - len(kept) / ranking.channel_count):.1f}% of the spectrum is never captured). "
    )
    where = f"The kept channels lie between {wavelengths[0]:.1f} and {wavelengths[-1]:.1f} nm. "
    weight = f"Together they carry {100.0 * share:.1f}% of the positive importance mass."
    return (base + where + weight).strip()


def explain_pca(model: PcaModel, top_n: int) -> str:
    total = float(model.eigenvalues.sum())
    kept = float(model.eigenvalues[:top_n].sum())
    ratio = kept / total if total > 0 else 0.0
    return (
        f"PCA keeps {top_n} of {model.channel_count} components, explaining {100.0 * ratio:.2f}% "
        f"of the sampled pixel variance. Every channel must still be captured at inference."
    )
