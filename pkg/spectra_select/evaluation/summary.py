from __future__ import annotations

from typing import Iterable, List, Mapping

import numpy as np
import pandas as pd

from spectra_select.evaluation.metrics import round_half_up
from spectra_select.models import ReductionMethod

METHOD_COLUMNS: List[str] = [m.label for m in ReductionMethod]
AVERAGE_ROW = "Avg."


def performance_table(rows: Iterable[Mapping]) -> pd.DataFrame:
    """
    Class x method AUROC percent table with an Avg. row.

    `rows` are eval records (class, method, auroc_percent); the average is
    taken per method over the classes that have a value.
    """
    frame = pd.DataFrame(list(rows), columns=["class", "method", "auroc_percent"])
    if frame.empty:
        return pd.DataFrame(columns=METHOD_COLUMNS)
    table = frame.pivot_table(index="class", columns="method", values="auroc_percent", aggfunc="last")
    table = table.reindex(columns=[c for c in METHOD_COLUMNS if c in table.columns]).sort_index()
    means = table.mean(axis=0, skipna=True)
    table.loc[AVERAGE_ROW] = [np.nan if np.isnan(v) else round_half_up(v) for v in means]
    table.index.name = "class"
    table.columns.name = None
    return table


def latency_table(rows: Iterable[Mapping], reference: str = "Origin") -> pd.DataFrame:
    """Method rows with sec/sample stats and the speedup over the reference method."""
    frame = pd.DataFrame(list(rows))
    if frame.empty:
        return frame
    frame = frame.set_index("method")
    frame = frame.reindex([m for m in METHOD_COLUMNS if m in frame.index])
    if reference in frame.index:
        frame["speedup_vs_origin"] = frame.loc[reference, "sec_per_sample"] / frame["sec_per_sample"]
    return frame
