import numpy as np
import pandas as pd
import pytest

from spectra_select.errors import PreconditionError
from spectra_select.evaluation.metrics import anomaly_score, auroc, evaluate, round_half_up, to_percent
from spectra_select.evaluation.summary import AVERAGE_ROW, latency_table, performance_table
from spectra_select.models import LabeledDataset, LabeledItem, ReductionMethod, Split


def _pairwise_auroc(labels, scores) -> float:
    pos = [s for label, s in zip(labels, scores) if label == 1]
    neg = [s for label, s in zip(labels, scores) if label == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def _mock_test_set(labels):
    items = [
        LabeledItem(name=f"cube{i}", data=np.full((2, 4, 4), float(label)), label=label)
        for i, label in enumerate(labels)
    ]
    return LabeledDataset(items=items, split=Split.TEST)


def test_auroc_matches_pairwise_count():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        # coarse scores so ties happen
        scores = np.round(rng.random(n), 1)
        assert abs(auroc(labels, scores) - _pairwise_auroc(labels, scores)) <= 1e-12


def test_auroc_known_values():
    assert auroc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    assert auroc([0, 1, 0, 1], [0.3] * 4) == 0.5
    assert auroc([0, 1], [0.0, 1.0]) == 1.0
    assert auroc([0, 1], [1.0, 0.0]) == 0.0

    rng = np.random.default_rng(1)
    labels = rng.integers(0, 2, 50)
    labels[:2] = [0, 1]
    scores = rng.random(50)
    assert abs(auroc(labels, scores) + auroc(labels, -scores) - 1.0) <= 1e-12


def test_auroc_preconditions():
    with pytest.raises(PreconditionError):
        auroc([0, 0, 0], [0.1, 0.2, 0.3])
    with pytest.raises(PreconditionError):
        auroc([0, 1], [0.1])
    with pytest.raises(PreconditionError):
        auroc([0, 2], [0.1, 0.2])


def test_percent_rounds_half_up():
    assert to_percent(0.75) == 75.0
    assert to_percent(0.9876) == 98.8
    assert to_percent(0.8125) == 81.3
    assert anomaly_score(np.float32(0.25)) == 0.25


def test_evaluate_reports_percent_auroc():
    test = _mock_test_set([0, 1, 0, 1, 1])
    perfect = evaluate(lambda cube: float(cube.mean()), test, "carpet", ReductionMethod.FI)
    assert perfect.auroc_percent == 100.0
    assert perfect.n == 5
    assert perfect.pairs[1] == (1, 1.0)
    assert perfect.csv_row() == {"class": "carpet", "method": "FI", "auroc_percent": 100.0, "n": 5}

    constant = evaluate(lambda cube: 0.5, test, "carpet", "origin")
    assert constant.auroc_percent == 50.0
    assert constant.method is ReductionMethod.ORIGIN
    assert constant.to_dict()["method"] == "Origin"


def test_evaluate_needs_both_classes():
    with pytest.raises(PreconditionError):
        evaluate(lambda cube: 0.5, _mock_test_set([0, 0]), "carpet", ReductionMethod.PCA)


def test_performance_table_adds_average_row():
    rows = [
        {"class": "carpet", "method": "FI", "auroc_percent": 91.0},
        {"class": "carpet", "method": "Origin", "auroc_percent": 90.0},
        {"class": "grid", "method": "FI", "auroc_percent": 80.5},
        {"class": "grid", "method": "Origin", "auroc_percent": 85.0},
        {"class": "grid", "method": "PCA", "auroc_percent": 70.0},
    ]
    table = performance_table(rows)
    assert list(table.columns) == ["Origin", "FI", "PCA"]
    assert list(table.index) == ["carpet", "grid", AVERAGE_ROW]
    assert table.loc[AVERAGE_ROW, "FI"] == 85.8
    assert table.loc[AVERAGE_ROW, "Origin"] == 87.5
    assert table.loc[AVERAGE_ROW, "PCA"] == 70.0
    assert pd.isna(table.loc["carpet", "PCA"])
    assert performance_table([]).empty


def test_latency_table_speedup_against_origin():
    rows = [
        {"method": "FI", "sec_per_sample": 0.124, "std": 0.001, "min": 0.12, "max": 0.13},
        {"method": "Origin", "sec_per_sample": 0.855, "std": 0.01, "min": 0.84, "max": 0.87},
    ]
    table = latency_table(rows)
    assert list(table.index) == ["Origin", "FI"]
    assert table.loc["Origin", "speedup_vs_origin"] == 1.0
    assert abs(table.loc["FI", "speedup_vs_origin"] - 6.895) < 1e-3
    assert "speedup_vs_origin" not in latency_table(rows[:1]).columns


def test_average_row_rounds_half_up():
    rows = [
        {"class": "carpet", "method": "FI", "auroc_percent": 85.0},
        {"class": "grid", "method": "FI", "auroc_percent": 85.5},
    ]
    assert performance_table(rows).loc[AVERAGE_ROW, "FI"] == 85.3
    assert round_half_up(85.25) == 85.3
    assert round_half_up(0.05) == 0.1
    assert round_half_up(-1.25) == -1.3
