import time

import numpy as np
import pytest

from spectra_select.bench.latency import (
    REFERENCE_SPEEDUP,
    environment_note,
    speedup,
    time_pipeline,
    timer_resolution,
)
from spectra_select.errors import PreconditionError
from spectra_select.models import ChannelRanking, LatencyReport, ReductionMethod
from spectra_select.reduction.base import ChannelSelector, IdentityReducer, PcaProjector
from spectra_select.reduction.pca import PcaModel
from spectra_select.scorer.net import forward, init_model


def _report(mean: float, method: str = "m") -> LatencyReport:
    return LatencyReport(
        method=method, samples=20, warmup=5, mean=mean, std=0.0,
        min=mean, max=mean, median=mean, environment={},
    )


def _cubes(count: int = 2):
    return [np.zeros((3, 4, 4), dtype=np.float32) for _ in range(count)]


def test_sleeping_pipeline_is_timed_per_sample():
    report = time_pipeline(lambda cube: time.sleep(0.01), _cubes(), warmup=1, reps=5, method="sleep")
    assert report.method == "sleep"
    assert report.samples == 10
    assert 0.008 <= report.mean <= 0.012
    assert report.min <= report.median <= report.max
    assert report.min <= report.mean <= report.max
    assert report.std >= 0.0


def test_warmup_hides_a_slow_first_call():
    calls = []

    def pipeline(cube):
        calls.append(1)
        if len(calls) == 1:
            time.sleep(0.2)
        return 0.5

    report = time_pipeline(pipeline, _cubes(1), warmup=1, reps=5)
    assert report.max < 0.1
    assert len(calls) == 6


def test_single_rep_has_zero_spread():
    report = time_pipeline(lambda cube: float(cube.sum()), _cubes(3), warmup=0, reps=1)
    assert report.samples == 3 and report.warmup == 0
    assert report.std == 0.0
    assert report.min == report.max == report.mean


def test_timing_does_not_change_outputs():
    cube = np.random.default_rng(0).random((3, 8, 8))
    seen = []
    time_pipeline(lambda c: seen.append(float(c.mean())), [cube], warmup=2, reps=3)
    assert seen == [float(cube.mean())] * 5


def test_time_pipeline_preconditions():
    with pytest.raises(PreconditionError):
        time_pipeline(lambda cube: 0.0, [], warmup=0, reps=1)
    with pytest.raises(PreconditionError):
        time_pipeline(lambda cube: 0.0, _cubes(), warmup=0, reps=0)
    with pytest.raises(PreconditionError):
        time_pipeline(lambda cube: 0.0, _cubes(), warmup=-1, reps=1)


def test_speedup_arithmetic():
    assert speedup(_report(0.5), _report(0.5)) == 1.0
    assert abs(speedup(_report(0.855), _report(0.124)) - 6.895) < 1e-3
    assert round(speedup(_report(0.855), _report(0.124)), 1) == round(REFERENCE_SPEEDUP, 1)
    assert abs(speedup(_report(0.855), _report(0.687)) - 1.245) < 1e-3
    with pytest.raises(PreconditionError):
        speedup(_report(0.5), _report(0.0))


def test_environment_note_records_threads(monkeypatch):
    monkeypatch.setenv("SPECTRA_SELECT_THREADS", "3")
    note = environment_note(pinned=True)
    assert note["worker_threads"] == "3"
    assert note["blas_threads"] == "1"
    assert note["pinned_cpu"] == "true"
    assert timer_resolution() > 0


def _reference_reducers(channels: int, keep: int):
    rng = np.random.default_rng(3)
    ranking = ChannelRanking.from_scores(rng.random(channels), ReductionMethod.FI)
    q, _ = np.linalg.qr(rng.normal(size=(channels, channels)))
    model = PcaModel(
        mean=rng.random(channels),
        components=q,
        eigenvalues=np.arange(channels, 0, -1, dtype=np.float64),
    )
    return {
        "Origin": IdentityReducer(channels),
        "FS": ChannelSelector(ranking, keep),
        "PCA": PcaProjector(model, keep),
    }


def test_channel_selection_is_the_fastest_pipeline():
    cubes = [np.random.default_rng(i).random((300, 64, 64)).astype(np.float32) for i in range(2)]
    reports = {}
    for label, reducer in _reference_reducers(300, 6).items():
        net = init_model(reducer.output_channels, 0, input_channels=reducer.input_channels)
        reports[label] = time_pipeline(
            lambda cube, reducer=reducer, net=net: float(forward(net, reducer(cube)[None])[0]),
            cubes,
            warmup=1,
            reps=5,
            method=label,
        )
    assert reports["FS"].mean < reports["PCA"].mean < reports["Origin"].mean
    assert speedup(reports["Origin"], reports["FS"]) >= 3.0
