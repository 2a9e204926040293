import json
import xml.etree.ElementTree as ET

import matplotlib
import numpy as np
import pytest

from spectra_select.data.repository import ArtifactRepository
from spectra_select.engine.explanation import explain_pca, explain_ranking, top_channel_lines
from spectra_select.engine.orchestrator import SpectraEngine, collect_reports
from spectra_select.errors import ConfigError, DatasetIOError, PreconditionError
from spectra_select.models import ReductionMethod
from spectra_select.reduction.artifacts import load_ranking
from spectra_select.schemas import RunConfig

BAND = range(30, 38)


def _mock_config(tmp_path, **overrides) -> RunConfig:
    settings = {
        "dataset.class": "planted",
        "dataset.planted": True,
        "grid.points": 60,
        "planted.band_start": BAND.start,
        "planted.band_width": len(BAND),
        "planted.size": 16,
        "planted.train_images": 16,
        "planted.test_images": 12,
        "forest.trees": 20,
        "pi.repeats": 2,
        "train.lr": 1e-3,
        "train.epochs": 3,
        "bench.reps": 2,
        "bench.warmup": 0,
        "bench.samples": 4,
        "seed": 0,
        "out": str(tmp_path / "runs"),
    }
    settings.update(overrides)
    return RunConfig.load(None, settings)


def test_synth_caches_every_cube(tmp_path):
    config = _mock_config(tmp_path)
    manifest = SpectraEngine(config).synth()
    assert len(manifest.items) == 28
    assert sum(r.split == "train" for r in manifest.items) == 16
    assert manifest.source == "planted"
    assert manifest.planted_band == list(BAND)

    train, test, stats = ArtifactRepository(config.out, "planted").load_cubes()
    assert len(train) == 16 and len(test) == 12
    assert train.has_both_classes() and test.has_both_classes()
    assert train.items[0].data.shape == (60, 16, 16)
    assert len(stats.grid) == 60

    again = SpectraEngine(config).synth()
    assert [r.sha256 for r in again.items] == [r.sha256 for r in manifest.items]


def test_synth_needs_a_dataset_root(tmp_path):
    config = _mock_config(tmp_path, **{"dataset.planted": False, "dataset.class": "carpet"})
    with pytest.raises(ConfigError):
        SpectraEngine(config).synth()


def test_stages_require_their_inputs(tmp_path):
    config = _mock_config(tmp_path)
    with pytest.raises(DatasetIOError, match="run synth first"):
        SpectraEngine(config).rank()
    SpectraEngine(config).synth()
    with pytest.raises(DatasetIOError, match="run rank first"):
        SpectraEngine(config).train()
    with pytest.raises(DatasetIOError, match="run train first"):
        SpectraEngine(_mock_config(tmp_path, method="origin")).evaluate()


def test_feature_importance_finds_the_planted_band(tmp_path):
    config = _mock_config(tmp_path)
    engine = SpectraEngine(config)
    engine.synth()
    ranking = engine.rank()
    assert sum(channel in BAND for channel in ranking.top(6)) >= 4
    assert abs(sum(e.importance for e in ranking.entries) - 1.0) <= 1e-9
    assert load_ranking(engine.repo.reduction_artifact(ReductionMethod.FI), 60) == ranking

    lines = top_channel_lines(ranking, config.grid(), 6)
    assert len(lines) == 6 and lines[0].strip().startswith("1. channel")
    assert "keeps 6 of 60 channels" in explain_ranking(ranking, config.grid(), 6)


@pytest.mark.parametrize("method", ["fi", "pi"])
def test_selection_recovers_the_planted_band_end_to_end(tmp_path, method):
    band = range(140, 150)
    config = _mock_config(
        tmp_path,
        method=method,
        **{
            "grid.points": 300,
            "planted.band_start": band.start,
            "planted.band_width": len(band),
            "planted.size": 32,
            "planted.train_images": 48,
            "planted.test_images": 24,
            "forest.trees": 50,
            "pi.repeats": 3,
            "train.epochs": 30,
        },
    )
    engine = SpectraEngine(config)
    engine.synth()
    ranking = engine.rank()
    assert sum(channel in band for channel in ranking.top(6)) >= 4
    engine.train()
    assert engine.evaluate().auroc_percent >= 90.0


def test_pca_rank_reports_descending_eigenvalues(tmp_path):
    config = _mock_config(tmp_path, method="pca")
    engine = SpectraEngine(config)
    engine.synth()
    model = engine.rank()
    assert model.channel_count == 60
    assert np.all(np.diff(model.eigenvalues) <= 0)
    assert engine.repo.reduction_artifact(ReductionMethod.PCA).read_bytes()[:4] == b"PCAM"
    assert "PCA keeps 6 of 60 components" in explain_pca(model, 6)
    with pytest.raises(PreconditionError):
        engine.plot()


def test_pipeline_writes_every_artifact(tmp_path):
    config = _mock_config(tmp_path)
    manifest = SpectraEngine(config).run_pipeline()
    method_dir = tmp_path / "runs" / "planted" / "fi"
    for name in ["ranking.json", "weights.bin", "loss_history.csv", "eval.csv", "eval.json",
                 "bench.csv", "bench.json", "manifest.json"]:
        assert (method_dir / name).is_file(), name

    assert set(manifest.artifacts) == {
        "planted/cubes.json", "planted/stats.json", "planted/fi/weights.bin", "planted/fi/ranking.json",
    }
    assert manifest.seeds["train"] == [0, 5]
    assert manifest.config["method"] == "fi"

    eval_csv = (method_dir / "eval.csv").read_text().splitlines()
    assert eval_csv[0] == "class,method,auroc_percent,n"
    assert eval_csv[1].startswith("planted,FI,") and eval_csv[1].endswith(",12")

    bench = json.loads((method_dir / "bench.json").read_text())
    assert [r["method"] for r in bench["reports"]] == ["Origin", "FI"]
    assert bench["reports"][1]["samples"] == 8
    assert bench["speedup_vs_origin"] > 0
    assert (method_dir / "bench.csv").read_text().splitlines()[0] == (
        "method,sec_per_sample,std,min,max,median,speedup_vs_origin"
    )


def test_pipeline_is_reproducible(tmp_path):
    first = SpectraEngine(_mock_config(tmp_path / "a")).run_pipeline()
    second = SpectraEngine(_mock_config(tmp_path / "b")).run_pipeline()
    assert first.artifacts == second.artifacts
    assert first.seeds == second.seeds


def test_full_selection_matches_origin(tmp_path):
    origin = SpectraEngine(_mock_config(tmp_path, method="origin"))
    selected = SpectraEngine(_mock_config(tmp_path, method="fi", top_n=60))
    origin.synth()
    selected.rank()
    origin.train()
    selected.train()
    a = origin.evaluate()
    b = selected.evaluate()
    assert a.auroc_percent == b.auroc_percent
    assert [label for label, _ in a.pairs] == [label for label, _ in b.pairs]
    assert np.array_equal([s for _, s in a.pairs], [s for _, s in b.pairs])


def test_plot_marks_the_top_channels(tmp_path):
    config = _mock_config(tmp_path)
    engine = SpectraEngine(config)
    engine.synth()
    ranking = engine.rank()
    salt = matplotlib.rcParams["svg.hashsalt"]
    path = engine.plot()
    first = path.read_bytes()
    assert matplotlib.rcParams["svg.hashsalt"] == salt

    ids = [el.get("id") for el in ET.fromstring(first).iter() if el.get("id")]
    top = {i for i in ids if i.startswith("top-channel-")}
    assert top == {f"top-channel-{j}" for j in ranking.top(6)}
    assert len([i for i in ids if i.startswith("channel-")]) == 54

    engine.plot()
    assert path.read_bytes() == first


def test_collect_reports_builds_tables(tmp_path):
    SpectraEngine(_mock_config(tmp_path, method="origin")).run_pipeline()
    SpectraEngine(_mock_config(tmp_path)).run_pipeline()
    performance, latency = collect_reports(tmp_path / "runs")
    assert list(performance.columns) == ["Origin", "FI"]
    assert list(performance.index) == ["planted", "Avg."]
    assert list(latency["method"]) == ["Origin", "FI"]
    assert latency.loc[0, "speedup_vs_origin"] == 1.0
    assert (latency["reference_speedup"] == 6.90).all()
    assert (tmp_path / "runs" / "performance.csv").is_file()
    assert (tmp_path / "runs" / "latency.csv").is_file()

    with pytest.raises(DatasetIOError):
        collect_reports(tmp_path / "nowhere")
