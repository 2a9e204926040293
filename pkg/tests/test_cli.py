import json

import pytest

from spectra_select.cli.main import build_parser, main
from spectra_select.errors import ConfigError
from spectra_select.models import ReductionMethod
from spectra_select.schemas import RunConfig


def _write_config(tmp_path, **overrides):
    settings = {
        "dataset.class": "planted",
        "dataset.planted": True,
        "grid.points": 40,
        "planted.band_start": 20,
        "planted.band_width": 6,
        "planted.size": 16,
        "planted.train_images": 8,
        "planted.test_images": 6,
        "forest.trees": 5,
        "train.lr": 1e-3,
        "train.epochs": 1,
        "bench.reps": 1,
        "bench.warmup": 0,
        "bench.samples": 2,
        "out": str(tmp_path / "runs"),
    }
    settings.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(settings))
    return path


def _error_lines(err: str):
    return [line for line in err.splitlines() if line.startswith("error:")]


def test_parser_knows_every_command():
    parser = build_parser()
    args = parser.parse_args(["rank", "--method", "pi", "--top-n", "4", "--class", "grid"])
    assert args.command == "rank" and args.method == "pi" and args.top_n == 4
    assert args.class_name == "grid"
    with pytest.raises(SystemExit):
        parser.parse_args(["rank", "--method", "umap"])
    with pytest.raises(SystemExit):
        parser.parse_args(["deploy"])


def test_config_file_and_flag_overrides(tmp_path):
    path = _write_config(tmp_path)
    config = RunConfig.load(path, {"method": "pca", "top_n": 3, "seed": None})
    assert config.method is ReductionMethod.PCA
    assert config.top_n == 3 and config.seed == 0
    assert config.grid_points == 40 and config.planted
    assert len(config.grid()) == 40
    assert config.train_config().lr == 1e-3
    assert config.forest_config().trees == 5
    assert config.planted_config().band == range(20, 26)
    assert RunConfig().top_n == 6 and RunConfig().train_lr == 1e-5


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.json")
    with pytest.raises(ConfigError, match="forest.tres"):
        RunConfig.load(_write_config(tmp_path, **{"forest.tres": 3}))
    with pytest.raises(ConfigError):
        RunConfig.load(None, {"top_n": 41, "grid.points": 40})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)


def test_synth_then_rank_prints_summaries(tmp_path, capsys):
    path = _write_config(tmp_path)
    assert main(["synth", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "planted: cached 14 cubes (8 train, 6 test) on a 40-channel grid" in out

    assert main(["rank", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "top 6 FI channels:" in out
    assert " nm " in out

    assert main(["rank", "--config", str(path), "--method", "origin"]) == 0
    assert "no ranking written" in capsys.readouterr().out


def test_pipeline_and_report_commands(tmp_path, capsys):
    path = _write_config(tmp_path)
    assert main(["pipeline", "--config", str(path)]) == 0
    assert "run manifest with" in capsys.readouterr().out
    assert (tmp_path / "runs" / "planted" / "fi" / "manifest.json").is_file()

    assert main(["plot", "--config", str(path)]) == 0
    assert "importance.svg" in capsys.readouterr().out

    assert main(["report", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "Avg." in out
    assert (tmp_path / "runs" / "performance.csv").read_text().splitlines()[0] == "class,FI"


def test_missing_cache_exits_with_io_error(tmp_path, capsys):
    path = _write_config(tmp_path)
    assert main(["eval", "--config", str(path)]) == 3
    lines = _error_lines(capsys.readouterr().err)
    assert len(lines) == 1
    assert lines[0].startswith("error: io: ")
    assert "run synth first" in lines[0]


def test_bad_config_exits_with_config_error(tmp_path, capsys):
    path = _write_config(tmp_path, **{"train.lr": -1})
    assert main(["train", "--config", str(path)]) == 2
    lines = _error_lines(capsys.readouterr().err)
    assert len(lines) == 1 and lines[0].startswith("error: config: train.lr")

    assert main(["synth", "--config", str(tmp_path / "nope.json")]) == 2


def test_precondition_error_exit_code(tmp_path, capsys):
    path = _write_config(tmp_path)
    assert main(["synth", "--config", str(path)]) == 0
    assert main(["plot", "--config", str(path), "--method", "pca"]) == 6
    assert _error_lines(capsys.readouterr().err)[0].startswith("error: precondition: ")
