from __future__ import annotations

import logging
import platform
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy

import spectra_select
from spectra_select.bench.latency import REFERENCE_SPEEDUP, speedup, time_pipeline
from spectra_select.data.cube import MinMaxStats, load_cube, minmax_apply, minmax_fit, sample_pixels, synthesize_hsi
from spectra_select.data.mvtec import load_mvtec_class, move_anomalies_to_train
from spectra_select.data.planted import iter_planted_items
from spectra_select.data.repository import (
    CUBE_MANIFEST,
    STATS_FILE,
    ArtifactRepository,
    read_json,
    sha256_file,
    write_csv,
    write_json,
)
from spectra_select.errors import ConfigError, CorruptArtifactError, DatasetIOError, PreconditionError
from spectra_select.evaluation.metrics import evaluate as evaluate_scores
from spectra_select.evaluation.summary import latency_table, performance_table
from spectra_select.models import (
    ChannelRanking,
    LabeledItem,
    LatencyReport,
    ReductionMethod,
    ScoreReport,
    SeedStage,
    Split,
)
from spectra_select.numeric.core import RngStream
from spectra_select.reduction.artifacts import load_pca, load_ranking, save_pca, save_ranking
from spectra_select.reduction.base import BaseReducer
from spectra_select.reduction.registry import Artifact, build_reducer, fit_reduction
from spectra_select.report.plot import plot_importance
from spectra_select.schemas import CubeManifest, CubeRecord, RunConfig, RunManifest
from spectra_select.scorer.net import ScorerNet, forward, init_model
from spectra_select.scorer.train import train as train_scorer
from spectra_select.scorer.weights import load_weights, save_weights

logger = logging.getLogger(__name__)

WEIGHTS_FILE = "weights.bin"
LOSS_FILE = "loss_history.csv"


def scale_cube(cube: np.ndarray, stats: MinMaxStats) -> np.ndarray:
    return minmax_apply(np.asarray(cube, dtype=np.float32), stats)


class DetectionPipeline:
    """Min-max scale, reduce, then score with the trained net."""

    def __init__(self, stats: MinMaxStats, reducer: BaseReducer, net: ScorerNet) -> None:
        if reducer.output_channels != net.n_channels:
            raise CorruptArtifactError(
                f"reducer yields {reducer.output_channels} channels, weights expect {net.n_channels}"
            )
        ids = reducer.input_channels
        if ids is not None and net.input_channels is not None:
            if not np.array_equal(np.sort(ids), np.sort(net.input_channels)):
                raise CorruptArtifactError("weights were trained on a different channel selection")
        self.stats = stats
        self.reducer = reducer
        self.net = net

    def prepare(self, cube: np.ndarray) -> np.ndarray:
        return scale_cube(cube, self.stats)

    def score_scaled(self, scaled: np.ndarray) -> float:
        return float(forward(self.net, self.reducer(scaled)[None])[0])

    def __call__(self, cube: np.ndarray) -> float:
        return self.score_scaled(self.prepare(cube))


@dataclass
class CubeSequence(Sequence):
    """Training pairs computed on access, so cached cubes stay on disk."""

    items: List[LabeledItem]
    transform: Callable[[np.ndarray], np.ndarray]

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i):
        item = self.items[i]
        return self.transform(item.data), item.label

    @property
    def labels(self) -> List[int]:
        return [item.label for item in self.items]


@dataclass
class BenchResult:
    reports: List[LatencyReport]
    table: pd.DataFrame


class SpectraEngine:
    """Runs each stage of the select-then-detect workflow against one output root."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.repo = ArtifactRepository(config.out, config.class_name)
        self.rng = RngStream(config.seed)

    @property
    def method(self) -> ReductionMethod:
        return self.config.method

    def stage(self, stage: SeedStage) -> RngStream:
        return self.rng.child(int(stage))

    def seeds(self) -> Dict[str, List[int]]:
        return {stage.name.lower(): [self.config.seed, int(stage)] for stage in SeedStage}

    # synth

    def synth(self) -> CubeManifest:
        grid = self.config.grid()
        records: List[CubeRecord] = []
        moved: List[str] = []
        band: Optional[List[int]] = None

        if self.config.planted:
            planted = self.config.planted_config()
            band = list(planted.band)
            source = "planted"
            for split, item in iter_planted_items(planted, grid, self.stage(SeedStage.PLANTED)):
                records.append(self.repo.save_item(item, split))
        else:
            if not self.config.dataset_root:
                raise ConfigError("dataset.root is required unless dataset.planted is true")
            source = "mvtec"
            train_rgb, test_rgb = load_mvtec_class(
                self.config.dataset_root, self.config.class_name, size=self.config.image_size
            )
            train_rgb, test_rgb, moved = move_anomalies_to_train(
                train_rgb, test_rgb, self.config.split_fraction, self.stage(SeedStage.SPLIT)
            )
            for dataset in (train_rgb, test_rgb):
                for item in dataset.items:
                    cube = synthesize_hsi(item.data, grid).values
                    cube_item = LabeledItem(name=item.name, data=cube, label=item.label, mask=item.mask)
                    records.append(self.repo.save_item(cube_item, dataset.split))
            logger.info("Synthesized %d cubes for %s", len(records), self.config.class_name)

        train_files = [r.file for r in records if r.split == Split.TRAIN.value]
        stats = minmax_fit((load_cube(self.repo.class_dir / f) for f in train_files), grid)
        return self.repo.write_manifest(records, stats, source, moved, band)

    # rank

    def rank(self) -> Artifact:
        train_set, _, stats = self.repo.load_cubes()
        if self.method is ReductionMethod.ORIGIN:
            logger.info("Origin keeps every channel; nothing to rank")
            return None
        x, y = sample_pixels(
            train_set,
            self.config.per_image,
            self.config.balance,
            self.stage(SeedStage.SAMPLE),
        )
        x = minmax_apply(x.T, stats).T
        artifact = fit_reduction(
            self.method,
            x,
            y,
            self.config.forest_config(),
            self.stage(SeedStage.REDUCTION),
            pi_repeats=self.config.pi_repeats,
            validation_fraction=self.config.pi_validation_fraction,
            pi_score=self.config.pi_score,
        )
        path = self.repo.reduction_artifact(self.method)
        if isinstance(artifact, ChannelRanking):
            save_ranking(path, artifact)
        else:
            save_pca(path, artifact)
        logger.info("Wrote %s", path)
        return artifact

    def load_artifact(self, channel_count: int) -> Artifact:
        path = self.repo.reduction_artifact(self.method)
        if path is None:
            return None
        if not path.is_file():
            raise DatasetIOError(f"no {self.method.label} artifact at {path}; run rank first")
        if self.method is ReductionMethod.PCA:
            return load_pca(path, expected_channels=channel_count)
        return load_ranking(path, expected_channels=channel_count)

    def reducer(self, stats: MinMaxStats) -> BaseReducer:
        channel_count = len(stats.grid)
        return build_reducer(self.method, self.load_artifact(channel_count), self.config.top_n, channel_count)

    # train

    def train(self) -> Tuple[ScorerNet, List[float]]:
        train_set, _, stats = self.repo.load_cubes()
        reducer = self.reducer(stats)
        net = init_model(
            reducer.output_channels,
            self.stage(SeedStage.INIT),
            input_channels=reducer.input_channels,
        )
        data = CubeSequence(train_set.items, lambda cube: reducer(scale_cube(cube, stats)))
        logger.info(
            "Training %s scorer on %d cubes (%d input channels)",
            self.method.label,
            len(data),
            reducer.output_channels,
        )
        net, history = train_scorer(net, data, self.config.train_config(), self.stage(SeedStage.TRAIN))
        save_weights(self.repo.path(self.method, WEIGHTS_FILE), net)
        write_csv(
            self.repo.path(self.method, LOSS_FILE),
            pd.DataFrame({"epoch": np.arange(1, len(history) + 1), "loss": history}),
        )
        return net, history

    def pipeline_for(self, stats: MinMaxStats, require_weights: bool = True) -> DetectionPipeline:
        reducer = self.reducer(stats)
        weights = self.repo.path(self.method, WEIGHTS_FILE)
        if weights.is_file():
            net = load_weights(weights, expected_channels=reducer.output_channels)
        elif require_weights:
            raise DatasetIOError(f"no trained weights at {weights}; run train first")
        else:
            logger.info("No trained %s weights; timing the reference initialization", self.method.label)
            net = init_model(
                reducer.output_channels,
                self.stage(SeedStage.INIT),
                input_channels=reducer.input_channels,
            )
        return DetectionPipeline(stats, reducer, net)

    # eval

    def evaluate(self) -> ScoreReport:
        _, test_set, stats = self.repo.load_cubes()
        report = evaluate_scores(self.pipeline_for(stats), test_set, self.config.class_name, self.method)
        write_csv(self.repo.path(self.method, "eval.csv"), pd.DataFrame([report.csv_row()]))
        write_json(self.repo.path(self.method, "eval.json"), report.to_dict())
        return report

    # bench

    def _time(self, engine: "SpectraEngine", stats: MinMaxStats, cubes: List[np.ndarray]) -> LatencyReport:
        pipeline = engine.pipeline_for(stats, require_weights=False)
        scaled = [pipeline.prepare(cube) for cube in cubes]
        return time_pipeline(
            pipeline.score_scaled,
            scaled,
            warmup=self.config.bench_warmup,
            reps=self.config.bench_reps,
            method=engine.method.label,
        )

    def bench(self) -> BenchResult:
        """Time this method and Origin on the same in-memory test cubes."""
        _, test_set, stats = self.repo.load_cubes()
        cubes = [np.array(item.data) for item in test_set.items[: self.config.bench_samples]]
        if not cubes:
            raise PreconditionError("no test cubes to benchmark")

        reports: List[LatencyReport] = []
        if self.method is not ReductionMethod.ORIGIN:
            origin = SpectraEngine(self.config.model_copy(update={"method": ReductionMethod.ORIGIN}))
            reports.append(self._time(origin, stats, cubes))
        reports.append(self._time(self, stats, cubes))

        rows = []
        for report in reports:
            row = report.csv_row()
            row["median"] = report.median
            rows.append(row)
        table = latency_table(rows)
        write_csv(self.repo.path(self.method, "bench.csv"), table, index=True)
        write_json(
            self.repo.path(self.method, "bench.json"),
            {
                "reports": [r.to_dict() for r in reports],
                "speedup_vs_origin": speedup(reports[0], reports[-1]),
                "reference_speedup": REFERENCE_SPEEDUP,
            },
        )
        return BenchResult(reports=reports, table=table)

    # plot

    def plot(self) -> Path:
        if not self.method.is_selection:
            raise PreconditionError(f"plot needs an FI or PI ranking, not {self.method.label}")
        stats = self.repo.load_stats()
        ranking = self.load_artifact(len(stats.grid))
        return plot_importance(
            ranking,
            stats.grid,
            self.config.top_n,
            self.repo.path(self.method, "importance.svg"),
        )

    # pipeline

    def run_pipeline(self) -> RunManifest:
        logger.info("Pipeline for %s / %s", self.config.class_name, self.method.label)
        self.synth()
        self.rank()
        self.train()
        report = self.evaluate()
        logger.info("AUROC %.1f%%", report.auroc_percent)
        self.bench()
        return self.write_run_manifest()

    def artifact_hashes(self) -> Dict[str, str]:
        class_dir = self.repo.class_dir
        paths = [class_dir / CUBE_MANIFEST, class_dir / STATS_FILE, self.repo.path(self.method, WEIGHTS_FILE)]
        reduction = self.repo.reduction_artifact(self.method)
        if reduction is not None:
            paths.append(reduction)
        return {
            path.relative_to(self.repo.out).as_posix(): sha256_file(path)
            for path in paths
            if path.is_file()
        }

    def write_run_manifest(self) -> RunManifest:
        manifest = RunManifest(
            class_name=self.config.class_name,
            method=self.method.label,
            config=self.config.to_flat_dict(),
            seeds=self.seeds(),
            artifacts=self.artifact_hashes(),
            versions={
                "spectra_select": spectra_select.__version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        )
        write_json(self.repo.path(self.method, "manifest.json"), manifest.model_dump())
        return manifest


def collect_reports(out: Path) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Performance and latency tables over every class and method under `out`."""
    out = Path(out)
    if not out.is_dir():
        raise DatasetIOError(f"output directory not found: {out}")
    eval_rows = []
    latency_frames = []
    for class_dir in sorted(p for p in out.iterdir() if p.is_dir()):
        bench_rows: Dict[str, Dict] = {}
        for method in ReductionMethod:
            method_dir = class_dir / method.value
            if (method_dir / "eval.json").is_file():
                record = read_json(method_dir / "eval.json")
                eval_rows.append(
                    {"class": record["class_name"], "method": record["method"], "auroc_percent": record["auroc_percent"]}
                )
            if (method_dir / "bench.json").is_file():
                for report in read_json(method_dir / "bench.json")["reports"]:
                    label = report["method"]
                    # a method's own timing wins over the Origin reference timed alongside it
                    if label == method.label or label not in bench_rows:
                        bench_rows[label] = {
                            "method": label,
                            "sec_per_sample": report["mean"],
                            "std": report["std"],
                            "min": report["min"],
                            "max": report["max"],
                        }
        if bench_rows:
            frame = latency_table(bench_rows.values()).reset_index()
            frame.insert(0, "class", class_dir.name)
            latency_frames.append(frame)

    performance = performance_table(eval_rows)
    latency = pd.concat(latency_frames, ignore_index=True) if latency_frames else pd.DataFrame()
    if not latency.empty:
        latency["reference_speedup"] = REFERENCE_SPEEDUP
    write_csv(out / "performance.csv", performance, index=True)
    write_csv(out / "latency.csv", latency)
    return performance, latency
