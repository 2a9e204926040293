from __future__ import annotations

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from spectra_select.engine.explanation import explain_pca, explain_ranking, top_channel_lines
from spectra_select.engine.orchestrator import SpectraEngine, collect_reports
from spectra_select.errors import DatasetIOError, SpectraSelectError
from spectra_select.models import ChannelRanking, ReductionMethod
from spectra_select.reduction.pca import PcaModel
from spectra_select.schemas import RunConfig
from spectra_select.settings import get_log_level

COMMANDS = ["synth", "rank", "train", "eval", "bench", "plot", "pipeline", "report"]


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else get_log_level(),
        format="[%(name)s] %(message)s",
        stream=sys.stderr,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectra-select",
        description="Compare hyperspectral channel reduction methods in front of a CNN anomaly scorer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="JSON file of flat dotted settings")
        cmd.add_argument("--class", dest="class_name", help="dataset class, e.g. carpet")
        cmd.add_argument("--method", choices=[m.value for m in ReductionMethod])
        cmd.add_argument("--top-n", dest="top_n", type=int)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--out", help="output root directory")
        cmd.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig.load(
        args.config,
        {
            "dataset.class": args.class_name,
            "method": args.method,
            "top_n": args.top_n,
            "seed": args.seed,
            "out": args.out,
        },
    )


def cmd_synth(config: RunConfig) -> None:
    manifest = SpectraEngine(config).synth()
    train = sum(1 for r in manifest.items if r.split == "train")
    print(f"{config.class_name}: cached {len(manifest.items)} cubes ({train} train, "
          f"{len(manifest.items) - train} test) on a {config.grid_points}-channel grid")
    if manifest.moved_to_train:
        print(f"moved {len(manifest.moved_to_train)} anomalous test items into training")


def cmd_rank(config: RunConfig) -> None:
    engine = SpectraEngine(config)
    artifact = engine.rank()
    grid = config.grid()
    if artifact is None:
        print("Origin uses all channels; no ranking written")
    elif isinstance(artifact, ChannelRanking):
        print(f"top {config.top_n} {artifact.method.label} channels:")
        for line in top_channel_lines(artifact, grid, config.top_n):
            print(line)
        print(explain_ranking(artifact, grid, config.top_n))
    elif isinstance(artifact, PcaModel):
        print("PCA eigenvalues (descending):")
        for i, value in enumerate(artifact.eigenvalues[: config.top_n], start=1):
            print(f"{i:>3}. {value:.6e}")
        print(explain_pca(artifact, config.top_n))


def cmd_train(config: RunConfig) -> None:
    _, history = SpectraEngine(config).train()
    if history:
        print(f"{config.method.value}: {len(history)} epochs, loss {history[0]:.6f} -> {history[-1]:.6f}")
    else:
        print(f"{config.method.value}: no epochs run; initial weights saved")


def cmd_eval(config: RunConfig) -> None:
    report = SpectraEngine(config).evaluate()
    print(f"{report.class_name},{report.method.label},{report.auroc_percent:.1f},{report.n}")


def cmd_bench(config: RunConfig) -> None:
    result = SpectraEngine(config).bench()
    print(result.table.to_string(float_format=lambda v: f"{v:.6f}"))
    print(f"environment: {result.reports[-1].environment}")


def cmd_plot(config: RunConfig) -> None:
    path = SpectraEngine(config).plot()
    print(f"wrote {path}")


def cmd_pipeline(config: RunConfig) -> None:
    manifest = SpectraEngine(config).run_pipeline()
    print(f"run manifest with {len(manifest.artifacts)} artifact hashes written")


def cmd_report(config: RunConfig) -> None:
    performance, latency = collect_reports(config.out)
    print(performance.to_string(float_format=lambda v: f"{v:.1f}"))
    if not latency.empty:
        print(latency.to_string(index=False, float_format=lambda v: f"{v:.6f}"))


HANDLERS: Dict[str, Callable[[RunConfig], None]] = {
    "synth": cmd_synth,
    "rank": cmd_rank,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "plot": cmd_plot,
    "pipeline": cmd_pipeline,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        config = _load_config(args)
        HANDLERS[args.command](config)
    except SpectraSelectError as exc:
        message = " ".join(str(exc).split())
        print(f"error: {exc.category}: {message}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return DatasetIOError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
