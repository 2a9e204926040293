from __future__ import annotations

import logging
import os
import platform
import time
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from spectra_select.errors import PreconditionError
from spectra_select.models import LatencyReport
from spectra_select.settings import get_thread_count

logger = logging.getLogger(__name__)

REFERENCE_SPEEDUP = 6.90


def timer_resolution() -> float:
    return float(time.get_clock_info("perf_counter").resolution)


@contextmanager
def _pinned_to_one_cpu() -> Iterator[bool]:
    """Pin the process to its first allowed CPU where the platform supports it."""
    if not hasattr(os, "sched_getaffinity"):
        yield False
        return
    original = os.sched_getaffinity(0)
    try:
        os.sched_setaffinity(0, {min(original)})
    except OSError:
        yield False
        return
    try:
        yield True
    finally:
        os.sched_setaffinity(0, original)


def environment_note(pinned: bool = False) -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
        "worker_threads": str(get_thread_count()),
        "blas_threads": "1",
        "pinned_cpu": str(pinned).lower(),
        "timer_resolution_s": f"{timer_resolution():.3e}",
    }


def time_pipeline(
    pipeline: Callable[[np.ndarray], float],
    cubes: Sequence[np.ndarray],
    warmup: int = 5,
    reps: int = 20,
    method: str = "pipeline",
) -> LatencyReport:
    """
    Seconds per sample of `pipeline` over in-memory cubes.

    `warmup` untimed passes run first; each of the `reps` timed passes covers
    every cube once and contributes total / len(cubes) as one sample.
    """
    if not cubes:
        raise PreconditionError("cannot time a pipeline on an empty cube list")
    if reps < 1:
        raise PreconditionError(f"reps must be at least 1, got {reps}")
    if warmup < 0:
        raise PreconditionError(f"warmup must be non-negative, got {warmup}")

    per_sample = np.empty(reps, dtype=np.float64)
    with threadpool_limits(limits=1), _pinned_to_one_cpu() as pinned:
        for _ in range(warmup):
            for cube in cubes:
                pipeline(cube)
        for r in range(reps):
            start = time.perf_counter()
            for cube in cubes:
                pipeline(cube)
            per_sample[r] = (time.perf_counter() - start) / len(cubes)

    report = LatencyReport(
        method=method,
        samples=reps * len(cubes),
        warmup=warmup,
        mean=float(per_sample.mean()),
        std=float(per_sample.std(ddof=1)) if reps > 1 else 0.0,
        min=float(per_sample.min()),
        max=float(per_sample.max()),
        median=float(np.median(per_sample)),
        environment=environment_note(pinned),
    )
    logger.info("%s: %.6f s/sample (std %.6f, %d reps x %d cubes)",
                method, report.mean, report.std, reps, len(cubes))
    return report


def speedup(baseline: LatencyReport, candidate: LatencyReport) -> float:
    if baseline.samples < 1 or candidate.samples < 1:
        raise PreconditionError("speedup needs two non-empty latency reports")
    if candidate.mean <= 0:
        raise PreconditionError(f"{candidate.method}: mean latency must be positive")
    return baseline.mean / candidate.mean
