from __future__ import annotations

import os

from dotenv import load_dotenv

load_dotenv()

THREADS_ENV = "SPECTRA_SELECT_THREADS"
LOG_LEVEL_ENV = "SPECTRA_SELECT_LOG_LEVEL"


def get_thread_count() -> int:
    """Worker count for forest training and permutation scoring (env override)."""
    raw = os.getenv(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def get_log_level() -> str:
    return os.getenv(LOG_LEVEL_ENV, "INFO").upper()
