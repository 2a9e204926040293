from __future__ import annotations


class SpectraSelectError(ValueError):
    """Base error; `category` is what the CLI prints and maps to an exit code."""

    category = "precondition"
    exit_code = 6


class ConfigError(SpectraSelectError):
    category = "config"
    exit_code = 2


class DatasetIOError(SpectraSelectError):
    category = "io"
    exit_code = 3


class DatasetLayoutError(SpectraSelectError):
    category = "layout"
    exit_code = 4


class CorruptArtifactError(SpectraSelectError):
    category = "artifact"
    exit_code = 5


class PreconditionError(SpectraSelectError):
    category = "precondition"
    exit_code = 6


class ConvergenceError(SpectraSelectError):
    category = "numeric"
    exit_code = 7
