"""
Errors - Typed failures shared by every module

Each error carries the exit code the command-line runner reports for it.
"""


class HamLearnError(Exception):
    """Base class for all library errors."""
    exit_code: int = 1


class DimensionError(HamLearnError, ValueError):
    """Sizes, site indices or local dimensions do not agree."""
    exit_code = 2


class ConfigError(HamLearnError, ValueError):
    """A configuration document or option failed validation."""
    exit_code = 2


class DatasetError(HamLearnError, ValueError):
    """A dataset or model file is inconsistent with its schema or its use."""
    exit_code = 2


class DivergenceError(HamLearnError, RuntimeError):
    """Training blew up (non-finite cost or runaway growth)."""
    exit_code = 3


class ArtifactIOError(HamLearnError, OSError):
    """Reading or writing an artifact file failed."""
    exit_code = 4
