"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class SynthGuardError(Exception):
    """Base class for every error raised by synthguard."""


class ShapeError(SynthGuardError, ValueError):
    pass


class NumericsError(SynthGuardError, ArithmeticError):
    pass


class ConfigError(SynthGuardError, ValueError):
    pass


class IngestError(SynthGuardError):
    pass


class SchemaError(IngestError):
    pass


class ParseError(IngestError):
    """A cell could not be parsed. ``row`` is the 1-based line number in the file."""

    def __init__(self, message: str, row: int):
        super().__init__(f"line {row}: {message}")
        self.row = row


class TrainingDiverged(SynthGuardError, RuntimeError):
    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class ZeroVarianceError(SynthGuardError, ValueError):
    pass


class StateError(SynthGuardError, RuntimeError):
    pass


class SliceTooSmall(SynthGuardError, ValueError):
    pass


class StageError(SynthGuardError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class IoError(SynthGuardError, OSError):
    pass
