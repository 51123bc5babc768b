"""
Exception hierarchy shared by all modules.

The CLI maps these onto its exit codes: validation-type errors exit with 1, solver and state errors with 3.
"""

from __future__ import annotations


class TunableMagnetError(Exception):
    pass


class ValidationError(TunableMagnetError, ValueError):
    """Bad input: out-of-range values, malformed tables, inconsistent geometry."""


class StateCorruptionError(TunableMagnetError, RuntimeError):
    """A memory stack violates alternation/dominance, or the current field is inconsistent with it."""


class IdentificationError(ValidationError):
    pass


class CalibrationError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class GeometryError(ValidationError):
    pass


class FitError(ValidationError):
    pass


class ReportError(ValidationError):
    pass


class UnreachableTargetError(ValidationError):
    def __init__(self, message: str, *, reachable: tuple[float, float]) -> None:
        super().__init__(message)
        self.reachable = reachable


class SolverError(TunableMagnetError, RuntimeError):
    pass
