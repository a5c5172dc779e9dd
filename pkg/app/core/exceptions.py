"""
Error hierarchy shared by the simulator services and the CLI.

Every error carries the process exit code the CLI uses for it.
"""
from typing import Optional

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class SimulatorError(Exception):
    """Base class for all simulator failures"""
    exit_code: int = EXIT_VALIDATION
    kind: str = "simulator-error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": self.message, "exit_code": self.exit_code}


class InvalidArgumentError(SimulatorError, ValueError):
    kind = "invalid-argument"


class CapacityError(SimulatorError):
    """Dense representation requested beyond the configured cap"""
    kind = "capacity"

    def __init__(self, n_sites: int, cap: int):
        super().__init__(f"L={n_sites} exceeds the dense-matrix cap of {cap} sites")
        self.n_sites = n_sites
        self.cap = cap


class NumericalInstabilityError(SimulatorError):
    kind = "numerical-instability"
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, suggested_dt: Optional[float] = None):
        if suggested_dt is not None:
            message = f"{message}; retry with dt <= {suggested_dt:g}"
        super().__init__(message)
        self.suggested_dt = suggested_dt


class InvalidConfigError(SimulatorError):
    kind = "invalid-config"


class IncompleteCalibrationError(SimulatorError):
    kind = "incomplete-calibration"


class SingularCalibrationError(SimulatorError):
    kind = "singular-calibration"
    exit_code = EXIT_NUMERICAL


class UndefinedNormalizationError(SimulatorError):
    kind = "undefined-normalization"
    exit_code = EXIT_NUMERICAL


class UnsupportedConfigurationError(SimulatorError):
    kind = "unsupported-configuration"
