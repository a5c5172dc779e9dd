"""
Pulse programs and evolution schedules.
"""
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Protocol, Tuple, runtime_checkable

import numpy as np

from app.core.exceptions import InvalidArgumentError
from app.models.hamiltonian import PauliHamiltonian

# relative tolerance for "duration is a whole number of steps"
STEP_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class PulseProgram:
    """Sampled global waveforms plus one static local-detuning pattern.

    Site i sees the detuning ``detuning(t) + local_pattern[i] * local_envelope(t)``.
    Samples are linearly interpolated between grid points.
    """
    times: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray
    detuning: np.ndarray
    local_pattern: np.ndarray
    local_envelope: np.ndarray

    def __post_init__(self):
        times = _frozen(self.times)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("pulse sample times must be strictly increasing with at least two points")
        for name in ("amplitude", "phase", "detuning", "local_envelope"):
            values = _frozen(getattr(self, name))
            if values.shape != times.shape:
                raise InvalidArgumentError(f"{name} must be sampled on the program time grid")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "local_pattern", _frozen(self.local_pattern))

    @classmethod
    def constant(
        cls,
        duration: float,
        n_sites: int,
        amplitude: float = 0.0,
        detuning: float = 0.0,
        phase: float = 0.0,
        local_pattern: Optional[np.ndarray] = None,
        local_detuning: float = 0.0,
    ) -> "PulseProgram":
        times = np.array([0.0, max(duration, STEP_TOLERANCE)])
        pattern = np.zeros(n_sites) if local_pattern is None else np.asarray(local_pattern, dtype=np.float64)
        return cls(
            times=times,
            amplitude=np.full(2, amplitude),
            phase=np.full(2, phase),
            detuning=np.full(2, detuning),
            local_pattern=pattern,
            local_envelope=np.full(2, local_detuning),
        )

    @property
    def n_sites(self) -> int:
        return self.local_pattern.size

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def sample(self, t: float) -> Tuple[float, float, float, float]:
        """(amplitude, phase, global detuning, local envelope) at time t."""
        return (
            float(np.interp(t, self.times, self.amplitude)),
            float(np.interp(t, self.times, self.phase)),
            float(np.interp(t, self.times, self.detuning)),
            float(np.interp(t, self.times, self.local_envelope)),
        )

    def site_detunings(self, t: float) -> np.ndarray:
        _, _, detuning, envelope = self.sample(t)
        return detuning + self.local_pattern * envelope

    def to_dict(self) -> Dict[str, Any]:
        return {
            "times": self.times.tolist(),
            "amplitude": self.amplitude.tolist(),
            "phase": self.phase.tolist(),
            "detuning": self.detuning.tolist(),
            "local_pattern": self.local_pattern.tolist(),
            "local_envelope": self.local_envelope.tolist(),
        }


@dataclass(frozen=True, eq=False)
class RydbergParams:
    """Drive parameters of the atom Hamiltonian.

    ``amplitude_factors`` and ``detuning_offsets`` hold quenched per-atom
    perturbations; a leading batch axis describes one row per trajectory.
    """
    c6: float
    program: PulseProgram
    amplitude_factors: Optional[np.ndarray] = None
    detuning_offsets: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.c6 <= 0:
            raise InvalidArgumentError("C6 must be positive")
        if np.any(self.program.amplitude < 0):
            raise InvalidArgumentError("Rabi amplitude must be non-negative at every sample")
        for name in ("amplitude_factors", "detuning_offsets"):
            value = getattr(self, name)
            if value is not None:
                value = _frozen(value)
                if value.shape[-1] != self.program.n_sites:
                    raise InvalidArgumentError(f"{name} must have one entry per site")
                object.__setattr__(self, name, value)

    @property
    def batch_size(self) -> Optional[int]:
        for value in (self.amplitude_factors, self.detuning_offsets):
            if value is not None and value.ndim == 2:
                return value.shape[0]
        return None


@runtime_checkable
class HamiltonianSource(Protocol):
    """Anything that yields the Hamiltonian in effect at time t."""
    n_sites: int

    def at(self, t: float) -> PauliHamiltonian:
        ...


@dataclass(frozen=True)
class StaticSource:
    hamiltonian: PauliHamiltonian

    @property
    def n_sites(self) -> int:
        return self.hamiltonian.n_sites

    def at(self, t: float) -> PauliHamiltonian:
        return self.hamiltonian


@dataclass(frozen=True)
class EvolutionSchedule:
    """Propagation of a source over [0, duration] in steps of dt.

    ``exact`` requests spectral propagation of a static source instead of the
    stepped integrator.
    """
    source: HamiltonianSource
    duration: float
    dt: float
    exact: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if self.duration < 0:
            raise InvalidArgumentError("duration must be non-negative")
        steps = self.duration / self.dt
        if abs(steps - round(steps)) > STEP_TOLERANCE * max(1.0, steps):
            raise InvalidArgumentError(
                f"duration {self.duration:g} is not a whole number of steps of {self.dt:g}"
            )
        if self.exact and not isinstance(self.source, StaticSource):
            raise InvalidArgumentError("exact propagation needs a time-independent source")

    @classmethod
    def subdivided(
        cls, source: HamiltonianSource, duration: float, max_dt: float, checkpoint: float, exact: bool = False
    ) -> "EvolutionSchedule":
        """Schedule whose step divides ``checkpoint`` and does not exceed ``max_dt``."""
        if checkpoint <= 0 or max_dt <= 0:
            raise InvalidArgumentError("checkpoint spacing and dt must be positive")
        per_checkpoint = max(1, math.ceil(checkpoint / max_dt - STEP_TOLERANCE))
        return cls(source=source, duration=duration, dt=checkpoint / per_checkpoint, exact=exact)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def n_sites(self) -> int:
        return self.source.n_sites

    def steps_to(self, t: float) -> int:
        steps = t / self.dt
        if abs(steps - round(steps)) > STEP_TOLERANCE * max(1.0, steps):
            raise InvalidArgumentError(f"checkpoint t={t:g} is not on the step grid dt={self.dt:g}")
        return int(round(steps))


def _frozen(values: Any) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array
