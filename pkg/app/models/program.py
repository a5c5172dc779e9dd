"""
Complete analog programs as run shot by shot on the simulated device.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.exceptions import InvalidArgumentError
from app.models.lattice import AtomRegister, UnitSystem
from app.models.pulse import PulseProgram
from app.models.state import QuantumState


@dataclass(frozen=True, eq=False)
class AnalogProgram:
    """Preparation sweep, optional centre rotation, then measured evolution.

    Without a ``preparation`` program the run starts from ``initial_state``
    (|0...0> when that is None as well). Every checkpoint is a separate
    measurement taken after evolving for that long under ``evolution``.
    """
    register: AtomRegister
    c6: float
    evolution: PulseProgram
    checkpoints: Tuple[float, ...]
    dt: float
    units: UnitSystem
    cutoff: Optional[float] = None
    preparation: Optional[PulseProgram] = None
    initial_state: Optional[QuantumState] = None
    rotation_site: Optional[int] = None

    def __post_init__(self):
        checkpoints = tuple(float(t) for t in self.checkpoints)
        if not checkpoints:
            raise InvalidArgumentError("a program needs at least one measurement checkpoint")
        if any(b < a for a, b in zip(checkpoints, checkpoints[1:])) or checkpoints[0] < 0:
            raise InvalidArgumentError("checkpoints must be non-negative and non-decreasing")
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if self.initial_state is not None and self.initial_state.n_sites != self.register.n_sites:
            raise InvalidArgumentError("initial state and register disagree on the number of sites")
        if self.rotation_site is not None and not 0 <= self.rotation_site < self.register.n_sites:
            raise InvalidArgumentError("rotation site outside the register")
        object.__setattr__(self, "checkpoints", checkpoints)

    @property
    def n_sites(self) -> int:
        return self.register.n_sites

    @property
    def n_checkpoints(self) -> int:
        return len(self.checkpoints)

    @property
    def checkpoint_spacing(self) -> float:
        """Smallest positive gap between checkpoints (or the only positive time)."""
        times = np.unique(np.asarray(self.checkpoints))
        gaps = np.diff(np.concatenate([[0.0], times]))
        positive = gaps[gaps > 0]
        return float(positive.min()) if positive.size else 0.0

    @property
    def total_duration(self) -> float:
        prep = self.preparation.duration if self.preparation is not None else 0.0
        return prep + self.checkpoints[-1]
