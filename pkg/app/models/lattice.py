"""
Register geometry, model parameters and unit bookkeeping.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Literal, Optional

import numpy as np

from app.core.exceptions import InvalidArgumentError

UnitMode = Literal["model", "physical"]

# Aquila documentation value, rad * um^6 / us
DEFAULT_C6 = 5.42e6
# C6 * V(a) in model units, i.e. J = 1
MODEL_NN_INTERACTION = 4.0


@dataclass(frozen=True, eq=False)
class AtomRegister:
    """Fixed atom coordinates in micrometres."""
    positions: np.ndarray
    spacing: float

    def __post_init__(self):
        positions = np.array(self.positions, dtype=np.float64, copy=True)
        if positions.ndim != 2 or positions.shape[1] != 2:
            raise InvalidArgumentError("positions must be a sequence of (x, y) pairs")
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def distance(self, i: int, j: int) -> float:
        return float(np.hypot(*(self.positions[i] - self.positions[j])))

    def distances_from_centroid(self) -> np.ndarray:
        return np.hypot(*(self.positions - self.centroid).T)

    def to_dict(self) -> Dict[str, Any]:
        return {"spacing": self.spacing, "positions": self.positions.tolist()}


@dataclass(frozen=True)
class TFIParams:
    """Ideal chain H = J (sum Z_i Z_{i+1} + g sum X_i) with open ends."""
    J: float
    g: float
    n_sites: int

    def __post_init__(self):
        if self.J <= 0:
            raise InvalidArgumentError("J must be positive (antiferromagnetic chain)")
        if self.n_sites < 1:
            raise InvalidArgumentError("the chain needs at least one site")


@dataclass(frozen=True)
class MappedPulse:
    """Drive and detuning that turn the atom Hamiltonian into a TFI chain.

    ``omega`` multiplies sum X_i in the effective chain. The drive term of the
    atom Hamiltonian carries a factor 1/2, so the Rabi frequency to program is
    ``rabi_amplitude = 2 * omega``.
    """
    omega: float
    detuning_interior: float
    detuning_endpoint: float
    J: float
    g: float

    @property
    def rabi_amplitude(self) -> float:
        return 2.0 * self.omega

    def to_dict(self) -> Dict[str, Any]:
        return {
            "omega": self.omega,
            "rabi_amplitude": self.rabi_amplitude,
            "detuning_interior": self.detuning_interior,
            "detuning_endpoint": self.detuning_endpoint,
            "J": self.J,
            "g": self.g,
        }


@dataclass(frozen=True)
class UnitSystem:
    """Model units measure energy in J and time in 1/J.

    ``energy_scale`` is J in rad/us for the physical register, so a physical
    rate divided by it is a model rate and a physical time multiplied by it
    is a model time.
    """
    mode: UnitMode
    energy_scale: float

    def rate(self, physical_rate: float) -> float:
        return physical_rate / self.energy_scale if self.mode == "model" else physical_rate

    def time(self, physical_time: float) -> float:
        return physical_time * self.energy_scale if self.mode == "model" else physical_time

    def model_time(self, t: float) -> float:
        """Run-unit time for a duration given in units of 1/J."""
        return t / self.energy_scale if self.mode == "physical" else t

    def model_energy(self, e: float) -> float:
        """Run-unit energy for a value given in units of J."""
        return e * self.energy_scale if self.mode == "physical" else e

    def to_dict(self) -> Dict[str, Any]:
        return {"mode": self.mode, "energy_scale_rad_per_us": self.energy_scale}


@dataclass(frozen=True)
class LatticeSpec:
    """Chain geometry plus the interaction model used to simulate it.

    ``interaction_cutoff`` (um) drops pairs further apart; None keeps the full
    1/r^6 tail. ``c6`` is already expressed in the run's unit mode.
    """
    n_sites: int
    spacing: float
    c6: float
    unit_mode: UnitMode = "model"
    interaction_cutoff: Optional[float] = None
    endpoint_compensation: bool = True
    physical_c6: float = field(default=DEFAULT_C6)

    @classmethod
    def create(
        cls,
        n_sites: int,
        spacing: float = 9.8,
        unit_mode: UnitMode = "model",
        physical_c6: float = DEFAULT_C6,
        nearest_neighbor_only: bool = False,
        endpoint_compensation: bool = True,
    ) -> "LatticeSpec":
        if spacing <= 0 or physical_c6 <= 0:
            raise InvalidArgumentError("spacing and C6 must be positive")
        c6 = MODEL_NN_INTERACTION * spacing ** 6 if unit_mode == "model" else physical_c6
        cutoff = 1.5 * spacing if nearest_neighbor_only else None
        return cls(
            n_sites=n_sites,
            spacing=spacing,
            c6=c6,
            unit_mode=unit_mode,
            interaction_cutoff=cutoff,
            endpoint_compensation=endpoint_compensation,
            physical_c6=physical_c6,
        )

    @property
    def nearest_interaction(self) -> float:
        """C6 V(a) in the run's units."""
        return self.c6 / self.spacing ** 6

    @property
    def coupling(self) -> float:
        return self.nearest_interaction / 4.0

    @property
    def units(self) -> UnitSystem:
        return UnitSystem(self.unit_mode, self.physical_c6 / self.spacing ** 6 / 4.0)

    def nearest_neighbor_only(self) -> "LatticeSpec":
        return replace(self, interaction_cutoff=1.5 * self.spacing)

    def full_interactions(self) -> "LatticeSpec":
        return replace(self, interaction_cutoff=None)

    def with_sites(self, n_sites: int) -> "LatticeSpec":
        return replace(self, n_sites=n_sites)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_sites": self.n_sites,
            "spacing_um": self.spacing,
            "c6": self.c6,
            "unit_mode": self.unit_mode,
            "interaction_cutoff_um": self.interaction_cutoff,
            "endpoint_compensation": self.endpoint_compensation,
            **self.units.to_dict(),
        }
