from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import constants

KrausMode = Literal["per-shot", "per-step"]


class NoiseConfig(BaseModel):
    """SPAM, laser and effective-channel noise parameters.

    Rates are physical (rad/us, um, K, kg); conversion to model units happens
    where they are used.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    eta_prep: float = Field(0.01, ge=0, le=1, description="probability an atom is missing")
    epsilon: float = Field(0.01, ge=0, le=1, description="ground read as Rydberg")
    epsilon_prime: float = Field(0.08, ge=0, le=1, description="Rydberg read as ground")
    temperature: float = Field(50e-6, ge=0, description="atom temperature, K")
    mass: float = Field(1.45e-25, gt=0, description="atom mass, kg")
    waist: float = Field(175.0, gt=0, description="laser waist, um")
    sigma_amplitude: float = Field(0.05, ge=0, description="amplitude fluctuation std")
    k_eff: float = Field(8.7, ge=0, description="effective wave number, 1/um")
    p_z: float = Field(0.1, ge=0, le=1)
    p_r0: float = Field(0.1, ge=0, le=1)
    p_r1: float = Field(0.1, ge=0, le=1)
    samples: int = Field(5000, ge=1)
    kraus_mode: KrausMode = "per-shot"

    @model_validator(mode="after")
    def validate_channel(self):
        if self.p_z + self.p_r0 + self.p_r1 > 1.0 + 1e-12:
            raise ValueError("p_z + p_r0 + p_r1 must not exceed 1")
        return self

    @property
    def p_identity(self) -> float:
        return 1.0 - self.p_z - self.p_r0 - self.p_r1

    @property
    def doppler_sigma(self) -> float:
        """K_eff sqrt(k_B T / m) in rad/us (m/s equals um/us)."""
        return self.k_eff * float(np.sqrt(constants.k * self.temperature / self.mass))

    def scale(self, factor: float) -> "NoiseConfig":
        """Noise strength multiplied by ``factor``: probabilities, sigma_amplitude and T."""
        if factor < 0:
            raise ValueError("noise scale must be non-negative")
        probabilities = {
            name: min(1.0, getattr(self, name) * factor)
            for name in ("eta_prep", "epsilon", "epsilon_prime", "p_z", "p_r0", "p_r1")
        }
        channel = probabilities["p_z"] + probabilities["p_r0"] + probabilities["p_r1"]
        if channel > 1.0:
            for name in ("p_z", "p_r0", "p_r1"):
                probabilities[name] /= channel
        return self.model_copy(update={
            **probabilities,
            "sigma_amplitude": self.sigma_amplitude * factor,
            "temperature": self.temperature * factor,
        })

    @classmethod
    def noiseless(cls, samples: int = 5000) -> "NoiseConfig":
        return cls(
            eta_prep=0.0, epsilon=0.0, epsilon_prime=0.0, temperature=0.0, sigma_amplitude=0.0,
            p_z=0.0, p_r0=0.0, p_r1=0.0, samples=samples,
        )
