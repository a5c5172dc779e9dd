"""
Space-time Green's function tables and momentum-frequency spectra.
"""
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional

import numpy as np

from app.core.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class TimeGrid:
    """t_n = n * delta for n = 0..N, total time T = N * delta."""
    delta: float
    n_steps: int

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidArgumentError("time step delta must be positive")
        if self.n_steps < 1:
            raise InvalidArgumentError("time grid needs at least one step")

    @property
    def total_time(self) -> float:
        return self.n_steps * self.delta

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.delta

    def to_dict(self) -> Dict[str, Any]:
        return {"delta": self.delta, "N": self.n_steps, "T": self.total_time}


def center_site(n_sites: int) -> int:
    """0-based centre of the chain; the left of the two middle sites for even L."""
    return (n_sites - 1) // 2


@dataclass(frozen=True, eq=False)
class GreensTable:
    """G(i, t_n) for every site and every grid time including t_0.

    ``values`` is what the rotation protocol measures. ``oracle`` holds the
    commutator reference when an exact backend produced the table; ``sigma``
    is filled only by sampled runs.
    """
    values: np.ndarray
    center: int
    grid: TimeGrid
    oracle: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[1] != self.grid.n_steps + 1:
            raise InvalidArgumentError("Green's table must have shape (L, N + 1)")
        if not 0 <= self.center < values.shape[0]:
            raise InvalidArgumentError("centre site outside the chain")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        for name in ("oracle", "sigma"):
            extra = getattr(self, name)
            if extra is not None:
                extra = np.array(extra, dtype=np.float64, copy=True)
                if extra.shape != values.shape:
                    raise InvalidArgumentError(f"{name} must match the shape of the table")
                extra.setflags(write=False)
                object.__setattr__(self, name, extra)

    @property
    def n_sites(self) -> int:
        return self.values.shape[0]

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values: np.ndarray, sigma: Optional[np.ndarray] = None) -> "GreensTable":
        return replace(self, values=values, sigma=sigma, oracle=None)


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """S(k, omega) on k_m = 2 pi m / L and a uniform omega grid.

    ``normalization`` is the sum-rule constant already applied to ``values``
    (1.0 when unnormalized).
    """
    k: np.ndarray
    omega: np.ndarray
    values: np.ndarray
    eta: float
    sigma: Optional[np.ndarray] = None
    normalization: float = 1.0
    normalized: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != (np.size(self.k), np.size(self.omega)):
            raise InvalidArgumentError("spectrum must have shape (len(k), len(omega))")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "k", np.asarray(self.k, dtype=np.float64))
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=np.float64))

    @property
    def negativity_ratio(self) -> float:
        """Negative weight over positive weight."""
        positive = float(np.sum(np.clip(self.values, 0.0, None)))
        negative = float(np.sum(np.clip(-self.values, 0.0, None)))
        if positive == 0.0:
            return 0.0 if negative == 0.0 else float("inf")
        return negative / positive

    def momentum_index(self, k: float) -> int:
        """Nearest grid momentum, wrapping k into [0, 2 pi)."""
        wrapped = np.mod(k, 2.0 * np.pi)
        distance = np.abs(np.angle(np.exp(1j * (self.k - wrapped))))
        return int(np.argmin(distance))

    def at_momentum(self, k: float) -> np.ndarray:
        return self.values[self.momentum_index(k)]

    def scaled(self, constant: float) -> "SpectralGrid":
        sigma = None if self.sigma is None else self.sigma * constant
        return replace(
            self,
            values=self.values * constant,
            sigma=sigma,
            normalization=self.normalization * constant,
            normalized=True,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta": self.eta,
            "n_k": int(self.k.size),
            "n_omega": int(self.omega.size),
            "omega_max": float(self.omega[-1]),
            "normalization": self.normalization,
            "negativity_ratio": self.negativity_ratio,
        }
