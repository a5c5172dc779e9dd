"""
Parameter containers for the two ground-state preparation Ansaetze.
"""
from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np

from app.core.exceptions import InvalidArgumentError

N_HYPERPARAMS = 8


@dataclass(frozen=True, eq=False)
class AdiabaticHyperparams:
    """Eight pulse-shape parameters and the sweep duration.

    p[0] peak amplitude, p[1] sweep rate, p[2] detuning span, p[3] plateau
    sharpness, p[4] and p[5] position and height of the late amplitude bump,
    p[6] height of the early bump. p[7] is carried but does not enter the
    waveforms.
    """
    p: np.ndarray
    t_max: float

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64, copy=True).reshape(-1)
        if p.size != N_HYPERPARAMS:
            raise InvalidArgumentError(f"expected {N_HYPERPARAMS} hyperparameters, got {p.size}")
        if not p[0] > 0:
            raise InvalidArgumentError("peak amplitude p0 must be positive")
        if not p[3] > 0:
            raise InvalidArgumentError("plateau sharpness p3 must be positive")
        if not self.t_max > 0:
            raise InvalidArgumentError("t_max must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def with_p(self, p: Sequence[float]) -> "AdiabaticHyperparams":
        return AdiabaticHyperparams(np.asarray(p, dtype=np.float64), self.t_max)

    def to_dict(self) -> Dict[str, Any]:
        return {"p": self.p.tolist(), "t_max": self.t_max}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AdiabaticHyperparams):
            return NotImplemented
        return self.t_max == other.t_max and bool(np.array_equal(self.p, other.p))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class QaoaParams:
    gamma: np.ndarray
    tau: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        arrays = [np.array(getattr(self, name), dtype=np.float64, copy=True).reshape(-1)
                  for name in ("gamma", "tau", "beta")]
        if len({a.size for a in arrays}) != 1 or arrays[0].size < 1:
            raise InvalidArgumentError("gamma, tau and beta must share a length p >= 1")
        for name, array in zip(("gamma", "tau", "beta"), arrays):
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def level(self) -> int:
        return self.gamma.size

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "QaoaParams":
        gamma, tau, beta = np.split(np.asarray(vector, dtype=np.float64), 3)
        return cls(gamma, tau, beta)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.tau, self.beta])

    def to_dict(self) -> Dict[str, Any]:
        return {"gamma": self.gamma.tolist(), "tau": self.tau.tolist(), "beta": self.beta.tolist()}
