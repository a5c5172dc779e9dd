"""
Readout-error and randomized-measurement calibration records.
"""
from dataclasses import dataclass
from typing import Any, Dict, Literal, Optional

import numpy as np

from app.core.exceptions import InvalidConfigError

RescaleMode = Literal["scale", "inverse-scale", "auto"]


@dataclass(frozen=True, eq=False)
class ConfusionModel:
    """Per-qubit column-stochastic readout matrices.

    Column b of qubit i's matrix is the distribution of the read bit given the
    true bit b: [[1 - eps, eps'], [eps, 1 - eps']].
    """
    epsilon: np.ndarray
    epsilon_prime: np.ndarray

    def __post_init__(self):
        eps = np.atleast_1d(np.asarray(self.epsilon, dtype=np.float64))
        eps_p = np.atleast_1d(np.asarray(self.epsilon_prime, dtype=np.float64))
        if eps.shape != eps_p.shape:
            raise InvalidConfigError("epsilon and epsilon' need one entry per qubit")
        if np.any((eps < 0) | (eps > 1) | (eps_p < 0) | (eps_p > 1)):
            raise InvalidConfigError("readout error probabilities must lie in [0, 1]")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "epsilon_prime", eps_p)

    @classmethod
    def uniform(cls, n_sites: int, epsilon: float, epsilon_prime: float) -> "ConfusionModel":
        return cls(np.full(n_sites, epsilon), np.full(n_sites, epsilon_prime))

    @property
    def n_sites(self) -> int:
        return self.epsilon.size

    @property
    def invertible(self) -> bool:
        return bool(np.all(self.epsilon + self.epsilon_prime < 1.0))

    def matrix(self, site: int) -> np.ndarray:
        e, ep = self.epsilon[site], self.epsilon_prime[site]
        return np.array([[1.0 - e, ep], [e, 1.0 - ep]])

    def inverse(self, site: int) -> np.ndarray:
        if self.epsilon[site] + self.epsilon_prime[site] >= 1.0:
            raise InvalidConfigError(
                f"confusion matrix of qubit {site} is singular (eps + eps' >= 1)"
            )
        return np.linalg.inv(self.matrix(site))

    def to_dict(self) -> Dict[str, Any]:
        return {"epsilon": self.epsilon.tolist(), "epsilon_prime": self.epsilon_prime.tolist()}


@dataclass(frozen=True)
class HaarRotation:
    """U = R_Z(omega) R_Y(theta) R_Z(phi)."""
    phi: float
    theta: float
    omega: float

    def matrix(self) -> np.ndarray:
        def rz(a: float) -> np.ndarray:
            return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])

        c, s = np.cos(self.theta / 2), np.sin(self.theta / 2)
        ry = np.array([[c, -s], [s, c]], dtype=np.complex128)
        return rz(self.omega) @ ry @ rz(self.phi)

    def ground_probabilities(self) -> np.ndarray:
        """|<s|U|0>|^2 for s = 0, 1."""
        return np.abs(self.matrix()[:, 0]) ** 2


@dataclass(frozen=True, eq=False)
class CorrectedEstimate:
    values: np.ndarray
    clipped_mass: float


@dataclass(frozen=True, eq=False)
class MitigationCalibration:
    """Survival probabilities G_j from one randomized-measurement calibration.

    ``survival`` is normalized by ``ideal`` (the same estimator evaluated on
    exact probabilities) so a perfect device gives 1; ``raw`` keeps the
    unnormalized estimator.
    """
    survival: np.ndarray
    n_unitaries: int
    n_shots: int
    seed: int
    raw: Optional[np.ndarray] = None
    ideal: Optional[np.ndarray] = None
    mode: RescaleMode = "inverse-scale"

    def __post_init__(self):
        survival = np.atleast_1d(np.asarray(self.survival, dtype=np.float64))
        if not np.all(np.isfinite(survival)):
            raise InvalidConfigError("survival probabilities must be finite")
        object.__setattr__(self, "survival", survival)

    @property
    def n_sites(self) -> int:
        return self.survival.size

    def with_mode(self, mode: RescaleMode) -> "MitigationCalibration":
        return MitigationCalibration(
            self.survival, self.n_unitaries, self.n_shots, self.seed, self.raw, self.ideal, mode
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "survival": self.survival.tolist(),
            "raw": None if self.raw is None else np.asarray(self.raw).tolist(),
            "ideal": None if self.ideal is None else np.asarray(self.ideal).tolist(),
            "n_unitaries": self.n_unitaries,
            "n_shots": self.n_shots,
            "seed": self.seed,
            "mode": self.mode,
        }
