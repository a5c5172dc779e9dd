"""
Measurement records of a batch of noisy trajectories.
"""
from dataclasses import dataclass
from typing import Any, Dict, Iterator, Tuple

import numpy as np

from app.core.exceptions import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """bitstrings[s, c, i] is the bit read on site i at checkpoint c in trajectory s."""
    bitstrings: np.ndarray
    checkpoints: Tuple[float, ...]
    seed: int

    def __post_init__(self):
        bits = np.asarray(self.bitstrings, dtype=np.int8)
        if bits.ndim != 3 or bits.shape[1] != len(self.checkpoints):
            raise InvalidArgumentError("bitstrings must have shape (samples, checkpoints, sites)")
        bits.setflags(write=False)
        object.__setattr__(self, "bitstrings", bits)

    @property
    def samples(self) -> int:
        return self.bitstrings.shape[0]

    @property
    def n_sites(self) -> int:
        return self.bitstrings.shape[2]

    def z_values(self) -> np.ndarray:
        """Per-shot Z eigenvalues, +1 for ground and -1 for Rydberg."""
        return 1.0 - 2.0 * self.bitstrings

    def z_mean(self) -> np.ndarray:
        """(checkpoints, sites) sample means."""
        return np.mean(self.z_values(), axis=0)

    def z_sigma(self) -> np.ndarray:
        """Standard error of the mean; NaN with a single sample."""
        if self.samples < 2:
            return np.full(self.bitstrings.shape[1:], np.nan)
        return np.std(self.z_values(), axis=0, ddof=1) / np.sqrt(self.samples)

    def rows(self) -> Iterator[Tuple[int, int, str, int]]:
        """(trajectory, checkpoint, bitstring, seed) per shot."""
        for s in range(self.samples):
            for c in range(len(self.checkpoints)):
                yield s, c, "".join(map(str, self.bitstrings[s, c])), self.seed

    def to_dict(self) -> Dict[str, Any]:
        return {"samples": self.samples, "checkpoints": list(self.checkpoints), "seed": self.seed}
