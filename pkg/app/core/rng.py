"""
Counter-based random streams.

A stream is identified by (master seed, stream index); the same pair always
yields the same draws, independent of how many other streams exist or which
worker consumes them.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.core.exceptions import InvalidArgumentError

# spawn-key namespaces so unrelated consumers never share a stream
TRAJECTORY_STREAM = 0
CALIBRATION_STREAM = 1
OPTIMIZER_STREAM = 2
SCHEDULE_STREAM = 3


@dataclass(frozen=True)
class TrajectorySeed:
    master: int
    index: int
    namespace: int = TRAJECTORY_STREAM

    def __post_init__(self):
        if self.master < 0 or self.index < 0:
            raise InvalidArgumentError("seed and stream index must be non-negative")

    @property
    def spawn_key(self) -> Tuple[int, int]:
        return (self.namespace, self.index)

    def generator(self) -> np.random.Generator:
        """Philox generator for this stream."""
        sequence = np.random.SeedSequence(entropy=self.master, spawn_key=self.spawn_key)
        return np.random.Generator(np.random.Philox(sequence))


def stream(master: int, index: int, namespace: int = TRAJECTORY_STREAM) -> np.random.Generator:
    return TrajectorySeed(master, index, namespace).generator()

