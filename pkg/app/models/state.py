"""
State-vector representation.

Site i of an L-site register is the i-th most significant bit of the basis
index, so the amplitude vector reshaped to (2,)*L has site i on axis i.
|0> is the atomic ground state (Z = +1), |1> the Rydberg state (Z = -1).
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Sequence

import numpy as np

from app.core.exceptions import InvalidArgumentError


@lru_cache(maxsize=32)
def basis_bits(n_sites: int) -> np.ndarray:
    """(2^L, L) table of occupation bits."""
    index = np.arange(1 << n_sites)
    shifts = n_sites - 1 - np.arange(n_sites)
    bits = ((index[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    bits.setflags(write=False)
    return bits


@lru_cache(maxsize=32)
def z_signs(n_sites: int) -> np.ndarray:
    """(2^L, L) table of Z eigenvalues, +1 for |0> and -1 for |1>."""
    signs = 1.0 - 2.0 * basis_bits(n_sites)
    signs.setflags(write=False)
    return signs


def site_view(psi: np.ndarray, n_sites: int, site: int) -> np.ndarray:
    """Reshape (..., 2^L) so that axis -2 is the given site."""
    lead = psi.shape[:-1]
    return psi.reshape(lead + (1 << site, 2, 1 << (n_sites - site - 1)))


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Dense amplitude vector over the 2^L computational basis states."""
    amplitudes: np.ndarray
    n_sites: int

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128, copy=True).reshape(-1)
        if self.n_sites < 1 or amplitudes.size != 1 << self.n_sites:
            raise InvalidArgumentError(
                f"amplitude vector of length {amplitudes.size} does not describe {self.n_sites} qubits"
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def basis(cls, n_sites: int, bits: Sequence[int]) -> "QuantumState":
        if len(bits) != n_sites:
            raise InvalidArgumentError("bitstring length must equal the number of sites")
        index = 0
        for bit in bits:
            index = (index << 1) | int(bit)
        amplitudes = np.zeros(1 << n_sites, dtype=np.complex128)
        amplitudes[index] = 1.0
        return cls(amplitudes, n_sites)

    @classmethod
    def all_ground(cls, n_sites: int) -> "QuantumState":
        return cls.basis(n_sites, [0] * n_sites)

    @classmethod
    def plus(cls, n_sites: int) -> "QuantumState":
        dim = 1 << n_sites
        return cls(np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128), n_sites)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def normalized(self) -> "QuantumState":
        return QuantumState(self.amplitudes / self.norm, self.n_sites)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_sites": self.n_sites,
            "real": self.amplitudes.real.tolist(),
            "imag": self.amplitudes.imag.tolist(),
        }
