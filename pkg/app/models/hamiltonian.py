"""
Matrix-free spin Hamiltonians.

H = diag(d) + sum_i (cx_i X_i + cy_i Y_i), where d collects every Z-type term
(single-site detunings, interactions, constants). Coefficient arrays may carry
leading batch dimensions so a batch of trajectories with different
per-atom perturbations is applied in one call.
"""
from dataclasses import dataclass

import numpy as np

from app.core.exceptions import InvalidArgumentError
from app.models.state import basis_bits, site_view


@dataclass(frozen=True, eq=False)
class PauliHamiltonian:
    n_sites: int
    diagonal: np.ndarray
    x_coeffs: np.ndarray
    y_coeffs: np.ndarray

    def __post_init__(self):
        diagonal = np.asarray(self.diagonal, dtype=np.float64)
        x_coeffs = np.asarray(self.x_coeffs, dtype=np.float64)
        y_coeffs = np.asarray(self.y_coeffs, dtype=np.float64)
        if diagonal.shape[-1] != 1 << self.n_sites:
            raise InvalidArgumentError("diagonal length must be 2^L")
        if x_coeffs.shape[-1] != self.n_sites or y_coeffs.shape[-1] != self.n_sites:
            raise InvalidArgumentError("transverse coefficient arrays must have one entry per site")
        object.__setattr__(self, "diagonal", diagonal)
        object.__setattr__(self, "x_coeffs", x_coeffs)
        object.__setattr__(self, "y_coeffs", y_coeffs)

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    @property
    def is_batched(self) -> bool:
        return self.diagonal.ndim > 1 or self.x_coeffs.ndim > 1 or self.y_coeffs.ndim > 1

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """H @ psi for psi of shape (..., 2^L)."""
        out = self.diagonal * psi
        out = np.array(out, dtype=np.complex128, copy=False)
        for site in range(self.n_sites):
            cx = self.x_coeffs[..., site]
            cy = self.y_coeffs[..., site]
            if not (np.any(cx) or np.any(cy)):
                continue
            lower = np.asarray(cx - 1j * cy)[..., None, None]
            raise_ = np.asarray(cx + 1j * cy)[..., None, None]
            src = site_view(psi, self.n_sites, site)
            dst = site_view(out, self.n_sites, site)
            dst[..., 0, :] += lower * src[..., 1, :]
            dst[..., 1, :] += raise_ * src[..., 0, :]
        return out

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm."""
        transverse = np.sum(np.hypot(self.x_coeffs, self.y_coeffs), axis=-1)
        return float(np.max(np.abs(self.diagonal)) + np.max(transverse))

    def to_dense(self) -> np.ndarray:
        if self.is_batched:
            raise InvalidArgumentError("dense form is only defined for a single Hamiltonian")
        dim = self.dim
        matrix = np.diag(self.diagonal.astype(np.complex128))
        index = np.arange(dim)
        bits = basis_bits(self.n_sites)
        for site in range(self.n_sites):
            cx, cy = self.x_coeffs[site], self.y_coeffs[site]
            if cx == 0.0 and cy == 0.0:
                continue
            flipped = index ^ (1 << (self.n_sites - 1 - site))
            values = np.where(bits[:, site] == 0, cx + 1j * cy, cx - 1j * cy)
            matrix[flipped, index] += values
        return matrix
