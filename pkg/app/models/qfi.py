"""
Quantum Fisher information results and the generators they are taken with.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional

import numpy as np

from app.core.exceptions import InvalidArgumentError
from app.models.state import z_signs

GeneratorKind = Literal["staggered", "uniform"]


@dataclass(frozen=True)
class GeneratorSpec:
    """A = sum_i c_i Z_i with c_i = (-1)^i (staggered) or 1 (uniform)."""
    n_sites: int
    kind: GeneratorKind = "staggered"
    h_max: float = 1.0
    h_min: float = -1.0

    def __post_init__(self):
        if self.kind not in ("staggered", "uniform"):
            raise InvalidArgumentError(f"unknown generator {self.kind!r}")
        if self.n_sites < 1:
            raise InvalidArgumentError("generator needs at least one site")

    @property
    def coefficients(self) -> np.ndarray:
        if self.kind == "uniform":
            return np.ones(self.n_sites)
        return (-1.0) ** np.arange(self.n_sites)

    @property
    def momentum(self) -> float:
        return np.pi if self.kind == "staggered" else 0.0

    @property
    def spread_squared(self) -> float:
        return (self.h_max - self.h_min) ** 2

    def diagonal(self) -> np.ndarray:
        """Eigenvalues of A on the computational basis."""
        return z_signs(self.n_sites) @ self.coefficients


@dataclass(frozen=True)
class QfiResult:
    """QFI density at one momentum; ``f_q_normalized`` = f_q / 4."""
    f_q: float
    k: float
    temperature: float
    omega_max: float
    normalization: float
    normalization_source: str
    n_sites: int
    depth: int
    sigma: Optional[float] = None
    thresholds_crossed: List[int] = field(default_factory=list)
    bound: Optional[float] = None
    bound_order: Optional[int] = None

    @property
    def f_q_normalized(self) -> float:
        return self.f_q / 4.0

    @property
    def sigma_normalized(self) -> Optional[float]:
        return None if self.sigma is None else self.sigma / 4.0

    @property
    def bound_normalized(self) -> Optional[float]:
        """F_n / (4 L), comparable with ``f_q_normalized``."""
        return None if self.bound is None else self.bound / (4.0 * self.n_sites)

    @property
    def route_gap(self) -> Optional[float]:
        """Relative gap between the spectral and the density-matrix routes."""
        if self.bound is None or self.bound_normalized == 0:
            return None
        return abs(self.f_q_normalized - self.bound_normalized) / abs(self.bound_normalized)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "f_q": self.f_q,
            "f_q_normalized": self.f_q_normalized,
            "sigma_normalized": self.sigma_normalized,
            "k": self.k,
            "temperature": self.temperature,
            "omega_max": self.omega_max,
            "normalization": self.normalization,
            "normalization_source": self.normalization_source,
            "n_sites": self.n_sites,
            "depth": self.depth,
            "thresholds_crossed": list(self.thresholds_crossed),
            "bound": self.bound,
            "bound_order": self.bound_order,
            "bound_normalized": self.bound_normalized,
            "route_gap": self.route_gap,
        }
