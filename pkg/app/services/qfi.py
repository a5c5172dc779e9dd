"""
Quantum Fisher information from the dynamic structure factor.

At temperature T the QFI density at momentum k is

    f_Q = (4 / pi) * int_0^w_max tanh^2(w / 2T) S~(k, w) dw,

with S~(k, w) = S(k, w) + S(k, -w) and tanh^2 = 1 at T = 0. The normalized
density f_Q / 4 certifies entanglement depth k + 1 once it exceeds
(floor(N/k) k^2 + (N - floor(N/k) k)^2) / N.
"""
import logging
from typing import Dict, List, Optional

import numpy as np
from scipy import integrate
from scipy.special import comb

from app.core.exceptions import InvalidArgumentError, UndefinedNormalizationError
from app.core.service_logging import StageLogger
from app.models.qfi import GeneratorSpec, QfiResult
from app.models.spectral import SpectralGrid
from app.models.state import QuantumState
from app.services.lattice_hamiltonian import check_dense_capacity

logger = logging.getLogger(__name__)
qfi_logger = StageLogger("qfi")

DEFAULT_OMEGA_MAX = 25.0
SUM_RULE_TOTAL = 3.0


def _window(omega: np.ndarray, omega_max: float) -> np.ndarray:
    return (omega >= 0.0) & (omega <= omega_max + 1e-12)


def symmetrize_dsf(spectrum: SpectralGrid) -> SpectralGrid:
    """S(k, w) + S(k, -w) on the non-negative part of the frequency grid.

    A grid without negative frequencies carries no weight there, so the
    spectrum is returned unchanged.
    """
    omega = spectrum.omega
    if omega.min() >= 0.0:
        return spectrum
    keep = omega >= 0.0
    order = np.argsort(omega)
    mirrored = np.stack([
        np.interp(-omega[keep], omega[order], row[order], left=0.0, right=0.0) for row in spectrum.values
    ])
    sigma = None
    if spectrum.sigma is not None:
        mirrored_sigma = np.stack([
            np.interp(-omega[keep], omega[order], row[order], left=0.0, right=0.0) for row in spectrum.sigma
        ])
        sigma = np.hypot(spectrum.sigma[:, keep], mirrored_sigma)
    return SpectralGrid(
        k=spectrum.k,
        omega=omega[keep],
        values=spectrum.values[:, keep] + mirrored,
        eta=spectrum.eta,
        sigma=sigma,
        normalization=spectrum.normalization,
        normalized=spectrum.normalized,
    )


def thermal_weight(omega: np.ndarray, temperature: float) -> np.ndarray:
    if temperature < 0:
        raise InvalidArgumentError("temperature must be non-negative")
    if temperature == 0:
        return np.ones_like(omega)
    return np.tanh(omega / (2.0 * temperature)) ** 2


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    weights = np.zeros_like(x)
    if x.size < 2:
        return weights
    gaps = np.diff(x)
    weights[:-1] += gaps / 2.0
    weights[1:] += gaps / 2.0
    return weights


def qfi_integral(spectrum: SpectralGrid, k: float, temperature: float = 0.0,
                 omega_max: float = DEFAULT_OMEGA_MAX):
    """(f_Q, sigma) at momentum ``k``; sigma is None without shot noise."""
    if omega_max > spectrum.omega.max() + 1e-12:
        raise InvalidArgumentError(
            f"omega_max={omega_max:g} lies beyond the frequency grid (max {spectrum.omega.max():g})"
        )
    if not spectrum.normalized:
        qfi_logger.log_warning("qfi_density", "spectrum has not been sum-rule normalized")
    symmetric = symmetrize_dsf(spectrum)
    window = _window(symmetric.omega, omega_max)
    omega = symmetric.omega[window]
    index = symmetric.momentum_index(k)
    weight = thermal_weight(omega, temperature)
    f_q = 4.0 / np.pi * float(integrate.trapezoid(weight * symmetric.values[index, window], omega))
    sigma = None
    if symmetric.sigma is not None:
        quad = _trapezoid_weights(omega) * weight
        sigma = 4.0 / np.pi * float(np.sqrt(np.sum((quad * symmetric.sigma[index, window]) ** 2)))
    return f_q, sigma


def qfi_density(spectrum: SpectralGrid, k: float, temperature: float = 0.0,
                omega_max: float = DEFAULT_OMEGA_MAX) -> float:
    return qfi_integral(spectrum, k, temperature, omega_max)[0]


def spectral_weight(spectrum: SpectralGrid, omega_max: float = DEFAULT_OMEGA_MAX) -> float:
    """Brillouin-zone average of int_0^w_max S(k, w) dw."""
    window = _window(spectrum.omega, omega_max)
    per_k = integrate.trapezoid(spectrum.values[:, window], spectrum.omega[window], axis=1)
    return float(np.mean(per_k))


def sum_rule_normalize(components: Dict[str, SpectralGrid], omega_max: float = DEFAULT_OMEGA_MAX) -> float:
    """Constant c with c * sum over components of the integrated weight equal to 3."""
    if not components:
        raise UndefinedNormalizationError("no spectral components supplied")
    total = sum(spectral_weight(component, omega_max) for component in components.values())
    if total == 0.0 or not np.isfinite(total):
        raise UndefinedNormalizationError(f"total spectral weight is {total!r}; the sum rule fixes no scale")
    constant = SUM_RULE_TOTAL / total
    qfi_logger.log_operation("sum_rule", {"weight": round(total, 8), "constant": round(constant, 8)})
    return constant


def depth_threshold(n_sites: int, k: int) -> float:
    if not 1 <= k <= n_sites:
        raise InvalidArgumentError(f"depth parameter k={k} must satisfy 1 <= k <= N={n_sites}")
    blocks = n_sites // k
    return (blocks * k ** 2 + (n_sites - blocks * k) ** 2) / n_sites


def thresholds_crossed(f_normalized: float, n_sites: int) -> List[int]:
    return [k for k in range(1, n_sites + 1) if f_normalized > depth_threshold(n_sites, k)]


def classify_depth(f_normalized: float, n_sites: int) -> int:
    """Certified entanglement depth; 1 when no threshold is strictly exceeded."""
    crossed = thresholds_crossed(f_normalized, n_sites)
    return min(max(crossed) + 1, n_sites) if crossed else 1


def density_matrix(state: QuantumState) -> np.ndarray:
    psi = state.amplitudes
    return np.outer(psi, np.conj(psi))


def _validate_density(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidArgumentError("density matrix must be square")
    check_dense_capacity(int(np.log2(rho.shape[0])))
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise InvalidArgumentError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise InvalidArgumentError(f"density matrix trace is {np.trace(rho).real:.6g}, expected 1")
    return rho


def _c_coefficient(q: int, m: int) -> float:
    return float(comb(q, m) - 2 * comb(q, m - 1) + comb(q, m - 2))


def qfi_bound_fn(rho: np.ndarray, generator: GeneratorSpec, order: int) -> float:
    """Lower bound F_n on the QFI of ``rho`` for the generator, in rho's eigenbasis."""
    if order < 0:
        raise InvalidArgumentError("bound order must be non-negative")
    rho = _validate_density(rho)
    if rho.shape[0] != 1 << generator.n_sites:
        raise InvalidArgumentError("generator and density matrix disagree on the number of sites")
    eigenvalues, vectors = np.linalg.eigh(rho)
    if eigenvalues.min() < -1e-10:
        raise InvalidArgumentError(f"density matrix has a negative eigenvalue {eigenvalues.min():.3g}")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    a_eig = vectors.conj().T @ (generator.diagonal()[:, None] * vectors)
    weights = np.abs(a_eig) ** 2

    def trace(p: int, m: int) -> float:
        # Tr(rho^p A rho^m A) = sum_ab lambda_a^p lambda_b^m |A_ab|^2
        return float(np.einsum("a,ab,b->", eigenvalues ** p, weights, eigenvalues ** m))

    total = 0.0
    for q in range(order + 1):
        inner = sum(_c_coefficient(q, m) * trace(q + 2 - m, m) for m in range(q + 3))
        total += comb(order + 1, q + 1) * (-1) ** q * inner
    return 2.0 * total


def generator_variance(state: QuantumState, generator: GeneratorSpec) -> float:
    diagonal = generator.diagonal()
    probabilities = state.probabilities
    mean = float(probabilities @ diagonal)
    return float(probabilities @ diagonal ** 2) - mean ** 2


def variance_density(state: QuantumState, generator: GeneratorSpec) -> float:
    """(4 / L) Var(A), the pure-state QFI density."""
    return 4.0 * generator_variance(state, generator) / generator.n_sites


def qfi_result(
    spectrum: SpectralGrid,
    k: float,
    temperature: float = 0.0,
    omega_max: float = DEFAULT_OMEGA_MAX,
    normalization_source: str = "none",
    rho: Optional[np.ndarray] = None,
    generator: Optional[GeneratorSpec] = None,
    bound_order: int = 1,
) -> QfiResult:
    """Spectral QFI with its depth classification, plus F_n when ``rho`` is given."""
    n_sites = spectrum.k.size
    f_q, sigma = qfi_integral(spectrum, k, temperature, omega_max)
    normalized = f_q / 4.0
    bound = None
    if rho is not None:
        generator = generator or GeneratorSpec(n_sites)
        bound = qfi_bound_fn(rho, generator, bound_order)
    result = QfiResult(
        f_q=f_q,
        k=float(k),
        temperature=temperature,
        omega_max=omega_max,
        normalization=spectrum.normalization,
        normalization_source=normalization_source,
        n_sites=n_sites,
        depth=classify_depth(max(normalized, 0.0), n_sites),
        sigma=sigma,
        thresholds_crossed=thresholds_crossed(normalized, n_sites),
        bound=bound,
        bound_order=bound_order if rho is not None else None,
    )
    qfi_logger.log_operation("result", {"f_q_normalized": round(normalized, 6), "depth": result.depth})
    return result
