"""
Retarded Green's function measurement and the dynamic structure factor.

Protocol: rotate the centre site with U_j = exp(-i pi/4 Z_j), evolve, read
<Z_i>. For a Z-parity symmetric ground state this equals
G(i, j, t) = -(i/2) <[Z_i(t), Z_j(0)]>, which is real. The spectrum follows
from the centre-site Fourier estimator

    G(k, w) ~ (2 pi delta / (L T)) sum_j exp(-i k (j - j_c))
              sum_{n=1..N} exp(i (w + i eta) t_n) G(j, t_n)

and S(k, w) = -Im G(k, w) / pi for w >= 0.
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from app.core.config import get_numerics_config
from app.core.exceptions import InvalidArgumentError
from app.core.service_logging import StageLogger
from app.models.lattice import LatticeSpec, TFIParams
from app.models.pulse import EvolutionSchedule, HamiltonianSource, StaticSource
from app.models.spectral import GreensTable, SpectralGrid, TimeGrid, center_site
from app.models.state import QuantumState, z_signs
from app.services.dynamics_engine import (
    SpectralPropagator,
    apply_single_qubit,
    evolve_checkpoints,
    expectation_z_all,
    unitarity_drift,
)
from app.services.lattice_hamiltonian import mapped_rydberg_source, tfi_operator

logger = logging.getLogger(__name__)
dsf_logger = StageLogger("greens_dsf")

DEFAULT_ETA = 0.2
DEFAULT_OMEGA_MAX = 25.0
DEFAULT_OMEGA_POINTS = 512
NEGATIVITY_WARNING = 0.05

# experiment-mode and numerics-mode time grids, model units
EXPERIMENT_GRID = TimeGrid(delta=0.25, n_steps=15)
NUMERICS_GRID = TimeGrid(delta=0.005, n_steps=4000)

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def omega_grid(omega_max: float = DEFAULT_OMEGA_MAX, n_points: int = DEFAULT_OMEGA_POINTS) -> np.ndarray:
    return np.linspace(0.0, omega_max, n_points)


def momentum_grid(n_sites: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_sites) / n_sites


def uj_phases(n_sites: int, site: int) -> np.ndarray:
    return np.exp(-0.25j * np.pi * z_signs(n_sites)[:, site])


def apply_uj(state: QuantumState, site: int) -> QuantumState:
    """U_j = (1 - i Z_j)/sqrt(2) = exp(-i pi/4 Z_j)."""
    if not 0 <= site < state.n_sites:
        raise InvalidArgumentError(f"site {site} out of range for L={state.n_sites}")
    return QuantumState(state.amplitudes * uj_phases(state.n_sites, site), state.n_sites)


def tfi_source(lattice: LatticeSpec, g: float = 1.0) -> StaticSource:
    """Ideal chain J(sum ZZ + g sum X) in the lattice's units."""
    return StaticSource(tfi_operator(TFIParams(J=lattice.coupling, g=g, n_sites=lattice.n_sites)))


def protocol_schedule(
    source: HamiltonianSource, grid: TimeGrid, dt: float, exact: bool = False
) -> EvolutionSchedule:
    """Schedule covering the grid with a step that divides delta."""
    return EvolutionSchedule.subdivided(source, grid.total_time, dt, grid.delta, exact=exact)


def greens_protocol(
    ground: QuantumState,
    evolution: EvolutionSchedule,
    j_c: int,
    grid: TimeGrid,
    with_oracle: bool = False,
) -> GreensTable:
    """<Z_i> after U(t_n) U_{j_c} for every site and grid time.

    With an exact schedule and ``with_oracle`` the commutator reference is
    stored alongside for validation.
    """
    rotated = apply_uj(ground, j_c)
    states = evolve_checkpoints(rotated, evolution, grid.times)
    values = np.stack([expectation_z_all(psi, ground.n_sites) for psi in states], axis=1)
    oracle = None
    if with_oracle:
        if not evolution.exact:
            raise InvalidArgumentError("the commutator reference needs an exact schedule")
        oracle = greens_exact_table(ground, evolution.source.at(0.0).to_dense(), j_c, grid)
    table = GreensTable(values=values, center=j_c, grid=grid, oracle=oracle)
    drift = unitarity_drift(states)
    if drift > get_numerics_config().unitarity_tolerance:
        dsf_logger.log_warning("protocol", f"unitarity drift {drift:.2e} over the evolution")
    dsf_logger.log_operation("protocol", {"L": ground.n_sites, "N": grid.n_steps, "max_abs": round(table.max_abs, 6)})
    return table


def _pauli_on(psi: np.ndarray, n_sites: int, site: int, pauli: str) -> np.ndarray:
    if pauli == "z":
        return psi * z_signs(n_sites)[:, site]
    return apply_single_qubit(psi, n_sites, site, PAULI[pauli])


def greens_exact_table(
    ground: QuantumState, hamiltonian: np.ndarray, j: int, grid: TimeGrid, pauli: str = "z"
) -> np.ndarray:
    """-(i/2) <[A_i(t), A_j]> for all sites i and grid times, A in {X, Y, Z}.

    With phi = U psi0 and chi = U A_j psi0, <A_i(t) A_j> = <phi|A_i|chi> and the
    commutator reduces to twice its imaginary part.
    """
    n_sites = ground.n_sites
    propagator = SpectralPropagator(hamiltonian)
    kicked = _pauli_on(ground.amplitudes, n_sites, j, pauli)
    table = np.zeros((n_sites, grid.n_steps + 1))
    for n, t in enumerate(grid.times):
        phi = propagator.evolve(ground.amplitudes, t)
        chi = propagator.evolve(kicked, t)
        for i in range(n_sites):
            correlator = np.vdot(_pauli_on(phi, n_sites, i, pauli), chi)
            table[i, n] = np.real(-0.5j * (correlator - np.conj(correlator)))
    return table


def greens_exact(ground: QuantumState, hamiltonian: np.ndarray, i: int, j: int, t: float) -> complex:
    n_sites = ground.n_sites
    if not (0 <= i < n_sites and 0 <= j < n_sites):
        raise InvalidArgumentError("site index out of range")
    propagator = SpectralPropagator(hamiltonian)
    phi = propagator.evolve(ground.amplitudes, t)
    chi = propagator.evolve(_pauli_on(ground.amplitudes, n_sites, j, "z"), t)
    correlator = np.vdot(_pauli_on(phi, n_sites, i, "z"), chi)
    return complex(-0.5j * (correlator - np.conj(correlator)))


def symmetry_residual(ground: QuantumState, evolution: EvolutionSchedule, grid: TimeGrid) -> float:
    """max_{i, n} |<psi0| Z_i(t_n) |psi0>|, without the rotation."""
    states = evolve_checkpoints(ground, evolution, grid.times)
    return float(max(np.max(np.abs(expectation_z_all(psi, ground.n_sites))) for psi in states))


def _estimator_parts(table_shape: tuple, center: int, grid: TimeGrid, eta: float,
                     omega: np.ndarray, momenta: np.ndarray):
    n_sites = table_shape[0]
    positions = np.arange(n_sites) - center
    phase = np.exp(-1j * np.outer(momenta, positions))
    t = grid.times[1:]
    kernel = np.exp(1j * np.outer(omega, t)) * np.exp(-eta * t)[None, :]
    prefactor = 2.0 * np.pi * grid.delta / (n_sites * grid.total_time)
    return phase, kernel, prefactor


def fourier_dsf(
    table: GreensTable,
    eta: float = DEFAULT_ETA,
    omega: Optional[np.ndarray] = None,
    momenta: Optional[np.ndarray] = None,
) -> SpectralGrid:
    """Centre-site Fourier estimator, S = -Im G(k, w) / pi.

    Shot-noise ``sigma`` on the table propagates into the spectrum.
    """
    if not eta > 0:
        raise InvalidArgumentError(f"damping eta must be positive, got {eta}")
    omega = omega_grid() if omega is None else np.asarray(omega, dtype=np.float64)
    momenta = momentum_grid(table.n_sites) if momenta is None else np.asarray(momenta, dtype=np.float64)
    data = table.values
    phase, kernel, prefactor = _estimator_parts(data.shape, table.center, table.grid, eta, omega, momenta)

    in_momentum = phase @ data[:, 1:]
    spectrum = -(prefactor / np.pi) * np.imag(in_momentum @ kernel.T)

    sigma = None
    if table.sigma is not None:
        variance = table.sigma[:, 1:] ** 2
        pr, pi = phase.real, phase.imag
        kr, ki = kernel.real, kernel.imag
        total = (pr ** 2) @ variance @ (ki ** 2).T
        total += 2.0 * (pr * pi) @ variance @ (ki * kr).T
        total += (pi ** 2) @ variance @ (kr ** 2).T
        sigma = (prefactor / np.pi) * np.sqrt(np.clip(total, 0.0, None))

    grid = SpectralGrid(k=momenta, omega=omega, values=spectrum, eta=eta, sigma=sigma)
    ratio = grid.negativity_ratio
    if ratio > NEGATIVITY_WARNING:
        dsf_logger.log_warning("fourier", f"negative spectral weight ratio {ratio:.3f}", {"eta": eta})
    return grid


def reference_components(
    ground: QuantumState,
    hamiltonian: np.ndarray,
    grid: TimeGrid,
    eta: float = DEFAULT_ETA,
    omega: Optional[np.ndarray] = None,
    momenta: Optional[np.ndarray] = None,
) -> Dict[str, SpectralGrid]:
    """S^xx, S^yy and S^zz from exact dynamics through the same estimator."""
    j_c = center_site(ground.n_sites)
    components = {}
    for pauli in ("x", "y", "z"):
        values = greens_exact_table(ground, hamiltonian, j_c, grid, pauli)
        table = GreensTable(values=values, center=j_c, grid=grid)
        components[pauli * 2] = fourier_dsf(table, eta, omega, momenta)
    return components


def peak_frequency(spectrum: SpectralGrid, k: float) -> float:
    row = spectrum.at_momentum(k)
    return float(spectrum.omega[int(np.argmax(row))])


def peak_bin_gap(a: SpectralGrid, b: SpectralGrid, k: float) -> int:
    """Distance in omega bins between the main peaks of two spectra."""
    return abs(int(np.argmax(a.at_momentum(k))) - int(np.argmax(b.at_momentum(k))))


def secondary_features(spectrum: SpectralGrid, k: float, min_relative: float = 0.05) -> List[float]:
    """Local maxima above the main peak frequency with height >= min_relative * main peak."""
    row = spectrum.at_momentum(k)
    main = int(np.argmax(row))
    peaks, _ = find_peaks(row, height=min_relative * row[main])
    return [float(spectrum.omega[p]) for p in peaks if p > main]


def cumulative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Err = sum over sites and times of |G_a - G_b|."""
    return float(np.sum(np.abs(np.asarray(a) - np.asarray(b))))


def evolution_sources(lattice: LatticeSpec, modes: Sequence[str] = ("exact", "approx")) -> Dict[str, HamiltonianSource]:
    """Ideal chain ("exact") and mapped atom Hamiltonian ("approx") sources."""
    sources: Dict[str, HamiltonianSource] = {}
    for mode in modes:
        if mode == "exact":
            sources[mode] = tfi_source(lattice)
        elif mode == "approx":
            sources[mode] = StaticSource(mapped_rydberg_source(lattice).at(0.0))
        else:
            raise InvalidArgumentError(f"unknown evolution mode {mode!r}")
    return sources
