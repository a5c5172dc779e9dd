"""
Atom registers, the Rydberg and transverse-field Ising Hamiltonians, and the
parameter mapping between them.

Rydberg Hamiltonian in the computational basis (n_i = |1><1|_i):

    H(t) = sum_i (Omega a_i / 2)(cos(phi) X_i - sin(phi) Y_i)
           - sum_i Delta_i n_i + sum_{i<j} C6 V(i, j) n_i n_j

with V(i, j) = r_ij^-6. Using n = (1 - Z)/2, the nearest-neighbour part of the
interaction carries a single-site Z field that the detuning pattern of
``map_tfi_to_pulses`` cancels exactly.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from app.core.config import get_numerics_config
from app.core.exceptions import CapacityError, InvalidArgumentError
from app.models.hamiltonian import PauliHamiltonian
from app.models.lattice import AtomRegister, LatticeSpec, MappedPulse, TFIParams
from app.models.pulse import PulseProgram, RydbergParams
from app.models.state import basis_bits, z_signs

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ZDecomposition:
    """Diagonal operator written as offset + sum h_i Z_i + sum_{i<j} K_ij Z_i Z_j + higher order."""
    offset: float
    fields: np.ndarray
    couplings: np.ndarray
    residual: float


def check_dense_capacity(n_sites: int) -> None:
    cap = get_numerics_config().dense_cap
    if n_sites > cap:
        raise CapacityError(n_sites, cap)


def build_chain_register(n_sites: int, spacing: float) -> AtomRegister:
    """Collinear chain with site i at (i * spacing, 0)."""
    if n_sites < 2:
        raise InvalidArgumentError(f"a chain needs at least two atoms, got L={n_sites}")
    if not spacing > 0:
        raise InvalidArgumentError(f"lattice spacing must be positive, got a={spacing}")
    positions = np.column_stack([np.arange(n_sites) * spacing, np.zeros(n_sites)])
    return AtomRegister(positions=positions, spacing=spacing)


def vdw_strength(register: AtomRegister, i: int, j: int) -> float:
    """V(i, j) = r_ij^-6 in um^-6."""
    n_sites = register.n_sites
    if not (0 <= i < n_sites and 0 <= j < n_sites):
        raise InvalidArgumentError(f"site indices ({i}, {j}) out of range for L={n_sites}")
    if i == j:
        raise InvalidArgumentError("self-interaction is undefined")
    return register.distance(i, j) ** -6


def interaction_matrix(register: AtomRegister, c6: float, cutoff: Optional[float] = None) -> np.ndarray:
    """Upper-triangular C6 V(i, j), zero for pairs beyond ``cutoff`` um."""
    distance = squareform(pdist(register.positions))
    couplings = np.where(distance > 0, c6 / np.where(distance > 0, distance, 1.0) ** 6, 0.0)
    couplings = np.triu(couplings, k=1)
    if cutoff is not None:
        couplings[distance > cutoff * (1 + 1e-12)] = 0.0
    return couplings


def interaction_diagonal(couplings: np.ndarray) -> np.ndarray:
    """sum_{i<j} U_ij n_i n_j on every basis state."""
    n_sites = couplings.shape[0]
    bits = basis_bits(n_sites)
    diagonal = np.zeros(1 << n_sites)
    for i, j in zip(*np.nonzero(couplings)):
        diagonal += couplings[i, j] * (bits[:, i] & bits[:, j])
    return diagonal


def map_tfi_to_pulses(
    n_sites: int, spacing: float, g: float, c6: float
) -> MappedPulse:
    """Drive and detuning realizing J(sum ZZ + g sum X) on a uniform chain.

    Interior sites need Delta = C6 V(a) to cancel the field from two
    neighbours; endpoints have one neighbour and need half of it.
    """
    if n_sites < 2 or not spacing > 0 or not c6 > 0 or g < 0:
        raise InvalidArgumentError("mapping needs L >= 2, a > 0, C6 > 0 and g >= 0")
    nearest = c6 / spacing ** 6
    coupling = nearest / 4.0
    return MappedPulse(
        omega=g * coupling,
        detuning_interior=nearest,
        detuning_endpoint=nearest / 2.0,
        J=coupling,
        g=g,
    )


def mapped_detuning_pattern(n_sites: int, endpoint_compensation: bool = True) -> np.ndarray:
    """Local pattern s_i such that Delta_i = Delta (1 + s_i) matches the mapping."""
    pattern = np.zeros(n_sites)
    if endpoint_compensation:
        pattern[[0, -1]] = -0.5
    return pattern


class RydbergSource:
    """Matrix-free Rydberg Hamiltonian of a register driven by a pulse program.

    The interaction diagonal is built once; every ``at(t)`` call only adds the
    single-site terms. Batched perturbations in ``params`` give a batched
    Hamiltonian with one row per trajectory.
    """

    def __init__(self, register: AtomRegister, params: RydbergParams, cutoff: Optional[float] = None):
        if params.program.n_sites != register.n_sites:
            raise InvalidArgumentError("pulse program and register disagree on the number of sites")
        self.register = register
        self.params = params
        self.n_sites = register.n_sites
        self.couplings = interaction_matrix(register, params.c6, cutoff)
        self._interactions = interaction_diagonal(self.couplings)
        # -Delta n_i = Delta_i (Z_i - 1) / 2
        self._z = z_signs(self.n_sites)

    def at(self, t: float) -> PauliHamiltonian:
        params = self.params
        amplitude, phase, _, _ = params.program.sample(t)
        detunings = params.program.site_detunings(t)
        if params.detuning_offsets is not None:
            detunings = detunings + params.detuning_offsets
        factors = np.ones(self.n_sites) if params.amplitude_factors is None else params.amplitude_factors
        diagonal = self._interactions + 0.5 * (detunings @ self._z.T) - 0.5 * detunings.sum(axis=-1)[..., None]
        if diagonal.ndim == 2 and diagonal.shape[0] == 1:
            diagonal = diagonal[0]
        half = 0.5 * amplitude * factors
        x_coeffs = half * np.cos(phase)
        y_coeffs = -half * np.sin(phase)
        if diagonal.ndim > 1 and x_coeffs.ndim == 1:
            x_coeffs = np.broadcast_to(x_coeffs, diagonal.shape[:-1] + (self.n_sites,))
            y_coeffs = np.broadcast_to(y_coeffs, x_coeffs.shape)
        return PauliHamiltonian(self.n_sites, diagonal, x_coeffs, y_coeffs)


def rydberg_hamiltonian_at(
    register: AtomRegister, params: RydbergParams, t: float, cutoff: Optional[float] = None
) -> np.ndarray:
    """Dense Hermitian matrix of the atom Hamiltonian at time t."""
    check_dense_capacity(register.n_sites)
    if not 0 <= t <= params.program.duration:
        raise InvalidArgumentError(f"t={t:g} lies outside the program duration {params.program.duration:g}")
    if params.batch_size is not None:
        raise InvalidArgumentError("dense form needs a single set of perturbations")
    return RydbergSource(register, params, cutoff).at(t).to_dense()


def tfi_operator(params: TFIParams) -> PauliHamiltonian:
    """Matrix-free J(sum Z_i Z_{i+1} + g sum X_i) with open ends."""
    z = z_signs(params.n_sites)
    diagonal = params.J * np.sum(z[:, :-1] * z[:, 1:], axis=1)
    x_coeffs = np.full(params.n_sites, params.J * params.g)
    return PauliHamiltonian(params.n_sites, diagonal, x_coeffs, np.zeros(params.n_sites))


def tfi_hamiltonian(params: TFIParams) -> np.ndarray:
    check_dense_capacity(params.n_sites)
    return tfi_operator(params).to_dense()


def mapped_rydberg_source(
    lattice: LatticeSpec, g: float = 1.0, duration: float = 1.0
) -> RydbergSource:
    """Static atom Hamiltonian with the mapped drive and detuning of ``lattice``."""
    register = build_chain_register(lattice.n_sites, lattice.spacing)
    mapped = map_tfi_to_pulses(lattice.n_sites, lattice.spacing, g, lattice.c6)
    program = PulseProgram.constant(
        duration,
        lattice.n_sites,
        amplitude=mapped.rabi_amplitude,
        detuning=mapped.detuning_interior,
        local_pattern=mapped_detuning_pattern(lattice.n_sites, lattice.endpoint_compensation),
        local_detuning=mapped.detuning_interior,
    )
    return RydbergSource(register, RydbergParams(lattice.c6, program), lattice.interaction_cutoff)


def pauli_z_decomposition(diagonal: np.ndarray, n_sites: int) -> ZDecomposition:
    """Walsh coefficients of a diagonal operator up to second order."""
    diagonal = np.asarray(diagonal, dtype=np.float64)
    z = z_signs(n_sites)
    dim = diagonal.size
    offset = float(diagonal.mean())
    fields = z.T @ diagonal / dim
    couplings = np.einsum("ni,nj,n->ij", z, z, diagonal) / dim
    couplings = np.triu(couplings, k=1)
    rebuilt = offset + z @ fields + np.einsum("ni,ij,nj->n", z, couplings, z)
    return ZDecomposition(
        offset=offset,
        fields=fields,
        couplings=couplings,
        residual=float(np.max(np.abs(diagonal - rebuilt))),
    )


def coupling_ratios(couplings: np.ndarray) -> Dict[int, float]:
    """Mean coupling at each neighbour distance relative to nearest neighbours."""
    n_sites = couplings.shape[0]
    nearest = np.mean([couplings[i, i + 1] for i in range(n_sites - 1)])
    ratios = {}
    for distance in range(1, n_sites):
        values = [couplings[i, i + distance] for i in range(n_sites - distance)]
        ratios[distance] = float(np.mean(values) / nearest) if nearest else 0.0
    return ratios
