"""
State-vector propagation, exact-diagonalization oracles and observables.

The stepped integrator samples the Hamiltonian once per step at the step
midpoint and applies the fourth-order Taylor polynomial of exp(-i H dt).
Each step is taken relative to the running energy <H>; the removed phase is
restored exactly, so only the energy spread of the state enters the
truncation error.
"""
import logging
from math import factorial
from typing import Callable, Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from app.core.config import get_numerics_config
from app.core.exceptions import InvalidArgumentError, NumericalInstabilityError
from app.core.logging_config import log_performance
from app.models.hamiltonian import PauliHamiltonian
from app.models.pulse import EvolutionSchedule, HamiltonianSource, StaticSource
from app.models.state import QuantumState, site_view, z_signs
from app.services.lattice_hamiltonian import check_dense_capacity

logger = logging.getLogger(__name__)

TAYLOR_ORDER = 4
_TAYLOR_WEIGHTS = [1.0 / factorial(k) for k in range(TAYLOR_ORDER + 1)]

# (step index, time after the step, amplitudes) -> amplitudes
StepHook = Callable[[int, float, np.ndarray], np.ndarray]
Amplitudes = Union[QuantumState, np.ndarray]


class EigenPair(NamedTuple):
    energy: float
    state: QuantumState
    degeneracy: int


def taylor_step(hamiltonian: PauliHamiltonian, psi: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) psi to fourth order, for psi of shape (..., 2^L)."""
    h_psi = hamiltonian.apply(psi)
    norm_sq = np.sum(np.abs(psi) ** 2, axis=-1, keepdims=True)
    energy = np.real(np.sum(np.conj(psi) * h_psi, axis=-1, keepdims=True)) / np.where(norm_sq > 0, norm_sq, 1.0)
    term = h_psi - energy * psi
    result = psi + (-1j * dt) * term
    for k in range(2, TAYLOR_ORDER + 1):
        term = hamiltonian.apply(term) - energy * term
        result = result + ((-1j * dt) ** k * _TAYLOR_WEIGHTS[k]) * term
    return np.exp(-1j * energy * dt) * result


def _amplitudes(state: Amplitudes, n_sites: int) -> np.ndarray:
    psi = state.amplitudes if isinstance(state, QuantumState) else np.asarray(state, dtype=np.complex128)
    if psi.shape[-1] != 1 << n_sites:
        raise InvalidArgumentError(
            f"state of dimension {psi.shape[-1]} does not match a {n_sites}-site Hamiltonian"
        )
    return np.array(psi, dtype=np.complex128, copy=True)


def _check_norm(psi: np.ndarray, reference: np.ndarray, dt: float, t: float) -> None:
    drift = float(np.max(np.abs(np.linalg.norm(psi, axis=-1) - reference)))
    if not np.isfinite(drift) or drift > get_numerics_config().norm_tolerance:
        raise NumericalInstabilityError(
            f"norm drifted by {drift:.3e} at t={t:g}", suggested_dt=dt / 2.0
        )


def propagate(
    psi: np.ndarray,
    source: HamiltonianSource,
    dt: float,
    n_steps: int,
    t_start: float = 0.0,
    step_hook: Optional[StepHook] = None,
    first_step: int = 0,
) -> np.ndarray:
    """Advance amplitudes by ``n_steps`` midpoint steps starting at ``t_start``.

    A ``step_hook`` may replace the amplitudes after each step (stochastic
    channels); the norm check is then done per step against the hook output.
    """
    reference = np.linalg.norm(psi, axis=-1)
    static = source.at(t_start) if isinstance(source, StaticSource) else None
    for s in range(n_steps):
        t_mid = t_start + (s + 0.5) * dt
        hamiltonian = static if static is not None else source.at(t_mid)
        psi = taylor_step(hamiltonian, psi, dt)
        if step_hook is not None:
            _check_norm(psi, reference, dt, t_start + (s + 1) * dt)
            psi = step_hook(first_step + s, t_start + (s + 1) * dt, psi)
            reference = np.linalg.norm(psi, axis=-1)
    _check_norm(psi, reference, dt, t_start + n_steps * dt)
    return psi


@log_performance("evolve")
def evolve(state: Amplitudes, schedule: EvolutionSchedule, step_hook: Optional[StepHook] = None) -> Amplitudes:
    """Time-ordered evolution over the whole schedule.

    Accepts a QuantumState or a raw (batched) amplitude array and returns the
    same kind.
    """
    psi = _amplitudes(state, schedule.n_sites)
    if schedule.exact:
        psi = SpectralPropagator(schedule.source.at(0.0).to_dense()).evolve(psi, schedule.duration)
    else:
        psi = propagate(psi, schedule.source, schedule.dt, schedule.n_steps, step_hook=step_hook)
    if isinstance(state, QuantumState):
        return QuantumState(psi, state.n_sites)
    return psi


def evolve_checkpoints(
    state: Amplitudes,
    schedule: EvolutionSchedule,
    checkpoints: Sequence[float],
    step_hook: Optional[StepHook] = None,
) -> List[np.ndarray]:
    """Amplitudes at every checkpoint time, sharing one pass over the schedule.

    Checkpoints must be non-decreasing multiples of ``schedule.dt``.
    """
    psi = _amplitudes(state, schedule.n_sites)
    steps = [schedule.steps_to(t) for t in checkpoints]
    if any(b < a for a, b in zip(steps, steps[1:])) or (steps and steps[0] < 0):
        raise InvalidArgumentError("checkpoints must be non-negative and non-decreasing")
    if steps and steps[-1] > schedule.n_steps:
        raise InvalidArgumentError("checkpoints extend beyond the schedule duration")
    if schedule.exact:
        propagator = SpectralPropagator(schedule.source.at(0.0).to_dense())
        return [propagator.evolve(psi, t) for t in checkpoints]
    results = []
    done = 0
    for target in steps:
        if target > done:
            psi = propagate(
                psi, schedule.source, schedule.dt, target - done,
                t_start=done * schedule.dt, step_hook=step_hook, first_step=done,
            )
            done = target
        results.append(psi.copy())
    return results


class SpectralPropagator:
    """exp(-i H t) through one eigendecomposition, reused for every t."""

    def __init__(self, hamiltonian: np.ndarray):
        dim = hamiltonian.shape[0]
        check_dense_capacity(dim.bit_length() - 1)
        self.energies, self.vectors = linalg.eigh(hamiltonian)

    def evolve(self, psi: np.ndarray, t: float) -> np.ndarray:
        coefficients = np.asarray(psi) @ np.conj(self.vectors)
        return (coefficients * np.exp(-1j * self.energies * t)) @ self.vectors.T

    def heisenberg(self, operator_diagonal: np.ndarray, t: float) -> np.ndarray:
        """Dense U^dagger D U for a diagonal operator D."""
        u = (self.vectors * np.exp(-1j * self.energies * t)) @ np.conj(self.vectors.T)
        return np.conj(u.T) @ (operator_diagonal[:, None] * u)


def evolve_exact(state: QuantumState, hamiltonian: np.ndarray, t: float) -> QuantumState:
    """Apply exp(-i H t) via the spectral decomposition of a dense H."""
    if hamiltonian.shape != (state.dim, state.dim):
        raise InvalidArgumentError("Hamiltonian and state dimensions differ")
    return QuantumState(SpectralPropagator(hamiltonian).evolve(state.amplitudes, t), state.n_sites)


def ground_state_ed(hamiltonian: np.ndarray) -> EigenPair:
    """Lowest eigenpair with the largest-magnitude amplitude made real positive."""
    dim = hamiltonian.shape[0]
    n_sites = dim.bit_length() - 1
    check_dense_capacity(n_sites)
    energies, vectors = linalg.eigh(hamiltonian)
    energy = float(energies[0])
    tolerance = get_numerics_config().degeneracy_tolerance * max(1.0, abs(energy))
    degeneracy = int(np.sum(energies - energy <= tolerance))
    if degeneracy > 1:
        logger.warning(f"ground space is {degeneracy}-fold degenerate at E0={energy:.12g}; returning one member")
    vector = vectors[:, 0].astype(np.complex128)
    pivot = vector[np.argmax(np.abs(vector))]
    vector = vector * (abs(pivot) / pivot)
    return EigenPair(energy, QuantumState(vector, n_sites), degeneracy)


def spectral_gap(hamiltonian: np.ndarray) -> float:
    check_dense_capacity(hamiltonian.shape[0].bit_length() - 1)
    energies = linalg.eigvalsh(hamiltonian)
    return float(energies[1] - energies[0])


def apply_single_qubit(psi: np.ndarray, n_sites: int, site: int, gate: np.ndarray) -> np.ndarray:
    """Apply a 2x2 gate (or a batch of gates, shape (..., 2, 2)) on one site."""
    view = site_view(np.asarray(psi, dtype=np.complex128), n_sites, site)
    return np.einsum("...ij,...ajc->...aic", gate, view).reshape(np.shape(psi))


def expectation_z(state: Amplitudes, site: int) -> float:
    psi = state.amplitudes if isinstance(state, QuantumState) else np.asarray(state)
    n_sites = psi.shape[-1].bit_length() - 1
    if not 0 <= site < n_sites:
        raise InvalidArgumentError(f"site {site} out of range for L={n_sites}")
    return float(np.abs(psi) ** 2 @ z_signs(n_sites)[:, site])


def expectation_z_all(psi: np.ndarray, n_sites: int) -> np.ndarray:
    """<Z_i> for every site; shape (..., L) for amplitudes of shape (..., 2^L)."""
    return (np.abs(psi) ** 2) @ z_signs(n_sites)


def expectation(psi: np.ndarray, operator: Union[np.ndarray, PauliHamiltonian]) -> float:
    vector = operator.apply(psi) if isinstance(operator, PauliHamiltonian) else operator @ psi
    return float(np.real(np.vdot(psi, vector)))


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """|<a|b>|^2."""
    if a.dim != b.dim:
        raise InvalidArgumentError(f"cannot compare states of dimension {a.dim} and {b.dim}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def unitarity_drift(states: Iterable[np.ndarray]) -> float:
    return float(max(abs(np.linalg.norm(psi) - 1.0) for psi in states))
