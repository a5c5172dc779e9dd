"""
Ground-state preparation of the critical Ising chain.

Two routes are provided: the adiabatic pulse Ansatz driven through the full
atom Hamiltonian, and a Trotter-inspired QAOA circuit. The adiabatic
hyperparameters are optimized for fidelity against the exact ground state.
"""
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from app.core.config import get_execution_config
from app.core.exceptions import InvalidArgumentError
from app.core.rng import OPTIMIZER_STREAM, stream
from app.core.service_logging import PrepareLogger
from app.models.ansatz import AdiabaticHyperparams, QaoaParams
from app.models.lattice import LatticeSpec, TFIParams
from app.models.pulse import EvolutionSchedule, PulseProgram, RydbergParams, STEP_TOLERANCE
from app.models.state import QuantumState, z_signs
from app.services.dynamics_engine import EigenPair, apply_single_qubit, evolve, fidelity, ground_state_ed
from app.services.lattice_hamiltonian import (
    RydbergSource,
    build_chain_register,
    interaction_diagonal,
    interaction_matrix,
    mapped_detuning_pattern,
    tfi_hamiltonian,
)
from app.utils.csv_io import write_optimizer_trace

logger = logging.getLogger(__name__)
prepare_logger = PrepareLogger()

DetuningPattern = Literal["global", "mapped"]

DEFAULT_T_MAX = {"model": 20.0, "physical": 4.0}
DEFAULT_DT = {"model": 0.005, "physical": 0.001}
DEFAULT_BUDGET = 200

# parameters that shape the waveforms; p7 is inert
ACTIVE = np.arange(7)


@dataclass
class TraceRow:
    iteration: int
    evaluations: int
    best_fidelity: float
    fidelity: float
    p: List[float]

    def as_row(self) -> list:
        return [self.iteration, self.evaluations, self.best_fidelity, self.fidelity, *self.p]


@dataclass
class OptimizationResult:
    hyperparams: AdiabaticHyperparams
    fidelity: float
    initial_fidelity: float
    evaluations: int
    method: str
    trace: List[TraceRow] = field(default_factory=list)

    @property
    def improved(self) -> bool:
        return self.fidelity > self.initial_fidelity

    def to_dict(self) -> dict:
        return {
            "hyperparams": self.hyperparams.to_dict(),
            "fidelity": self.fidelity,
            "initial_fidelity": self.initial_fidelity,
            "evaluations": self.evaluations,
            "method": self.method,
        }


def default_hyperparameters(lattice: LatticeSpec, t_max: Optional[float] = None) -> AdiabaticHyperparams:
    """Sweep from -C6V(a) to +C6V(a) ending at the critical drive g = 1."""
    t_max = DEFAULT_T_MAX[lattice.unit_mode] if t_max is None else t_max
    coupling = lattice.coupling
    span = lattice.nearest_interaction / ((2.0 / math.pi) * math.atan(3.0))
    p = [2.0 * coupling, 6.0 / t_max, span, 60.0, t_max, 2.0 * coupling, 0.0, 0.0]
    return AdiabaticHyperparams(np.array(p), t_max)


def ansatz_amplitude(t: np.ndarray, hp: AdiabaticHyperparams) -> np.ndarray:
    p = hp.p
    plateau = 1.0 - np.abs(np.cos(np.pi * t / hp.t_max)) ** p[3]
    return p[0] * plateau + p[5] * np.exp(-5.0 * (t - p[4]) ** 4) + p[6] * np.exp(-5.0 * t ** 4)


def ansatz_detuning(t: np.ndarray, hp: AdiabaticHyperparams) -> np.ndarray:
    p = hp.p
    return (2.0 / np.pi) * p[2] * np.arctan(p[1] * (t - hp.t_max / 2.0))


def sweep_step(t_max: float, dt: float) -> float:
    """Largest step not above dt that divides t_max."""
    return t_max / max(1, math.ceil(t_max / dt - STEP_TOLERANCE))


def ansatz_waveforms(
    hp: AdiabaticHyperparams,
    n_sites: int,
    dt: float,
    detuning_pattern: DetuningPattern = "global",
    endpoint_compensation: bool = True,
) -> PulseProgram:
    """Sample the Ansatz on a grid of spacing dt/2 so step midpoints are exact samples."""
    step = sweep_step(hp.t_max, dt)
    times = np.linspace(0.0, hp.t_max, 2 * int(round(hp.t_max / step)) + 1)
    amplitude = ansatz_amplitude(times, hp)
    negative = amplitude < 0
    if np.any(negative):
        logger.warning(
            f"Rabi amplitude clamped to 0 at {int(negative.sum())} of {times.size} samples "
            f"(min {amplitude.min():.4g})"
        )
        amplitude = np.where(negative, 0.0, amplitude)
    detuning = ansatz_detuning(times, hp)
    if detuning_pattern == "mapped":
        pattern = mapped_detuning_pattern(n_sites, endpoint_compensation)
        envelope = detuning
    elif detuning_pattern == "global":
        pattern = np.zeros(n_sites)
        envelope = np.zeros_like(times)
    else:
        raise InvalidArgumentError(f"unknown detuning pattern {detuning_pattern!r}")
    return PulseProgram(
        times=times,
        amplitude=amplitude,
        phase=np.zeros_like(times),
        detuning=detuning,
        local_pattern=pattern,
        local_envelope=envelope,
    )


def prepare_ground_state(
    lattice: LatticeSpec,
    hp: AdiabaticHyperparams,
    dt: Optional[float] = None,
    detuning_pattern: DetuningPattern = "global",
) -> QuantumState:
    """Evolve |0...0> under the atom Hamiltonian driven by the Ansatz.

    The default ``"global"`` pattern drives every atom with the same detuning
    and no local channel; the finite chain's endpoints are not compensated, so
    the final Hamiltonian differs from the mapped Ising chain at the edges.
    ``"mapped"`` applies the static mapped pattern (endpoints at half the
    interior detuning) throughout the sweep.
    """
    dt = DEFAULT_DT[lattice.unit_mode] if dt is None else dt
    step = sweep_step(hp.t_max, dt)
    program = ansatz_waveforms(hp, lattice.n_sites, step, detuning_pattern, lattice.endpoint_compensation)
    register = build_chain_register(lattice.n_sites, lattice.spacing)
    source = RydbergSource(register, RydbergParams(lattice.c6, program), lattice.interaction_cutoff)
    schedule = EvolutionSchedule(source=source, duration=hp.t_max, dt=step)
    return evolve(QuantumState.all_ground(lattice.n_sites), schedule)


def target_ground_state(lattice: LatticeSpec, g: float = 1.0) -> EigenPair:
    """Exact ground state of the Ising chain the atoms are mapped onto."""
    return ground_state_ed(tfi_hamiltonian(TFIParams(J=lattice.coupling, g=g, n_sites=lattice.n_sites)))


class _Objective:
    """Fidelity of the prepared state, counting evaluations."""

    def __init__(self, lattice: LatticeSpec, target: QuantumState, t_max: float, dt: Optional[float],
                 detuning_pattern: DetuningPattern):
        self.lattice = lattice
        self.target = target
        self.t_max = t_max
        self.dt = dt
        self.detuning_pattern = detuning_pattern
        self.evaluations = 0
        self._lock = threading.Lock()

    def hyperparams(self, p: np.ndarray) -> Optional[AdiabaticHyperparams]:
        try:
            return AdiabaticHyperparams(p, self.t_max)
        except InvalidArgumentError:
            return None

    def __call__(self, p: np.ndarray) -> float:
        with self._lock:
            self.evaluations += 1
        hp = self.hyperparams(p)
        if hp is None:
            return 0.0
        state = prepare_ground_state(self.lattice, hp, self.dt, self.detuning_pattern)
        return fidelity(state, self.target)

    def many(self, points: Sequence[np.ndarray]) -> List[float]:
        workers = min(len(points), get_execution_config().max_workers)
        if workers <= 1:
            return [self(p) for p in points]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self, points))


def optimize_hyperparameters(
    lattice: LatticeSpec,
    initial: Optional[AdiabaticHyperparams] = None,
    budget: int = DEFAULT_BUDGET,
    dt: Optional[float] = None,
    detuning_pattern: DetuningPattern = "global",
    learning_rate: float = 0.02,
    fd_step: float = 1e-3,
    patience: int = 3,
    target: Optional[QuantumState] = None,
    trace_path: Optional[Union[str, Path]] = None,
) -> OptimizationResult:
    """Maximize preparation fidelity with Nadam over finite-difference gradients.

    ``budget`` counts fidelity evaluations beyond the one at ``initial``. When
    Nadam stops improving for ``patience`` iterations the remaining budget is
    spent on Nelder-Mead from the best point. The returned fidelity is never
    below the initial one.
    """
    if budget < 0:
        raise InvalidArgumentError("optimizer budget must be non-negative")
    initial = initial or default_hyperparameters(lattice)
    target = target if target is not None else target_ground_state(lattice).state
    objective = _Objective(lattice, target, initial.t_max, dt, detuning_pattern)
    started = time.perf_counter()

    scale = np.where(np.abs(initial.p) > 1e-12, np.abs(initial.p), 1.0)
    x = initial.p / scale
    initial_fidelity = objective(initial.p)
    objective.evaluations = 0
    best_x, best_f, current_f = x.copy(), initial_fidelity, initial_fidelity
    trace = [TraceRow(0, 0, best_f, current_f, initial.p.tolist())]
    method = "none"

    m = np.zeros_like(x)
    v = np.zeros_like(x)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    stale = 0
    iteration = 0
    per_iteration = ACTIVE.size + 1
    while budget - objective.evaluations >= per_iteration and stale < patience:
        method = "nadam"
        iteration += 1
        candidates = []
        for k in ACTIVE:
            shifted = x.copy()
            shifted[k] += fd_step
            candidates.append(shifted * scale)
        values = objective.many(candidates)
        gradient = np.zeros_like(x)
        gradient[ACTIVE] = (np.array(values) - current_f) / fd_step
        m = beta1 * m + (1 - beta1) * gradient
        v = beta2 * v + (1 - beta2) * gradient ** 2
        m_hat = m / (1 - beta1 ** iteration)
        v_hat = v / (1 - beta2 ** iteration)
        nesterov = beta1 * m_hat + (1 - beta1) * gradient / (1 - beta1 ** iteration)
        x = x + learning_rate * nesterov / (np.sqrt(v_hat) + eps)
        current_f = objective(x * scale)
        if current_f > best_f:
            best_x, best_f, stale = x.copy(), current_f, 0
        else:
            stale += 1
        trace.append(TraceRow(iteration, objective.evaluations, best_f, current_f, (x * scale).tolist()))

    remaining = budget - objective.evaluations
    if remaining > 0:
        method = "nadam+nelder-mead" if method == "nadam" else "nelder-mead"
        state = {"best_x": best_x, "best_f": best_f, "iteration": iteration}

        def negative_fidelity(active: np.ndarray) -> float:
            if objective.evaluations >= budget:
                return 0.0
            point = state["best_x"].copy()
            point[ACTIVE] = active
            value = objective(point * scale)
            state["iteration"] += 1
            if value > state["best_f"]:
                state["best_x"], state["best_f"] = point, value
            trace.append(TraceRow(state["iteration"], objective.evaluations, state["best_f"], value,
                                  (point * scale).tolist()))
            return -value

        optimize.minimize(
            negative_fidelity,
            best_x[ACTIVE],
            method="Nelder-Mead",
            options={"maxfev": remaining, "xatol": 1e-4, "fatol": 1e-6, "initial_simplex": _simplex(best_x[ACTIVE])},
        )
        best_x, best_f = state["best_x"], state["best_f"]

    if best_f <= initial_fidelity:
        if budget > 0:
            prepare_logger.log_warning(
                "optimize", "budget exhausted without improvement; keeping the initial hyperparameters",
                {"L": lattice.n_sites, "budget": budget, "fidelity": initial_fidelity},
            )
        result_hp, best_f = initial, initial_fidelity
    else:
        result_hp = initial.with_p(best_x * scale)

    result = OptimizationResult(
        hyperparams=result_hp,
        fidelity=best_f,
        initial_fidelity=initial_fidelity,
        evaluations=objective.evaluations,
        method=method,
        trace=trace,
    )
    prepare_logger.log_fidelity(lattice.n_sites, best_f, method)
    prepare_logger.log_performance("optimize", time.perf_counter() - started, {"evaluations": result.evaluations})
    if trace_path is not None:
        write_optimizer_trace(trace_path, result, lattice)
    return result


def _simplex(center: np.ndarray, spread: float = 0.05) -> np.ndarray:
    simplex = np.tile(center, (center.size + 1, 1))
    for k in range(center.size):
        simplex[k + 1, k] += spread * (abs(center[k]) if center[k] else 1.0)
    return simplex


def _x_rotation(psi: np.ndarray, n_sites: int, angle: float) -> np.ndarray:
    gate = np.array([[math.cos(angle), -1j * math.sin(angle)], [-1j * math.sin(angle), math.cos(angle)]])
    for site in range(n_sites):
        psi = apply_single_qubit(psi, n_sites, site, gate)
    return psi


def qaoa_state(lattice: LatticeSpec, params: QaoaParams) -> QuantumState:
    """QAOA state U_p ... U_2 U_1 |+...+> with U_l = exp(-i H_ZZ[tau_l, beta_l]) exp(-i gamma_l sum X_i).

    Level 1 is the rightmost factor and acts first on |+...+>; reading the
    product left to right as a gate sequence would apply level p first.
    H_ZZ = tau (beta sum Z_i + sum_{i<j} C6 V(i, j) n_i n_j) with the full
    1/r^6 interaction.
    """
    n_sites = lattice.n_sites
    register = build_chain_register(n_sites, lattice.spacing)
    interactions = interaction_diagonal(interaction_matrix(register, lattice.c6))
    z_total = z_signs(n_sites).sum(axis=1)
    psi = QuantumState.plus(n_sites).amplitudes.copy()
    for gamma, tau, beta in zip(params.gamma, params.tau, params.beta):
        psi = _x_rotation(psi, n_sites, gamma)
        psi = np.exp(-1j * tau * (beta * z_total + interactions)) * psi
    return QuantumState(psi, n_sites)


def optimize_qaoa_parameters(
    lattice: LatticeSpec,
    level: int,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    target: Optional[QuantumState] = None,
) -> Tuple[QaoaParams, float]:
    """Nelder-Mead over (gamma, tau, beta) from a seeded random start."""
    if level < 1:
        raise InvalidArgumentError("QAOA level must be at least 1")
    target = target if target is not None else target_ground_state(lattice).state
    rng = stream(seed, level, OPTIMIZER_STREAM)
    start = rng.uniform(0.0, 0.5, size=3 * level)

    def infidelity(vector: np.ndarray) -> float:
        return 1.0 - fidelity(qaoa_state(lattice, QaoaParams.from_vector(vector)), target)

    result = optimize.minimize(infidelity, start, method="Nelder-Mead", options={"maxfev": max(1, budget)})
    params = QaoaParams.from_vector(result.x)
    value = 1.0 - float(result.fun)
    prepare_logger.log_fidelity(lattice.n_sites, value, f"qaoa-p{level}")
    return params, value


def z_parity_residual(state: QuantumState) -> float:
    """max_i |<Z_i>|; zero for the exact ground state."""
    return float(np.max(np.abs(state.probabilities @ z_signs(state.n_sites))))

