"""
Unit tests for state-vector propagation and the exact-diagonalization oracles
"""
import logging

import numpy as np
import pytest

from app.core.config import get_numerics_config
from app.core.exceptions import InvalidArgumentError, NumericalInstabilityError
from app.models.hamiltonian import PauliHamiltonian
from app.models.lattice import TFIParams
from app.models.pulse import EvolutionSchedule, PulseProgram, StaticSource
from app.models.state import QuantumState
from app.services.dynamics_engine import (
    SpectralPropagator,
    apply_single_qubit,
    evolve,
    evolve_checkpoints,
    evolve_exact,
    expectation,
    expectation_z,
    fidelity,
    ground_state_ed,
    spectral_gap,
    taylor_step,
    unitarity_drift,
)
from app.services.lattice_hamiltonian import tfi_hamiltonian, tfi_operator


def _tfi_source(n_sites: int, g: float = 1.0) -> StaticSource:
    return StaticSource(tfi_operator(TFIParams(J=1.0, g=g, n_sites=n_sites)))


class TestStateHelpers:
    """Test cases for basis states and single-site observables"""

    def test_basis_state_ordering(self):
        """Test that site 0 is the most significant bit"""
        state = QuantumState.basis(3, [1, 0, 0])
        assert np.argmax(np.abs(state.amplitudes)) == 4

    def test_expectation_z_signs(self):
        """Test Z = +1 on ground and -1 on Rydberg atoms"""
        state = QuantumState.basis(3, [0, 1, 0])
        assert expectation_z(state, 0) == pytest.approx(1.0)
        assert expectation_z(state, 1) == pytest.approx(-1.0)
        with pytest.raises(InvalidArgumentError):
            expectation_z(state, 3)

    def test_single_qubit_gate_on_site(self):
        """Test that X on site 0 flips the most significant bit"""
        psi = QuantumState.all_ground(3).amplitudes
        flipped = apply_single_qubit(psi, 3, 0, np.array([[0, 1], [1, 0]], dtype=np.complex128))
        np.testing.assert_allclose(np.abs(flipped), QuantumState.basis(3, [1, 0, 0]).amplitudes.real)

    def test_fidelity_bounds(self):
        """Test fidelity of orthogonal, identical and mismatched states"""
        a = QuantumState.basis(2, [0, 0])
        b = QuantumState.basis(2, [1, 1])
        assert fidelity(a, a) == pytest.approx(1.0)
        assert fidelity(a, b) == pytest.approx(0.0)
        with pytest.raises(InvalidArgumentError):
            fidelity(a, QuantumState.all_ground(3))


class TestPropagation:
    """Test cases for the stepped integrator"""

    def test_norm_preserved(self):
        """Test that a long evolution keeps the state normalized"""
        schedule = EvolutionSchedule(_tfi_source(4), duration=2.0, dt=0.005)
        final = evolve(QuantumState.all_ground(4), schedule)
        assert final.norm == pytest.approx(1.0, abs=1e-8)

    def test_matches_exact_propagation(self, tfi3):
        """Test stepped evolution against spectral propagation"""
        initial = QuantumState.all_ground(3)
        stepped = evolve(initial, EvolutionSchedule(_tfi_source(3), duration=1.0, dt=0.005))
        exact = evolve_exact(initial, tfi3, 1.0)
        assert fidelity(stepped, exact) == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(stepped.amplitudes, exact.amplitudes, atol=1e-6)

    def test_fourth_order_convergence(self, tfi3, monkeypatch):
        """Test that halving dt reduces the error by about 2^4 for a static Hamiltonian"""
        monkeypatch.setattr(get_numerics_config(), "norm_tolerance", 1e-2)
        initial = QuantumState.all_ground(3)
        exact = evolve_exact(initial, tfi3, 1.0).amplitudes
        errors = []
        for dt in (0.1, 0.05):
            final = evolve(initial, EvolutionSchedule(_tfi_source(3), duration=1.0, dt=dt))
            errors.append(np.linalg.norm(final.amplitudes - exact))
        ratio = errors[0] / errors[1]
        assert 10.0 < ratio < 24.0

    def test_exact_schedule_uses_spectral_propagation(self, tfi3):
        """Test that exact schedules agree with evolve_exact"""
        initial = QuantumState.plus(3)
        schedule = EvolutionSchedule(_tfi_source(3), duration=0.75, dt=0.25, exact=True)
        np.testing.assert_allclose(
            evolve(initial, schedule).amplitudes, evolve_exact(initial, tfi3, 0.75).amplitudes, atol=1e-12
        )

    def test_exact_schedule_needs_static_source(self, lattice3):
        """Test that exact propagation of a driven source is refused"""
        from app.services.lattice_hamiltonian import mapped_rydberg_source

        with pytest.raises(InvalidArgumentError):
            EvolutionSchedule(mapped_rydberg_source(lattice3), duration=1.0, dt=0.1, exact=True)

    def test_duration_must_be_whole_steps(self):
        """Test that a duration off the step grid is rejected"""
        with pytest.raises(InvalidArgumentError):
            EvolutionSchedule(_tfi_source(2), duration=1.0, dt=0.3)

    def test_oversized_step_raises_instability(self):
        """Test that a diverging norm raises with a suggested step"""
        schedule = EvolutionSchedule(_tfi_source(3), duration=4.0, dt=2.0)
        with pytest.raises(NumericalInstabilityError) as excinfo:
            evolve(QuantumState.all_ground(3), schedule)
        assert excinfo.value.suggested_dt == pytest.approx(1.0)
        assert excinfo.value.exit_code == 3

    def test_checkpoints_share_one_pass(self, tfi3):
        """Test amplitudes at several checkpoints against exact propagation"""
        initial = QuantumState.all_ground(3)
        schedule = EvolutionSchedule(_tfi_source(3), duration=1.0, dt=0.005)
        states = evolve_checkpoints(initial, schedule, [0.0, 0.25, 1.0])
        assert len(states) == 3
        np.testing.assert_allclose(states[0], initial.amplitudes)
        for psi, t in zip(states, (0.0, 0.25, 1.0)):
            np.testing.assert_allclose(psi, evolve_exact(initial, tfi3, t).amplitudes, atol=1e-6)

    def test_unitarity_drift(self):
        """Test that the drift stays below tolerance and detects a rescaled state"""
        schedule = EvolutionSchedule(_tfi_source(3), duration=1.0, dt=0.005)
        states = evolve_checkpoints(QuantumState.all_ground(3), schedule, [0.25, 0.5, 1.0])
        assert unitarity_drift(states) < 1e-6
        assert unitarity_drift(states + [1.01 * states[-1]]) == pytest.approx(0.01, abs=1e-6)

    def test_checkpoints_must_be_ordered(self):
        """Test that decreasing or out-of-range checkpoints raise"""
        schedule = EvolutionSchedule(_tfi_source(2), duration=1.0, dt=0.25)
        with pytest.raises(InvalidArgumentError):
            evolve_checkpoints(QuantumState.all_ground(2), schedule, [0.5, 0.25])
        with pytest.raises(InvalidArgumentError):
            evolve_checkpoints(QuantumState.all_ground(2), schedule, [1.5])

    def test_batched_evolution(self, rng):
        """Test that rows of a batch evolve independently"""
        hamiltonian = PauliHamiltonian(2, rng.normal(size=(3, 4)), rng.normal(size=(3, 2)), np.zeros((3, 2)))
        psi = np.tile(QuantumState.plus(2).amplitudes, (3, 1))
        stepped = taylor_step(hamiltonian, psi, 0.01)
        for row in range(3):
            single = PauliHamiltonian(2, hamiltonian.diagonal[row], hamiltonian.x_coeffs[row], np.zeros(2))
            np.testing.assert_allclose(stepped[row], taylor_step(single, psi[row], 0.01), atol=1e-14)

    def test_time_dependent_source(self):
        """Test that a driven program is sampled at step midpoints"""
        from app.models.pulse import RydbergParams
        from app.services.lattice_hamiltonian import RydbergSource, build_chain_register

        register = build_chain_register(2, 20.0)
        times = np.array([0.0, 1.0])
        program = PulseProgram(
            times=times, amplitude=np.array([0.0, 2.0]), phase=np.zeros(2), detuning=np.zeros(2),
            local_pattern=np.zeros(2), local_envelope=np.zeros(2),
        )
        source = RydbergSource(register, RydbergParams(1.0, program))
        final = evolve(QuantumState.all_ground(2), EvolutionSchedule(source, duration=1.0, dt=0.001))
        # pulse area int_0^1 2t dt = 1, each atom rotates by exp(-i X / 2)
        expected_ground = np.cos(0.5) ** 2
        assert final.probabilities[0] == pytest.approx(expected_ground ** 2, abs=1e-4)


class TestExactDiagonalization:
    """Test cases for ground states and gaps"""

    def test_ground_energy_matches_eigvalsh(self, tfi5):
        """Test the lowest eigenvalue and the eigenvector equation"""
        pair = ground_state_ed(tfi5)
        assert pair.energy == pytest.approx(np.linalg.eigvalsh(tfi5)[0])
        assert pair.degeneracy == 1
        assert expectation(pair.state.amplitudes, tfi5) == pytest.approx(pair.energy)

    def test_degenerate_ground_space_warns(self, caplog):
        """Test that the classical antiferromagnet reports a twofold ground space"""
        hamiltonian = tfi_hamiltonian(TFIParams(J=1.0, g=0.0, n_sites=4))
        with caplog.at_level(logging.WARNING):
            pair = ground_state_ed(hamiltonian)
        assert pair.degeneracy == 2
        assert pair.energy == pytest.approx(-3.0)
        assert "degenerate" in caplog.text

    def test_two_site_ground_energy(self):
        """Test E0 = -sqrt(5) for the two-site critical chain"""
        pair = ground_state_ed(tfi_hamiltonian(TFIParams(J=1.0, g=1.0, n_sites=2)))
        assert pair.energy == pytest.approx(-np.sqrt(5.0), abs=1e-10)

    def test_two_site_evolution_matches_expm(self):
        """Test |00> evolved to t = 1 against the dense matrix exponential"""
        from scipy.linalg import expm

        hamiltonian = tfi_hamiltonian(TFIParams(J=1.0, g=1.0, n_sites=2))
        initial = QuantumState.all_ground(2)
        expected = expm(-1j * hamiltonian) @ initial.amplitudes
        np.testing.assert_allclose(evolve_exact(initial, hamiltonian, 1.0).amplitudes, expected, atol=1e-8)
        stepped = evolve(initial, EvolutionSchedule(_tfi_source(2), duration=1.0, dt=0.005))
        np.testing.assert_allclose(stepped.amplitudes, expected, atol=1e-8)

    def test_energy_conservation(self, tfi5):
        """Test that <H> stays constant for a time-independent Hamiltonian"""
        initial = QuantumState.all_ground(5)
        schedule = EvolutionSchedule(_tfi_source(5), duration=5.0, dt=0.005)
        final = evolve(initial, schedule)
        drift = abs(expectation(final.amplitudes, tfi5) - expectation(initial.amplitudes, tfi5))
        assert drift < 1e-6 * np.linalg.norm(tfi5, 2)

    def test_spectral_gap_positive(self, tfi5):
        """Test that the finite critical chain is gapped"""
        assert spectral_gap(tfi5) > 0.0

    def test_heisenberg_picture(self, tfi3, ground3):
        """Test <Z_0(t)> in the Heisenberg picture against Schroedinger evolution"""
        from app.models.state import z_signs

        propagator = SpectralPropagator(tfi3)
        initial = QuantumState.plus(3).amplitudes
        operator = propagator.heisenberg(z_signs(3)[:, 0], 0.7)
        heisenberg = np.real(np.vdot(initial, operator @ initial))
        evolved = propagator.evolve(initial, 0.7)
        schroedinger = float(np.abs(evolved) ** 2 @ z_signs(3)[:, 0])
        assert heisenberg == pytest.approx(schroedinger, abs=1e-12)

    def test_evolve_exact_dimension_mismatch(self, tfi3):
        """Test that a state of the wrong size is rejected"""
        with pytest.raises(InvalidArgumentError):
            evolve_exact(QuantumState.all_ground(2), tfi3, 1.0)
