"""
Unit tests for registers, Hamiltonians and the Rydberg-to-Ising mapping
"""
import numpy as np
import pytest

from app.core.exceptions import CapacityError, InvalidArgumentError
from app.models.hamiltonian import PauliHamiltonian
from app.models.lattice import LatticeSpec, TFIParams
from app.models.pulse import PulseProgram, RydbergParams
from app.services.lattice_hamiltonian import (
    RydbergSource,
    build_chain_register,
    check_dense_capacity,
    coupling_ratios,
    interaction_matrix,
    map_tfi_to_pulses,
    mapped_rydberg_source,
    pauli_z_decomposition,
    rydberg_hamiltonian_at,
    tfi_hamiltonian,
    vdw_strength,
)


class TestRegister:
    """Test cases for chain registers and van der Waals couplings"""

    def test_chain_positions(self):
        """Test that site i sits at (i a, 0)"""
        register = build_chain_register(4, 9.8)
        assert register.n_sites == 4
        np.testing.assert_allclose(register.positions[:, 0], [0.0, 9.8, 19.6, 29.4])
        np.testing.assert_allclose(register.positions[:, 1], 0.0)

    def test_chain_rejects_bad_geometry(self):
        """Test that single atoms and non-positive spacings are rejected"""
        with pytest.raises(InvalidArgumentError):
            build_chain_register(1, 9.8)
        with pytest.raises(InvalidArgumentError):
            build_chain_register(3, 0.0)

    def test_vdw_strength(self):
        """Test V(i, j) = r^-6 and its symmetry"""
        register = build_chain_register(3, 2.0)
        assert vdw_strength(register, 0, 1) == pytest.approx(2.0 ** -6)
        assert vdw_strength(register, 0, 2) == pytest.approx(4.0 ** -6)
        assert vdw_strength(register, 2, 0) == vdw_strength(register, 0, 2)

    def test_vdw_strength_invalid_sites(self):
        """Test that self-interaction and out-of-range sites raise"""
        register = build_chain_register(3, 2.0)
        with pytest.raises(InvalidArgumentError):
            vdw_strength(register, 1, 1)
        with pytest.raises(InvalidArgumentError):
            vdw_strength(register, 0, 3)

    def test_interaction_cutoff(self):
        """Test that the cutoff keeps nearest neighbours only"""
        register = build_chain_register(4, 1.0)
        full = interaction_matrix(register, 1.0)
        nearest = interaction_matrix(register, 1.0, cutoff=1.5)
        assert full[0, 2] == pytest.approx(1.0 / 64.0)
        assert nearest[0, 2] == 0.0
        assert nearest[0, 1] == pytest.approx(1.0)
        assert np.all(np.tril(full) == 0.0)

    def test_coupling_ratios_follow_inverse_sixth_power(self):
        """Test next-nearest neighbours are 1/64 of nearest neighbours"""
        register = build_chain_register(5, 9.8)
        ratios = coupling_ratios(interaction_matrix(register, 1.0))
        assert ratios[1] == pytest.approx(1.0)
        assert ratios[2] == pytest.approx(1.0 / 64.0)
        assert ratios[3] == pytest.approx(1.0 / 729.0)


class TestMapping:
    """Test cases for the mapping of atom parameters onto the Ising chain"""

    def test_model_units_give_unit_coupling(self):
        """Test that C6 V(a) = 4 and J = 1 in model units"""
        lattice = LatticeSpec.create(5, 9.8)
        assert lattice.nearest_interaction == pytest.approx(4.0)
        assert lattice.coupling == pytest.approx(1.0)

    def test_mapped_pulse_values(self):
        """Test drive, interior and endpoint detunings of the mapping"""
        mapped = map_tfi_to_pulses(5, 9.8, 1.0, 4.0 * 9.8 ** 6)
        assert mapped.J == pytest.approx(1.0)
        assert mapped.omega == pytest.approx(1.0)
        assert mapped.rabi_amplitude == pytest.approx(2.0)
        assert mapped.detuning_interior == pytest.approx(4.0)
        assert mapped.detuning_endpoint == pytest.approx(2.0)

    def test_mapping_rejects_invalid_arguments(self):
        """Test that negative g or a single site are rejected"""
        with pytest.raises(InvalidArgumentError):
            map_tfi_to_pulses(1, 9.8, 1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            map_tfi_to_pulses(3, 9.8, -0.5, 1.0)

    @pytest.mark.parametrize("n_sites", [3, 5])
    def test_nearest_neighbour_mapping_reproduces_tfi(self, n_sites):
        """Test that the mapped atom Hamiltonian equals the chain up to a constant shift"""
        lattice = LatticeSpec.create(n_sites, 9.8, nearest_neighbor_only=True)
        mapped = mapped_rydberg_source(lattice).at(0.0).to_dense()
        ideal = tfi_hamiltonian(TFIParams(J=1.0, g=1.0, n_sites=n_sites))
        difference = mapped - ideal
        shift = difference[0, 0]
        np.testing.assert_allclose(difference, shift * np.eye(1 << n_sites), atol=1e-10)

    def test_mapped_diagonal_has_no_single_site_fields(self):
        """Test that the detuning pattern cancels the interaction-induced Z fields"""
        lattice = LatticeSpec.create(5, 9.8, nearest_neighbor_only=True)
        source = mapped_rydberg_source(lattice)
        decomposition = pauli_z_decomposition(source.at(0.0).diagonal, 5)
        np.testing.assert_allclose(decomposition.fields, 0.0, atol=1e-10)
        np.testing.assert_allclose(np.diag(decomposition.couplings, k=1), 1.0)
        assert decomposition.residual < 1e-10

    def test_full_tail_adds_long_range_couplings(self):
        """Test that the full 1/r^6 tail leaves a small next-nearest coupling"""
        lattice = LatticeSpec.create(5, 9.8)
        decomposition = pauli_z_decomposition(mapped_rydberg_source(lattice).at(0.0).diagonal, 5)
        assert decomposition.couplings[0, 2] == pytest.approx(1.0 / 64.0)


class TestHamiltonians:
    """Test cases for matrix-free and dense Hamiltonians"""

    def test_apply_matches_dense(self, rng):
        """Test matrix-free action against the dense matrix, including Y terms"""
        n_sites = 4
        hamiltonian = PauliHamiltonian(
            n_sites, rng.normal(size=16), rng.normal(size=n_sites), rng.normal(size=n_sites)
        )
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        np.testing.assert_allclose(hamiltonian.apply(psi), hamiltonian.to_dense() @ psi, atol=1e-12)

    def test_dense_is_hermitian(self, rng):
        """Test that the dense form is Hermitian"""
        hamiltonian = PauliHamiltonian(3, rng.normal(size=8), rng.normal(size=3), rng.normal(size=3))
        dense = hamiltonian.to_dense()
        np.testing.assert_allclose(dense, dense.conj().T)

    def test_batched_apply(self, rng):
        """Test that batched coefficients act row by row"""
        diagonal = rng.normal(size=(2, 8))
        x_coeffs = rng.normal(size=(2, 3))
        y_coeffs = np.zeros((2, 3))
        batched = PauliHamiltonian(3, diagonal, x_coeffs, y_coeffs)
        psi = rng.normal(size=(2, 8)).astype(np.complex128)
        result = batched.apply(psi)
        for row in range(2):
            single = PauliHamiltonian(3, diagonal[row], x_coeffs[row], y_coeffs[row])
            np.testing.assert_allclose(result[row], single.to_dense() @ psi[row], atol=1e-12)

    def test_phase_rotates_drive_into_y(self):
        """Test that phase pi/2 turns the X drive into -Y"""
        register = build_chain_register(2, 1.0)
        program = PulseProgram.constant(1.0, 2, amplitude=2.0, phase=np.pi / 2)
        hamiltonian = RydbergSource(register, RydbergParams(1.0, program)).at(0.5)
        np.testing.assert_allclose(hamiltonian.x_coeffs, 0.0, atol=1e-12)
        np.testing.assert_allclose(hamiltonian.y_coeffs, -1.0)

    def test_rydberg_hamiltonian_time_range(self):
        """Test that t outside the program raises"""
        register = build_chain_register(3, 9.8)
        program = PulseProgram.constant(1.0, 3, amplitude=1.0)
        params = RydbergParams(4.0 * 9.8 ** 6, program)
        dense = rydberg_hamiltonian_at(register, params, 0.5)
        np.testing.assert_allclose(dense, dense.conj().T)
        with pytest.raises(InvalidArgumentError):
            rydberg_hamiltonian_at(register, params, 2.0)

    def test_negative_amplitude_rejected(self):
        """Test that Rabi amplitudes must be non-negative"""
        program = PulseProgram.constant(1.0, 3, amplitude=-1.0)
        with pytest.raises(InvalidArgumentError):
            RydbergParams(1.0, program)

    def test_dense_capacity(self):
        """Test that dense matrices beyond the cap are refused"""
        check_dense_capacity(3)
        with pytest.raises(CapacityError):
            check_dense_capacity(64)
