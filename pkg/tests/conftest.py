"""
Pytest configuration and fixtures for testing
"""
import numpy as np
import pytest

from app.models.lattice import LatticeSpec, TFIParams
from app.models.spectral import TimeGrid
from app.schemas.experiment import ExperimentConfig
from app.schemas.noise import NoiseConfig
from app.services.dynamics_engine import ground_state_ed
from app.services.lattice_hamiltonian import tfi_hamiltonian


@pytest.fixture
def rng():
    """Seeded generator for test data."""
    return np.random.default_rng(1234)


@pytest.fixture
def lattice3():
    """Three-site chain in model units (J = 1)."""
    return LatticeSpec.create(3)


@pytest.fixture
def lattice5():
    """Five-site chain in model units (J = 1)."""
    return LatticeSpec.create(5)


@pytest.fixture
def tfi3():
    """Dense critical Ising Hamiltonian for L = 3."""
    return tfi_hamiltonian(TFIParams(J=1.0, g=1.0, n_sites=3))


@pytest.fixture
def tfi5():
    """Dense critical Ising Hamiltonian for L = 5."""
    return tfi_hamiltonian(TFIParams(J=1.0, g=1.0, n_sites=5))


@pytest.fixture
def ground3(tfi3):
    """Exact ground state of the three-site critical chain."""
    return ground_state_ed(tfi3).state


@pytest.fixture
def ground5(tfi5):
    """Exact ground state of the five-site critical chain."""
    return ground_state_ed(tfi5).state


@pytest.fixture
def short_grid():
    """Coarse measurement grid, model units."""
    return TimeGrid(delta=0.25, n_steps=8)


@pytest.fixture
def noiseless_cfg():
    """Noise model with every channel switched off."""
    return NoiseConfig.noiseless(samples=64)


@pytest.fixture
def quick_config(tmp_path):
    """Small experiment that runs every stage in seconds."""
    return ExperimentConfig.model_validate({
        "lattice": {"n_sites": 3},
        "state_prep": {"ansatz": "exact"},
        "evolution": {"delta": 0.25, "n_steps": 6, "omega_points": 128},
        "noise": {"samples": 40},
        "mitigation": {"n_unitaries": 8, "n_shots": 20},
        "run": {"seed": 7, "output_dir": str(tmp_path / "run"), "chunk_size": 16},
    })
