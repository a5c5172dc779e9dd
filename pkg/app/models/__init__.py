# Models package
from .ansatz import AdiabaticHyperparams, QaoaParams
from .hamiltonian import PauliHamiltonian
from .lattice import AtomRegister, LatticeSpec, MappedPulse, TFIParams, UnitSystem
from .mitigation import ConfusionModel, HaarRotation, MitigationCalibration
from .program import AnalogProgram
from .pulse import EvolutionSchedule, PulseProgram, RydbergParams, StaticSource
from .qfi import GeneratorSpec, QfiResult
from .spectral import GreensTable, SpectralGrid, TimeGrid
from .state import QuantumState
from .trajectory import TrajectoryEnsemble

__all__ = [
    "AdiabaticHyperparams",
    "QaoaParams",
    "PauliHamiltonian",
    "AtomRegister",
    "LatticeSpec",
    "MappedPulse",
    "TFIParams",
    "UnitSystem",
    "ConfusionModel",
    "HaarRotation",
    "MitigationCalibration",
    "AnalogProgram",
    "EvolutionSchedule",
    "PulseProgram",
    "RydbergParams",
    "StaticSource",
    "GeneratorSpec",
    "QfiResult",
    "GreensTable",
    "SpectralGrid",
    "TimeGrid",
    "QuantumState",
    "TrajectoryEnsemble",
]
