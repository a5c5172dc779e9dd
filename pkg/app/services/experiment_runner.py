"""
Pipeline orchestration behind the CLI subcommands.

Every stage writes its artifacts into the run's output directory and returns
them keyed by stage name, so the caller can list them in the manifest.
Later stages reuse persisted artifacts of earlier ones when they exist and
recompute them otherwise.

Times in the ``evolution`` section are model units and are converted to the
run's unit mode here; the ``state_prep`` durations are already in run units.
Spectra are always reported in units of J.
"""
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.core.config import get_numerics_config
from app.core.exceptions import InvalidConfigError, UnsupportedConfigurationError
from app.core.service_logging import StageLogger, log_stage_operation
from app.models.ansatz import AdiabaticHyperparams
from app.models.lattice import LatticeSpec, TFIParams
from app.models.program import AnalogProgram
from app.models.pulse import PulseProgram, StaticSource
from app.models.qfi import GeneratorSpec
from app.models.spectral import GreensTable, SpectralGrid, TimeGrid, center_site
from app.models.state import QuantumState
from app.schemas.experiment import ExperimentConfig
from app.schemas.hyperparams import HyperparameterTable
from app.schemas.manifest import CalibrationFile, PreparedStateFile, QfiFile
from app.services.dynamics_engine import fidelity, ground_state_ed, spectral_gap
from app.services.greens_dsf import (
    cumulative_error,
    fourier_dsf,
    greens_protocol,
    omega_grid,
    peak_bin_gap,
    peak_frequency,
    protocol_schedule,
    reference_components,
    secondary_features,
    tfi_source,
)
from app.services.lattice_hamiltonian import (
    build_chain_register,
    map_tfi_to_pulses,
    mapped_detuning_pattern,
    mapped_rydberg_source,
    tfi_hamiltonian,
)
from app.services.mitigation import calibrate, confusion_from_noise, mitigate_ensemble, select_mode
from app.services.noise_model import noiseless_expectations, noisy_pipeline_run
from app.services.qfi import density_matrix, depth_threshold, qfi_result, sum_rule_normalize, variance_density
from app.services.state_prep import (
    ansatz_waveforms,
    default_hyperparameters,
    optimize_hyperparameters,
    optimize_qaoa_parameters,
    prepare_ground_state,
    qaoa_state,
    sweep_step,
    target_ground_state,
    z_parity_residual,
)
from app.utils.csv_io import (
    atomic_write_text,
    read_greens_table,
    read_shots,
    write_curves,
    write_greens_table,
    write_shots,
    write_spectrum,
)

logger = logging.getLogger(__name__)
runner_logger = StageLogger("experiment_runner")

Outputs = Dict[str, List[Path]]

PREPARED_STATE = "prepared_state.json"
OPTIMIZER_TRACE = "optimizer_trace.csv"
SPECTRUM = "spectrum.csv"
SHOTS = "shots.csv"
NOISE_CURVES = "noise_curves.csv"
MITIGATED_CURVES = "mitigated_curves.csv"
NOISE_SPECTRUM = "noise_spectrum.csv"
CALIBRATION = "calibration.json"
QFI_RESULT = "qfi.json"
QFI_SPECTRUM = "qfi_spectrum.csv"
ORACLE = "oracle.json"


def mode_slug(mode: str) -> str:
    """'approx-SP/exact-TE' -> 'approx_sp-exact_te'."""
    return mode.lower().replace("-", "_").replace("/", "-")


def greens_file(mode: str) -> str:
    return f"greens_{mode_slug(mode)}.csv"


def _write_json(path: Path, payload: Any) -> Path:
    if hasattr(payload, "model_dump_json"):
        return atomic_write_text(path, payload.model_dump_json(indent=2))
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True))


class ExperimentRunner:
    """Runs pipeline stages for one resolved experiment configuration."""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Path] = None):
        self.config = config
        self.output_dir = Path(output_dir or config.run.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.details: Dict[str, Any] = {}
        self.calibration: Optional[Dict[str, Any]] = None

    @property
    def lattice(self) -> LatticeSpec:
        section = self.config.lattice
        lattice = LatticeSpec.create(
            section.n_sites,
            section.spacing,
            unit_mode=section.unit_mode,
            physical_c6=section.physical_c6,
            nearest_neighbor_only=section.nearest_neighbor_only,
            endpoint_compensation=section.endpoint_compensation,
        )
        cutoff = self.config.evolution.interaction_cutoff
        return replace(lattice, interaction_cutoff=cutoff) if cutoff is not None else lattice

    @property
    def within_cap(self) -> bool:
        return self.config.lattice.n_sites <= get_numerics_config().dense_cap

    @property
    def model_grid(self) -> TimeGrid:
        evolution = self.config.evolution
        return TimeGrid(delta=evolution.delta, n_steps=evolution.n_steps)

    @property
    def run_grid(self) -> TimeGrid:
        units = self.lattice.units
        return TimeGrid(delta=units.model_time(self.config.evolution.delta), n_steps=self.config.evolution.n_steps)

    @property
    def run_dt(self) -> float:
        return self.lattice.units.model_time(self.config.evolution.dt)

    @property
    def omega(self) -> np.ndarray:
        evolution = self.config.evolution
        return omega_grid(evolution.omega_max, evolution.omega_points)

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    def _require_cap(self, what: str) -> None:
        if not self.within_cap:
            raise UnsupportedConfigurationError(
                f"{what} needs exact diagonalization, which is capped at "
                f"L={get_numerics_config().dense_cap} (requested L={self.config.lattice.n_sites})"
            )

    def exact_ground_state(self) -> QuantumState:
        self._require_cap("the exact ground state")
        return target_ground_state(self.lattice, self.config.lattice.g).state

    def _resolve_hyperparams(self, lattice: LatticeSpec) -> Tuple[AdiabaticHyperparams, str]:
        section = self.config.state_prep
        t_max = section.t_max
        if section.hyperparams is not None:
            base = t_max or default_hyperparameters(lattice).t_max
            return AdiabaticHyperparams(np.array(section.hyperparams), base), "config"
        if section.hyperparam_table is not None:
            found = HyperparameterTable.load(section.hyperparam_table).lookup(lattice.n_sites)
            if found is not None:
                key, hp = found
                if key != lattice.n_sites:
                    logger.warning(f"no hyperparameters recorded for L={lattice.n_sites}; reusing L={key}")
                return hp, f"table:L={key}"
        if not self.within_cap:
            raise UnsupportedConfigurationError(
                f"L={lattice.n_sites} exceeds the dense cap and no hyperparameter table entry applies"
            )
        return default_hyperparameters(lattice, t_max), "default"

    @log_stage_operation("experiment_runner", "prepare")
    def run_prepare(self) -> Tuple[QuantumState, PreparedStateFile, Outputs]:
        """Prepare the ground state and report its fidelity against ED when L is within the cap."""
        lattice = self.lattice
        section = self.config.state_prep
        outputs: Outputs = {"prepare": []}
        hp_record = None
        source = None
        initial_fidelity = None
        target = self.exact_ground_state() if self.within_cap else None

        if section.ansatz == "exact":
            state = self.exact_ground_state()
        elif section.ansatz == "qaoa":
            self._require_cap("QAOA parameter optimization")
            params, _ = optimize_qaoa_parameters(
                lattice, section.qaoa_level, section.budget, self.config.run.seed, target
            )
            state = qaoa_state(lattice, params)
            hp_record, source = params.to_dict(), "optimized"
        else:
            hp, source = self._resolve_hyperparams(lattice)
            if section.optimize and section.budget > 0 and target is not None:
                result = optimize_hyperparameters(
                    lattice, hp, section.budget, section.dt, section.detuning_pattern,
                    target=target, trace_path=self._path(OPTIMIZER_TRACE),
                )
                hp, initial_fidelity = result.hyperparams, result.initial_fidelity
                source = f"{source}+{result.method}"
                outputs["prepare"].append(self._path(OPTIMIZER_TRACE))
            state = prepare_ground_state(lattice, hp, section.dt, section.detuning_pattern)
            hp_record = hp.to_dict()

        value = fidelity(state, target) if target is not None else None
        record = PreparedStateFile(
            n_sites=lattice.n_sites,
            ansatz=section.ansatz,
            fidelity=value,
            initial_fidelity=initial_fidelity,
            hyperparams=hp_record,
            hyperparam_source=source,
            parity_residual=z_parity_residual(state),
            real=state.amplitudes.real.tolist(),
            imag=state.amplitudes.imag.tolist(),
        )
        outputs["prepare"].append(_write_json(self._path(PREPARED_STATE), record))
        self.details["prepare"] = {"fidelity": value, "ansatz": section.ansatz, "hyperparam_source": source}
        runner_logger.log_operation("prepare", self.details["prepare"])
        return state, record, outputs

    def prepared_state(self) -> Tuple[QuantumState, PreparedStateFile, Outputs]:
        """Persisted prepared state when it matches the configuration, else a fresh one."""
        path = self._path(PREPARED_STATE)
        if path.exists():
            record = PreparedStateFile.model_validate_json(path.read_text(encoding="utf-8"))
            if record.n_sites == self.config.lattice.n_sites and record.ansatz == self.config.state_prep.ansatz:
                amplitudes = np.asarray(record.real) + 1j * np.asarray(record.imag)
                return QuantumState(amplitudes, record.n_sites), record, {}
        return self.run_prepare()

    def _greens_table(self, mode: str, ground: QuantumState, exact_ground: Optional[QuantumState]) -> GreensTable:
        lattice = self.lattice
        spectral, evolution_mode = mode.split("/")
        state = exact_ground if spectral == "exact-SP" else ground
        g = self.config.lattice.g
        if evolution_mode == "exact-TE":
            source = tfi_source(lattice, g)
        else:
            source = StaticSource(mapped_rydberg_source(lattice, g).at(0.0))
        schedule = protocol_schedule(source, self.run_grid, self.run_dt, exact=self.within_cap)
        j_c = center_site(lattice.n_sites)
        with_oracle = self.within_cap and mode == "exact-SP/exact-TE"
        measured = greens_protocol(state, schedule, j_c, self.run_grid, with_oracle=with_oracle)
        return GreensTable(values=measured.values, center=j_c, grid=self.model_grid, oracle=measured.oracle)

    @log_stage_operation("experiment_runner", "dsf")
    def run_dsf(self, modes: Optional[List[str]] = None) -> Tuple[Dict[str, GreensTable], Dict[str, SpectralGrid], Outputs]:
        """Green's tables and spectra for the requested state-prep/time-evolution modes."""
        modes = list(modes or self.config.evolution.modes)
        if any(m.startswith("exact-SP") for m in modes):
            self._require_cap("the exact-SP mode")
        ground, _, outputs = self.prepared_state()
        outputs = {key: list(value) for key, value in outputs.items()}
        outputs.setdefault("dsf", [])
        exact_ground = self.exact_ground_state() if self.within_cap else None

        tables: Dict[str, GreensTable] = {}
        spectra: Dict[str, SpectralGrid] = {}
        eta = self.config.evolution.eta
        for mode in modes:
            table = self._greens_table(mode, ground, exact_ground)
            tables[mode] = table
            spectra[mode] = fourier_dsf(table, eta, self.omega)
            outputs["dsf"].append(write_greens_table(self._path(greens_file(mode)), table, {"mode": mode}))
        outputs["dsf"].append(write_spectrum(self._path(SPECTRUM), {mode_slug(m): s for m, s in spectra.items()}))

        first = modes[0]
        summary = {}
        for mode in modes:
            summary[mode] = {
                "peak_omega_pi": peak_frequency(spectra[mode], np.pi),
                "peak_gap_bins": peak_bin_gap(spectra[first], spectra[mode], np.pi),
                "secondary_features": secondary_features(spectra[mode], np.pi),
                "negativity_ratio": spectra[mode].negativity_ratio,
            }
            if tables[mode].oracle is not None:
                summary[mode]["oracle_max_deviation"] = float(np.max(np.abs(tables[mode].values - tables[mode].oracle)))
        self.details["dsf"] = summary
        return tables, spectra, outputs

    def noise_program(self) -> AnalogProgram:
        """Adiabatic preparation, centre rotation, then the mapped evolution measured on the grid."""
        lattice = self.lattice
        n_sites = lattice.n_sites
        ground, record, _ = self.prepared_state()
        register = build_chain_register(n_sites, lattice.spacing)
        mapped = map_tfi_to_pulses(n_sites, lattice.spacing, self.config.lattice.g, lattice.c6)
        grid = self.run_grid
        evolution = PulseProgram.constant(
            grid.total_time,
            n_sites,
            amplitude=mapped.rabi_amplitude,
            detuning=mapped.detuning_interior,
            local_pattern=mapped_detuning_pattern(n_sites, lattice.endpoint_compensation),
            local_detuning=mapped.detuning_interior,
        )
        preparation, initial = None, ground
        if record.ansatz == "adiabatic" and record.hyperparams is not None:
            hp = AdiabaticHyperparams(np.array(record.hyperparams["p"]), record.hyperparams["t_max"])
            step = sweep_step(hp.t_max, self.config.state_prep.dt or self.run_dt)
            preparation = ansatz_waveforms(
                hp, n_sites, step, self.config.state_prep.detuning_pattern, lattice.endpoint_compensation
            )
            initial = None
        return AnalogProgram(
            register=register,
            c6=lattice.c6,
            evolution=evolution,
            checkpoints=tuple(grid.times),
            dt=self.run_dt,
            units=lattice.units,
            cutoff=lattice.interaction_cutoff,
            preparation=preparation,
            initial_state=initial,
            rotation_site=center_site(n_sites),
        )

    def _require_noise(self):
        if not self.config.noise_enabled:
            raise InvalidConfigError("the noise section is 'off'; enable it to run noisy trajectories")
        return self.config.noise

    @log_stage_operation("experiment_runner", "noise")
    def run_noise(self):
        """Noisy shot ensemble plus the noiseless reference on the measurement grid."""
        cfg = self._require_noise()
        program = self.noise_program()
        samples = self.config.samples
        noiseless = noiseless_expectations(program)
        ensemble = noisy_pipeline_run(
            program, cfg, self.config.run.seed, samples=samples, chunk_size=self.config.run.chunk_size
        )
        if samples < 2:
            logger.warning("standard errors are undefined with a single trajectory; point estimates only")
        raw, sigma = ensemble.z_mean(), ensemble.z_sigma()
        times = self.model_grid.times
        outputs: Outputs = {"noise": [
            write_shots(self._path(SHOTS), ensemble, {"kraus_mode": cfg.kraus_mode}),
            write_curves(self._path(NOISE_CURVES), times, {"noiseless": noiseless, "raw": raw},
                         {"raw": sigma}, {"samples": samples, "seed": self.config.run.seed}),
        ]}
        self.details["noise"] = {"err_raw": cumulative_error(raw, noiseless), "samples": samples}
        runner_logger.log_operation("noise", self.details["noise"])
        return program, ensemble, noiseless, outputs

    @log_stage_operation("experiment_runner", "mitigate")
    def run_mitigate(self):
        """Calibrate and mitigate the persisted (or freshly simulated) shot ensemble."""
        cfg = self._require_noise()
        if not self.config.mitigation_enabled:
            raise InvalidConfigError("the mitigation section is 'off'")
        section = self.config.mitigation
        outputs: Outputs = {}
        program = self.noise_program()
        if self._path(SHOTS).exists():
            ensemble = read_shots(self._path(SHOTS))
            noiseless = noiseless_expectations(program)
        else:
            program, ensemble, noiseless, outputs = self.run_noise()

        confusion = confusion_from_noise(cfg, program.n_sites) if section.confusion else None
        initial_mode = "inverse-scale" if section.mode == "auto" else section.mode
        calib = calibrate(program, cfg, self.config.run.seed, section.n_unitaries, section.n_shots, confusion, initial_mode)
        errors: Dict[str, float] = {}
        if section.mode == "auto":
            chosen, errors = select_mode(ensemble, calib, noiseless, confusion)
            calib = calib.with_mode(chosen)

        raw, raw_sigma = ensemble.z_mean(), ensemble.z_sigma()
        mitigated, sigma = mitigate_ensemble(ensemble, calib, confusion=confusion)
        err_raw = cumulative_error(raw, noiseless)
        err_mitigated = cumulative_error(mitigated, noiseless)

        calibration = CalibrationFile(
            survival=calib.survival.tolist(),
            raw=None if calib.raw is None else calib.raw.tolist(),
            ideal=None if calib.ideal is None else calib.ideal.tolist(),
            n_unitaries=calib.n_unitaries,
            n_shots=calib.n_shots,
            mode=calib.mode,
            seed=calib.seed,
            errors=errors,
        )
        self.calibration = calibration.model_dump()
        times = self.model_grid.times
        eta = self.config.evolution.eta
        j_c = center_site(program.n_sites)
        spectra = {
            label: fourier_dsf(GreensTable(values=values.T, center=j_c, grid=self.model_grid,
                                           sigma=None if s is None else s.T), eta, self.omega)
            for label, values, s in (("noiseless", noiseless, None), ("raw", raw, raw_sigma),
                                     ("mitigated", mitigated, sigma))
        }
        outputs.setdefault("mitigate", []).extend([
            _write_json(self._path(CALIBRATION), calibration),
            write_curves(self._path(MITIGATED_CURVES), times,
                         {"noiseless": noiseless, "raw": raw, "mitigated": mitigated},
                         {"raw": raw_sigma, "mitigated": sigma},
                         {"mode": calib.mode, "err_raw": err_raw, "err_mitigated": err_mitigated}),
            write_spectrum(self._path(NOISE_SPECTRUM), spectra),
        ])
        self.details["mitigate"] = {"mode": calib.mode, "err_raw": err_raw, "err_mitigated": err_mitigated}
        runner_logger.log_operation("mitigate", self.details["mitigate"])
        return mitigated, sigma, outputs

    def run_noise_and_mitigate(self) -> Outputs:
        """Noiseless, noisy and (unless mitigation is off) mitigated curves."""
        _, _, _, outputs = self.run_noise()
        if self.config.mitigation_enabled:
            _, _, more = self.run_mitigate()
            for stage, files in more.items():
                outputs.setdefault(stage, []).extend(files)
        return outputs

    def _model_hamiltonian(self) -> np.ndarray:
        return tfi_hamiltonian(TFIParams(J=1.0, g=self.config.lattice.g, n_sites=self.config.lattice.n_sites))

    def _source_table(self, mode: str) -> Tuple[GreensTable, Outputs]:
        path = self._path(greens_file(mode))
        if path.exists():
            values, sigma, _ = read_greens_table(path)
            if values.shape == (self.config.lattice.n_sites, self.model_grid.n_steps + 1):
                center = center_site(self.config.lattice.n_sites)
                return GreensTable(values=values, center=center, grid=self.model_grid, sigma=sigma), {}
        tables, _, outputs = self.run_dsf([mode])
        return tables[mode], outputs

    @log_stage_operation("experiment_runner", "qfi")
    def run_qfi(self):
        """Sum-rule normalized QFI density, its depth classification and the F_n route."""
        section = self.config.qfi
        n_sites = self.config.lattice.n_sites
        table, outputs = self._source_table(section.source_mode)
        outputs = {key: list(value) for key, value in outputs.items()}
        spectrum = fourier_dsf(table, self.config.evolution.eta, self.omega)

        if section.normalization == "ed":
            self._require_cap("sum-rule normalization from exact diagonalization (supply qfi.normalization)")
            ground = self.exact_ground_state()
            components = reference_components(ground, self._model_hamiltonian(), self.model_grid,
                                              self.config.evolution.eta, self.omega)
            constant = sum_rule_normalize(components, section.omega_max)
            provenance = "ed"
        else:
            constant, provenance = float(section.normalization), "supplied"
        normalized = spectrum.scaled(constant)

        generator = GeneratorSpec(n_sites, section.generator)
        rho = density_matrix(self.exact_ground_state()) if self.within_cap else None
        result = qfi_result(
            normalized, generator.momentum, section.temperature, section.omega_max,
            provenance, rho, generator, section.bound_order,
        )
        record = QfiFile(
            **result.to_dict(),
            thresholds={k: depth_threshold(n_sites, k) for k in range(1, n_sites + 1)},
            source=section.source_mode,
        )
        outputs.setdefault("qfi", []).extend([
            _write_json(self._path(QFI_RESULT), record),
            write_spectrum(self._path(QFI_SPECTRUM), {"normalized": normalized}, {"source": section.source_mode}),
        ])
        if rho is not None:
            self.details["qfi_variance_density"] = variance_density(self.exact_ground_state(), generator) / 4.0
        self.details["qfi"] = {"f_q_normalized": result.f_q_normalized, "depth": result.depth,
                               "route_gap": result.route_gap}
        return result, outputs

    @log_stage_operation("experiment_runner", "oracle")
    def run_oracle(self) -> Outputs:
        """Exact-diagonalization reference numbers for the configured chain."""
        self._require_cap("the oracle")
        lattice = self.lattice
        n_sites = lattice.n_sites
        hamiltonian = self._model_hamiltonian()
        ground = ground_state_ed(hamiltonian)
        generator = GeneratorSpec(n_sites, self.config.qfi.generator)
        adiabatic = fidelity(prepare_ground_state(lattice, default_hyperparameters(lattice)), ground.state)
        qaoa = {}
        for level in (1, 2):
            _, value = optimize_qaoa_parameters(lattice, level, self.config.state_prep.budget,
                                                self.config.run.seed, ground.state)
            qaoa[f"p{level}"] = value
        report = {
            "n_sites": n_sites,
            "g": self.config.lattice.g,
            "ground_energy": ground.energy,
            "degeneracy": ground.degeneracy,
            "gap": spectral_gap(hamiltonian),
            "variance_density": variance_density(ground.state, generator),
            "generator": generator.kind,
            "adiabatic_default_fidelity": adiabatic,
            "qaoa_fidelity": qaoa,
        }
        self.details["oracle"] = report
        return {"oracle": [_write_json(self._path(ORACLE), report)]}
