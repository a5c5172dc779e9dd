"""
Plot-ready CSV artifacts.

Every file starts with ``# key=value`` metadata lines followed by a header
row. Floats are written with ``repr`` so they read back bit-exactly. Writes
go to a temporary sibling and are moved into place with ``os.replace``.
"""
import csv
import io
import os
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from app.models.spectral import GreensTable, SpectralGrid
from app.models.trajectory import TrajectoryEnsemble

if TYPE_CHECKING:
    from app.models.lattice import LatticeSpec
    from app.services.state_prep import OptimizationResult

PathLike = Union[str, Path]


def format_value(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def atomic_write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    os.replace(tmp, path)
    return path


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]],
              metadata: Mapping[str, Any] = None) -> Path:
    buffer = io.StringIO()
    for key, value in (metadata or {}).items():
        buffer.write(f"# {key}={format_value(value)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return atomic_write_text(path, buffer.getvalue())


def read_csv(path: PathLike) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    """(metadata, rows) from a file written by ``write_csv``."""
    metadata: Dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8", newline="") as handle:
        for line in handle:
            if line.startswith("# ") and not body:
                key, _, value = line[2:].rstrip("\n").partition("=")
                metadata[key] = value
            else:
                body.append(line)
    return metadata, list(csv.DictReader(body))


def write_greens_table(path: PathLike, table: GreensTable, metadata: Mapping[str, Any] = None) -> Path:
    """Rows (i, n, t, ReG[, sigma][, oracle])."""
    header = ["i", "n", "t", "ReG"]
    if table.sigma is not None:
        header.append("sigma")
    if table.oracle is not None:
        header.append("oracle")
    times = table.grid.times

    def rows():
        for i in range(table.n_sites):
            for n, t in enumerate(times):
                row = [i, n, t, table.values[i, n]]
                if table.sigma is not None:
                    row.append(table.sigma[i, n])
                if table.oracle is not None:
                    row.append(table.oracle[i, n])
                yield row

    meta = {"center": table.center, **table.grid.to_dict(), **(metadata or {})}
    return write_csv(path, header, rows(), meta)


def read_greens_table(path: PathLike):
    """Values and sigma arrays of shape (L, N + 1) plus the metadata."""
    metadata, rows = read_csv(path)
    n_sites = max(int(r["i"]) for r in rows) + 1
    n_times = max(int(r["n"]) for r in rows) + 1
    values = np.zeros((n_sites, n_times))
    sigma = np.full((n_sites, n_times), np.nan) if "sigma" in rows[0] else None
    for r in rows:
        i, n = int(r["i"]), int(r["n"])
        values[i, n] = float(r["ReG"])
        if sigma is not None:
            sigma[i, n] = float(r["sigma"])
    return values, sigma, metadata


def write_spectrum(path: PathLike, spectra: Mapping[str, SpectralGrid], metadata: Mapping[str, Any] = None) -> Path:
    """Rows (k, omega, S_<label>...) with one column per labelled spectrum."""
    labels = list(spectra)
    first = spectra[labels[0]]
    header = ["k", "omega"] + [f"S_{label}" for label in labels]
    with_sigma = [label for label in labels if spectra[label].sigma is not None]
    header += [f"sigma_{label}" for label in with_sigma]

    def rows():
        for m, k in enumerate(first.k):
            for w, omega in enumerate(first.omega):
                yield ([k, omega] + [spectra[label].values[m, w] for label in labels]
                       + [spectra[label].sigma[m, w] for label in with_sigma])

    meta = {"eta": first.eta, "normalization": first.normalization, **(metadata or {})}
    return write_csv(path, header, rows(), meta)


def write_shots(path: PathLike, ensemble: TrajectoryEnsemble, metadata: Mapping[str, Any] = None) -> Path:
    """One row per shot: trajectory, checkpoint, t, bitstring, seed."""
    checkpoints = ensemble.checkpoints
    rows = ((s, c, checkpoints[c], bits, seed) for s, c, bits, seed in ensemble.rows())
    return write_csv(path, ["trajectory", "checkpoint", "t", "bitstring", "seed"], rows,
                     {**ensemble.to_dict(), **(metadata or {})})


def write_curves(path: PathLike, times: Sequence[float], curves: Mapping[str, np.ndarray],
                 sigmas: Mapping[str, np.ndarray] = None, metadata: Mapping[str, Any] = None) -> Path:
    """Rows (i, n, t, <curve>..., sigma_<curve>...) for (checkpoints, L) arrays."""
    labels = list(curves)
    sigmas = sigmas or {}
    header = ["i", "n", "t"] + labels + [f"sigma_{label}" for label in sigmas]
    n_times, n_sites = np.asarray(curves[labels[0]]).shape

    def rows():
        for i in range(n_sites):
            for n in range(n_times):
                yield ([i, n, times[n]] + [curves[label][n, i] for label in labels]
                       + [sigmas[label][n, i] for label in sigmas])

    return write_csv(path, header, rows(), metadata)


def write_optimizer_trace(path: PathLike, result: "OptimizationResult", lattice: "LatticeSpec") -> Path:
    header = ["iteration", "evaluations", "best_fidelity", "fidelity"] + [f"p{i}" for i in range(len(result.hyperparams.p))]
    meta = {
        "L": lattice.n_sites,
        "unit_mode": lattice.unit_mode,
        "method": result.method,
        "t_max": result.hyperparams.t_max,
        "objective": "fidelity",
    }
    return write_csv(path, header, (row.as_row() for row in result.trace), meta)


def read_shots(path: PathLike) -> TrajectoryEnsemble:
    metadata, rows = read_csv(path)
    samples = int(metadata["samples"])
    checkpoints = {}
    for r in rows:
        checkpoints[int(r["checkpoint"])] = float(r["t"])
    n_checkpoints = len(checkpoints)
    n_sites = len(rows[0]["bitstring"])
    bits = np.zeros((samples, n_checkpoints, n_sites), dtype=np.int8)
    for r in rows:
        bits[int(r["trajectory"]), int(r["checkpoint"])] = [int(b) for b in r["bitstring"]]
    return TrajectoryEnsemble(
        bitstrings=bits,
        checkpoints=tuple(checkpoints[c] for c in range(n_checkpoints)),
        seed=int(rows[0]["seed"]),
    )
