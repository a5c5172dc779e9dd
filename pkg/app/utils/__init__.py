# Utils package
from .csv_io import (
    atomic_write_text,
    read_csv,
    read_greens_table,
    read_shots,
    write_csv,
    write_curves,
    write_greens_table,
    write_optimizer_trace,
    write_shots,
    write_spectrum,
)

__all__ = [
    "atomic_write_text",
    "read_csv",
    "read_greens_table",
    "read_shots",
    "write_csv",
    "write_curves",
    "write_greens_table",
    "write_optimizer_trace",
    "write_shots",
    "write_spectrum",
]
