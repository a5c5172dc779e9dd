"""
Chunked execution of independent Monte Carlo trajectories on a worker pool
"""
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from app.core.config import get_execution_config
from app.core.exceptions import InvalidArgumentError
from app.core.service_logging import TrajectoryLogger

trajectory_logger = TrajectoryLogger()

ChunkResult = Dict[str, np.ndarray]
ChunkFn = Callable[[int, int], ChunkResult]


def chunk_bounds(n_samples: int, chunk_size: int) -> List[Tuple[int, int]]:
    """Half-open [start, stop) ranges covering 0..n_samples in fixed-size chunks."""
    if n_samples < 1 or chunk_size < 1:
        raise InvalidArgumentError("sample count and chunk size must be positive")
    return [(start, min(start + chunk_size, n_samples)) for start in range(0, n_samples, chunk_size)]


def run_trajectory_chunks(
    n_samples: int,
    chunk_fn: ChunkFn,
    chunk_size: Optional[int] = None,
    max_workers: Optional[int] = None,
) -> ChunkResult:
    """
    Evaluate ``chunk_fn`` over all trajectory chunks and reassemble in index order

    Args:
        n_samples: Total number of trajectories
        chunk_fn: Maps (start, stop) to a dict of arrays whose leading axis has
            length stop - start
        chunk_size: Trajectories per chunk; defaults to the execution config
        max_workers: Worker threads; defaults to the execution config

    Returns:
        Dict of arrays concatenated along the trajectory axis. Chunk boundaries
        depend only on ``chunk_size``, never on the worker count.
    """
    execution = get_execution_config()
    chunk_size = chunk_size or execution.trajectory_chunk
    max_workers = max_workers or execution.max_workers
    bounds = chunk_bounds(n_samples, chunk_size)
    results: List[Optional[ChunkResult]] = [None] * len(bounds)

    def timed(index: int) -> Tuple[int, ChunkResult]:
        start, stop = bounds[index]
        started = time.perf_counter()
        result = chunk_fn(start, stop)
        trajectory_logger.log_chunk(start, stop - start, time.perf_counter() - started)
        return index, result

    if max_workers == 1 or len(bounds) == 1:
        for index in range(len(bounds)):
            _, results[index] = timed(index)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(timed, index) for index in range(len(bounds))]
            for future in as_completed(futures):
                index, result = future.result()
                results[index] = result

    keys = results[0].keys()
    return {key: np.concatenate([chunk[key] for chunk in results], axis=0) for key in keys}
