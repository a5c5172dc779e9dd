"""
Stage logging for pipeline runs (prepare, dsf, noise, mitigate, qfi)
"""
import logging
import time
from functools import wraps
from typing import Any, Callable, Dict, List, Optional

from app.core.logging_config import get_logger


class StageLogger:
    """Logger for pipeline stage operations"""

    def __init__(self, stage: str):
        self.stage = stage
        self.logger = get_logger(f"app.services.{stage}")

    def log_operation(self, operation: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Log stage operation"""
        if details:
            self.logger.info(f"{self.stage} {operation}: {details}", extra={"stage": self.stage})
        else:
            self.logger.info(f"{self.stage} {operation}", extra={"stage": self.stage})

    def log_warning(self, operation: str, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Log a stage warning; these end up in the run manifest"""
        suffix = f" - {details}" if details else ""
        self.logger.warning(f"{self.stage} {operation}: {message}{suffix}", extra={"stage": self.stage})

    def log_performance(self, operation: str, duration: float, details: Optional[Dict[str, Any]] = None) -> None:
        """Log stage performance"""
        if details:
            self.logger.info(f"{self.stage} {operation} completed in {duration:.3f}s: {details}")
        else:
            self.logger.info(f"{self.stage} {operation} completed in {duration:.3f}s")


class PrepareLogger(StageLogger):
    """Logger for ground-state preparation"""

    def __init__(self):
        super().__init__("state_prep")

    def log_fidelity(self, n_sites: int, fidelity: float, source: str) -> None:
        self.log_operation("fidelity", {"L": n_sites, "fidelity": round(fidelity, 6), "source": source})


class TrajectoryLogger(StageLogger):
    """Logger for noisy trajectory batches"""

    def __init__(self):
        super().__init__("noise_model")

    def log_chunk(self, start: int, size: int, duration: float) -> None:
        self.log_performance("trajectory_chunk", duration, {"start": start, "size": size})


class RunWarningCollector(logging.Handler):
    """Collects WARNING+ records emitted during a run for the manifest"""

    def __init__(self, level: int = logging.WARNING):
        super().__init__(level)
        self.messages: List[str] = []
        self._seen: set = set()

    def emit(self, record: logging.LogRecord) -> None:
        # attached at several levels of the hierarchy; count each record once
        if id(record) in self._seen:
            return
        self._seen.add(id(record))
        self.messages.append(f"{record.name}: {record.getMessage()}")

    def __enter__(self) -> "RunWarningCollector":
        logging.getLogger("app").addHandler(self)
        for name in ("app.core", "app.services", "app.tasks"):
            logging.getLogger(name).addHandler(self)
        return self

    def __exit__(self, *exc: Any) -> None:
        for name in ("app", "app.core", "app.services", "app.tasks"):
            logging.getLogger(name).removeHandler(self)


def log_stage_operation(stage: str, operation: str) -> Callable:
    """Decorator to log stage operations"""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            logger = get_logger(f"app.services.{stage}")
            start_time = time.perf_counter()

            logger.info(f"Starting {stage} {operation}")

            try:
                result = func(*args, **kwargs)
                duration = time.perf_counter() - start_time
                logger.info(f"{stage} {operation} completed in {duration:.3f}s")
                return result
            except Exception as e:
                duration = time.perf_counter() - start_time
                logger.error(f"{stage} {operation} failed after {duration:.3f}s: {e}")
                raise
        return wrapper
    return decorator
