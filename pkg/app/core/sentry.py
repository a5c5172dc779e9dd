"""
Sentry configuration for error monitoring of long-running batch jobs
"""
import logging
from typing import Any, Callable, Dict, Optional

from sentry_sdk import init as sentry_init
from sentry_sdk.integrations.logging import LoggingIntegration

from app.core.config import get_config
from app.core.exceptions import SimulatorError


class SentryConfig:
    """Sentry configuration manager"""

    def __init__(self):
        self.config = get_config()
        self.dsn = self.config.sentry.dsn
        self.environment = self.config.environment
        self.debug = self.config.debug

    def is_enabled(self) -> bool:
        """Check if Sentry is enabled"""
        return bool(self.dsn and self.dsn.strip())

    def get_before_send(self) -> Callable:
        """Filter events before sending to Sentry"""
        def before_send(event: Dict[str, Any], hint: Dict[str, Any]) -> Optional[Dict[str, Any]]:
            if "exc_info" in hint:
                exception = hint["exc_info"][1]
                if isinstance(exception, (KeyboardInterrupt, SystemExit)):
                    return None
                # validation failures are user input, not defects
                if isinstance(exception, SimulatorError) and exception.exit_code == 2:
                    return None

            event.setdefault("tags", {})
            event["tags"]["environment"] = self.environment
            return event

        return before_send

    def init_sentry(self) -> bool:
        """Initialize Sentry with configuration"""
        if not self.is_enabled():
            logging.getLogger(__name__).debug("Sentry is not enabled (SENTRY_DSN not set)")
            return False

        try:
            sentry_init(
                dsn=self.dsn,
                environment=self.environment,
                debug=self.debug,
                integrations=[LoggingIntegration(level=logging.INFO, event_level=logging.ERROR)],
                before_send=self.get_before_send(),
                send_default_pii=False,
                release=self.config.sentry.release,
            )
            logging.getLogger(__name__).info(f"Sentry initialized for environment: {self.environment}")
            return True
        except Exception as e:
            logging.getLogger(__name__).error(f"Failed to initialize Sentry: {e}")
            return False

    def capture_exception(self, exception: Exception, context: Optional[Dict[str, Any]] = None) -> None:
        """Capture an exception with run context"""
        if not self.is_enabled():
            return

        try:
            import sentry_sdk
            with sentry_sdk.push_scope() as scope:
                for key, value in (context or {}).items():
                    scope.set_extra(key, value)
                sentry_sdk.capture_exception(exception)
        except Exception as e:
            logging.getLogger(__name__).error(f"Failed to capture exception in Sentry: {e}")


def init_sentry() -> bool:
    """Initialize Sentry"""
    return SentryConfig().init_sentry()


def capture_exception(exception: Exception, context: Optional[Dict[str, Any]] = None) -> None:
    """Capture an exception in Sentry"""
    SentryConfig().capture_exception(exception, context)
