"""Logging configuration for the application."""

import logging
import sys
from typing import Dict, Any, Optional, Sequence
from config.config import config

# Configure logging format
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# "stdout" or "stderr", looked up on every record
_console_target = "stdout"


class ConsoleHandler(logging.StreamHandler):
    """Stream handler writing to whichever of sys.stdout/sys.stderr is current."""

    @property
    def stream(self):
        return getattr(sys, _console_target)

    @stream.setter
    def stream(self, value):
        pass


def set_console_target(target: str) -> None:
    """Send every application logger to "stdout" or "stderr"."""
    global _console_target
    if target not in ("stdout", "stderr"):
        raise ValueError(f"Unknown console target: {target}")
    _console_target = target


def get_logger(name: str) -> logging.Logger:
    """
    Get a configured logger instance.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        log_level = getattr(logging, config.LOG_LEVEL.upper(), logging.INFO)
        logger.setLevel(log_level)

        handler = ConsoleHandler()
        handler.setLevel(log_level)
        handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
        logger.addHandler(handler)

        # Prevent duplicate logs
        logger.propagate = False

    return logger

def log_error(logger: logging.Logger, error: Exception, context: str = None):
    """Log error with context."""
    context_str = f" in {context}" if context else ""
    logger.error(f"Error{context_str}: {type(error).__name__}: {str(error)}")

def log_performance(logger: logging.Logger, operation: str, duration: float, details: Dict[str, Any] = None):
    """Log performance metrics."""
    details_str = f" - {details}" if details else ""
    logger.info(f"Performance - {operation}: {duration:.3f}s{details_str}")

def log_batch(logger: logging.Logger, batch_index: int, losses: Sequence[float], best: Optional[float]):
    """Log the outcome of one loop batch."""
    if losses:
        spread = f"min={min(losses):.4f} max={max(losses):.4f}"
    else:
        spread = "no scored samples"
    best_str = f"{best:.4f}" if best is not None else "n/a"
    logger.info(f"Batch {batch_index}: {len(losses)} samples, {spread}, running best={best_str}")

# Configure third-party loggers
def configure_external_loggers():
    """Configure logging levels for external libraries."""
    external_loggers = {
        'PIL': logging.WARNING,
        'multipart': logging.WARNING,
        'httpx': logging.WARNING,
        'urllib3': logging.WARNING,
    }

    for logger_name, level in external_loggers.items():
        logging.getLogger(logger_name).setLevel(level)

# Initialize external logger configuration
configure_external_loggers()
