"""
Shared rich console and logger factory.

The CLI prints status lines, panels and tables through `console`; library
modules log through `get_logger(__name__)`, which routes records to the same
console via RichHandler.
"""

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

console = Console(stderr=True)

_configured = False


def _configure_root() -> None:
    global _configured
    if _configured:
        return
    level = os.getenv("STAR_MEC_LOG_LEVEL", "WARNING").upper()
    handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
    root = logging.getLogger("star_mec")
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger under the `star_mec` namespace.

    Args:
        name: Module name, usually __name__

    Returns:
        Logger writing through the shared rich console
    """
    _configure_root()
    return logging.getLogger(f"star_mec.{name}")


def set_verbosity(verbose: bool) -> None:
    """Switch the simulator loggers between DEBUG and the env-configured level."""
    _configure_root()
    level = "DEBUG" if verbose else os.getenv("STAR_MEC_LOG_LEVEL", "WARNING").upper()
    logging.getLogger("star_mec").setLevel(level)
