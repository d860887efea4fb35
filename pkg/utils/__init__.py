"""
Utils package for the STAR-RIS MEC simulator.

Console/logging setup, configuration loading, CSV records and rich tables.
"""

from .console import console, get_logger, set_verbosity
from .diff import print_diff, print_summary

__all__ = [
    "console",
    "get_logger",
    "set_verbosity",
    "print_diff",
    "print_summary",
]
