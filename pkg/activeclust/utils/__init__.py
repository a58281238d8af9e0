"""Utility modules for running experiments and writing results."""

from .csv_util import write_rounds, write_rows
from .run_util import RunSpec, run_all

__all__ = ["RunSpec", "run_all", "write_rounds", "write_rows"]
