"""
Simulation harness: fixed-step integration, scenario runs and result files.
"""

from .integrator import heun_step, integrate
from .output import build_error_figure, emit_csv, emit_plots, read_csv, write_summary
from .record import SimRecord, record_columns
from .runner import (
    ClosedLoop,
    RunSummary,
    initial_state,
    run_and_write,
    run_scenario,
    run_suite,
    suite_configs,
    summarize,
)

__all__ = [
    # Integration
    "heun_step",
    "integrate",
    # Records
    "SimRecord",
    "record_columns",
    # Runs
    "ClosedLoop",
    "RunSummary",
    "initial_state",
    "run_scenario",
    "run_and_write",
    "run_suite",
    "suite_configs",
    "summarize",
    # Files
    "emit_csv",
    "read_csv",
    "emit_plots",
    "build_error_figure",
    "write_summary",
]
