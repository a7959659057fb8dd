"""Configurable parameter sweeps that write their results as CSV tables."""

from .config import EXPERIMENTS, ConfigError, config_hash, load_config, parse_config
from .results import ResultTable, batch_stderr
from .runners import (
    RUNNERS,
    carrier_peaks,
    detector_errors,
    loglog_slope,
    pulse_tail_reduction,
    run_detector_comparison,
    run_experiment,
    run_fec_vs_drift,
    run_passband_spectrum,
    run_pathloss_table,
    run_pulse_shaping,
    run_sir_sweep,
)
