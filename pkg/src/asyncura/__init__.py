"""Asynchronous MIMO-OFDM unsourced random access with timing and frequency
offsets: transmitter, GB-CR2 receiver and Monte Carlo harness."""

from .config import PhaseGrid, SystemConfig
from .harness import TrialResult, monte_carlo, nmse, pmd_pfa, run_trial
from .receiver import receive

__all__ = ["PhaseGrid", "SystemConfig", "TrialResult", "monte_carlo", "nmse", "pmd_pfa", "run_trial", "receive"]
__version__ = "0.1.0"
