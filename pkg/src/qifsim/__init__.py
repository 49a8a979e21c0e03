"""Simulation toolkit for a coherence-preserving photonic quantum interface.

Models a difference-frequency conversion stage between a visible-band
emitter and the telecom O-band, together with everything needed to
characterize it: quasi-phase-matching dispersion, conversion and noise
budgets, time-bin qubit interferometry, single-photon detection, a
reproducible Monte Carlo experiment engine, and repeater-link rate
comparisons. The ``qifsim`` CLI drives all of it from scenario files.
"""

__version__ = "0.1.0"

from . import cli, conversion, detection, montecarlo, qpm, repeater, scenario, timebin
from .errors import ConfigError, DomainError, FitError, QifsimError, SolverError

__all__ = [
    "__version__",
    "cli",
    "conversion",
    "detection",
    "montecarlo",
    "qpm",
    "repeater",
    "scenario",
    "timebin",
    "QifsimError",
    "DomainError",
    "SolverError",
    "FitError",
    "ConfigError",
]
