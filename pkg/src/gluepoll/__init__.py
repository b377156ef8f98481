"""Gated polling systems with retrial orbits and glue periods.

Exact station-size moments for exponential glue periods, a mean waiting
time approximation for general glue periods, glue-budget optimization and
a discrete-event simulator.
"""

import logging

from .distributions import DistributionSpec
from .exact import exact_mean_waiting, station_size_stats
from .model import ConfigError, StationParams, SystemConfig, make_config, mean_cycle
from .optimize import OptimizationProblem, optimize
from .pcl import approx_mean_waiting, pcl_rhs
from .simulation import SimConfig, simulate, verify_pcl

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "ConfigError",
    "DistributionSpec",
    "OptimizationProblem",
    "SimConfig",
    "StationParams",
    "SystemConfig",
    "approx_mean_waiting",
    "exact_mean_waiting",
    "make_config",
    "mean_cycle",
    "optimize",
    "pcl_rhs",
    "simulate",
    "station_size_stats",
    "verify_pcl",
]
