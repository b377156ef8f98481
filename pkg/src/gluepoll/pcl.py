"""Pseudo conservation law and the mean-waiting-time approximation.

These results hold for generally distributed glue periods.  The law gives
the work-weighted sum of mean waiting times exactly; the approximation
splits it over stations by assuming every station sees the same mean
residual cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ConfigError, SystemConfig, mean_cycle, total_idle_moments, utilizations


def retrial_multiplier(cfg: SystemConfig) -> np.ndarray:
    """G_i~(nu_i) / (1 - G_i~(nu_i)): mean extra cycles an orbit customer waits."""
    out = []
    for i, st in enumerate(cfg.stations):
        p = st.glue.lst(st.nu)
        if p >= 1.0:
            raise ConfigError(f"station {i}: zero-length glue period, orbit customers are never glued")
        out.append(p / (1.0 - p))
    return np.array(out)


def leftover_work(cfg: SystemConfig) -> np.ndarray:
    """E[F_i]: mean type-i work left at the end of a visit to station i."""
    rho_i = np.array(utilizations(cfg)[0])
    ec = mean_cycle(cfg)
    eg = np.array([st.glue.mean for st in cfg.stations])
    return rho_i**2 * ec + rho_i * retrial_multiplier(cfg) * (ec - eg)


@dataclass(frozen=True)
class PclReport:
    leftover: np.ndarray
    service_term: float
    idle_term: float
    cross_term: float
    retrial_term: float

    @property
    def lhs_weighted_wait(self) -> float:
        return self.service_term + self.idle_term + self.cross_term + self.retrial_term


def _service_residual(cfg: SystemConfig, rho: float) -> float:
    return math.fsum(st.lam * st.service.raw_moment(2) for st in cfg.stations) / (2.0 * (1.0 - rho))


def pcl_rhs(cfg: SystemConfig) -> PclReport:
    """Exact value of sum_i rho_i E[W_i], split into its four terms."""
    rho_list, rho = utilizations(cfg)
    rho_i = np.array(rho_list)
    ex, ex2 = total_idle_moments(cfg)
    eg = np.array([st.glue.mean for st in cfg.stations])
    mult = retrial_multiplier(cfg)
    return PclReport(
        leftover=leftover_work(cfg),
        service_term=rho * _service_residual(cfg, rho),
        idle_term=rho * ex2 / (2.0 * ex),
        cross_term=(rho**2 + float(np.sum(rho_i**2))) * ex / (2.0 * (1.0 - rho)),
        retrial_term=float(np.sum(rho_i * mult * (ex / (1.0 - rho) - eg))),
    )


def residual_cycle(cfg: SystemConfig) -> float:
    """Station-independent mean residual cycle pinned down by the law."""
    rho_list, rho = utilizations(cfg)
    if rho == 0.0:
        raise ConfigError("residual cycle is undefined for an empty system (rho = 0)")
    sq = math.fsum(r * r for r in rho_list)
    ex, ex2 = total_idle_moments(cfg)
    head = _service_residual(cfg, rho) + ex2 / (2.0 * ex) + rho * ex / (2.0 * (1.0 - rho))
    tail = ex / (2.0 * (1.0 - rho))
    return (rho * head + sq * tail) / (rho + sq)


@dataclass(frozen=True)
class ApproxReport:
    residual_cycle: float
    mean_wait: np.ndarray
    retrial_multiplier: np.ndarray


def approx_mean_waiting(cfg: SystemConfig) -> ApproxReport:
    """E[W_j] ~ (1 + rho_j) E[R_c] + G_j~(nu_j)/(1 - G_j~(nu_j)) (E[C] - E[G_j])."""
    rho_i = np.array(utilizations(cfg)[0])
    rc = residual_cycle(cfg)
    mult = retrial_multiplier(cfg)
    eg = np.array([st.glue.mean for st in cfg.stations])
    waits = (1.0 + rho_i) * rc + mult * (mean_cycle(cfg) - eg)
    return ApproxReport(rc, waits, mult)
