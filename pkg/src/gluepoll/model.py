"""System parameters and global derived quantities of the polling model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .distributions import DistributionSpec

# Configurations with rho at or above this bound are rejected as unstable.
STABILITY_MARGIN = 1e-12


class ConfigError(ValueError):
    """Invalid or unstable system configuration."""


@dataclass(frozen=True)
class StationParams:
    """One station: Poisson arrivals, orbit retrials, and its three time laws.

    ``switchover`` is the switchover time *from* this station to the next one.
    """

    lam: float
    nu: float
    service: DistributionSpec
    switchover: DistributionSpec
    glue: DistributionSpec
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not (self.lam >= 0.0) or math.isinf(self.lam):
            raise ConfigError(f"arrival rate must be finite and >= 0, got {self.lam}")
        if not (self.nu > 0.0):
            raise ConfigError(f"retrial rate must be > 0, got {self.nu}")
        if not (self.weight > 0.0):
            raise ConfigError(f"weight must be > 0, got {self.weight}")
        if self.service.mean <= 0.0:
            raise ConfigError("service time must have a positive mean")

    @property
    def rho(self) -> float:
        return self.lam * self.service.mean


@dataclass(frozen=True)
class SystemConfig:
    """An ordered tuple of stations, visited cyclically in index order."""

    stations: tuple[StationParams, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "stations", tuple(self.stations))
        if len(self.stations) < 1:
            raise ConfigError("a system needs at least one station")
        rho = sum(st.rho for st in self.stations)
        if rho >= 1.0 - STABILITY_MARGIN:
            raise ConfigError(f"unstable system: total utilization rho = {rho:.6g} >= 1")
        idle = sum(st.switchover.mean + st.glue.mean for st in self.stations)
        if idle <= 0.0:
            raise ConfigError("total switchover plus glue time per cycle must be positive")

    def __len__(self) -> int:
        return len(self.stations)

    def __getitem__(self, i: int) -> StationParams:
        return self.stations[i % len(self.stations)]

    @property
    def n(self) -> int:
        return len(self.stations)

    @property
    def lambdas(self) -> tuple[float, ...]:
        return tuple(st.lam for st in self.stations)

    @property
    def rho(self) -> float:
        return utilizations(self)[1]

    def replace_station(self, i: int, **changes) -> "SystemConfig":
        stations = list(self.stations)
        stations[i] = replace(stations[i], **changes)
        return SystemConfig(tuple(stations))

    def map_stations(self, **changes) -> "SystemConfig":
        """Apply the same field changes to every station."""
        return SystemConfig(tuple(replace(st, **changes) for st in self.stations))


def make_config(
    lam: Sequence[float],
    nu: Sequence[float],
    service: Sequence[DistributionSpec],
    switchover: Sequence[DistributionSpec],
    glue: Sequence[DistributionSpec],
    weight: Sequence[float] | None = None,
) -> SystemConfig:
    """Build a config from per-station columns."""
    n = len(lam)
    weight = [1.0] * n if weight is None else list(weight)
    cols = (nu, service, switchover, glue, weight)
    if any(len(c) != n for c in cols):
        raise ConfigError("all per-station columns must have the same length")
    return SystemConfig(
        tuple(
            StationParams(float(lam[i]), float(nu[i]), service[i], switchover[i], glue[i], float(weight[i]))
            for i in range(n)
        )
    )


def wrap(i: int, n: int) -> int:
    """Station index modulo N (the model's cyclic index convention)."""
    return i % n


def utilizations(cfg: SystemConfig) -> tuple[tuple[float, ...], float]:
    per_station = tuple(st.rho for st in cfg.stations)
    return per_station, math.fsum(per_station)


def mean_cycle(cfg: SystemConfig) -> float:
    """E[C] = sum(E[G_i] + E[S_i]) / (1 - rho)."""
    _, rho = utilizations(cfg)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise ConfigError(f"unstable system: rho = {rho}")
    idle = math.fsum(st.glue.mean + st.switchover.mean for st in cfg.stations)
    return idle / (1.0 - rho)


def total_idle_moments(cfg: SystemConfig) -> tuple[float, float]:
    """Mean and second moment of X = sum(S_i + G_i), all terms independent."""
    parts = [st.switchover for st in cfg.stations] + [st.glue for st in cfg.stations]
    mean = math.fsum(d.mean for d in parts)
    var = math.fsum(d.variance for d in parts)
    return mean, var + mean * mean
