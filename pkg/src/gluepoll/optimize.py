"""Allocation of a fixed glue budget over stations.

Minimizes the weighted approximate waiting cost sum_i c_i U_i subject to
sum_i E[G_i] = L.  Deterministic glue dominates any other glue law with the
same means, so the search is over deterministic lengths g_i only.  The
stationarity condition f_i(g_i) = kappa has a strictly increasing f_i, which
reduces the problem to nested bisection: invert each f_i, then find the
multiplier whose preimages add up to L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec
from .model import ConfigError, SystemConfig, utilizations
from .pcl import approx_mean_waiting

INNER_MAX_STEPS = 200
OUTER_TOL = 1e-11
OUTER_MAX_STEPS = 400


@dataclass(frozen=True)
class OptimizationProblem:
    """Base system (glue laws are ignored) plus a total glue budget."""

    cfg: SystemConfig
    budget: float

    def __post_init__(self) -> None:
        if not self.budget > 0.0:
            raise ConfigError(f"glue budget must be > 0, got {self.budget}")

    @property
    def n(self) -> int:
        return self.cfg.n

    @property
    def horizon(self) -> float:
        """(sum E[S_j] + L) / (1 - rho): the mean cycle under the budget."""
        es = math.fsum(st.switchover.mean for st in self.cfg.stations)
        return (es + self.budget) / (1.0 - self.cfg.rho)

    def with_glue(self, g) -> SystemConfig:
        stations = self.cfg.stations
        return SystemConfig(
            tuple(
                type(st)(st.lam, st.nu, st.service, st.switchover, DistributionSpec.deterministic(gi), st.weight)
                for st, gi in zip(stations, g)
            )
        )


@dataclass
class OptimizationResult:
    g_star: np.ndarray
    kappa_star: float
    objective: float
    bracket: tuple[float, float] = (math.nan, math.nan)
    outer_steps: int = 0
    inner_steps: list[int] = field(default_factory=list)


def objective_general(cfg: SystemConfig, budget: float | None = None) -> float:
    """sum_i c_i U_i for arbitrary glue laws, U_i the approximate mean wait."""
    if budget is not None:
        total = math.fsum(st.glue.mean for st in cfg.stations)
        if not math.isclose(total, budget, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"glue means add up to {total}, not the budget {budget}")
    weights = np.array([st.weight for st in cfg.stations])
    return float(weights @ approx_mean_waiting(cfg).mean_wait)


def objective_deterministic(problem: OptimizationProblem, g) -> float:
    """Closed-form sum_i c_i U_i for deterministic glue lengths ``g``."""
    g = np.asarray(g, dtype=float)
    cfg = problem.cfg
    if g.shape != (cfg.n,):
        raise ValueError(f"expected {cfg.n} glue lengths, got shape {g.shape}")
    if np.any(g <= 0.0):
        raise ValueError("glue lengths must be strictly positive")
    if not math.isclose(float(g.sum()), problem.budget, rel_tol=1e-9):
        raise ValueError(f"glue lengths add up to {g.sum()}, not the budget {problem.budget}")
    rho_list, rho = utilizations(cfg)
    rho_i = np.array(rho_list)
    c = np.array([st.weight for st in cfg.stations])
    nu = np.array([st.nu for st in cfg.stations])
    L = problem.budget
    es = math.fsum(st.switchover.mean for st in cfg.stations)
    es2 = math.fsum(st.switchover.variance for st in cfg.stations) + es * es
    lb2 = math.fsum(st.lam * st.service.raw_moment(2) for st in cfg.stations)
    sq = float(np.sum(rho_i**2))
    bracket = rho * (lb2 / (2 * (1 - rho)) + (es2 + 2 * L * es + L * L) / (2 * (es + L))) + (es + L) / (
        2 * (1 - rho)
    ) * (rho**2 + sq)
    first = float(np.sum(c * (1 + rho_i))) / (rho + sq) * bracket
    second = float(np.sum(c * (-1.0 - 1.0 / np.expm1(-nu * g)) * ((es + L) / (1 - rho) - g)))
    return first + second


def lagrange_f(problem: OptimizationProblem, i: int, g: float) -> float:
    """Derivative of the station-i cost term in g_i (strictly increasing)."""
    if not 0.0 < g <= problem.budget:
        raise ValueError(f"g = {g} outside (0, {problem.budget}]")
    st = problem.cfg[i]
    c, nu = st.weight, st.nu
    one_minus = -math.expm1(-nu * g)
    e = math.exp(-nu * g)
    return c - c / one_minus - c * nu * e / one_minus**2 * (problem.horizon - g)


def invert_f(problem: OptimizationProblem, i: int, kappa: float) -> float:
    """h_i(kappa): the g in (0, L) with f_i(g) = kappa, by bisection."""
    h, _ = _invert(problem, i, kappa)
    return h


def _invert(problem: OptimizationProblem, i: int, kappa: float) -> tuple[float, int]:
    L = problem.budget
    if kappa >= lagrange_f(problem, i, L):
        raise ValueError(f"kappa = {kappa} is not below f_{i}(L) = {lagrange_f(problem, i, L)}")
    lo, hi = 0.0, L
    steps = 0
    # run to the resolution of a double: the midpoint stops moving
    while steps < INNER_MAX_STEPS:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        steps += 1
        if lagrange_f(problem, i, mid) < kappa:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), steps


def optimize(problem: OptimizationProblem) -> OptimizationResult:
    """Optimal deterministic glue lengths under the budget constraint."""
    n, L = problem.n, problem.budget
    upper = min(lagrange_f(problem, i, L) for i in range(n))
    k_hi = upper - 1e-12 * max(1.0, abs(upper))

    def total(kappa: float) -> float:
        return math.fsum(invert_f(problem, i, kappa) for i in range(n))

    k_lo = min(lagrange_f(problem, i, L * 1e-6 / n) for i in range(n))
    width = max(1.0, k_hi - k_lo)
    for _ in range(2000):
        if total(k_lo) < L:
            break
        width *= 2.0
        k_lo = k_hi - width
    else:
        raise RuntimeError(f"could not bracket the multiplier below {k_hi}")
    if total(k_hi) <= L:
        raise RuntimeError(f"upper multiplier bracket {k_hi} does not exceed the budget")
    bracket = (k_lo, k_hi)

    steps = 0
    kappa = 0.5 * (k_lo + k_hi)
    while steps < OUTER_MAX_STEPS:
        kappa = 0.5 * (k_lo + k_hi)
        steps += 1
        s = total(kappa)
        if abs(s - L) < OUTER_TOL or kappa in (k_lo, k_hi):
            break
        if s < L:
            k_lo = kappa
        else:
            k_hi = kappa
    inverted = [_invert(problem, i, kappa) for i in range(n)]
    g_star = np.array([h for h, _ in inverted])
    return OptimizationResult(
        g_star=g_star,
        kappa_star=kappa,
        objective=objective_deterministic(problem, g_star),
        bracket=bracket,
        outer_steps=steps,
        inner_steps=[k for _, k in inverted],
    )
