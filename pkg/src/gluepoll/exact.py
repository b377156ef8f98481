"""Exact station-size moments for exponentially distributed glue periods.

The engine works with the scaled moments ``Phi_i^(l,m)`` of the glue-period
transform ``phi_i(z, w)``: ``l`` is a multi-index over the orbit counts of
all stations and ``m`` the power of the glued-customer variable ``w``.  The
order-1 entries have closed forms; every higher order solves a nonnegative
linear system by the monotone fixed-point iteration ``x <- b + A x`` started
from zero.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .model import ConfigError, SystemConfig, mean_cycle, utilizations
from .series import CoefficientTables

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 1_000_000

MultiIndex = tuple[int, ...]


class ConvergenceError(RuntimeError):
    """The fixed-point iteration hit its iteration cap."""


def unit(n: int, *idx: int) -> MultiIndex:
    """Multi-index with a one added at every position in ``idx``."""
    out = [0] * n
    for j in idx:
        out[j] += 1
    return tuple(out)


def multi_indices(n: int, total: int) -> Iterator[MultiIndex]:
    """All length-n nonnegative integer vectors with the given sum."""
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in multi_indices(n - 1, total - first):
            yield (first,) + rest


def sub_indices(l: MultiIndex) -> Iterator[MultiIndex]:
    """All l' <= l componentwise."""
    return itertools.product(*(range(x + 1) for x in l))


def _minus(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x - y for x, y in zip(a, b))


def require_exponential_glue(cfg: SystemConfig) -> None:
    bad = [i for i, st in enumerate(cfg.stations) if st.glue.kind != "exponential"]
    if bad:
        raise ConfigError(
            f"exact analysis requires exponential glue periods; stations {bad} are not exponential"
        )


@dataclass
class PhiTable:
    """Scaled moments keyed by ``(station, l, m)``."""

    cfg: SystemConfig
    values: dict[tuple[int, MultiIndex, int], float] = field(default_factory=dict)
    order: int = 0
    tol: float = DEFAULT_TOL
    iterations: dict[int, int] = field(default_factory=dict)
    residuals: dict[int, float] = field(default_factory=dict)

    def __call__(self, i: int, l: MultiIndex, m: int) -> float:
        i %= self.cfg.n
        k = sum(l) + m
        if k > self.order:
            raise KeyError(f"Phi of order {k} requested but table is complete only to order {self.order}")
        return self.values[(i, tuple(l), m)]

    def entries(self, k: int) -> list[tuple[int, MultiIndex, int]]:
        return [key for key in self.values if sum(key[1]) + key[2] == k]


def _gammas(cfg: SystemConfig) -> list[float]:
    return [1.0 / st.glue.mean for st in cfg.stations]


def phi_first_moments(cfg: SystemConfig) -> PhiTable:
    """Order-0 and order-1 entries from their closed forms."""
    require_exponential_glue(cfg)
    n = cfg.n
    g = _gammas(cfg)
    lam = cfg.lambdas
    rho_i, _ = utilizations(cfg)
    ec = mean_cycle(cfg)
    es = [st.switchover.mean for st in cfg.stations]
    table = PhiTable(cfg, order=1)
    zero = (0,) * n
    for i in range(n):
        table.values[(i, zero, 0)] = 1.0 / g[i]
        table.values[(i, zero, 1)] = lam[i] / g[i] * ec
    for j in range(n):
        col = {j: lam[j] / cfg[j].nu * (ec - 1.0 / g[j])}
        # backward recursion i = j-1, j-2, ..., j-N+1 (indices mod N)
        for step in range(1, n):
            i = (j - step) % n
            nxt = (i + 1) % n
            delta = 1.0 if nxt == j else 0.0
            col[i] = g[nxt] / g[i] * col[nxt] + lam[j] / g[i] * (
                (delta - rho_i[i]) * ec - 1.0 / g[nxt] - es[i]
            )
        for i, v in col.items():
            table.values[(i, unit(n, j), 0)] = v
    table.iterations[1] = 0
    table.residuals[1] = 0.0
    return table


def _same_order_system(cfg, table: PhiTable, coeffs: CoefficientTables, k: int):
    """Assemble ``x = b + A x`` for all order-k entries."""
    n = cfg.n
    g = _gammas(cfg)
    lam = cfg.lambdas
    nu = [st.nu for st in cfg.stations]
    keys = [(i, l, k - sum(l)) for i in range(n) for s in range(k + 1) for l in multi_indices(n, s)]
    index = {key: pos for pos, key in enumerate(keys)}
    size = len(keys)
    a = np.zeros((size, size))
    b = np.zeros(size)
    for pos, (i, l, m) in enumerate(keys):
        denom = g[i] + l[i] * nu[i]
        prev = (i - 1) % n
        if m >= 1:
            b[pos] += lam[i] * table(i, l, m - 1)
            up = list(l)
            up[i] += 1
            a[pos, index[(i, tuple(up), m - 1)]] += (l[i] + 1) * nu[i]
        for j in range(n):
            if j != i and l[j] >= 1:
                b[pos] += lam[j] * table(i, _minus(l, unit(n, j)), m)
        if m == 0:
            for lp in sub_indices(l):
                rest = _minus(l, lp)
                r = sum(rest)
                for kk in range(r):
                    b[pos] += g[prev] * table(prev, lp, kk) * coeffs.gamma(prev, kk, rest)
                a[pos, index[(prev, lp, r)]] += g[prev] * coeffs.gamma(prev, r, rest)
        a[pos] /= denom
        b[pos] /= denom
    return keys, a, b


def fixed_point(a: np.ndarray, b: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                trace: list | None = None) -> tuple[np.ndarray, int, float]:
    """Iterate x <- b + A x from x = 0 until the update is below tolerance.

    The tolerance is scaled by ``max(1, max|x|)``.  Returns the iterate, the
    number of updates performed and the final scaled residual.
    """
    x = np.zeros_like(b)
    for it in range(1, max_iter + 1):
        new = b + a @ x
        change = float(np.max(np.abs(new - x))) if x.size else 0.0
        x = new
        if trace is not None:
            trace.append(x.copy())
        scale = max(1.0, float(np.max(np.abs(x)))) if x.size else 1.0
        if change <= tol * scale:
            resid = float(np.max(np.abs(b + a @ x - x))) / scale if x.size else 0.0
            return x, it, resid
    resid = float(np.max(np.abs(b + a @ x - x))) / max(1.0, float(np.max(np.abs(x))))
    raise ConvergenceError(f"fixed point did not converge in {max_iter} iterations (residual {resid:.3e})")


def phi_order_system(cfg: SystemConfig, table: PhiTable, k: int, coeffs: CoefficientTables | None = None):
    """The order-k linear system (keys, A, b); ``table`` must be complete to k-1."""
    if table.order < k - 1:
        raise ValueError(f"table complete to order {table.order}; order {k} needs {k - 1}")
    coeffs = coeffs or CoefficientTables(cfg, max(k, 1))
    return _same_order_system(cfg, table, coeffs, k)


def phi_higher_moments(
    cfg: SystemConfig,
    order: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    base: PhiTable | None = None,
) -> PhiTable:
    """Complete the Phi table to ``order`` by fixed-point iteration per order."""
    table = base if base is not None else phi_first_moments(cfg)
    table.tol = tol
    coeffs = CoefficientTables(cfg, max(order, 1))
    for k in range(table.order + 1, order + 1):
        keys, a, b = _same_order_system(cfg, table, coeffs, k)
        x, iters, resid = fixed_point(a, b, tol, max_iter)
        log.debug("order %d: %d unknowns, %d iterations, residual %.2e", k, len(keys), iters, resid)
        for key, v in zip(keys, x):
            table.values[key] = float(v)
        table.order = k
        table.iterations[k] = iters
        table.residuals[k] = resid
    return table


class PsiMoments:
    """Scaled moments of station sizes at arbitrary epochs of each period type.

    ``g``, ``v`` and ``s`` give the unweighted tensors; ``wg``, ``wv``, ``ws``
    give them multiplied by the fraction of time spent in the corresponding
    period (E[G_i]/E[C], rho_i, E[S_i]/E[C]), which stays finite when
    rho_i = 0 or E[S_i] = 0.
    """

    def __init__(self, cfg: SystemConfig, phi: PhiTable, coeffs: CoefficientTables | None = None):
        self.cfg = cfg
        self.phi = phi
        self.coeffs = coeffs or CoefficientTables(cfg, max(phi.order, 1))
        self.gam = _gammas(cfg)
        self.ec = mean_cycle(cfg)
        self.rho_i, _ = utilizations(cfg)

    def _need(self, k: int) -> None:
        if self.phi.order < k:
            raise ValueError(f"Phi table complete to order {self.phi.order}, need {k}")

    def theta(self, i: int, l: MultiIndex) -> float:
        self._need(sum(l))
        total = 0.0
        for lp in sub_indices(l):
            rest = _minus(l, lp)
            for k in range(sum(rest) + 1):
                total += self.phi(i, lp, k) * self.coeffs.delta(i, k, rest)
        return total

    def wg(self, i: int, l: MultiIndex, m: int) -> float:
        return self.phi(i, l, m) / self.ec

    def wv(self, i: int, l: MultiIndex, m: int) -> float:
        self._need(sum(l) + m + 1)
        total = 0.0
        for lp in sub_indices(l):
            rest = _minus(l, lp)
            for k in range(sum(rest) + 1):
                total += self.phi(i, lp, m + k + 1) * self.coeffs.eta(i, k, rest)
        return self.gam[i] * total / self.ec

    def ws(self, i: int, l: MultiIndex) -> float:
        total = 0.0
        for lp in sub_indices(l):
            total += self.theta(i, lp) * self.coeffs.zeta(i, _minus(l, lp))
        return self.gam[i] * total / self.ec

    def g(self, i: int, l: MultiIndex, m: int) -> float:
        return self.gam[i] * self.phi(i, l, m)

    def v(self, i: int, l: MultiIndex, m: int) -> float:
        if self.rho_i[i] == 0.0:
            raise ValueError(f"station {i} has zero utilization; visit-period moments are undefined")
        return self.wv(i, l, m) / self.rho_i[i]

    def s(self, i: int, l: MultiIndex) -> float:
        es = self.cfg[i].switchover.mean
        if es == 0.0:
            raise ValueError(f"station {i} has zero switchover time; switchover moments are undefined")
        return self.ws(i, l) * self.ec / es

    def period_sum(self, l: MultiIndex) -> float:
        """Time-weighted sum over all stations and period types at (l, 0)."""
        return math.fsum(self.wv(k, l, 0) + self.wg(k, l, 0) + self.ws(k, l) for k in range(self.cfg.n))


def psi_moments(cfg: SystemConfig, phi: PhiTable) -> PsiMoments:
    return PsiMoments(cfg, phi)


@dataclass
class StationStats:
    """Per-station station-size statistics and exact mean waiting times."""

    mean_orbit: np.ndarray
    mean_orbit_queue: np.ndarray
    mean_total: np.ndarray
    variance: np.ndarray | None = None
    scv: np.ndarray | None = None
    second_moment: np.ndarray | None = None  # E[M_i M_j], raw moments incl. diagonal
    correlation: np.ndarray | None = None
    mean_wait: np.ndarray | None = None
    phi: PhiTable | None = None


def _check_positive_lambda(cfg: SystemConfig) -> None:
    zero = [i for i, st in enumerate(cfg.stations) if st.lam == 0.0]
    if zero:
        raise ConfigError(f"stations {zero} have zero arrival rate; mean waiting time is undefined")


def station_size_stats(cfg: SystemConfig, order: int = 3, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER) -> StationStats:
    """Means (order=2) or means plus second moments (order=3) of station sizes."""
    if order not in (2, 3):
        raise ValueError("order must be 2 (means) or 3 (second moments)")
    require_exponential_glue(cfg)
    n = cfg.n
    phi = phi_higher_moments(cfg, order, tol, max_iter)
    psi = PsiMoments(cfg, phi)
    rho_i = np.array(psi.rho_i)
    lam = np.array(cfg.lambdas)
    zero = (0,) * n

    m_o = np.array([psi.period_sum(unit(n, i)) for i in range(n)])
    m_oq = m_o + np.array([psi.wv(i, zero, 1) + psi.wg(i, zero, 1) for i in range(n)])
    m = m_oq + rho_i
    with np.errstate(divide="ignore", invalid="ignore"):
        wait = np.where(lam > 0, m_oq / np.where(lam > 0, lam, 1.0), np.nan)
    stats = StationStats(m_o, m_oq, m, mean_wait=wait, phi=phi)
    if order < 3:
        return stats

    second = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            if i != j:
                oo = psi.period_sum(unit(n, i, j))
                oq = oo + (psi.wv(i, unit(n, j), 1) + psi.wv(j, unit(n, i), 1)
                           + psi.wg(i, unit(n, j), 1) + psi.wg(j, unit(n, i), 1))
                second[i, j] = second[j, i] = oq + psi.wv(i, unit(n, j), 0) + psi.wv(j, unit(n, i), 0)
            else:
                # factorial moments E[M(M-1)]: generating-function derivatives
                fo = 2.0 * psi.period_sum(unit(n, i, i))
                foq = fo + 2.0 * (psi.wv(i, unit(n, i), 1) + psi.wg(i, unit(n, i), 1)
                                  + psi.wv(i, zero, 2) + psi.wg(i, zero, 2))
                fm = foq + 2.0 * (psi.wv(i, unit(n, i), 0) + psi.wv(i, zero, 1))
                second[i, i] = fm + m[i]
    var = np.diag(second) - m**2
    with np.errstate(divide="ignore", invalid="ignore"):
        scv = np.where(m > 0, var / m**2, np.nan)
        cov = second - np.outer(m, m)
        sd = np.sqrt(np.clip(var, 0.0, None))
        corr = cov / np.outer(sd, sd)
    stats.variance = var
    stats.scv = scv
    stats.second_moment = second
    stats.correlation = corr
    return stats


def exact_mean_waiting(cfg: SystemConfig, tol: float = DEFAULT_TOL) -> np.ndarray:
    """E[W_i] = E[M_i^oq] / lambda_i (Little's law on not-yet-served customers)."""
    _check_positive_lambda(cfg)
    return station_size_stats(cfg, order=2, tol=tol).mean_wait
