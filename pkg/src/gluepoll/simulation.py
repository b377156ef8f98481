"""Discrete-event simulation with batch-means confidence intervals.

The event loop runs cycle by cycle.  For each station in turn it draws a
glue length g.  Every orbit customer present at the glue start sticks iff
an exponential(nu_i) retrial clock rings before g; the clock value is its
glue epoch.  New arrivals during the glue stick at their arrival epoch.
The visit serves exactly the glued customers, in glue-epoch order by
default.  Every other arrival joins its station's orbit.

Retrials outside glue periods have no effect, so only this race inside
each glue window is simulated.  That is an exact equivalence, not an
approximation.

Random streams
--------------
``rng_streams(seed, replication)`` builds one ``numpy`` PCG64 generator per
purpose tag from ``SeedSequence(seed, spawn_key=(replication, tag_index))``
with tags in the order of :data:`PURPOSES`.  Gamma variates use numpy's
exact rejection samplers: Marsaglia-Tsang for shape >= 1 and the
Ahrens-Dieter GS algorithm for shape < 1.  The compiled kernel calls the
same routines.  A fixed seed reproduces results bit for bit on one platform.

Per-batch table
---------------
:func:`batch_table` returns one row per batch.  Its columns are
``batch, duration, cycles``, then ``wait_<i>``, ``size_<i>``,
``size_oq_<i>``, ``workload_<i>`` and ``served_<i>`` for every station,
then ``weighted_wait`` and ``workload``.  Stations are numbered from 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernel as K
from .model import ConfigError, SystemConfig
from .pcl import pcl_rhs

log = logging.getLogger(__name__)

PURPOSES = ("arrivals", "services", "switchovers", "glue", "retrials")

POLICIES = {
    "glue-epoch": K.ORDER_GLUE_EPOCH,
    "arrival": K.ORDER_ARRIVAL,
    "reverse-glue-epoch": K.ORDER_REVERSE_EPOCH,
}


@dataclass(frozen=True)
class SimConfig:
    system: SystemConfig
    total_cycles: int = 10**6
    batches: int = 10
    warmup_cycles: int = 10**4
    seed: int = 0
    policy: str = "glue-epoch"
    replication: int = 0

    def __post_init__(self) -> None:
        if self.batches < 2:
            raise ConfigError(f"need at least 2 batches, got {self.batches}")
        if self.total_cycles <= 0 or self.total_cycles % self.batches:
            raise ConfigError(
                f"total_cycles ({self.total_cycles}) must be a positive multiple of batches ({self.batches})"
            )
        if self.warmup_cycles < 0:
            raise ConfigError("warmup_cycles must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown service-order policy {self.policy!r}; choose from {sorted(POLICIES)}")


@dataclass(frozen=True)
class Interval:
    """Batch-means point estimate with a symmetric Student-t interval."""

    mean: np.ndarray | float
    half_width: np.ndarray | float

    @property
    def lower(self):
        return self.mean - self.half_width

    @property
    def upper(self):
        return self.mean + self.half_width

    def contains(self, x) -> np.ndarray | bool:
        return (self.lower <= x) & (x <= self.upper)


@dataclass
class Trace:
    """Optional event records for invariant checks (first rows only).

    glue: station, g, orbit size at glue start, glued from orbit, new glued.
    visits: station, glue start, visit start, visit end, visit index.
    customers: station, arrival, service start, glue epoch, service time,
    visit index.
    """

    glue: np.ndarray
    visits: np.ndarray
    customers: np.ndarray


@dataclass
class SimResult:
    config: SimConfig
    wait: Interval
    size: Interval
    size_oq: Interval
    size_second: Interval
    workload_station: Interval
    weighted_wait: Interval
    workload: Interval
    cycle: Interval
    cycles: int
    batch_means: dict[str, np.ndarray] = field(repr=False)
    trace: Trace | None = field(default=None, repr=False)

    @property
    def size_variance(self) -> np.ndarray:
        return self.size_second.mean - self.size.mean**2


def rng_streams(seed: int, replication: int = 0) -> dict[str, np.random.Generator]:
    """One independent generator per purpose tag."""
    return {
        tag: np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication, k))))
        for k, tag in enumerate(PURPOSES)
    }


def _dist_arrays(dists):
    kind = np.array([K.KIND_CODES[d.kind] for d in dists], dtype=np.int64)
    p1 = np.empty(len(dists))
    p2 = np.zeros(len(dists))
    for j, d in enumerate(dists):
        if d.kind == "deterministic":
            p1[j] = d.value
        elif d.kind == "exponential":
            p1[j] = d.mean_
        else:
            p1[j], p2[j] = d.shape, d.scale
    return kind, p1, p2


def t_quantile(batches: int) -> float:
    return float(stats.t.ppf(0.975, batches - 1))


def _interval(samples: np.ndarray) -> Interval:
    """Batch axis first."""
    b = samples.shape[0]
    mean = samples.mean(axis=0)
    sd = samples.std(axis=0, ddof=1)
    return Interval(mean, t_quantile(b) * sd / math.sqrt(b))


def simulate(cfg: SimConfig, trace_rows: int = 0) -> SimResult:
    """Run one replication; ``trace_rows > 0`` also records the first events."""
    system = cfg.system
    lam = np.array(system.lambdas, dtype=float)
    nu = np.array([st.nu for st in system.stations], dtype=float)
    svc = _dist_arrays([st.service for st in system.stations])
    sw = _dist_arrays([st.switchover for st in system.stations])
    gl = _dist_arrays([st.glue for st in system.stations])
    gens = rng_streams(cfg.seed, cfg.replication)
    glue_tr = np.zeros((trace_rows, 5))
    visit_tr = np.zeros((trace_rows, 5))
    cust_tr = np.zeros((trace_rows, 6))
    log.debug("simulating %d cycles in %d batches (warmup %d)", cfg.total_cycles, cfg.batches, cfg.warmup_cycles)
    acc, meta, counts = K.run_kernel(
        lam, nu, *svc, *sw, *gl,
        cfg.warmup_cycles, cfg.batches, cfg.total_cycles // cfg.batches, POLICIES[cfg.policy],
        *(gens[tag] for tag in PURPOSES),
        glue_tr, visit_tr, cust_tr,
    )
    trace = None
    if trace_rows:
        trace = Trace(glue_tr[: counts[0]], visit_tr[: counts[1]], cust_tr[: counts[2]])
    return _summarize(cfg, acc, meta, trace)


def _summarize(cfg: SimConfig, acc: np.ndarray, meta: np.ndarray, trace: Trace | None) -> SimResult:
    rho_i = np.array([st.rho for st in cfg.system.stations])
    duration = meta[:, 0:1]
    served = acc[:, K.ACC_WCOUNT, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        wait = np.where(served > 0, acc[:, K.ACC_WSUM, :] / served, np.nan)
    size = acc[:, K.ACC_M, :] / duration
    size_oq = (acc[:, K.ACC_M, :] - acc[:, K.ACC_BUSY, :]) / duration
    size2 = acc[:, K.ACC_M2, :] / duration
    work = acc[:, K.ACC_V, :] / duration
    # stations without traffic contribute nothing to the weighted sum
    weighted = np.where(rho_i > 0, np.nan_to_num(wait) * rho_i, 0.0).sum(axis=1)
    cycle_len = meta[:, 0] / meta[:, 1]
    batch_means = {
        "duration": meta[:, 0].copy(),
        "cycles": meta[:, 1].copy(),
        "wait": wait,
        "size": size,
        "size_oq": size_oq,
        "size_second": size2,
        "workload_station": work,
        "served": served,
        "weighted_wait": weighted,
        "workload": work.sum(axis=1),
        "cycle": cycle_len,
    }
    return SimResult(
        config=cfg,
        wait=_interval(wait),
        size=_interval(size),
        size_oq=_interval(size_oq),
        size_second=_interval(size2),
        workload_station=_interval(work),
        weighted_wait=_interval(weighted),
        workload=_interval(work.sum(axis=1)),
        cycle=_interval(cycle_len),
        cycles=int(meta[:, 1].sum()),
        batch_means=batch_means,
        trace=trace,
    )


@dataclass(frozen=True)
class PclCheck:
    passed: bool
    law: float
    simulated: Interval


def verify_pcl(result: SimResult, cfg: SystemConfig) -> PclCheck:
    """Pass iff the exact law value lies in the simulated CI of sum rho_i E[W_i]."""
    law = pcl_rhs(cfg).lhs_weighted_wait
    return PclCheck(bool(result.weighted_wait.contains(law)), law, result.weighted_wait)


def batch_table(result: SimResult) -> tuple[list[str], list[list[float]]]:
    """Per-batch raw means as (header, rows); see the module docstring."""
    bm = result.batch_means
    n = result.config.system.n
    header = ["batch", "duration", "cycles"]
    for i in range(1, n + 1):
        header += [f"wait_{i}", f"size_{i}", f"size_oq_{i}", f"workload_{i}", f"served_{i}"]
    header += ["weighted_wait", "workload"]
    rows = []
    for b in range(len(bm["duration"])):
        row = [b + 1, bm["duration"][b], bm["cycles"][b]]
        for i in range(n):
            row += [bm["wait"][b, i], bm["size"][b, i], bm["size_oq"][b, i], bm["workload_station"][b, i], bm["served"][b, i]]
        row += [bm["weighted_wait"][b], bm["workload"][b]]
        rows.append(row)
    return header, rows
