"""Published numerical tables: configs, reference values and comparisons.

Reference values live in ``data/tables.json``.  Analytic entries are
checked against the printed number with an absolute tolerance that is at
least half a unit of the last printed decimal, so a value printed as
``121.0`` is matched to +-0.05.  Simulated entries are checked for
containment in the printed 95% bounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal
from functools import lru_cache
from importlib import resources
from typing import Iterable

import numpy as np

from .distributions import DistributionSpec
from .exact import station_size_stats
from .model import SystemConfig, make_config
from .optimize import OptimizationProblem, optimize
from .pcl import approx_mean_waiting
from .simulation import SimConfig, simulate

TABLES = ("table1", "table2", "table4", "table5", "table6", "table7", "table8")
OPTIMIZER_TABLES = ("table5", "table6", "table7", "table8")
FULL_SCALE_CYCLES = 10**6

Det = DistributionSpec.deterministic
Exp = DistributionSpec.exponential
Gam = DistributionSpec.gamma


@lru_cache(maxsize=1)
def load_tables() -> dict:
    text = resources.files("gluepoll").joinpath("data/tables.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class Comparison:
    table: str
    row: str
    quantity: str
    published: float
    computed: float
    lower: float
    upper: float

    @property
    def deviation(self) -> float:
        return self.computed - self.published

    @property
    def passed(self) -> bool:
        return bool(self.lower <= self.computed <= self.upper)


def printed_tolerance(printed: str, abs_tol: float) -> float:
    """abs_tol, widened to half a unit of the last printed decimal."""
    exponent = Decimal(printed).as_tuple().exponent
    return max(abs_tol, 0.5 * 10.0**exponent)


def _within(table, row, quantity, printed, computed, abs_tol) -> Comparison:
    published = float(printed)
    tol = printed_tolerance(printed, abs_tol) if isinstance(printed, str) else abs_tol
    return Comparison(table, row, quantity, published, float(computed), published - tol, published + tol)


def _relative(table, row, quantity, printed, computed, rel) -> Comparison:
    published = float(printed)
    return Comparison(table, row, quantity, published, float(computed), published * (1 - rel), published * (1 + rel))


# configs


def table1_config(row: int) -> SystemConfig:
    t = load_tables()["table1"]
    b = t["base"]
    lam2, svc2, sw2, g2, nu2 = t["rows"][row]["params"]
    return make_config(
        [b["lambda1"], lam2],
        [b["nu1"], nu2],
        [Exp(b["service1"]), Exp(svc2)],
        [Exp(b["switchover1"]), Exp(sw2)],
        [Det(b["glue1"]), Det(g2)],
    )


def table2_config(row: int) -> SystemConfig:
    t = load_tables()["table2"]
    b = t["base"]
    lam2, svc2, g2, lam3, svc3, g3 = t["rows"][row]["params"]
    return make_config(
        [b["lambda1"], lam2, lam3],
        [b["nu"]] * 3,
        [Exp(b["service1"]), Exp(svc2), Exp(svc3)],
        [Det(b["switchover"])] * 3,
        [Exp(b["glue1"]), Exp(g2), Exp(g3)],
    )


def table4_config(case: str) -> SystemConfig:
    t = load_tables()["table4"]
    c = t["cases"][case]
    return make_config(
        c["lambda"],
        c["nu"],
        [Gam(k, t["scale"]) for k in c["service_shape"]],
        [Gam(k, t["switchover_scale"]) for k in c["switchover_shape"]],
        [Gam(k, t["glue_scale"]) for k in c["glue_shape"]],
    )


def optimizer_problem(table: str, row: int) -> OptimizationProblem:
    opt = load_tables()["optimizer"]
    spec = opt[table]
    n = len(spec["rows"][row]["values"])
    cols = {k: [v] * n for k, v in spec["fixed"].items()}
    cols[spec["varied"]] = spec["rows"][row]["values"]
    glue_placeholder = opt["budget"] / n
    cfg = make_config(
        cols["lambda"],
        cols["nu"],
        [Exp(m) for m in cols["service"]],
        [Exp(opt["switchover_mean"])] * n,
        [Det(glue_placeholder)] * n,
        cols["weight"],
    )
    return OptimizationProblem(cfg, opt["budget"])


def example1_config(mean_glue: float) -> SystemConfig:
    e = load_tables()["example1"]
    n = len(e["service_means"])
    return make_config(
        [e["lambda"]] * n,
        [e["nu"]] * n,
        [Exp(m) for m in e["service_means"]],
        [Det(e["switchover"])] * n,
        [Exp(mean_glue)] * n,
    )


def example1_grid() -> np.ndarray:
    g = load_tables()["example1"]["grid"]
    decades = math.log10(g["high"]) - math.log10(g["low"])
    count = int(round(decades * g["points_per_decade"])) + 1
    return np.logspace(math.log10(g["low"]), math.log10(g["high"]), count)


def case_names() -> list[str]:
    return list(load_tables()["table4"]["cases"])


# comparisons


def compare_table1() -> list[Comparison]:
    t = load_tables()["table1"]
    tol = t["tolerance"]["abs"]
    out = []
    for r, row in enumerate(t["rows"]):
        waits = approx_mean_waiting(table1_config(r)).mean_wait
        out += [_within("table1", str(r + 1), f"approx W{i + 1}", p, w, tol) for i, (p, w) in enumerate(zip(row["approx"], waits))]
    return out


def compare_table2(exact: bool = True, approx: bool = True) -> list[Comparison]:
    t = load_tables()["table2"]
    tol = t["tolerance"]
    out = []
    for r, row in enumerate(t["rows"]):
        cfg = table2_config(r)
        if approx:
            waits = approx_mean_waiting(cfg).mean_wait
            out += [_within("table2", str(r + 1), f"approx W{i + 1}", p, w, tol["abs"]) for i, (p, w) in enumerate(zip(row["approx"], waits))]
        if exact:
            waits = station_size_stats(cfg, order=2).mean_wait
            out += [_relative("table2", str(r + 1), f"exact W{i + 1}", p, w, tol["exact_rel"]) for i, (p, w) in enumerate(zip(row["exact"], waits))]
    return out


def compare_table4_approx() -> list[Comparison]:
    t = load_tables()["table4"]
    out = []
    for case, c in t["cases"].items():
        waits = approx_mean_waiting(table4_config(case)).mean_wait
        out += [_within("table4", case, f"approx W{i + 1}", p, w, t["tolerance"]["abs"]) for i, (p, w) in enumerate(zip(c["approx"], waits))]
    return out


def compare_table4_sim(cases: Iterable[str] | None = None, cycles: int = FULL_SCALE_CYCLES, seed: int = 1,
                       batches: int = 10, results: dict | None = None) -> list[Comparison]:
    """Simulated point estimates against the printed bounds.

    At full scale the estimate must lie inside the printed bounds; with
    fewer cycles it must lie within ``desk_halfwidth_factor`` printed
    half-widths of the printed estimate.  ``results`` maps case names to
    simulation results: cases found there are reused, the others are
    simulated and added.
    """
    t = load_tables()["table4"]
    factor = 1.0 if cycles >= FULL_SCALE_CYCLES else t["tolerance"]["desk_halfwidth_factor"]
    out = []
    for case in cases or t["cases"]:
        c = t["cases"][case]
        if results is not None and case in results:
            res = results[case]
        else:
            res = simulate(SimConfig(table4_config(case), total_cycles=cycles, batches=batches, seed=seed))
            if results is not None:
                results[case] = res
        for i, est in enumerate(res.wait.mean):
            lo, hi = c["sim_lower"][i], c["sim_upper"][i]
            if factor != 1.0:
                mid, hw = c["sim_mean"][i], 0.5 * (hi - lo)
                lo, hi = mid - factor * hw, mid + factor * hw
            out.append(Comparison("table4", case, f"sim W{i + 1}", c["sim_mean"][i], float(est), lo, hi))
    return out


def compare_optimizer(table: str) -> list[Comparison]:
    opt = load_tables()["optimizer"]
    tol = opt["tolerance"]["abs"]
    out = []
    for r, row in enumerate(opt[table]["rows"]):
        res = optimize(optimizer_problem(table, r))
        out += [_within(table, str(r + 1), f"g{i + 1}", p, g, tol) for i, (p, g) in enumerate(zip(row["g"], res.g_star))]
        out.append(_within(table, str(r + 1), "objective", row["objective"], res.objective, tol))
    return out


def compare(table: str, cycles: int = FULL_SCALE_CYCLES, seed: int = 1) -> list[Comparison]:
    if table == "table1":
        return compare_table1()
    if table == "table2":
        return compare_table2()
    if table == "table4":
        return compare_table4_approx() + compare_table4_sim(cycles=cycles, seed=seed)
    if table in OPTIMIZER_TABLES:
        return compare_optimizer(table)
    raise ValueError(f"unknown table {table!r}; choose from {', '.join(TABLES)}")


def sweep_example1(grid: Iterable[float] | None = None, order: int = 3):
    """Station-size means, SCVs and correlations along a glue-length grid.

    Yields ``(mean_glue, StationStats)`` pairs.
    """
    for g in example1_grid() if grid is None else grid:
        yield float(g), station_size_stats(example1_config(float(g)), order=order)
