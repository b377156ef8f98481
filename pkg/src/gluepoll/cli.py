"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 a
reproduced table is out of tolerance.  Tables are written as delimited
text with a header row.  Output files are written to a temporary sibling
and moved into place only on success.

The default simulation seed comes from ``GLUEPOLL_SEED`` when set.  A
``seed`` in the config document overrides it, and ``--seed`` overrides both.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import reproduce as rep
from .distributions import DistributionSpec
from .config_io import ConfigDocument, load_document
from .exact import ConvergenceError, station_size_stats
from .model import ConfigError, SystemConfig, mean_cycle
from .optimize import OptimizationProblem, optimize
from .pcl import approx_mean_waiting, pcl_rhs
from .simulation import POLICIES, SimConfig, batch_table, simulate, verify_pcl

log = logging.getLogger("gluepoll")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_TOLERANCE = 0, 1, 2, 3
SEED_ENV = "GLUEPOLL_SEED"
DEFAULT_SEED = 1


class ToleranceFailure(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".12g")


class Table:
    def __init__(self, header: Sequence[str]):
        self.header = list(header)
        self.rows: list[list[str]] = []

    def add(self, *values) -> None:
        self.rows.append([v if isinstance(v, str) else fmt(v) for v in values])

    def render(self, delimiter: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


@contextlib.contextmanager
def artifact(path: str | None):
    """Text sink: stdout, or a file that only appears if the block succeeds."""
    if path is None or path == "-":
        buf = io.StringIO()
        yield buf
        sys.stdout.write(buf.getvalue())
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, target)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def resolve_seed(cli_seed: int | None, doc: ConfigDocument | None) -> int:
    if cli_seed is not None:
        return cli_seed
    if doc is not None and "seed" in doc.options:
        return doc.options["seed"]
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    return DEFAULT_SEED


def _option(args, doc: ConfigDocument, name: str, attr: str | None = None, default=None):
    value = getattr(args, attr or name, None)
    if value is not None:
        return value
    return doc.options.get(name, default)


def _apply_weights(cfg: SystemConfig, weights: str | None) -> SystemConfig:
    if weights is None:
        return cfg
    try:
        values = [float(w) for w in weights.split(",")]
    except ValueError:
        raise ConfigError(f"--weights must be comma-separated numbers, got {weights!r}") from None
    if len(values) != cfg.n:
        raise ConfigError(f"--weights has {len(values)} entries for {cfg.n} stations")
    return SystemConfig(tuple(st.__class__(st.lam, st.nu, st.service, st.switchover, st.glue, w)
                              for st, w in zip(cfg.stations, values)))


# subcommands


def cmd_validate(args, doc: ConfigDocument) -> Table:
    cfg = doc.system
    t = Table(["quantity", "value"])
    t.add("stations", cfg.n)
    t.add("rho", cfg.rho)
    t.add("mean_cycle", mean_cycle(cfg))
    return t


def cmd_exact(args, doc: ConfigDocument) -> Table:
    cfg = doc.system
    order = _option(args, doc, "order", default=3)
    s = station_size_stats(cfg, order=order)
    header = ["station", "mean_size", "mean_orbit", "mean_orbit_queue", "mean_wait"]
    if order >= 3:
        header += ["variance", "scv"] + [f"cor_{j + 1}" for j in range(cfg.n)]
    t = Table(header)
    for i in range(cfg.n):
        row = [i + 1, s.mean_total[i], s.mean_orbit[i], s.mean_orbit_queue[i], s.mean_wait[i]]
        if order >= 3:
            row += [s.variance[i], s.scv[i]] + list(s.correlation[i])
        t.add(*row)
    return t


def cmd_approx(args, doc: ConfigDocument) -> Table:
    cfg = _apply_weights(doc.system, args.weights)
    a = approx_mean_waiting(cfg)
    t = Table(["station", "rho", "weight", "retrial_multiplier", "residual_cycle", "mean_wait"])
    for i, st in enumerate(cfg.stations):
        t.add(i + 1, st.rho, st.weight, a.retrial_multiplier[i], a.residual_cycle, a.mean_wait[i])
    return t


def cmd_pcl(args, doc: ConfigDocument) -> Table:
    cfg = doc.system
    p = pcl_rhs(cfg)
    t = Table(["term", "station", "value"])
    t.add("service", "", p.service_term)
    t.add("idle", "", p.idle_term)
    t.add("cross", "", p.cross_term)
    t.add("retrial", "", p.retrial_term)
    t.add("weighted_wait", "", p.lhs_weighted_wait)
    for i, f in enumerate(p.leftover):
        t.add("leftover_work", str(i + 1), f)
    return t


def cmd_simulate(args, doc: ConfigDocument) -> Table:
    cfg = doc.system
    total = _option(args, doc, "cycles", default=10**6)
    batches = _option(args, doc, "batches", default=10)
    warmup = _option(args, doc, "warmup", default=10**4)
    sim_cfg = SimConfig(cfg, total_cycles=total, batches=batches, warmup_cycles=warmup,
                        seed=resolve_seed(args.seed, doc), policy=args.policy, replication=args.replication)
    res = simulate(sim_cfg)
    t = Table(["quantity", "station", "mean", "lower", "upper"])
    per_station = [("wait", res.wait), ("size", res.size), ("size_orbit_queue", res.size_oq),
                   ("size_second_moment", res.size_second), ("workload", res.workload_station)]
    for name, est in per_station:
        for i in range(cfg.n):
            t.add(name, str(i + 1), est.mean[i], est.lower[i], est.upper[i])
    for name, est in [("weighted_wait", res.weighted_wait), ("total_workload", res.workload), ("cycle", res.cycle)]:
        t.add(name, "", est.mean, est.lower, est.upper)
    check = verify_pcl(res, cfg)
    t.add("pcl_law", "", check.law, check.law, check.law)
    t.add("cycles", "", res.cycles, res.cycles, res.cycles)
    if args.batch_output:
        header, rows = batch_table(res)
        bt = Table(header)
        for row in rows:
            bt.add(*row)
        with artifact(args.batch_output) as fh:
            fh.write(bt.render(args.delimiter))
    return t


def cmd_optimize(args, doc: ConfigDocument) -> Table:
    cfg = _apply_weights(doc.system, args.weights)
    budget = _option(args, doc, "budget")
    if budget is None:
        raise ConfigError("a glue budget is required: pass --budget or set 'budget' in the config")
    res = optimize(OptimizationProblem(cfg, budget))
    t = Table(["quantity", "station", "value"])
    for i, g in enumerate(res.g_star):
        t.add("g", str(i + 1), g)
    t.add("kappa", "", res.kappa_star)
    t.add("objective", "", res.objective)
    return t


def _grid(args) -> np.ndarray:
    if args.low is None and args.high is None and args.points_per_decade is None:
        return rep.example1_grid()
    g = rep.load_tables()["example1"]["grid"]
    low = args.low if args.low is not None else g["low"]
    high = args.high if args.high is not None else g["high"]
    ppd = args.points_per_decade if args.points_per_decade is not None else g["points_per_decade"]
    if not 0 < low < high:
        raise ConfigError(f"need 0 < low < high, got {low}, {high}")
    count = int(round(np.log10(high / low) * ppd)) + 1
    return np.logspace(np.log10(low), np.log10(high), max(count, 2))


def cmd_sweep(args, doc: ConfigDocument | None) -> Table:
    grid = _grid(args)
    if doc is None:
        points = rep.sweep_example1(grid)
        n = len(rep.load_tables()["example1"]["service_means"])
    else:
        cfg = doc.system
        n = cfg.n
        points = ((float(g), station_size_stats(cfg.map_stations(glue=DistributionSpec.exponential(float(g))), order=3)) for g in grid)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    header = ["mean_glue"] + [f"mean_{i + 1}" for i in range(n)] + [f"scv_{i + 1}" for i in range(n)]
    header += [f"cor_{i + 1}_{j + 1}" for i, j in pairs]
    t = Table(header)
    for g, s in points:
        t.add(g, *s.mean_total, *s.scv, *(s.correlation[i, j] for i, j in pairs))
    return t


def cmd_reproduce(args, doc) -> Table:
    seed = resolve_seed(args.seed, None)
    comparisons = rep.compare(args.table, cycles=args.cycles, seed=seed)
    t = Table(["table", "row", "quantity", "published", "computed", "deviation", "lower", "upper", "pass"])
    for c in comparisons:
        t.add(c.table, c.row, c.quantity, c.published, c.computed, c.deviation, c.lower, c.upper, "yes" if c.passed else "no")
    worst = max(abs(c.deviation) for c in comparisons)
    failed = sum(not c.passed for c in comparisons)
    log.info("%s: %d comparisons, %d out of tolerance, max |deviation| %.6g", args.table, len(comparisons), failed, worst)
    t.failed = failed
    return t


COMMANDS = {
    "validate": cmd_validate,
    "exact": cmd_exact,
    "approx": cmd_approx,
    "pcl": cmd_pcl,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="output file (default: stdout)")
    common.add_argument("--delimiter", default=",", help="field delimiter (default: ,)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="gluepoll", description="Polling systems with retrials and glue periods.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("config", help="YAML or JSON config document")
        return sp

    with_config("validate", "check a config document")
    sp = with_config("exact", "exact station-size moments (exponential glue)")
    sp.add_argument("--order", type=int, choices=(2, 3), help="2: means only, 3: also second moments")
    sp = with_config("approx", "approximate mean waiting times")
    sp.add_argument("--weights", help="comma-separated station weights")
    with_config("pcl", "pseudo conservation law terms")
    sp = with_config("simulate", "discrete-event simulation with batch means")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cycles", type=int)
    sp.add_argument("--batches", type=int)
    sp.add_argument("--warmup", type=int)
    sp.add_argument("--replication", type=int, default=0)
    sp.add_argument("--policy", choices=sorted(POLICIES), default="glue-epoch")
    sp.add_argument("--batch-output", help="also write per-batch means to this file")
    sp = with_config("optimize", "optimal deterministic glue lengths under a budget")
    sp.add_argument("--budget", type=float)
    sp.add_argument("--weights", help="comma-separated station weights")

    sp = sub.add_parser("sweep", parents=[common], help="glue-length sweep of exact moments")
    sp.add_argument("config", nargs="?", help="config document (default: the five-station example)")
    sp.add_argument("--low", type=float)
    sp.add_argument("--high", type=float)
    sp.add_argument("--points-per-decade", type=int)

    sp = sub.add_parser("reproduce", parents=[common], help="compare against a published table")
    sp.add_argument("table", choices=rep.TABLES)
    sp.add_argument("--cycles", type=int, default=rep.FULL_SCALE_CYCLES, help="simulation cycles (table4)")
    sp.add_argument("--seed", type=int)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    try:
        doc = None
        if getattr(args, "config", None):
            doc = load_document(args.config)
        with artifact(args.output) as fh:
            table = COMMANDS[args.command](args, doc)
            fh.write(table.render(args.delimiter))
        # a complete comparison is kept even when entries are out of tolerance
        if getattr(table, "failed", 0):
            raise ToleranceFailure(f"{table.failed} entries out of tolerance")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, ArithmeticError, np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ToleranceFailure as exc:
        print(f"reproduction failed: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
