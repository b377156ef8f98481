from __future__ import annotations

import os
import sys

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from gluepoll.distributions import DistributionSpec
from gluepoll.model import ConfigError, make_config

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.register_profile("thorough", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("GLUEPOLL_HYPOTHESIS_PROFILE", "default"))


def dist_of(kind: str, mean: float, shape: float = 2.0) -> DistributionSpec:
    if kind == "deterministic":
        return DistributionSpec.deterministic(mean)
    if kind == "exponential":
        return DistributionSpec.exponential(mean)
    return DistributionSpec.gamma(shape, mean / shape)


kinds = st.sampled_from(["deterministic", "exponential", "gamma"])
means = st.floats(0.05, 3.0)
shapes = st.floats(0.3, 4.0)
dists = st.builds(dist_of, kinds, means, shapes)


@st.composite
def systems(draw, n_min=1, n_max=3, glue=None, rho_max=0.9):
    """Stable configs; ``glue`` pins the glue kind."""
    n = draw(st.integers(n_min, n_max))
    lam = [draw(st.floats(0.05, 2.0)) for _ in range(n)]
    nu = [draw(st.floats(0.2, 5.0)) for _ in range(n)]
    service = [draw(dists) for _ in range(n)]
    rho = sum(l * b.mean for l, b in zip(lam, service))
    target = draw(st.floats(0.05, rho_max))
    service = [b.with_mean(b.mean * target / rho) for b in service]
    switchover = [draw(dists) for _ in range(n)]
    if glue is None:
        gl = [draw(dists) for _ in range(n)]
    else:
        gl = [dist_of(glue, draw(means), draw(shapes)) for _ in range(n)]
    weight = [draw(st.floats(0.5, 3.0)) for _ in range(n)]
    try:
        return make_config(lam, nu, service, switchover, gl, weight)
    except ConfigError:
        # rounding pushed rho over the edge; shrink once more
        return make_config(lam, nu, [b.with_mean(0.9 * b.mean) for b in service], switchover, gl, weight)


def random_system(rng: np.random.Generator, n: int, glue: str = "exponential", rho: float | None = None):
    """Seeded counterpart of :func:`systems` for fixed, non-shrinking samples."""
    kinds_ = ["deterministic", "exponential", "gamma"]
    lam = rng.uniform(0.05, 1.0, n)
    service = [dist_of(kinds_[rng.integers(3)], rng.uniform(0.1, 2.0), rng.uniform(0.5, 3.0)) for _ in range(n)]
    load = sum(l * b.mean for l, b in zip(lam, service))
    target = rng.uniform(0.2, 0.8) if rho is None else rho
    service = [b.with_mean(b.mean * target / load) for b in service]
    switchover = [dist_of(kinds_[rng.integers(3)], rng.uniform(0.1, 2.0), rng.uniform(0.5, 3.0)) for _ in range(n)]
    gl = [dist_of(glue, rng.uniform(0.2, 2.0), rng.uniform(0.5, 3.0)) for _ in range(n)]
    nu = rng.uniform(0.3, 4.0, n)
    weight = rng.uniform(0.5, 3.0, n)
    return make_config(lam, nu, service, switchover, gl, weight)


def random_problem(rng: np.random.Generator):
    """A glue-budget problem on a random stable system with 2 to 6 stations."""
    from gluepoll.optimize import OptimizationProblem

    n = int(rng.integers(2, 7))
    cfg = random_system(rng, n, glue="deterministic")
    return OptimizationProblem(cfg, float(rng.uniform(0.5, 10.0)))


def pytest_terminal_summary(terminalreporter):
    """Repeats the acceptance PASS/FAIL lines at the end of the run."""
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.summary_line(criterion))
