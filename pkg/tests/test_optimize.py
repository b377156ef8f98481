import math

import numpy as np
import pytest

from conftest import random_problem
from gluepoll.distributions import DistributionSpec
from gluepoll.model import ConfigError, make_config
from gluepoll.optimize import (
    OptimizationProblem,
    invert_f,
    lagrange_f,
    objective_deterministic,
    objective_general,
    optimize,
)

Det = DistributionSpec.deterministic
Exp = DistributionSpec.exponential

PROBLEMS = [random_problem(np.random.default_rng(seed)) for seed in range(50)]


def three_station(lam=(0.25,) * 3, service=(1.0,) * 3, nu=(1.0,) * 3, weight=(1.0,) * 3, budget=3.0):
    cfg = make_config(lam, nu, [Exp(b) for b in service], [Exp(2.0)] * 3, [Det(1.0)] * 3, weight)
    return OptimizationProblem(cfg, budget)


def kkt_gap(problem, g):
    f = [lagrange_f(problem, i, gi) for i, gi in enumerate(g)]
    return max(f) - min(f)


@pytest.mark.parametrize("k", range(len(PROBLEMS)))
def test_kkt_and_feasibility(k):
    p = PROBLEMS[k]
    r = optimize(p)
    assert kkt_gap(p, r.g_star) < 1e-7
    assert r.g_star.sum() == pytest.approx(p.budget, rel=1e-9)
    assert ((r.g_star > 0) & (r.g_star < p.budget)).all()


@pytest.mark.parametrize("k", range(len(PROBLEMS)))
def test_perturbations_do_not_improve(k):
    p = PROBLEMS[k]
    r = optimize(p)
    rng = np.random.default_rng(1000 + k)
    base = objective_deterministic(p, r.g_star)
    for _ in range(100):
        d = rng.normal(size=p.n)
        d -= d.mean()
        d /= np.abs(d).max()
        eps = rng.uniform(-1e-3, 1e-3) * p.budget
        g = r.g_star + eps * d
        if (g <= 0).any():
            continue
        g *= p.budget / g.sum()
        assert objective_deterministic(p, g) >= base - 1e-9


@pytest.mark.parametrize("k", range(len(PROBLEMS)))
def test_deterministic_glue_beats_exponential(k):
    p = PROBLEMS[k]
    g = optimize(p).g_star
    cfg = p.cfg
    expo = type(cfg)(tuple(type(s)(s.lam, s.nu, s.service, s.switchover, Exp(gi), s.weight) for s, gi in zip(cfg.stations, g)))
    assert objective_general(expo, p.budget) > objective_deterministic(p, g)


def test_closed_form_matches_general_objective():
    for p in PROBLEMS[:10]:
        g = optimize(p).g_star
        assert objective_deterministic(p, g) == pytest.approx(objective_general(p.with_glue(g), p.budget), rel=1e-12)


def test_allocation_ignores_arrival_rates_and_service_means():
    ref = optimize(three_station(lam=(0.3, 0.3, 0.3), service=(1.0,) * 3))
    assert ref.g_star == pytest.approx([1.0] * 3, abs=1e-10)
    for lam in [(0.3, 0.2, 0.2), (0.3, 0.2, 0.1)]:
        assert optimize(three_station(lam=lam, service=(1.0,) * 3)).g_star == pytest.approx(ref.g_star, abs=1e-10)
    for svc in [(0.3, 0.2, 0.2), (0.3, 0.2, 0.1)]:
        r = optimize(three_station(lam=(1.0,) * 3, service=svc))
        assert r.g_star == pytest.approx(ref.g_star, abs=1e-10)


@pytest.mark.parametrize("k", range(10))
def test_allocation_depends_on_traffic_only_through_load(k):
    p = PROBLEMS[k]
    scale = 2.5
    cfg = type(p.cfg)(
        tuple(type(s)(s.lam * scale, s.nu, s.service.with_mean(s.service.mean / scale), s.switchover, s.glue, s.weight)
              for s in p.cfg.stations)
    )
    a = optimize(p).g_star
    b = optimize(OptimizationProblem(cfg, p.budget)).g_star
    assert b == pytest.approx(a, abs=1e-10)


def test_equal_retrial_rates_split_evenly():
    r = optimize(three_station(nu=(3.0, 3.0, 3.0)))
    assert r.g_star == pytest.approx([1.0, 1.0, 1.0], abs=1e-10)


def test_weights_shift_glue_towards_heavier_stations():
    r = optimize(three_station(weight=(3.0, 2.0, 1.0), nu=(1.0,) * 3))
    assert r.g_star[0] > r.g_star[1] > r.g_star[2]
    assert r.g_star == pytest.approx([1.2311, 1.0263, 0.7426], abs=1e-3)
    assert r.objective == pytest.approx(271.086, abs=1e-3)


def test_common_weight_scale_leaves_allocation():
    a = optimize(three_station(nu=(3.0, 2.0, 1.0)))
    b = optimize(three_station(nu=(3.0, 2.0, 1.0), weight=(0.25,) * 3))
    assert b.g_star == pytest.approx(a.g_star, abs=1e-12)
    assert b.objective == pytest.approx(a.objective / 4, rel=1e-12)


def test_lagrange_f_increasing_and_inverse():
    p = three_station(nu=(3.0, 2.0, 1.0))
    grid = np.linspace(0.01, p.budget, 200)
    for i in range(3):
        f = [lagrange_f(p, i, x) for x in grid]
        assert all(a < b for a, b in zip(f, f[1:]))
        kappa = lagrange_f(p, i, 1.3)
        assert invert_f(p, i, kappa) == pytest.approx(1.3, abs=1e-12)


def test_lagrange_f_is_the_objective_gradient():
    p = three_station(nu=(3.0, 2.0, 1.0), weight=(1.0, 2.0, 0.5))
    g = np.array([0.9, 1.2, 0.9])
    h = 1e-6
    for i in range(3):
        j = (i + 1) % 3
        up, down = g.copy(), g.copy()
        up[i] += h
        up[j] -= h
        down[i] -= h
        down[j] += h
        directional = (objective_deterministic(p, up) - objective_deterministic(p, down)) / (2 * h)
        assert directional == pytest.approx(lagrange_f(p, i, g[i]) - lagrange_f(p, j, g[j]), rel=1e-5, abs=1e-6)


def test_result_bookkeeping():
    r = optimize(three_station(nu=(3.0, 2.0, 1.0)))
    lo, hi = r.bracket
    assert lo < r.kappa_star < hi
    assert r.outer_steps > 0
    assert len(r.inner_steps) == 3


def test_input_validation():
    with pytest.raises(ConfigError):
        three_station(budget=0.0)
    p = three_station()
    with pytest.raises(ValueError, match="budget"):
        objective_deterministic(p, [1.0, 1.0, 0.5])
    with pytest.raises(ValueError, match="positive"):
        objective_deterministic(p, [2.0, 1.5, -0.5])
    with pytest.raises(ValueError):
        lagrange_f(p, 0, 0.0)
    with pytest.raises(ValueError):
        invert_f(p, 0, lagrange_f(p, 0, p.budget) + 1.0)
    assert math.isfinite(objective_general(p.with_glue([1.0, 1.0, 1.0]), 3.0))
    with pytest.raises(ValueError):
        objective_general(p.with_glue([1.0, 1.0, 1.5]), 3.0)
