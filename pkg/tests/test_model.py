import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dists, systems
from gluepoll.distributions import DistributionSpec, MOMENT_CAP
from gluepoll.model import ConfigError, SystemConfig, make_config, mean_cycle, total_idle_moments, utilizations, wrap

Det = DistributionSpec.deterministic
Exp = DistributionSpec.exponential
Gam = DistributionSpec.gamma


@pytest.mark.parametrize(
    "d, moments",
    [
        (Det(2.0), [1.0, 2.0, 4.0, 8.0]),
        (Exp(0.5), [1.0, 0.5, 0.5, 0.75]),
        (Gam(2.0, 1.0), [1.0, 2.0, 6.0, 24.0]),
        (Gam(0.5, 3.0), [1.0, 1.5, 6.75, 50.625]),
    ],
)
def test_raw_moments(d, moments):
    for n, want in enumerate(moments):
        assert d.raw_moment(n) == pytest.approx(want, rel=1e-14)


def test_raw_moment_range():
    with pytest.raises(ValueError):
        Exp(1.0).raw_moment(MOMENT_CAP + 1)
    with pytest.raises(ValueError):
        Exp(1.0).raw_moment(-1)


@pytest.mark.parametrize("bad", [lambda: Det(-1.0), lambda: Exp(0.0), lambda: Gam(0.0, 1.0), lambda: Gam(1.0, math.inf)])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        bad()


def test_lst_closed_forms():
    assert Det(2.0).lst(0.5) == pytest.approx(math.exp(-1.0))
    assert Exp(2.0).lst(0.5) == pytest.approx(0.5)
    assert Gam(3.0, 0.5).lst(2.0) == pytest.approx(2.0**-3)
    assert isinstance(Det(1.0).lst(mpmath.mpf("0.1")), mpmath.mpf)


@given(dists, st.floats(0.0, 0.1))
def test_lst_matches_moment_series(d, x):
    # small relative to the convergence radius, which is 1/scale for gamma
    s = x / max(d.mean, d.scale)
    series = math.fsum((-s) ** n * d.raw_moment(n) / math.factorial(n) for n in range(7))
    assert d.lst(s) == pytest.approx(series, rel=1e-6)


@given(dists, st.floats(0.1, 10.0))
def test_with_mean_keeps_family(d, m):
    e = d.with_mean(m)
    assert e.kind == d.kind
    assert e.mean == pytest.approx(m)
    if d.kind == "gamma":
        assert e.shape == d.shape


def test_params_and_str():
    assert Gam(2.0, 0.5).params == {"shape": 2.0, "scale": 0.5}
    assert str(Exp(1.5)) == "exponential(mean=1.5)"


def test_example_config_load():
    svc = [Exp(m) for m in (1, 2, 4, 8, 16)]
    cfg = make_config([0.025] * 5, [1.0] * 5, svc, [Det(1.0)] * 5, [Exp(1.0)] * 5)
    assert cfg.rho == pytest.approx(0.775)


def test_mean_cycle_value():
    cfg = make_config([1.0, 1.0], [1.0, 1.0], [Exp(0.45)] * 2, [Exp(1.0)] * 2, [Det(0.5)] * 2)
    assert cfg.rho == pytest.approx(0.9)
    assert mean_cycle(cfg) == pytest.approx(3.0 / 0.1)


@given(systems(n_max=5))
def test_mean_cycle_scales_with_idle_time(cfg):
    doubled = SystemConfig(
        tuple(
            type(s)(s.lam, s.nu, s.service, s.switchover.with_mean(2 * s.switchover.mean), s.glue.with_mean(2 * s.glue.mean), s.weight)
            for s in cfg.stations
        )
    )
    assert mean_cycle(doubled) == pytest.approx(2 * mean_cycle(cfg), rel=1e-12)


@given(systems(n_max=5))
def test_utilization_total_is_sum(cfg):
    per, total = utilizations(cfg)
    assert total == math.fsum(per)
    assert per == tuple(s.lam * s.service.mean for s in cfg.stations)


def test_idle_moments_independent_sum():
    cfg = make_config([0.1, 0.1], [1, 1], [Exp(1)] * 2, [Exp(1.0), Det(2.0)], [Gam(2.0, 1.0), Det(0.5)])
    mean, second = total_idle_moments(cfg)
    assert mean == pytest.approx(5.5)
    assert second == pytest.approx(1.0 + 2.0 + 5.5**2)


def test_validation():
    ok = dict(lam=[0.5], nu=[1.0], service=[Exp(1.0)], switchover=[Det(1.0)], glue=[Exp(1.0)])
    make_config(**ok)
    with pytest.raises(ConfigError, match="unstable"):
        make_config(**{**ok, "service": [Exp(2.0)]})
    with pytest.raises(ConfigError, match="retrial"):
        make_config(**{**ok, "nu": [0.0]})
    with pytest.raises(ConfigError, match="arrival rate"):
        make_config(**{**ok, "lam": [-0.1]})
    with pytest.raises(ConfigError, match="same length"):
        make_config(**{**ok, "nu": [1.0, 1.0]})
    with pytest.raises(ConfigError, match="switchover plus glue"):
        make_config(**{**ok, "switchover": [Det(0.0)], "glue": [Det(0.0)]})
    with pytest.raises(ConfigError, match="at least one"):
        SystemConfig(())


def test_near_instability_rejected():
    with pytest.raises(ConfigError):
        make_config([1.0], [1.0], [Det(1.0 - 1e-13)], [Det(1.0)], [Exp(1.0)])


def test_cyclic_indexing():
    cfg = make_config([0.1, 0.2, 0.3], [1] * 3, [Exp(1)] * 3, [Det(1)] * 3, [Exp(1)] * 3)
    assert cfg[-1] is cfg.stations[2]
    assert cfg[3] is cfg.stations[0]
    assert wrap(-1, 3) == 2
    assert cfg.replace_station(1, lam=0.0).lambdas == (0.1, 0.0, 0.3)
