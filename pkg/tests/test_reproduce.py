import numpy as np
import pytest

from gluepoll import reproduce as rep


def test_printed_tolerance():
    assert rep.printed_tolerance("121.0", 0.01) == pytest.approx(0.05)
    assert rep.printed_tolerance("71.61", 0.01) == pytest.approx(0.01)
    assert rep.printed_tolerance("69.00", 0.01) == pytest.approx(0.01)
    assert rep.printed_tolerance("0.7134", 0.001) == pytest.approx(0.001)


def test_comparison_bounds():
    c = rep.Comparison("t", "1", "q", 10.0, 10.2, 9.9, 10.1)
    assert not c.passed
    assert c.deviation == pytest.approx(0.2)


def test_table_configs():
    assert rep.table1_config(0).rho == pytest.approx(0.9)
    assert rep.table2_config(0).rho == pytest.approx(0.9)
    assert [round(rep.table4_config(c).rho, 4) for c in rep.case_names()] == [0.75, 0.84, 0.915, 0.915]
    p = rep.optimizer_problem("table7", 2)
    assert [s.nu for s in p.cfg.stations] == [3.0, 2.0, 1.0]
    assert p.budget == 3.0


def test_example_grid():
    grid = rep.example1_grid()
    assert len(grid) == 51
    assert grid[0] == pytest.approx(0.01) and grid[-1] == pytest.approx(1000.0)
    assert np.allclose(np.diff(np.log10(grid)), 0.1)
    assert rep.example1_config(1.0).rho == pytest.approx(0.775)


def test_every_table_has_reference_values():
    t = rep.load_tables()
    assert all(len(r["approx"]) == 2 for r in t["table1"]["rows"])
    assert all(len(r["exact"]) == 3 for r in t["table2"]["rows"])
    for case in t["table4"]["cases"].values():
        assert all(lo < m < hi for lo, m, hi in zip(case["sim_lower"], case["sim_mean"], case["sim_upper"]))
    for name in rep.OPTIMIZER_TABLES:
        assert len(t["optimizer"][name]["rows"]) == 3


def test_unknown_table():
    with pytest.raises(ValueError):
        rep.compare("table3")
