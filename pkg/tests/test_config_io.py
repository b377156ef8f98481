import json
from pathlib import Path

import pytest
from hypothesis import given

from conftest import systems
from gluepoll.config_io import ConfigDocumentError, dump_config, load_config, load_document, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

STATION = """\
  - lambda: 0.5
    nu: 1.0
    service: {kind: exponential, params: {mean: 0.4}}
    switchover: {kind: deterministic, value: 1.0}
    glue: {kind: gamma, shape: 2, scale: 0.25}
"""


def test_shipped_documents():
    cfg = load_config(CONFIGS / "table1_row1.yaml")
    assert cfg.n == 2 and cfg.rho == pytest.approx(0.9)
    cfg = load_config(CONFIGS / "example1.yaml")
    assert cfg.n == 5 and cfg.rho == pytest.approx(0.775)
    doc = load_document(CONFIGS / "table4_case4.yaml")
    assert doc.system.n == 5
    assert load_document(CONFIGS / "table8_row3.yaml").options["budget"] == 3.0


def test_inline_and_nested_params():
    doc = parse_config("stations:\n" + STATION + "seed: 7\ncycles: 1e5\n")
    st = doc.system[0]
    assert st.service.mean == 0.4
    assert st.switchover.value == 1.0
    assert (st.glue.shape, st.glue.scale) == (2.0, 0.25)
    assert st.weight == 1.0
    assert doc.options == {"seed": 7, "cycles": 100000}


@given(systems(n_max=4))
def test_round_trip(cfg):
    for fmt in ("yaml", "json"):
        doc = parse_config(dump_config(cfg, {"seed": 3}, fmt=fmt))
        assert doc.system == cfg
        assert doc.options == {"seed": 3}


def test_json_document():
    text = json.dumps({"stations": [{"lambda": 0.2, "nu": 2, "service": {"kind": "exponential", "mean": 1},
                                     "switchover": {"kind": "deterministic", "value": 0.5},
                                     "glue": {"kind": "exponential", "mean": 1}}]})
    assert parse_config(text).system.rho == pytest.approx(0.2)


@pytest.mark.parametrize(
    "text, message",
    [
        ("stations:\n  - lambda: 0.5\n    service: {kind: exponential, mean: 1}\n"
         "    switchover: {kind: exponential, mean: 1}\n    glue: {kind: exponential, mean: 1}\n",
         "stations[0]: station 0: missing field 'nu'"),
        ("stations:\n" + STATION + "  - lambda: 0.1\n    nu: 1\n    color: red\n", ":9: stations[1]: unknown field 'color'"),
        ("stations:\n" + STATION.replace("mean: 0.4", "mean: -1"), "stations[0].service"),
        ("stations:\n" + STATION.replace("mean: 0.4", "mean: '0.4'"), "expected a number"),
        ("stations:\n" + STATION.replace("exponential", "weibull"), "unknown kind 'weibull'"),
        ("stations:\n" + STATION.replace("shape: 2, ", ""), "missing parameter 'shape'"),
        ("stations:\n" + STATION.replace("value: 1.0", "mean: 1.0"), "does not apply"),
        ("stations:\n" + STATION.replace("mean: 0.4", "mean: 4"), "unstable"),
        ("stations:\n" + STATION + "seed: 1.5\n", "expected an integer"),
        ("stations: []\n", "non-empty list"),
        ("stations:\n  - [1, 2\n", "parse error"),
        ("", "empty document"),
        ("{seed: 1}", "missing field 'stations'"),
    ],
)
def test_diagnostics(text, message):
    with pytest.raises(ConfigDocumentError) as info:
        parse_config(text, "cfg.yaml")
    assert message in str(info.value)
    assert str(info.value).startswith("cfg.yaml")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigDocumentError, match="cannot read"):
        load_document(tmp_path / "nope.yaml")


def test_dump_rejects_unknown_format():
    cfg = load_config(CONFIGS / "table1_row1.yaml")
    with pytest.raises(ValueError):
        dump_config(cfg, fmt="toml")
