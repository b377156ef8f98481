"""Config documents: YAML or JSON text describing a system.

Layout::

    stations:
      - lambda: 1.0
        nu: 1.0
        weight: 1.0            # optional, default 1
        service:    {kind: exponential, params: {mean: 0.3}}
        switchover: {kind: deterministic, params: {value: 1.0}}
        glue:       {kind: gamma, params: {shape: 2.0, scale: 0.5}}
    seed: 12345                # optional run options
    cycles: 1000000
    batches: 10
    warmup: 10000
    order: 3
    budget: 3.0

A distribution may also list its parameters next to ``kind`` instead of
under ``params``.  Unknown fields are rejected.  Errors name the file,
line and field path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .distributions import DistributionSpec
from .model import ConfigError, StationParams, SystemConfig

DIST_PARAMS = {
    "deterministic": ("value",),
    "exponential": ("mean",),
    "gamma": ("shape", "scale"),
}
STATION_FIELDS = ("lambda", "nu", "weight", "service", "switchover", "glue")
OPTION_FIELDS = {"seed": int, "cycles": int, "batches": int, "warmup": int, "order": int, "budget": float}


class ConfigDocumentError(ConfigError):
    """Malformed config document; the message carries line and field."""


@dataclass
class ConfigDocument:
    system: SystemConfig
    options: dict[str, Any] = field(default_factory=dict)


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, node, where: str, msg: str):
        line = f":{node.start_mark.line + 1}" if node is not None else ""
        raise ConfigDocumentError(f"{self.source}{line}: {where}: {msg}")

    def mapping(self, node, where: str, allowed) -> dict[str, tuple[Any, Any]]:
        """Map key -> (key node, value node); rejects unknown and repeated keys."""
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, where, "expected a mapping")
        out: dict[str, tuple[Any, Any]] = {}
        for knode, vnode in node.value:
            key = knode.value
            if key not in allowed:
                self.fail(knode, where, f"unknown field {key!r} (allowed: {', '.join(allowed)})")
            if key in out:
                self.fail(knode, where, f"field {key!r} given twice")
            out[key] = (knode, vnode)
        return out

    def number(self, node, where: str, kind=float):
        # plain scalars only; YAML 1.1 would read "1e-3" as a string
        if not isinstance(node, yaml.ScalarNode) or node.style is not None:
            self.fail(node, where, f"expected a number, got {getattr(node, 'value', node)!r}")
        text = node.value.replace("_", "")
        try:
            value = int(text)
        except ValueError:
            try:
                value = float(text)
            except ValueError:
                self.fail(node, where, f"expected a number, got {node.value!r}")
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                self.fail(node, where, f"expected an integer, got {node.value!r}")
            return int(value)
        value = float(value)
        if not math.isfinite(value):
            self.fail(node, where, f"expected a finite number, got {node.value!r}")
        return value

    def distribution(self, node, where: str) -> DistributionSpec:
        allowed = ("kind", "params", "value", "mean", "shape", "scale")
        fields = self.mapping(node, where, allowed)
        if "kind" not in fields:
            self.fail(node, where, "missing field 'kind'")
        kind_node = fields["kind"][1]
        kind = kind_node.value
        if kind not in DIST_PARAMS:
            self.fail(kind_node, f"{where}.kind", f"unknown kind {kind!r} (allowed: {', '.join(DIST_PARAMS)})")
        names = DIST_PARAMS[kind]
        inline = {k: v for k, v in fields.items() if k not in ("kind", "params")}
        if "params" in fields:
            if inline:
                self.fail(node, where, "give parameters either under 'params' or inline, not both")
            pwhere = f"{where}.params"
            params = self.mapping(fields["params"][1], pwhere, names)
        else:
            pwhere = where
            params = inline
            for key, (knode, _) in params.items():
                if key not in names:
                    self.fail(knode, where, f"field {key!r} does not apply to kind {kind!r}")
        values = {}
        for name in names:
            if name not in params:
                self.fail(node, pwhere, f"missing parameter {name!r} for kind {kind!r}")
            values[name] = self.number(params[name][1], f"{pwhere}.{name}")
        try:
            if kind == "deterministic":
                return DistributionSpec.deterministic(values["value"])
            if kind == "exponential":
                return DistributionSpec.exponential(values["mean"])
            return DistributionSpec.gamma(values["shape"], values["scale"])
        except ValueError as exc:
            self.fail(node, where, str(exc))

    def station(self, node, index: int) -> StationParams:
        where = f"stations[{index}]"
        fields = self.mapping(node, where, STATION_FIELDS)
        for required in ("lambda", "nu", "service", "switchover", "glue"):
            if required not in fields:
                self.fail(node, where, f"station {index}: missing field {required!r}")
        lam = self.number(fields["lambda"][1], f"{where}.lambda")
        nu = self.number(fields["nu"][1], f"{where}.nu")
        weight = self.number(fields["weight"][1], f"{where}.weight") if "weight" in fields else 1.0
        dists = {k: self.distribution(fields[k][1], f"{where}.{k}") for k in ("service", "switchover", "glue")}
        try:
            return StationParams(lam, nu, dists["service"], dists["switchover"], dists["glue"], weight)
        except ConfigError as exc:
            self.fail(node, where, f"station {index}: {exc}")

    def document(self, root) -> ConfigDocument:
        if root is None:
            raise ConfigDocumentError(f"{self.source}: empty document")
        fields = self.mapping(root, "document", ("stations",) + tuple(OPTION_FIELDS))
        if "stations" not in fields:
            self.fail(root, "document", "missing field 'stations'")
        snode = fields["stations"][1]
        if not isinstance(snode, yaml.SequenceNode) or not snode.value:
            self.fail(snode, "stations", "expected a non-empty list of stations")
        stations = [self.station(s, k) for k, s in enumerate(snode.value)]
        try:
            system = SystemConfig(tuple(stations))
        except ConfigError as exc:
            self.fail(snode, "stations", str(exc))
        options = {k: self.number(fields[k][1], k, kind) for k, kind in OPTION_FIELDS.items() if k in fields}
        return ConfigDocument(system, options)


def parse_config(text: str, source: str = "<string>") -> ConfigDocument:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigDocumentError(f"{source}{line}: parse error: {getattr(exc, 'problem', exc)}") from None
    return _Reader(source).document(root)


def load_document(path: str | Path) -> ConfigDocument:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigDocumentError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_config(text, str(path))


def load_config(path: str | Path) -> SystemConfig:
    return load_document(path).system


def _dist_dict(d: DistributionSpec) -> dict[str, Any]:
    return {"kind": d.kind, "params": dict(d.params)}


def config_to_dict(cfg: SystemConfig, options: dict[str, Any] | None = None) -> dict[str, Any]:
    stations = []
    for st in cfg.stations:
        stations.append(
            {
                "lambda": st.lam,
                "nu": st.nu,
                "weight": st.weight,
                "service": _dist_dict(st.service),
                "switchover": _dist_dict(st.switchover),
                "glue": _dist_dict(st.glue),
            }
        )
    out: dict[str, Any] = {"stations": stations}
    out.update(options or {})
    return out


def dump_config(cfg: SystemConfig, options: dict[str, Any] | None = None, fmt: str = "yaml") -> str:
    data = config_to_dict(cfg, options)
    if fmt == "json":
        return json.dumps(data, indent=2) + "\n"
    if fmt != "yaml":
        raise ValueError(f"unknown format {fmt!r}")
    return yaml.safe_dump(data, sort_keys=False)
