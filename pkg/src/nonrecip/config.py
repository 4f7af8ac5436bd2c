"""YAML configuration files for systems, scheme-C designs and netlists.

Every file starts with ``schema: nonrecip/1`` and a ``kind`` of ``system``,
``scheme_c`` or ``netlist``. Rates, detunings and ``g0`` are read in
``units`` (``hz``, the default, or ``rad/s``) and stored as rad/s; phases are
radians. The README documents the full schema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import yaml

from .design import SchemeC
from .network import Netlist, ideal
from .system import (
    COHERENT,
    ELECTROMAGNETIC,
    MECHANICAL,
    OPTOMECHANICAL,
    Coupling,
    Mode,
    SystemSpec,
    ValidationError,
    validate,
)

SCHEMA = "nonrecip/1"
KINDS = ("system", "scheme_c", "netlist")
UNITS = {"hz": 2 * math.pi, "rad/s": 1.0}

# SchemeC fields that carry a frequency
_SCHEME_C_RATES = {"kappa1", "kappa2", "gamma1", "gamma2", "splitting", "offset"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass
class Config:
    kind: str
    units: str
    data: dict
    lines: dict[str, int]
    source: str
    text: str

    @property
    def scale(self) -> float:
        return UNITS[self.units]

    def line(self, path: str) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            cut = max(path.rfind("."), path.rfind("["))
            path = path[:cut] if cut > 0 else ""
        return self.lines.get("")

    def error(self, message: str, path: str = "") -> ConfigError:
        return ConfigError(message, self.line(path), self.source)


def _index_lines(node: yaml.Node, path: str, out: dict[str, int]) -> None:
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            sub = f"{path}.{key.value}" if path else str(key.value)
            out[sub] = key.start_mark.line + 1
            _index_lines(value, sub, out)
            out[sub] = key.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _index_lines(item, f"{path}[{i}]", out)


def parse(text: str, source: str = "<config>") -> Config:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    lines: dict[str, int] = {}
    _index_lines(node, "", lines)
    cfg = Config("", "hz", data, lines, source, text)
    if data.get("schema") != SCHEMA:
        raise cfg.error(f"expected 'schema: {SCHEMA}', got {data.get('schema')!r}", "schema")
    kind = data.get("kind")
    if kind not in KINDS:
        raise cfg.error(f"'kind' must be one of {', '.join(KINDS)}, got {kind!r}", "kind")
    units = data.get("units", "hz")
    if units not in UNITS:
        raise cfg.error(f"'units' must be one of {', '.join(UNITS)}, got {units!r}", "units")
    cfg.kind, cfg.units = kind, units
    return cfg


def load(path: str | Path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse(text, str(path))


def _number(cfg: Config, value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise cfg.error(f"expected a number, got {value!r}", path)
    return float(value)


def _mapping(cfg: Config, value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise cfg.error("expected a mapping", path)
    return value


def _check_keys(cfg: Config, entry: dict, allowed: set[str], path: str) -> None:
    for key in entry:
        if key not in allowed:
            raise cfg.error(f"unknown key {key!r}", f"{path}.{key}")


_MODE_KEYS = {"id", "kind", "detuning", "kappa_ex", "kappa_0", "gamma", "n_bath"}
_COUPLING_KEYS = {"name", "between", "kind", "rate", "phase", "g0", "n_c"}


def build_system(cfg: Config) -> SystemSpec:
    """Turn a ``kind: system`` or ``kind: scheme_c`` config into a validated system.

    Validation problems are re-raised as :class:`ConfigError` pointing at the
    offending line.
    """
    if cfg.kind == "scheme_c":
        spec = build_scheme_c(cfg).system()
    elif cfg.kind == "system":
        spec = _system_from_data(cfg)
    else:
        raise cfg.error(f"expected a system config, got kind {cfg.kind!r}", "kind")
    try:
        return validate(spec)
    except ValidationError as exc:
        first = exc.violations[0]
        msg = "; ".join(str(v) for v in exc.violations)
        raise ConfigError(msg, cfg.line(first.path), cfg.source) from exc


def _system_from_data(cfg: Config) -> SystemSpec:
    scale = cfg.scale
    data = cfg.data
    raw_modes = data.get("modes")
    if not isinstance(raw_modes, list) or not raw_modes:
        raise cfg.error("'modes' must be a non-empty list", "modes")
    modes = []
    for i, raw in enumerate(raw_modes):
        path = f"modes[{i}]"
        raw = _mapping(cfg, raw, path)
        _check_keys(cfg, raw, _MODE_KEYS, path)
        if "id" not in raw:
            raise cfg.error("mode needs an 'id'", path)
        kind = raw.get("kind", ELECTROMAGNETIC)
        if kind not in (ELECTROMAGNETIC, MECHANICAL):
            raise cfg.error(f"unknown mode kind {kind!r}", f"{path}.kind")
        loss_key = "gamma" if kind == MECHANICAL else "kappa_0"
        if kind == MECHANICAL and "kappa_0" in raw:
            loss_key = "kappa_0"

        def rate(key, default=0.0):
            return _number(cfg, raw.get(key, default), f"{path}.{key}") * scale

        modes.append(Mode(
            id=str(raw["id"]),
            kind=kind,
            detuning=rate("detuning"),
            kappa_ex=rate("kappa_ex"),
            kappa_0=rate(loss_key),
            n_bath=_number(cfg, raw.get("n_bath", 0.0), f"{path}.n_bath"),
        ))

    couplings = []
    for i, raw in enumerate(data.get("couplings") or []):
        path = f"couplings[{i}]"
        raw = _mapping(cfg, raw, path)
        _check_keys(cfg, raw, _COUPLING_KEYS, path)
        between = raw.get("between")
        if not (isinstance(between, list) and len(between) == 2):
            raise cfg.error("'between' must list two mode ids", f"{path}.between")
        kind = raw.get("kind", OPTOMECHANICAL)
        if kind not in (OPTOMECHANICAL, COHERENT):
            raise cfg.error(f"unknown coupling kind {kind!r}", f"{path}.kind")
        rate = raw.get("rate")
        g0 = raw.get("g0")
        n_c = raw.get("n_c")
        couplings.append(Coupling(
            first=str(between[0]),
            second=str(between[1]),
            rate=None if rate is None else _number(cfg, rate, f"{path}.rate") * scale,
            phase=_number(cfg, raw.get("phase", 0.0), f"{path}.phase"),
            kind=kind,
            name=str(raw.get("name", "")),
            g0=None if g0 is None else _number(cfg, g0, f"{path}.g0") * scale,
            n_c=None if n_c is None else _number(cfg, n_c, f"{path}.n_c"),
        ))
    return SystemSpec(tuple(modes), tuple(couplings))


_DESIGN_KEYS = {"schema", "kind", "units", "fixed", "bounds", "target_db", "loss_budget_db",
                "objective", "direction"}


def build_scheme_c(cfg: Config) -> SchemeC:
    _check_keys(cfg, cfg.data, _DESIGN_KEYS, "")
    fixed = _mapping(cfg, cfg.data.get("fixed", {}), "fixed")
    names = {f.name for f in fields(SchemeC)}
    values = {}
    for key, value in fixed.items():
        if key not in names:
            raise cfg.error(f"unknown scheme_c parameter {key!r}", f"fixed.{key}")
        v = _number(cfg, value, f"fixed.{key}")
        values[key] = v * cfg.scale if key in _SCHEME_C_RATES else v
    return SchemeC(**values)


def design_bounds(cfg: Config) -> dict[str, tuple[float, float]] | None:
    raw = cfg.data.get("bounds")
    if raw is None:
        return None
    raw = _mapping(cfg, raw, "bounds")
    out = {}
    for key, pair in raw.items():
        path = f"bounds.{key}"
        if key not in SchemeC.FREE:
            raise cfg.error(f"unknown free parameter {key!r}; choose from {', '.join(SchemeC.FREE)}", path)
        if not (isinstance(pair, list) and len(pair) == 2):
            raise cfg.error("bounds must be a [low, high] pair", path)
        lo, hi = (_number(cfg, v, path) for v in pair)
        if key in _SCHEME_C_RATES:
            lo, hi = lo * cfg.scale, hi * cfg.scale
        out[key] = (lo, hi)
    return out


def scheme_c_yaml(params: SchemeC, units: str = "hz") -> str:
    """Render a ``kind: scheme_c`` config holding ``params`` as fixed values."""
    scale = UNITS[units]
    lines = [f"schema: {SCHEMA}", "kind: scheme_c", f"units: {units}", "fixed:"]
    for f in fields(SchemeC):
        v = getattr(params, f.name)
        if f.name in _SCHEME_C_RATES:
            v = v / scale
        lines.append(f"  {f.name}: {v!r}")
    return "\n".join(lines) + "\n"


def _port_ref(cfg: Config, value: Any, path: str) -> tuple[str, str]:
    if not isinstance(value, str) or value.count(".") != 1:
        raise cfg.error(f"port reference must look like 'instance.port', got {value!r}", path)
    inst, port = value.split(".")
    return inst, port


def build_netlist(cfg: Config) -> Netlist:
    if cfg.kind != "netlist":
        raise cfg.error(f"expected a netlist config, got kind {cfg.kind!r}", "kind")
    comps_raw = _mapping(cfg, cfg.data.get("components"), "components")
    comps = {}
    for inst, name in comps_raw.items():
        try:
            comps[str(inst)] = ideal(str(name))
        except ValueError as exc:
            raise cfg.error(str(exc), f"components.{inst}") from None
    conns = []
    seen: dict[tuple[str, str], int] = {}
    for i, pair in enumerate(cfg.data.get("connections") or []):
        path = f"connections[{i}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            raise cfg.error("connection must be a pair of port references", path)
        refs = tuple(_port_ref(cfg, v, f"{path}[{j}]") for j, v in enumerate(pair))
        for ref in refs:
            if ref not in {(k, p) for k, c in comps.items() for p in c.ports}:
                raise cfg.error(f"unknown port {ref[0]}.{ref[1]}", path)
            if ref in seen:
                raise cfg.error(f"port {ref[0]}.{ref[1]} is connected more than once "
                                f"(also in connection {seen[ref]})", path)
            seen[ref] = i
        conns.append(refs)
    external = [_port_ref(cfg, v, f"external[{i}]") for i, v in enumerate(cfg.data.get("external") or [])]
    labels = [str(v) for v in cfg.data.get("labels") or []]
    return Netlist(comps, conns, external, labels, name=str(cfg.data.get("name", "network")))


def dump_system(system: SystemSpec, units: str = "rad/s") -> str:
    """Render a system as a ``kind: system`` config (inverse of :func:`build_system`)."""
    scale = UNITS[units]
    modes = []
    for m in system.modes:
        entry: dict[str, Any] = {"id": m.id, "kind": m.kind, "detuning": m.detuning / scale}
        if m.is_mechanical:
            entry["gamma"] = m.kappa_0 / scale
        else:
            entry["kappa_ex"] = m.kappa_ex / scale
            entry["kappa_0"] = m.kappa_0 / scale
        entry["n_bath"] = m.n_bath
        modes.append(entry)
    couplings = []
    for c in system.couplings:
        entry = {"name": c.name, "between": [c.first, c.second], "kind": c.kind}
        if c.rate is not None:
            entry["rate"] = c.rate / scale
        entry["phase"] = c.phase
        if c.g0 is not None:
            entry["g0"] = c.g0 / scale
            entry["n_c"] = c.n_c
        couplings.append(entry)
    doc = {"schema": SCHEMA, "kind": "system", "units": units, "modes": modes, "couplings": couplings}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
