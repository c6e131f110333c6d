"""Exploration configuration: JSON parsing, validation and canonical serialization.

Example layout::

    {
      "clock_ns": 1.0,
      "delta": 0.1,
      "seed": 7,
      "backend": {"kind": "simulated"},
      "max_combinations": 10000000,
      "neighborhood": {"enabled": false, "radius": 2},
      "components": [
        {"name": "A", "gamma_r": 1, "gamma_w": 1, "eta": 1, "trip_count": 64,
         "base_cycles": 10, "max_unrolls": 8, "ports_options": [1, 2],
         "area": {"base": 0.05, "unit": 0.01, "port": 0.005},
         "plm": {"bank": 0.01, "word": 1e-05, "capacity_words": 4096},
         "noise_rate": 0.0},
        {"name": "SW", "fixed_latency_ms": 0.5}
      ],
      "graph": {
        "places": ["p0", "p1"],
        "marking": [0, 1],
        "transitions": [{"index": 0, "name": "tA", "component": "A"},
                        {"index": 1, "name": "tSW", "component": "SW"}],
        "arcs": [["tA", "p0"], ["p0", "tSW"], ["tSW", "p1"], ["p1", "tA"]]
      }
    }

A transition may also carry ``"delay_ms"`` instead of ``"component"``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from cosmos.errors import ConfigError, CosmosError
from cosmos.model import AreaModel, ComponentDescriptor, PlmModel
from cosmos.tmg import Binding, TimedMarkedGraph, validate

DEFAULT_MAX_COMBINATIONS = 10**7


@dataclass
class BackendSpec:
    kind: str = "simulated"
    table: str | None = None
    interpolate: bool = False


@dataclass
class ExplorationConfig:
    clock_ns: float
    delta: float
    seed: int
    components: list[ComponentDescriptor]
    graph: TimedMarkedGraph
    backend: BackendSpec = field(default_factory=BackendSpec)
    max_combinations: int = DEFAULT_MAX_COMBINATIONS
    neighborhood: bool = False
    radius: int = 2
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    def component_map(self) -> dict[str, ComponentDescriptor]:
        return {c.name: c for c in self.components}

    @property
    def synthesizable(self) -> list[ComponentDescriptor]:
        return [c for c in self.components if c.synthesizable]

    @property
    def fixed_latencies(self) -> dict[str, float]:
        return {c.name: c.fixed_latency for c in self.components if not c.synthesizable}

    def table_path(self) -> Path | None:
        if self.backend.table is None:
            return None
        p = Path(self.backend.table)
        return p if p.is_absolute() else self.base_dir / p


# ------------------------------------------------------------ parsing helpers


def _expect(obj: Any, typ, path: str):
    if typ is float and isinstance(obj, int) and not isinstance(obj, bool):
        return float(obj)
    if typ is int and isinstance(obj, bool):
        raise ConfigError(f"expected integer, got {obj!r}", field=path)
    if not isinstance(obj, typ):
        name = typ.__name__ if isinstance(typ, type) else "/".join(t.__name__ for t in typ)
        raise ConfigError(f"expected {name}, got {type(obj).__name__}", field=path)
    return obj


def _keys(obj: dict, allowed: set[str], required: set[str], path: str) -> None:
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"unknown key '{k}'", field=f"{path}.{k}" if path else k)
    for k in sorted(required):
        if k not in obj:
            raise ConfigError("missing required key", field=f"{path}.{k}" if path else k)


_COMPONENT_KEYS = {
    "name",
    "gamma_r",
    "gamma_w",
    "eta",
    "trip_count",
    "base_cycles",
    "max_unrolls",
    "ports_options",
    "area",
    "plm",
    "noise_rate",
    "fixed_latency_ms",
}


def _parse_component(obj: Any, path: str) -> ComponentDescriptor:
    obj = _expect(obj, dict, path)
    _keys(obj, _COMPONENT_KEYS, {"name"}, path)
    name = _expect(obj["name"], str, f"{path}.name")
    try:
        if "fixed_latency_ms" in obj:
            extra = set(obj) - {"name", "fixed_latency_ms"}
            if extra:
                raise ConfigError(
                    "fixed-latency components take no synthesis parameters", field=f"{path}.{sorted(extra)[0]}"
                )
            return ComponentDescriptor(name=name, fixed_latency=_expect(obj["fixed_latency_ms"], float, f"{path}.fixed_latency_ms"))
        _keys(obj, _COMPONENT_KEYS, {"gamma_r", "gamma_w", "eta", "trip_count", "max_unrolls", "ports_options"}, path)
        kw: dict[str, Any] = {"name": name}
        for k in ("gamma_r", "gamma_w", "eta", "trip_count", "base_cycles", "max_unrolls"):
            if k in obj:
                kw[k] = _expect(obj[k], int, f"{path}.{k}")
        ports = _expect(obj["ports_options"], list, f"{path}.ports_options")
        kw["ports_options"] = tuple(_expect(p, int, f"{path}.ports_options[{i}]") for i, p in enumerate(ports))
        if "noise_rate" in obj:
            kw["noise_rate"] = _expect(obj["noise_rate"], float, f"{path}.noise_rate")
        if "area" in obj:
            a = _expect(obj["area"], dict, f"{path}.area")
            _keys(a, {"base", "unit", "port"}, set(), f"{path}.area")
            kw["area"] = AreaModel(**{k: _expect(v, float, f"{path}.area.{k}") for k, v in a.items()})
        if "plm" in obj:
            p = _expect(obj["plm"], dict, f"{path}.plm")
            _keys(p, {"bank", "word", "capacity_words"}, set(), f"{path}.plm")
            pk: dict[str, Any] = {}
            for k, v in p.items():
                pk[k] = _expect(v, int if k == "capacity_words" else float, f"{path}.plm.{k}")
            kw["plm"] = PlmModel(**pk)
        return ComponentDescriptor(**kw)
    except ConfigError:
        raise
    except CosmosError as exc:
        raise ConfigError(str(exc), field=path) from None


def _parse_graph(obj: Any, components: dict[str, ComponentDescriptor]) -> TimedMarkedGraph:
    obj = _expect(obj, dict, "graph")
    _keys(obj, {"places", "marking", "transitions", "arcs"}, {"places", "marking", "transitions", "arcs"}, "graph")
    places = [_expect(p, str, f"graph.places[{i}]") for i, p in enumerate(_expect(obj["places"], list, "graph.places"))]
    marking = [_expect(m, int, f"graph.marking[{i}]") for i, m in enumerate(_expect(obj["marking"], list, "graph.marking"))]
    trans_raw = _expect(obj["transitions"], list, "graph.transitions")
    by_index: dict[int, tuple[str, Binding]] = {}
    for i, t in enumerate(trans_raw):
        path = f"graph.transitions[{i}]"
        t = _expect(t, dict, path)
        _keys(t, {"index", "name", "component", "delay_ms"}, {"index", "name"}, path)
        idx = _expect(t["index"], int, f"{path}.index")
        tname = _expect(t["name"], str, f"{path}.name")
        if ("component" in t) == ("delay_ms" in t):
            raise ConfigError("transition needs exactly one of 'component' / 'delay_ms'", field=path)
        if "component" in t:
            comp = _expect(t["component"], str, f"{path}.component")
            if comp not in components:
                raise ConfigError(f"unknown binding '{comp}'", field=f"{path}.component")
            binding = Binding(component=comp)
        else:
            delay = _expect(t["delay_ms"], float, f"{path}.delay_ms")
            if not delay > 0:
                raise ConfigError("delay_ms must be positive", field=f"{path}.delay_ms")
            binding = Binding(delay=delay)
        if idx in by_index:
            raise ConfigError(f"duplicate transition index {idx}", field=f"{path}.index")
        by_index[idx] = (tname, binding)
    if sorted(by_index) != list(range(len(by_index))):
        raise ConfigError("transition indices must be 0..n-1", field="graph.transitions")
    arcs = []
    for i, a in enumerate(_expect(obj["arcs"], list, "graph.arcs")):
        a = _expect(a, list, f"graph.arcs[{i}]")
        if len(a) != 2:
            raise ConfigError("an arc is a [source, target] pair", field=f"graph.arcs[{i}]")
        arcs.append((_expect(a[0], str, f"graph.arcs[{i}][0]"), _expect(a[1], str, f"graph.arcs[{i}][1]")))
    g = TimedMarkedGraph(
        places=places,
        transitions=[by_index[i][0] for i in range(len(by_index))],
        arcs=arcs,
        marking=marking,
        bindings=[by_index[i][1] for i in range(len(by_index))],
    )
    problems = validate(g)
    if problems:
        raise ConfigError("invalid marked graph: " + "; ".join(map(str, problems)), field="graph")
    return g


_TOP_KEYS = {"clock_ns", "delta", "seed", "backend", "max_combinations", "neighborhood", "components", "graph"}


def parse_config(data: Any, base_dir: Path | None = None) -> ExplorationConfig:
    data = _expect(data, dict, "")
    _keys(data, _TOP_KEYS, {"clock_ns", "components", "graph"}, "")
    clock = _expect(data["clock_ns"], float, "clock_ns")
    if not clock > 0:
        raise ConfigError("clock_ns must be positive", field="clock_ns")
    delta = _expect(data.get("delta", 0.1), float, "delta")
    if not delta > 0:
        raise ConfigError("delta must be positive", field="delta")
    seed = _expect(data.get("seed", 0), int, "seed")
    maxc = _expect(data.get("max_combinations", DEFAULT_MAX_COMBINATIONS), int, "max_combinations")

    b = _expect(data.get("backend", {"kind": "simulated"}), dict, "backend")
    _keys(b, {"kind", "table", "interpolate"}, {"kind"}, "backend")
    kind = _expect(b["kind"], str, "backend.kind")
    if kind not in ("simulated", "table"):
        raise ConfigError(f"unknown backend '{kind}'", field="backend.kind")
    table = _expect(b["table"], str, "backend.table") if "table" in b else None
    if kind == "table" and table is None:
        raise ConfigError("table backend needs a 'table' path", field="backend.table")
    backend = BackendSpec(kind, table, bool(_expect(b.get("interpolate", False), bool, "backend.interpolate")))

    nb = _expect(data.get("neighborhood", {}), dict, "neighborhood")
    _keys(nb, {"enabled", "radius"}, set(), "neighborhood")
    enabled = _expect(nb.get("enabled", False), bool, "neighborhood.enabled")
    radius = _expect(nb.get("radius", 2), int, "neighborhood.radius")

    comps_raw = _expect(data["components"], list, "components")
    comps = [_parse_component(c, f"components[{i}]") for i, c in enumerate(comps_raw)]
    names = [c.name for c in comps]
    for i, n in enumerate(names):
        if n in names[:i]:
            raise ConfigError(f"duplicate component name '{n}'", field=f"components[{i}].name")
    graph = _parse_graph(data["graph"], {c.name: c for c in comps})
    return ExplorationConfig(
        clock_ns=clock,
        delta=delta,
        seed=seed,
        components=comps,
        graph=graph,
        backend=backend,
        max_combinations=maxc,
        neighborhood=enabled,
        radius=radius,
        base_dir=base_dir or Path.cwd(),
    )


def load_config(path: str | Path, seed: int | None = None) -> ExplorationConfig:
    """Read a config file; ``seed`` (or ``$COSMOS_SEED``) overrides the file's seed."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field=str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    cfg = parse_config(data, base_dir=path.resolve().parent)
    env = os.environ.get("COSMOS_SEED")
    if seed is not None:
        cfg.seed = seed
    elif env:
        try:
            cfg.seed = int(env)
        except ValueError:
            raise ConfigError(f"COSMOS_SEED must be an integer, got {env!r}", field="COSMOS_SEED") from None
    return cfg


def _component_dict(c: ComponentDescriptor) -> dict:
    if not c.synthesizable:
        return {"name": c.name, "fixed_latency_ms": c.fixed_latency}
    return {
        "name": c.name,
        "gamma_r": c.gamma_r,
        "gamma_w": c.gamma_w,
        "eta": c.eta,
        "trip_count": c.trip_count,
        "base_cycles": c.base_cycles,
        "max_unrolls": c.max_unrolls,
        "ports_options": list(c.ports_options),
        "area": {"base": c.area.base, "unit": c.area.unit, "port": c.area.port},
        "plm": {"bank": c.plm.bank, "word": c.plm.word, "capacity_words": c.plm.capacity_words},
        "noise_rate": c.noise_rate,
    }


def config_to_dict(cfg: ExplorationConfig) -> dict:
    g = cfg.graph
    backend: dict[str, Any] = {"kind": cfg.backend.kind}
    if cfg.backend.table is not None:
        backend["table"] = cfg.backend.table
    if cfg.backend.interpolate:
        backend["interpolate"] = True
    transitions = []
    for j, (name, b) in enumerate(zip(g.transitions, g.bindings)):
        rec: dict[str, Any] = {"index": j, "name": name}
        if b.component is not None:
            rec["component"] = b.component
        else:
            rec["delay_ms"] = b.delay
        transitions.append(rec)
    return {
        "clock_ns": cfg.clock_ns,
        "delta": cfg.delta,
        "seed": cfg.seed,
        "backend": backend,
        "max_combinations": cfg.max_combinations,
        "neighborhood": {"enabled": cfg.neighborhood, "radius": cfg.radius},
        "components": [_component_dict(c) for c in cfg.components],
        "graph": {
            "places": list(g.places),
            "marking": list(g.marking),
            "transitions": transitions,
            "arcs": [list(a) for a in g.arcs],
        },
    }
