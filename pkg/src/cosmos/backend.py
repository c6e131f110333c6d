"""Synthesis backends and the invocation ledger.

A backend stands in for the HLS tool and the memory generator.  Two are
provided: :class:`SimulatedBackend`, a deterministic parametric model with a
seeded scheduling-noise term, and :class:`TableBackend`, which replays
measured rows from a CSV file.

Every call made by the exploration flows goes through an
:class:`InvocationLedger`, which memoizes by knob setting so that the same
synthesis is never paid for twice.
"""

from __future__ import annotations

import abc
import bisect
import csv
import dataclasses
import hashlib
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

from cosmos.errors import ConfigError, TableLookupError, UsageError
from cosmos.model import (
    ComponentDescriptor,
    KnobSetting,
    SynthesisResult,
    is_power_of_two,
    lambda_bound,
)

Phase = Literal["characterization", "constraint-failure", "mapping", "exhaustive"]
PHASES: tuple[str, ...] = ("characterization", "constraint-failure", "mapping", "exhaustive")

TABLE_HEADER = (
    "component",
    "unrolls",
    "ports",
    "clock_ns",
    "latency_cycles",
    "logic_area_mm2",
    "plm_area_mm2",
)


def _clock_key(clock: float) -> float:
    return round(float(clock), 9)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class SynthesisBackend(abc.ABC):
    """Stand-in for an HLS tool plus a memory generator.

    Implementations must be deterministic and safe to call from several
    threads at once.
    """

    name: str = "backend"

    @abc.abstractmethod
    def hls_synthesize(
        self,
        component: ComponentDescriptor,
        knobs: KnobSetting,
        state_bound: int | None = None,
    ) -> SynthesisResult: ...

    @abc.abstractmethod
    def plm_generate(self, component: ComponentDescriptor, ports: int) -> float: ...


def _apply_bound(result: SynthesisResult, state_bound: int | None) -> SynthesisResult:
    ok = state_bound is None or result.states_per_iteration <= state_bound
    if ok == result.constraint_satisfied:
        return result
    return dataclasses.replace(result, constraint_satisfied=ok)


class SimulatedBackend(SynthesisBackend):
    """Parametric latency/area model.

    States per iteration follow the access-count bound plus a deterministic
    noise term in {0, 1, 2}; a nonzero term mimics an HLS schedule that needs
    more states than the bound allows.
    """

    name = "simulated"

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def noise(self, component: ComponentDescriptor, unrolls: int, ports: int) -> int:
        if component.noise_rate <= 0.0:
            return 0
        digest = hashlib.sha256(f"{self.seed}:{component.name}:{unrolls}:{ports}".encode()).digest()
        draw = int.from_bytes(digest[:8], "big") / 2.0**64
        if draw >= component.noise_rate:
            return 0
        return 1 + (digest[8] & 1)

    def schedule_states(self, component: ComponentDescriptor, unrolls: int, ports: int) -> int:
        return lambda_bound(component.gamma_r, component.gamma_w, component.eta, ports, unrolls) + self.noise(
            component, unrolls, ports
        )

    def hls_synthesize(self, component, knobs, state_bound=None):
        component.check_knobs(knobs)
        u, p = knobs.unrolls, knobs.ports
        states = self.schedule_states(component, u, p)
        cycles = component.base_cycles + _ceil_div(component.trip_count, u) * states
        a = component.area
        logic = a.base + a.unit * u + a.port * p
        return _apply_bound(SynthesisResult.from_cycles(cycles, knobs.clock, logic, states), state_bound)

    def plm_generate(self, component, ports):
        if not is_power_of_two(ports):
            raise UsageError(f"ports must be a power of two, got {ports!r}")
        if not component.synthesizable:
            raise UsageError(f"component '{component.name}' has no PLM")
        m = component.plm
        return ports * m.bank + m.word * m.capacity_words


@dataclass(frozen=True)
class TableRow:
    component: str
    unrolls: int
    ports: int
    clock_ns: float
    latency_cycles: int
    logic_area_mm2: float
    plm_area_mm2: float


class TableBackend(SynthesisBackend):
    """Replays synthesis results from a CSV table.

    With ``interpolate`` set, missing unroll counts are filled in from the two
    nearest rows with the same ports and clock: log-latency and area are both
    interpolated linearly in the unroll count.
    """

    name = "table"

    def __init__(self, rows: Iterable[TableRow], interpolate: bool = False):
        self.interpolate = interpolate
        self._rows: dict[tuple[str, int, int, float], TableRow] = {}
        self._plm: dict[tuple[str, int], float] = {}
        self._unrolls: dict[tuple[str, int, float], list[int]] = {}
        for row in rows:
            key = (row.component, row.unrolls, row.ports, _clock_key(row.clock_ns))
            if key in self._rows:
                raise ConfigError(f"duplicate table row for {key}")
            self._rows[key] = row
            pkey = (row.component, row.ports)
            if pkey in self._plm and not math.isclose(self._plm[pkey], row.plm_area_mm2, rel_tol=1e-12):
                raise ConfigError(f"inconsistent plm_area_mm2 for {row.component} ports={row.ports}")
            self._plm[pkey] = row.plm_area_mm2
            bisect.insort(self._unrolls.setdefault((row.component, row.ports, key[3]), []), row.unrolls)
        self._names = {k[0] for k in self._rows}

    @classmethod
    def from_csv(cls, path: str | Path, interpolate: bool = False) -> TableBackend:
        path = Path(path)
        try:
            with path.open(newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                if tuple(reader.fieldnames or ()) != TABLE_HEADER:
                    raise ConfigError(f"table header must be {','.join(TABLE_HEADER)}", field=str(path), line=1)
                rows = []
                for lineno, rec in enumerate(reader, start=2):
                    try:
                        rows.append(
                            TableRow(
                                component=rec["component"],
                                unrolls=int(rec["unrolls"]),
                                ports=int(rec["ports"]),
                                clock_ns=float(rec["clock_ns"]),
                                latency_cycles=int(rec["latency_cycles"]),
                                logic_area_mm2=float(rec["logic_area_mm2"]),
                                plm_area_mm2=float(rec["plm_area_mm2"]),
                            )
                        )
                    except (TypeError, ValueError) as exc:
                        raise ConfigError(f"bad table row: {exc}", field=str(path), line=lineno) from None
        except OSError as exc:
            raise ConfigError(f"cannot read table: {exc}", field=str(path)) from None
        return cls(rows, interpolate=interpolate)

    def components(self) -> list[str]:
        return sorted(self._names)

    def table_lookup(
        self, component: str, knobs: KnobSetting, descriptor: ComponentDescriptor | None = None
    ) -> SynthesisResult:
        ck = _clock_key(knobs.clock)
        row = self._rows.get((component, knobs.unrolls, knobs.ports, ck))
        if descriptor is not None:
            states = lambda_bound(descriptor.gamma_r, descriptor.gamma_w, descriptor.eta, knobs.ports, knobs.unrolls)
        else:
            states = 1
        if row is not None:
            return SynthesisResult.from_cycles(row.latency_cycles, knobs.clock, row.logic_area_mm2, max(states, 1))
        key_text = f"component={component} unrolls={knobs.unrolls} ports={knobs.ports} clock_ns={knobs.clock}"
        if not self.interpolate:
            raise TableLookupError(f"no table row for {key_text}")
        us = self._unrolls.get((component, knobs.ports, ck), [])
        k = bisect.bisect_left(us, knobs.unrolls)
        if k == 0 or k == len(us):
            raise TableLookupError(f"no table rows bracketing {key_text}")
        lo = self._rows[(component, us[k - 1], knobs.ports, ck)]
        hi = self._rows[(component, us[k], knobs.ports, ck)]
        w = (knobs.unrolls - lo.unrolls) / (hi.unrolls - lo.unrolls)
        log_cycles = (1 - w) * math.log(lo.latency_cycles) + w * math.log(hi.latency_cycles)
        cycles = max(1, round(math.exp(log_cycles)))
        area = (1 - w) * lo.logic_area_mm2 + w * hi.logic_area_mm2
        return SynthesisResult.from_cycles(cycles, knobs.clock, area, max(states, 1))

    def hls_synthesize(self, component, knobs, state_bound=None):
        if component.synthesizable:
            component.check_knobs(knobs)
        if component.name not in self._names:
            raise UsageError(f"component '{component.name}' is not in the table")
        # replayed rows are assumed to meet the access-count bound
        return _apply_bound(self.table_lookup(component.name, knobs, component), state_bound)

    def plm_generate(self, component, ports):
        if not is_power_of_two(ports):
            raise UsageError(f"ports must be a power of two, got {ports!r}")
        try:
            return self._plm[(component.name, ports)]
        except KeyError:
            raise TableLookupError(f"no table rows for component={component.name} ports={ports}") from None


# ---------------------------------------------------------------- ledger


@dataclass(frozen=True)
class LedgerEntry:
    component: str
    unrolls: int
    ports: int
    clock: float
    phase: str
    result: SynthesisResult

    @property
    def key(self) -> tuple[str, int, int, float]:
        return (self.component, self.unrolls, self.ports, self.clock)


class InvocationLedger:
    """Memo of every synthesis and memory-generation call.

    Keys are ``(component, unrolls, ports, clock)``.  The phase recorded for
    an entry is the phase of the call that first paid for it; constrained
    calls that fail the state bound are recorded as ``constraint-failure``.
    Failed runs are memoized too.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._hls: dict[tuple[str, int, int, float], LedgerEntry] = {}
        self._plm: dict[tuple[str, int], float] = {}
        self._inflight: dict[tuple, threading.Event] = {}
        self.queries = 0

    @property
    def hls_count(self) -> int:
        return len(self._hls)

    @property
    def plm_count(self) -> int:
        return len(self._plm)

    def entries(self) -> list[LedgerEntry]:
        with self._lock:
            return sorted(self._hls.values(), key=lambda e: e.key)

    def lookup(self, component: str, knobs: KnobSetting) -> LedgerEntry | None:
        return self._hls.get((component, knobs.unrolls, knobs.ports, _clock_key(knobs.clock)))

    def _once(self, key, store: dict, compute):
        """Insert-if-absent; concurrent callers of the same key wait for the first."""
        while True:
            with self._lock:
                if key in store:
                    return store[key], False
                ev = self._inflight.get(key)
                if ev is None:
                    ev = self._inflight[key] = threading.Event()
                    break
            ev.wait()
        try:
            value = compute()
            with self._lock:
                store[key] = value
            return value, True
        finally:
            with self._lock:
                del self._inflight[key]
            ev.set()

    def hls(
        self,
        backend: SynthesisBackend,
        component: ComponentDescriptor,
        knobs: KnobSetting,
        state_bound: int | None = None,
        phase: str = "characterization",
    ) -> SynthesisResult:
        """Memoized synthesis, judged against ``state_bound`` for this query."""
        if phase not in PHASES:
            raise UsageError(f"unknown phase {phase!r}")
        key = (component.name, knobs.unrolls, knobs.ports, _clock_key(knobs.clock))
        with self._lock:
            self.queries += 1

        def compute() -> LedgerEntry:
            raw = backend.hls_synthesize(component, knobs, None)
            ok = state_bound is None or raw.states_per_iteration <= state_bound
            tag = phase if ok or phase == "exhaustive" else "constraint-failure"
            return LedgerEntry(key[0], key[1], key[2], key[3], tag, raw)

        entry, _ = self._once(key, self._hls, compute)
        return _apply_bound(entry.result, state_bound)

    def plm(self, backend: SynthesisBackend, component: ComponentDescriptor, ports: int) -> float:
        area, _ = self._once(("plm", component.name, ports), self._plm, lambda: backend.plm_generate(component, ports))
        return area

    def count(self, component: str | None = None, phase: str | None = None) -> int:
        with self._lock:
            return sum(
                1
                for e in self._hls.values()
                if (component is None or e.component == component) and (phase is None or e.phase == phase)
            )

    # ------------------------------------------------------------ persistence

    def to_dict(self) -> dict:
        return {
            "hls_count": self.hls_count,
            "plm_count": self.plm_count,
            "hls": [
                {
                    "component": e.component,
                    "unrolls": e.unrolls,
                    "ports": e.ports,
                    "clock_ns": e.clock,
                    "phase": e.phase,
                    "latency_cycles": e.result.latency_cycles,
                    "effective_latency_ms": e.result.effective_latency,
                    "logic_area_mm2": e.result.logic_area,
                    "states_per_iteration": e.result.states_per_iteration,
                }
                for e in self.entries()
            ],
            "plm": [
                {"component": name, "ports": ports, "plm_area_mm2": area}
                for (_, name, ports), area in sorted(self._plm.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> InvocationLedger:
        led = cls()
        for rec in data.get("hls", []):
            result = SynthesisResult(
                latency_cycles=int(rec["latency_cycles"]),
                effective_latency=float(rec["effective_latency_ms"]),
                logic_area=float(rec["logic_area_mm2"]),
                states_per_iteration=int(rec["states_per_iteration"]),
            )
            e = LedgerEntry(
                rec["component"], int(rec["unrolls"]), int(rec["ports"]), _clock_key(rec["clock_ns"]), rec["phase"], result
            )
            led._hls[e.key] = e
        for rec in data.get("plm", []):
            led._plm[("plm", rec["component"], int(rec["ports"]))] = float(rec["plm_area_mm2"])
        return led


def ledger_report(ledger: InvocationLedger, exhaustive: dict[str, int] | None = None) -> dict:
    """Per-component invocation counts split by phase, plus totals.

    ``exhaustive`` maps component names to the invocation count of the full
    knob grid; when given, the per-component and aggregate reduction ratios
    are included.
    """
    per: dict[str, dict[str, int]] = {}
    for e in ledger.entries():
        row = per.setdefault(e.component, {p: 0 for p in PHASES if p != "exhaustive"})
        if e.phase in row:
            row[e.phase] += 1
    names = sorted(set(per) | set(exhaustive or {}))
    components = {}
    for name in names:
        row = per.get(name, {p: 0 for p in PHASES if p != "exhaustive"})
        total = sum(row.values())
        rec = {**row, "total": total}
        if exhaustive is not None and name in exhaustive:
            rec["exhaustive"] = exhaustive[name]
            rec["ratio"] = exhaustive[name] / total if total else None
        components[name] = rec
    totals = {p: sum(c.get(p, 0) for c in components.values()) for p in PHASES if p != "exhaustive"}
    totals["total"] = sum(totals.values())
    out = {"components": components, "totals": totals, "plm_count": ledger.plm_count}
    if exhaustive is not None:
        ex_total = sum(exhaustive.values())
        totals["exhaustive"] = ex_total
        out["ratio"] = ex_total / totals["total"] if totals["total"] else None
    return out
