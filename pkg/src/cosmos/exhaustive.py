"""Exhaustive baseline: full knob grid per component, then every cross-component combination.

The combination step is vectorized over chunks: for each simple cycle of the
graph the summed delay is a linear function of the per-transition delays, so
throughput for a block of combinations is one matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from cosmos.backend import InvocationLedger, SynthesisBackend
from cosmos.model import ComponentDescriptor, DesignPoint, KnobSetting, pareto_filter
from cosmos.tmg import TimedMarkedGraph, check_deadlock, cycles, effective_throughput

CHUNK = 200_000


class CombinationGuardError(Exception):
    """The number of cross-component combinations exceeds the configured limit."""

    def __init__(self, combinations: int, limit: int, per_component: Mapping[str, int]):
        self.combinations = combinations
        self.limit = limit
        self.per_component = dict(per_component)
        super().__init__(
            f"refusing to enumerate {combinations} combinations (limit {limit}); "
            + " x ".join(f"{k}:{v}" for k, v in self.per_component.items())
        )


@dataclass
class ExhaustiveResult:
    grid: dict[str, list[DesignPoint]]
    pareto: dict[str, list[DesignPoint]]
    invocations: dict[str, int]
    combinations: int
    system_front: list[DesignPoint] = field(default_factory=list)
    refused: bool = False

    @property
    def total_invocations(self) -> int:
        return sum(self.invocations.values())


def grid_size(component: ComponentDescriptor) -> int:
    return len(component.ports_options) * component.max_unrolls


def synthesize_grid(
    component: ComponentDescriptor,
    backend: SynthesisBackend,
    ledger: InvocationLedger,
    clock: float,
) -> list[DesignPoint]:
    """Every (ports, unrolls) setting, unconstrained; areas include the PLM."""
    pts = []
    for p in component.ports_options:
        plm = ledger.plm(backend, component, p)
        for u in range(1, component.max_unrolls + 1):
            res = ledger.hls(backend, component, KnobSetting(u, p, clock), None, "exhaustive")
            pts.append(DesignPoint(res.effective_latency, res.logic_area + plm, provenance=(u, p)))
    return pts


def _front_np(theta: np.ndarray, area: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Indices of the (max theta, min area) front, best throughput first."""
    order = np.lexsort((idx, area, -theta))
    best = np.minimum.accumulate(area[order])
    prev = np.concatenate([[np.inf], best[:-1]])
    return order[area[order] < prev]


def system_front(
    g: TimedMarkedGraph,
    choices: Mapping[str, Sequence[DesignPoint]],
    fixed: Mapping[str, float] | None = None,
) -> list[DesignPoint]:
    """Pareto front over all combinations of per-component choices.

    Provenance of each returned point is a dict component -> chosen point.
    """
    fixed = dict(fixed or {})
    names = sorted(choices)
    sizes = [len(choices[n]) for n in names]
    total = math.prod(sizes)
    cyc = cycles(g)
    check_deadlock(g, cyc)
    n = g.n

    # per transition: fixed delay or the component it reads from
    const = np.zeros(n)
    which = np.full(n, -1)
    for j, b in enumerate(g.bindings):
        if b.delay is not None:
            const[j] = b.delay
        elif b.component in fixed:
            const[j] = fixed[b.component]
        else:
            which[j] = names.index(b.component)
    lat = [np.array([p.latency for p in choices[nm]]) for nm in names]
    area = [np.array([p.area for p in choices[nm]]) for nm in names]
    if cyc:
        C = np.zeros((n, len(cyc)))
        for k, c in enumerate(cyc):
            for t in c.transitions:
                C[t, k] += 1.0
        tokens = np.array([c.tokens for c in cyc], dtype=float)

    best_theta = np.zeros(0)
    best_area = np.zeros(0)
    best_idx = np.zeros(0, dtype=np.int64)
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        sel = np.unravel_index(flat, sizes) if names else ()
        tau = np.tile(const, (flat.size, 1))
        for j in range(n):
            if which[j] >= 0:
                tau[:, j] = lat[which[j]][sel[which[j]]]
        a = np.zeros(flat.size)
        for k in range(len(names)):
            a += area[k][sel[k]]
        if cyc:
            ratio = (tau @ C) / tokens
            th = 1.0 / ratio.max(axis=1)
        else:
            th = np.full(flat.size, np.inf)
        th_all = np.concatenate([best_theta, th])
        a_all = np.concatenate([best_area, a])
        i_all = np.concatenate([best_idx, flat])
        keep = _front_np(th_all, a_all, i_all)
        best_theta, best_area, best_idx = th_all[keep], a_all[keep], i_all[keep]

    out = []
    for th, a, flat in zip(best_theta, best_area, best_idx):
        sel = np.unravel_index(int(flat), sizes) if names else ()
        prov = {nm: choices[nm][int(s)] for nm, s in zip(names, sel)}
        out.append(DesignPoint(float(th), float(a), axis="throughput", provenance=prov))
    return out


def run_exhaustive(
    components: Sequence[ComponentDescriptor],
    g: TimedMarkedGraph,
    backend: SynthesisBackend,
    clock: float,
    max_combinations: int,
    ledger: InvocationLedger | None = None,
) -> ExhaustiveResult:
    """Naive flow; raises :class:`CombinationGuardError` past ``max_combinations``.

    The guard error carries the partial result in ``.result`` so the
    invocation count is still available.
    """
    ledger = ledger or InvocationLedger()
    grid, pareto, inv = {}, {}, {}
    fixed = {c.name: c.fixed_latency for c in components if not c.synthesizable}
    for c in components:
        if not c.synthesizable:
            continue
        before = ledger.hls_count
        grid[c.name] = synthesize_grid(c, backend, ledger, clock)
        inv[c.name] = ledger.hls_count - before
        pareto[c.name] = pareto_filter(grid[c.name])
    combos = math.prod(len(v) for v in pareto.values())
    result = ExhaustiveResult(grid, pareto, inv, combos)
    if combos > max_combinations:
        result.refused = True
        err = CombinationGuardError(combos, max_combinations, {k: len(v) for k, v in sorted(pareto.items())})
        err.result = result
        raise err
    used = {b.component for b in g.bindings if b.component is not None and b.component not in fixed}
    result.system_front = system_front(g, {k: v for k, v in pareto.items() if k in used}, fixed)
    return result


def combination_theta(g: TimedMarkedGraph, latencies: Mapping[str, float], fixed: Mapping[str, float] | None = None) -> float:
    """Throughput of one combination, computed directly (slow path, for checks)."""
    fixed = dict(fixed or {})
    tau = []
    for b in g.bindings:
        if b.delay is not None:
            tau.append(b.delay)
        elif b.component in fixed:
            tau.append(fixed[b.component])
        else:
            tau.append(latencies[b.component])
    return effective_throughput(g, tau)
