"""Timed marked graphs: structure checks and throughput analysis.

A place has exactly one producer and one consumer transition, so every
simple cycle of the underlying bipartite graph alternates transitions and
places.  The minimum cycle time is ``max_k D_k / N_k`` over simple cycles,
``D_k`` the summed firing delays and ``N_k`` the tokens on the cycle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import networkx as nx
import numpy as np

from cosmos.errors import DeadlockError, UsageError

log = logging.getLogger(__name__)

DEFAULT_CYCLE_CAP = 1_000_000


@dataclass(frozen=True)
class Binding:
    """What a transition stands for: a component name or a fixed delay (ms)."""

    component: str | None = None
    delay: float | None = None

    def __post_init__(self) -> None:
        if (self.component is None) == (self.delay is None):
            raise UsageError("a binding needs exactly one of component / delay")
        if self.delay is not None and not self.delay > 0:
            raise UsageError(f"fixed delay must be positive, got {self.delay}")


@dataclass(frozen=True)
class Violation:
    rule: str
    element: str
    detail: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.element} ({self.detail})"


@dataclass(frozen=True)
class Cycle:
    """A simple cycle as transition indices plus its token count."""

    transitions: tuple[int, ...]
    places: tuple[int, ...]
    tokens: int

    def delay(self, tau: Sequence[float]) -> float:
        return math.fsum(tau[t] for t in self.transitions)


@dataclass(frozen=True)
class SCC:
    transitions: tuple[int, ...]
    places: tuple[int, ...]
    cyclic: bool


@dataclass
class TimedMarkedGraph:
    places: list[str]
    transitions: list[str]
    arcs: list[tuple[str, str]]
    marking: list[int]
    bindings: list[Binding] = field(default_factory=list)
    _cycles: list[Cycle] | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def m(self) -> int:
        return len(self.places)

    @property
    def n(self) -> int:
        return len(self.transitions)

    def place_index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.places)}

    def transition_index(self) -> dict[str, int]:
        return {t: j for j, t in enumerate(self.transitions)}

    def producers_consumers(self) -> tuple[list[int], list[int]]:
        """Per place, the index of its input (producer) and output (consumer) transition.

        Only meaningful on a valid graph.
        """
        pi, ti = self.place_index(), self.transition_index()
        prod = [-1] * self.m
        cons = [-1] * self.m
        for a, b in self.arcs:
            if a in ti and b in pi:
                prod[pi[b]] = ti[a]
            elif a in pi and b in ti:
                cons[pi[a]] = ti[b]
        return prod, cons

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(("t", j) for j in range(self.n))
        g.add_nodes_from(("p", i) for i in range(self.m))
        prod, cons = self.producers_consumers()
        for i in range(self.m):
            g.add_edge(("t", prod[i]), ("p", i))
            g.add_edge(("p", i), ("t", cons[i]))
        return g


def validate(g: TimedMarkedGraph) -> list[Violation]:
    out: list[Violation] = []
    for kind, names in (("place", g.places), ("transition", g.transitions)):
        seen = set()
        for name in names:
            if name in seen:
                out.append(Violation("duplicate-name", name, f"{kind} declared twice"))
            seen.add(name)
    overlap = set(g.places) & set(g.transitions)
    for name in sorted(overlap):
        out.append(Violation("duplicate-name", name, "used as both place and transition"))
    if len(g.marking) != g.m:
        out.append(Violation("marking-length", "M0", f"{len(g.marking)} entries for {g.m} places"))
    for name, tokens in zip(g.places, g.marking):
        if not isinstance(tokens, (int, np.integer)) or tokens < 0:
            out.append(Violation("marking-value", name, f"tokens must be a nonnegative integer, got {tokens!r}"))
    if g.bindings and len(g.bindings) != g.n:
        out.append(Violation("binding-length", "bindings", f"{len(g.bindings)} bindings for {g.n} transitions"))

    pset, tset = set(g.places), set(g.transitions)
    inputs = {p: [] for p in g.places}
    outputs = {p: [] for p in g.places}
    seen_arcs = set()
    for a, b in g.arcs:
        if (a, b) in seen_arcs:
            out.append(Violation("arc-weight", f"{a}->{b}", "duplicate arc implies weight > 1"))
            continue
        seen_arcs.add((a, b))
        if a in tset and b in pset:
            inputs[b].append(a)
        elif a in pset and b in tset:
            outputs[a].append(b)
        elif a not in pset | tset or b not in pset | tset:
            missing = a if a not in pset | tset else b
            out.append(Violation("undeclared-node", missing, f"arc {a}->{b} references an undeclared node"))
        else:
            out.append(Violation("not-bipartite", f"{a}->{b}", "arcs must connect a place and a transition"))
    for p in g.places:
        if len(inputs[p]) != 1:
            out.append(Violation("place-input", p, f"{len(inputs[p])} input transitions, expected 1"))
        if len(outputs[p]) != 1:
            out.append(Violation("place-output", p, f"{len(outputs[p])} output transitions, expected 1"))
    return out


def _require_valid(g: TimedMarkedGraph) -> None:
    problems = validate(g)
    if problems:
        raise UsageError("invalid marked graph: " + "; ".join(map(str, problems)))


def incidence_matrix(g: TimedMarkedGraph) -> np.ndarray:
    """``A[i, j] = +1`` if ``t_j`` consumes from ``p_i``, ``-1`` if it produces into it.

    A self-loop place yields a zero row.
    """
    _require_valid(g)
    prod, cons = g.producers_consumers()
    A = np.zeros((g.m, g.n), dtype=int)
    for i in range(g.m):
        A[i, cons[i]] += 1
        A[i, prod[i]] -= 1
    return A


def scc_decompose(g: TimedMarkedGraph) -> list[SCC]:
    """SCCs of the place/transition digraph, ordered by smallest transition index.

    A place outside every cycle links two components and belongs to neither,
    so only components holding a transition are returned.
    """
    _require_valid(g)
    dg = g.digraph()
    out = []
    for comp in nx.strongly_connected_components(dg):
        ts = tuple(sorted(j for kind, j in comp if kind == "t"))
        if not ts:
            continue
        ps = tuple(sorted(i for kind, i in comp if kind == "p"))
        # the digraph is bipartite, so any SCC with two or more nodes holds a cycle
        out.append(SCC(ts, ps, cyclic=len(comp) > 1))
    out.sort(key=lambda s: s.transitions[0])
    return out


def is_strongly_connected(g: TimedMarkedGraph) -> bool:
    _require_valid(g)
    return g.n > 0 and nx.is_strongly_connected(g.digraph())


def iter_cycles(g: TimedMarkedGraph) -> Iterator[Cycle]:
    for path in nx.simple_cycles(g.digraph()):
        # rotate so the cycle starts at its lowest-index transition
        start = min((j, k) for k, (kind, j) in enumerate(path) if kind == "t")[1]
        path = path[start:] + path[:start]
        ts = tuple(j for kind, j in path if kind == "t")
        ps = tuple(i for kind, i in path if kind == "p")
        yield Cycle(ts, ps, int(sum(g.marking[i] for i in ps)))


def cycles(g: TimedMarkedGraph, cap: int = DEFAULT_CYCLE_CAP) -> list[Cycle] | None:
    """All simple cycles, or ``None`` when there are more than ``cap``.

    The result is cached on the graph; graphs are not mutated after
    construction.
    """
    _require_valid(g)
    if g._cycles is not None and len(g._cycles) <= cap:
        return g._cycles
    found = []
    for cyc in iter_cycles(g):
        found.append(cyc)
        if len(found) > cap:
            return None
    found.sort(key=lambda c: (len(c.transitions), c.places))
    g._cycles = found
    return found


def _check_tau(g: TimedMarkedGraph, tau: Sequence[float]) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (g.n,):
        raise UsageError(f"delay vector needs {g.n} entries, got {tau.shape}")
    if not np.all(tau > 0):
        raise UsageError("firing delays must be strictly positive")
    return tau


def _cycle_names(g: TimedMarkedGraph, cyc: Cycle) -> list[str]:
    return [g.transitions[t] for t in cyc.transitions] + [g.transitions[cyc.transitions[0]]]


def check_deadlock(g: TimedMarkedGraph, cycle_list: Sequence[Cycle] | None = None) -> None:
    """Raise :class:`DeadlockError` if some cycle carries no token."""
    if cycle_list is None:
        cycle_list = cycles(g)
    if cycle_list is not None:
        for cyc in cycle_list:
            if cyc.tokens == 0:
                raise DeadlockError(_cycle_names(g, cyc))
        return
    # too many cycles to list: a token-free cycle is a cycle among token-free places
    prod, cons = g.producers_consumers()
    sub = nx.DiGraph()
    for i in range(g.m):
        if g.marking[i] == 0:
            sub.add_edge(prod[i], cons[i])
    try:
        loop = nx.find_cycle(sub)
    except nx.NetworkXNoCycle:
        return
    names = [g.transitions[a] for a, _ in loop]
    raise DeadlockError(names + names[:1])


def critical_cycle(g: TimedMarkedGraph, tau: Sequence[float], cycle_list: Sequence[Cycle]) -> tuple[float, Cycle]:
    best, arg = -1.0, None
    for cyc in cycle_list:
        r = cyc.delay(tau) / cyc.tokens
        if r > best:
            best, arg = r, cyc
    return best, arg


def min_cycle_time(g: TimedMarkedGraph, tau: Sequence[float], cap: int = DEFAULT_CYCLE_CAP) -> float:
    """Maximum delay-per-token ratio over all simple cycles of a strongly connected graph."""
    tau = _check_tau(g, tau)
    if not is_strongly_connected(g):
        raise UsageError("min_cycle_time needs a strongly connected graph; decompose first")
    cycle_list = cycles(g, cap)
    check_deadlock(g, cycle_list)
    if cycle_list is None:
        from cosmos.planner import min_cycle_time_bisection

        log.warning("more than %d simple cycles; using LP bisection", cap)
        return min_cycle_time_bisection(g, tau)
    return critical_cycle(g, tau, cycle_list)[0]


def subgraph(g: TimedMarkedGraph, scc: SCC) -> TimedMarkedGraph:
    ps = [g.places[i] for i in scc.places]
    ts = [g.transitions[j] for j in scc.transitions]
    keep = set(ps) | set(ts)
    return TimedMarkedGraph(
        places=ps,
        transitions=ts,
        arcs=[(a, b) for a, b in g.arcs if a in keep and b in keep],
        marking=[g.marking[i] for i in scc.places],
        bindings=[g.bindings[j] for j in scc.transitions] if g.bindings else [],
    )


@dataclass(frozen=True)
class Throughput:
    value: float  # 1/ms, may be inf
    acyclic: bool = False


def effective_throughput(g: TimedMarkedGraph, tau: Sequence[float], cap: int = DEFAULT_CYCLE_CAP) -> float:
    """Maximum sustainable throughput; ``inf`` (with a warning) when no cycle exists."""
    return throughput_info(g, tau, cap).value


def throughput_info(g: TimedMarkedGraph, tau: Sequence[float], cap: int = DEFAULT_CYCLE_CAP) -> Throughput:
    tau = _check_tau(g, tau)
    _require_valid(g)
    cycle_list = cycles(g, cap)
    check_deadlock(g, cycle_list)
    if cycle_list is not None:
        if not cycle_list:
            log.warning("marked graph has no cycle; throughput is unbounded")
            return Throughput(math.inf, acyclic=True)
        return Throughput(1.0 / critical_cycle(g, tau, cycle_list)[0])
    # Every cycle lies inside one SCC, so the minimum over cyclic SCCs is the
    # same as the maximum ratio over all cycles.
    worst = 0.0
    for scc in scc_decompose(g):
        if scc.cyclic:
            sub = subgraph(g, scc)
            worst = max(worst, min_cycle_time(sub, tau[list(scc.transitions)], cap))
    return Throughput(1.0 / worst)
