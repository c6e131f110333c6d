from __future__ import annotations

import logging
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosmos.errors import DeadlockError, UsageError
from cosmos.planner import min_cycle_time_bisection
from cosmos.tmg import (
    Binding,
    TimedMarkedGraph,
    cycles,
    effective_throughput,
    incidence_matrix,
    is_strongly_connected,
    min_cycle_time,
    scc_decompose,
    throughput_info,
    validate,
)

from conftest import random_strong_tmg, ring


def graph(places, transitions, arcs, marking):
    return TimedMarkedGraph(places, transitions, arcs, marking)


def chain_loop(k=3, tokens_on_last=1):
    """t0 -> p0 -> t1 -> ... -> t{k-1} -> p{k-1} -> t0"""
    ts = [f"t{j}" for j in range(k)]
    ps = [f"p{j}" for j in range(k)]
    arcs = []
    for j in range(k):
        arcs += [(ts[j], ps[j]), (ps[j], ts[(j + 1) % k])]
    return graph(ps, ts, arcs, [0] * (k - 1) + [tokens_on_last])


# ------------------------------------------------------------ validation


def test_ring_is_valid():
    assert validate(ring()) == []


def test_place_with_two_consumers():
    g = graph(["p1", "p2"], ["t1", "t2", "t3"],
              [("t1", "p1"), ("p1", "t2"), ("p1", "t3"), ("t2", "p2"), ("p2", "t1")], [0, 1])
    v = validate(g)
    assert len(v) == 1 and v[0].element == "p1" and v[0].rule == "place-output"


def test_arc_to_undeclared_transition():
    g = graph(["p1"], ["t1"], [("t1", "p1"), ("p1", "t9")], [1])
    v = validate(g)
    assert [x.rule for x in v if x.rule == "undeclared-node"] == ["undeclared-node"]
    assert any(x.element == "t9" for x in v)


def test_other_violations():
    g = graph(["p1", "p1"], ["t1"], [("t1", "p1"), ("p1", "t1"), ("t1", "p1")], [1])
    rules = {x.rule for x in validate(g)}
    assert {"duplicate-name", "marking-length", "arc-weight"} <= rules
    g = graph(["p1"], ["t1", "t2"], [("t1", "t2"), ("t1", "p1"), ("p1", "t2")], [-1])
    rules = {x.rule for x in validate(g)}
    assert {"not-bipartite", "marking-value"} <= rules


# ------------------------------------------------------------ incidence matrix


def test_incidence_ring():
    A = incidence_matrix(ring())
    assert A.tolist() == [[-1, 1], [1, -1]]


def test_incidence_self_loop_is_zero_row():
    g = graph(["p"], ["t1"], [("t1", "p"), ("p", "t1")], [1])
    assert incidence_matrix(g).tolist() == [[0]]


def test_incidence_rows_sum_to_zero():
    A = incidence_matrix(chain_loop(3))
    assert A.shape == (3, 3)
    assert np.all(A.sum(axis=1) == 0)
    assert np.all(A.sum(axis=0) == 0)


def test_incidence_rejects_invalid():
    g = graph(["p1"], ["t1"], [("t1", "p1"), ("p1", "t9")], [1])
    with pytest.raises(UsageError):
        incidence_matrix(g)


# ------------------------------------------------------------ SCCs


def test_scc_ring_and_pipeline():
    (s,) = scc_decompose(ring())
    assert s.cyclic and sorted(s.transitions) == [0, 1]
    pipe = graph(["p1"], ["t1", "t2"], [("t1", "p1"), ("p1", "t2")], [0])
    comps = scc_decompose(pipe)
    assert len(comps) == 2 and not any(c.cyclic for c in comps)
    assert not is_strongly_connected(pipe)


def _reach(adj, a):
    seen, stack = {a}, [a]
    while stack:
        x = stack.pop()
        for y in adj.get(x, ()):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def test_scc_matches_reachability_oracle():
    rng = random.Random(5)
    for _ in range(100):
        n = rng.randint(2, 7)
        ts = [f"t{j}" for j in range(n)]
        ps, arcs = [], []
        for k in range(rng.randint(1, 2 * n)):
            a, b = rng.randrange(n), rng.randrange(n)
            ps.append(f"p{k}")
            arcs += [(ts[a], f"p{k}"), (f"p{k}", ts[b])]
        g = graph(ps, ts, arcs, [1] * len(ps))
        adj = {}
        for x, y in arcs:
            adj.setdefault(x, []).append(y)
        reach = {v: _reach(adj, v) for v in ts + ps}
        want = set()
        for v in ts:
            want.add(frozenset(j for j, w in enumerate(ts) if w in reach[v] and v in reach[w]))
        got = {frozenset(s.transitions) for s in scc_decompose(g) if s.transitions}
        assert got == want


# ------------------------------------------------------------ cycle time and throughput


def test_min_cycle_time_examples():
    assert min_cycle_time(ring((0, 1)), [3, 2]) == 5.0
    assert min_cycle_time(ring((1, 1)), [3, 2]) == 2.5
    loop = graph(["p"], ["t"], [("t", "p"), ("p", "t")], [1])
    assert min_cycle_time(loop, [4]) == 4.0


def test_min_cycle_time_errors():
    with pytest.raises(DeadlockError) as exc:
        min_cycle_time(ring((0, 0)), [3, 2])
    assert "t1" in str(exc.value) and "t2" in str(exc.value)
    pipe = graph(["p1"], ["t1", "t2"], [("t1", "p1"), ("p1", "t2")], [0])
    with pytest.raises(UsageError):
        min_cycle_time(pipe, [1, 1])
    with pytest.raises(UsageError):
        min_cycle_time(ring(), [1, 0])
    with pytest.raises(UsageError):
        min_cycle_time(ring(), [1])


def test_throughput_examples(caplog):
    assert effective_throughput(ring(), [3, 2]) == pytest.approx(0.2)
    two = graph(
        ["a1", "a2", "b1", "b2"],
        ["x1", "x2", "y1", "y2"],
        [("x1", "a1"), ("a1", "x2"), ("x2", "a2"), ("a2", "x1"),
         ("y1", "b1"), ("b1", "y2"), ("y2", "b2"), ("b2", "y1")],
        [0, 1, 0, 1],
    )
    assert effective_throughput(two, [2, 3, 4, 4]) == pytest.approx(0.125)
    pipe = graph(["p1"], ["t1", "t2"], [("t1", "p1"), ("p1", "t2")], [0])
    with caplog.at_level(logging.WARNING):
        info = throughput_info(pipe, [1, 1])
    assert info.value == math.inf and info.acyclic
    assert "no cycle" in caplog.text


def test_throughput_detects_deadlock():
    with pytest.raises(DeadlockError):
        effective_throughput(ring((0, 0)), [1, 1])


def test_cycle_cap_falls_back_to_bisection():
    rng = random.Random(11)
    g = random_strong_tmg(rng, max_n=6)
    tau = [rng.uniform(1, 5) for _ in range(g.n)]
    exact = min_cycle_time(g, tau)
    g2 = TimedMarkedGraph(g.places, g.transitions, g.arcs, g.marking)
    n_cycles = len(cycles(g2))
    if n_cycles > 1:
        assert cycles(g2, cap=n_cycles - 1) is None
        assert min_cycle_time(g2, tau, cap=n_cycles - 1) == pytest.approx(exact, rel=1e-9)
        assert effective_throughput(g2, tau, cap=n_cycles - 1) == pytest.approx(1 / exact, rel=1e-9)


def test_bindings_are_exclusive():
    with pytest.raises(UsageError):
        Binding()
    with pytest.raises(UsageError):
        Binding(component="a", delay=1.0)


# ------------------------------------------------------------ properties


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 10))
def test_cycle_time_scales_and_is_monotone(seed, c):
    rng = random.Random(seed)
    g = random_strong_tmg(rng, max_n=6)
    tau = [rng.uniform(0.1, 10) for _ in range(g.n)]
    base = min_cycle_time(g, tau)
    assert min_cycle_time(g, [c * t for t in tau]) == pytest.approx(c * base, rel=1e-12)
    assert effective_throughput(g, [c * t for t in tau]) == pytest.approx(1 / (c * base), rel=1e-12)
    j = rng.randrange(g.n)
    bumped = list(tau)
    bumped[j] += rng.uniform(0, 5)
    assert min_cycle_time(g, bumped) >= base


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_enumeration_matches_bisection(seed):
    rng = random.Random(seed)
    g = random_strong_tmg(rng)
    tau = [rng.uniform(0.1, 10) for _ in range(g.n)]
    assert min_cycle_time_bisection(g, tau) == pytest.approx(min_cycle_time(g, tau), rel=1e-9)
