from __future__ import annotations

import random
from pathlib import Path

import pytest

from cosmos.model import AreaModel, ComponentDescriptor, PlmModel
from cosmos.tmg import Binding, TimedMarkedGraph, cycles

DATA = Path(__file__).resolve().parents[1] / "src" / "cosmos" / "data"


def ring(marking=(0, 1), bindings=None) -> TimedMarkedGraph:
    return TimedMarkedGraph(
        places=["p1", "p2"],
        transitions=["t1", "t2"],
        arcs=[("t1", "p1"), ("p1", "t2"), ("t2", "p2"), ("p2", "t1")],
        marking=list(marking),
        bindings=list(bindings or []),
    )


def random_strong_tmg(rng: random.Random, max_n: int = 8, max_tokens: int = 3, bindings=None) -> TimedMarkedGraph:
    """Strongly connected, deadlock-free marked graph with at most ``max_tokens`` on any simple cycle.

    A random Hamiltonian cycle guarantees strong connectivity; a place gets a
    token when its arc goes backwards in the cycle order, so every cycle is
    marked.
    """
    while True:
        n = rng.randint(1, max_n)
        order = list(range(n))
        rng.shuffle(order)
        pos = {t: k for k, t in enumerate(order)}
        edges = {(order[k], order[(k + 1) % n]) for k in range(n)}
        for _ in range(rng.randint(0, 2 * n)):
            a, b = rng.randrange(n), rng.randrange(n)
            edges.add((a, b))
        places, arcs, marking = [], [], []
        for k, (a, b) in enumerate(sorted(edges)):
            p = f"p{k}"
            places.append(p)
            arcs += [(f"t{a}", p), (p, f"t{b}")]
            tokens = 1 if pos[b] <= pos[a] else 0
            if tokens and rng.random() < 0.2:
                tokens += 1
            marking.append(tokens)
        g = TimedMarkedGraph(
            places=places,
            transitions=[f"t{j}" for j in range(n)],
            arcs=arcs,
            marking=marking,
            bindings=list(bindings(n)) if bindings else [],
        )
        cl = cycles(g)
        if cl and all(1 <= c.tokens <= max_tokens for c in cl):
            return g


def demo_component(**over) -> ComponentDescriptor:
    kw = dict(
        name="demo",
        gamma_r=1,
        gamma_w=1,
        eta=1,
        trip_count=64,
        base_cycles=10,
        max_unrolls=8,
        ports_options=(1, 2),
        area=AreaModel(0.05, 0.01, 0.005),
        plm=PlmModel(0.01, 1e-5, 4096),
        noise_rate=0.0,
    )
    kw.update(over)
    return ComponentDescriptor(**kw)


@pytest.fixture
def demo():
    return demo_component()


@pytest.fixture
def data_dir() -> Path:
    return DATA


def delay_bindings(n):
    return [Binding(delay=1.0) for _ in range(n)]
