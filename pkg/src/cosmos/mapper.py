"""Synthesis mapping: planned latencies back to knob settings.

Inside a region the unroll count is estimated with a diminishing-returns
model; the region's lower-right corner sits at ``mu_min`` unrolls and
latency ``lambda_max``, the upper-left corner at ``mu_max`` and
``lambda_min``::

    lambda_t / lambda_max = 1 / ((1 - f) + f * lambda_max / lambda_min),
    f = (mu - mu_min) / (mu_max - mu_min)

Solving for ``mu`` gives :func:`phi`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Mapping

from cosmos.backend import InvocationLedger, SynthesisBackend
from cosmos.characterize import Characterization, lambda_bound
from cosmos.errors import MappingError, UsageError
from cosmos.model import ComponentDescriptor, DesignPoint, KnobSetting, Region, mismatch
from cosmos.planner import PlannedPoint
from cosmos.tmg import TimedMarkedGraph, effective_throughput

log = logging.getLogger(__name__)

Fallback = Literal["none", "unroll-increase", "next-region-corner"]

REL_TOL = 1e-9


def phi(lambda_target: float, lambda_min: float, lambda_max: float, mu_min: float, mu_max: float) -> float:
    """Unroll count expected to reach ``lambda_target`` inside a region (real-valued)."""
    if not lambda_min < lambda_max:
        raise MappingError(f"degenerate region: lambda_min={lambda_min} lambda_max={lambda_max}")
    if not mu_min < mu_max:
        raise MappingError(f"degenerate region: mu_min={mu_min} mu_max={mu_max}")
    num = (lambda_min * lambda_max * mu_max + lambda_target * lambda_max * mu_min) - (
        lambda_min * lambda_max * mu_min + lambda_target * lambda_min * mu_max
    )
    return num / (lambda_target * (lambda_max - lambda_min))


def unrolls_for(lambda_target: float, region: Region) -> int:
    """``ceil(phi)`` clamped to the region's unroll range."""
    mu = phi(lambda_target, region.lambda_min, region.lambda_max, region.mu_min, region.mu_max)
    u = math.ceil(mu - 1e-9)
    return min(max(u, region.mu_min), region.mu_max)


@dataclass
class MappingOutcome:
    component: str
    lambda_target: float
    region: Region
    unrolls: int
    ports: int
    realized: DesignPoint
    new_invocations: int
    fallback: Fallback = "none"
    corner_reuse: bool = False
    shortfall: bool = False


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=0.0)


def _corner(component: str, target: float, region: Region, fast: bool, fallback: Fallback, shortfall=False):
    u = region.mu_max if fast else region.mu_min
    lat = region.lambda_min if fast else region.lambda_max
    area = region.alpha_max if fast else region.alpha_min
    return MappingOutcome(
        component=component,
        lambda_target=target,
        region=region,
        unrolls=u,
        ports=region.ports,
        realized=DesignPoint(lat, area, provenance=(u, region.ports)),
        new_invocations=0,
        fallback=fallback,
        corner_reuse=True,
        shortfall=shortfall,
    )


def _containing(char: Characterization, target: float) -> list[Region]:
    return [
        r
        for r in char.regions
        if (r.lambda_min <= target or _close(r.lambda_min, target))
        and (target <= r.lambda_max or _close(r.lambda_max, target))
    ]


def _interp_area(r: Region, target: float) -> float:
    if r.degenerate or r.lambda_max == r.lambda_min:
        return r.alpha_min
    w = (r.lambda_max - target) / (r.lambda_max - r.lambda_min)
    return r.alpha_min + w * (r.alpha_max - r.alpha_min)


def map_component(
    lambda_target: float,
    char: Characterization,
    component: ComponentDescriptor,
    backend: SynthesisBackend,
    ledger: InvocationLedger,
    clock: float,
) -> MappingOutcome:
    if not char.regions:
        raise UsageError(f"component '{char.component}' has an empty characterization")
    name = char.component
    inside = _containing(char, lambda_target)

    if inside:
        # several overlapping regions: take the one expected to be cheapest
        region = min(inside, key=lambda r: (_interp_area(r, lambda_target), r.ports))
        if _close(lambda_target, region.lambda_max):
            return _corner(name, lambda_target, region, fast=False, fallback="none")
        if region.degenerate or _close(lambda_target, region.lambda_min):
            return _corner(name, lambda_target, region, fast=True, fallback="none")
        before = ledger.hls_count
        u = unrolls_for(lambda_target, region)
        fallback: Fallback = "none"
        while u < region.mu_max:
            bound = lambda_bound(component, region.ports, u)
            res = ledger.hls(backend, component, KnobSetting(u, region.ports, clock), bound, "mapping")
            if res.constraint_satisfied and res.effective_latency <= lambda_target * (1 + REL_TOL):
                area = res.logic_area + region.plm_area
                return MappingOutcome(
                    component=name,
                    lambda_target=lambda_target,
                    region=region,
                    unrolls=u,
                    ports=region.ports,
                    realized=DesignPoint(res.effective_latency, area, provenance=(u, region.ports)),
                    new_invocations=ledger.hls_count - before,
                    fallback=fallback,
                )
            fallback = "unroll-increase"
            u += 1
        out = _corner(name, lambda_target, region, fast=True, fallback=fallback)
        out.new_invocations = ledger.hls_count - before
        return out

    fastest = min(char.regions, key=lambda r: (r.lambda_min, r.alpha_max))
    if lambda_target < fastest.lambda_min:
        log.warning("%s: target %.9g ms is below the fastest corner %.9g ms", name, lambda_target, fastest.lambda_min)
        return _corner(name, lambda_target, fastest, fast=True, fallback="next-region-corner", shortfall=True)
    slowest = max(char.regions, key=lambda r: (r.lambda_max, -r.alpha_min))
    if lambda_target > slowest.lambda_max:
        return _corner(name, lambda_target, slowest, fast=False, fallback="none")
    # gap between regions: slowest point that is still fast enough
    below = [r for r in char.regions if r.lambda_max < lambda_target]
    region = max(below, key=lambda r: (r.lambda_max, -r.alpha_min))
    return _corner(name, lambda_target, region, fast=False, fallback="next-region-corner")


@dataclass
class SystemDesignPoint:
    planned: PlannedPoint
    theta: float
    area: float
    mismatch: float
    outcomes: dict[str, MappingOutcome]
    shortfall: bool = False
    new_invocations: int = 0
    fixed: dict[str, float] = field(default_factory=dict)

    def design_point(self) -> DesignPoint:
        return DesignPoint(self.theta, self.area, axis="throughput")


def map_solution(
    planned: PlannedPoint,
    chars: Mapping[str, Characterization],
    components: Mapping[str, ComponentDescriptor],
    g: TimedMarkedGraph,
    backend: SynthesisBackend,
    ledger: InvocationLedger,
    clock: float,
    fixed: Mapping[str, float] | None = None,
) -> SystemDesignPoint:
    fixed = dict(fixed or {})
    before = ledger.hls_count
    outcomes = {}
    for name in sorted(planned.tau):
        outcomes[name] = map_component(planned.tau[name], chars[name], components[name], backend, ledger, clock)
    tau = []
    for b in g.bindings:
        if b.delay is not None:
            tau.append(b.delay)
        elif b.component in fixed:
            tau.append(fixed[b.component])
        else:
            tau.append(outcomes[b.component].realized.latency)
    theta = effective_throughput(g, tau)
    area = math.fsum(o.realized.area for o in outcomes.values())
    return SystemDesignPoint(
        planned=planned,
        theta=theta,
        area=area,
        mismatch=mismatch(planned.planned_cost, area),
        outcomes=outcomes,
        shortfall=any(o.shortfall for o in outcomes.values()),
        new_invocations=ledger.hls_count - before,
        fixed=fixed,
    )
