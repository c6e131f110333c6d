"""Per-component characterization into port-count regions.

For each port count the lower-right corner is synthesized with as many
unrolls as ports; the upper-left corner is searched downward from the
maximum unroll count, accepting the first synthesis whose schedule fits the
access-count state bound.  PLM area is added to both corners afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from cosmos.backend import InvocationLedger, SynthesisBackend
from cosmos.errors import CharacterizationError, UsageError
from cosmos.model import ComponentDescriptor, DesignPoint, KnobSetting, Region, lambda_bound as _bound

log = logging.getLogger(__name__)


def lambda_bound(component: ComponentDescriptor, ports: int, unrolls: int) -> int:
    return _bound(component.gamma_r, component.gamma_w, component.eta, ports, unrolls)


@dataclass(frozen=True)
class CharacterizationConfig:
    clock: float
    max_ports: int | None = None
    max_unrolls: int | None = None
    neighborhood_search: bool = False
    radius: int = 2

    def resolve(self, component: ComponentDescriptor) -> tuple[list[int], int]:
        """Port counts to sweep and the unroll ceiling for ``component``."""
        ports = [p for p in component.ports_options if self.max_ports is None or p <= self.max_ports]
        max_u = component.max_unrolls if self.max_unrolls is None else min(self.max_unrolls, component.max_unrolls)
        if not ports:
            raise UsageError(f"no ports option of '{component.name}' is <= max_ports={self.max_ports}")
        if max_u < max(ports):
            raise UsageError(f"max_unrolls {max_u} is below the largest ports option {max(ports)}")
        return ports, max_u


@dataclass(frozen=True)
class CharPoint:
    """A synthesized component point with knob provenance (area includes PLM)."""

    unrolls: int
    ports: int
    latency: float
    area: float
    role: str  # lower-right | upper-left | neighborhood | mapping

    def design_point(self) -> DesignPoint:
        return DesignPoint(self.latency, self.area, provenance=(self.unrolls, self.ports))


@dataclass
class Characterization:
    component: str
    regions: list[Region]
    all_points: list[CharPoint] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def corner_points(self) -> list[DesignPoint]:
        pts = []
        for r in self.regions:
            pts.append(r.slow_corner)
            if not r.degenerate:
                pts.append(r.fast_corner)
        return pts

    @property
    def lambda_min(self) -> float:
        return min(r.lambda_min for r in self.regions)

    @property
    def lambda_max(self) -> float:
        return max(r.lambda_max for r in self.regions)


def characterize_component(
    component: ComponentDescriptor,
    cfg: CharacterizationConfig,
    backend: SynthesisBackend,
    ledger: InvocationLedger,
) -> Characterization:
    if not component.synthesizable:
        raise UsageError(f"component '{component.name}' has a fixed latency")
    ports_list, max_u = cfg.resolve(component)
    char = Characterization(component.name, [])
    for ports in ports_list:
        try:
            slow = ledger.hls(backend, component, KnobSetting(ports, ports, cfg.clock), None, "characterization")
        except Exception as exc:  # backend failures skip the region, not the component
            msg = f"ports={ports}: lower-right synthesis failed: {exc}"
            log.warning("%s: %s", component.name, msg)
            char.errors.append(msg)
            continue

        fast, mu_max = slow, ports
        for unrolls in range(max_u, ports, -1):
            bound = lambda_bound(component, ports, unrolls)
            res = ledger.hls(backend, component, KnobSetting(unrolls, ports, cfg.clock), bound, "characterization")
            if res.constraint_satisfied and res.effective_latency <= slow.effective_latency:
                fast, mu_max = res, unrolls
                break

        plm = ledger.plm(backend, component, ports)
        region = Region(
            ports=ports,
            mu_min=ports,
            mu_max=mu_max,
            lambda_max=slow.effective_latency,
            lambda_min=fast.effective_latency,
            alpha_min=slow.logic_area + plm,
            alpha_max=fast.logic_area + plm,
            plm_area=plm,
        )
        if cfg.neighborhood_search and not region.degenerate:
            region = neighborhood_refine(component, region, cfg.radius, backend, ledger, cfg.clock, char)
        char.all_points.append(CharPoint(ports, ports, region.lambda_max, region.alpha_min, "lower-right"))
        if not region.degenerate:
            char.all_points.append(CharPoint(region.mu_max, ports, region.lambda_min, region.alpha_max, "upper-left"))
        char.regions.append(region)
    if not char.regions:
        raise CharacterizationError(f"component '{component.name}': no region could be characterized")
    return char


def neighborhood_refine(
    component: ComponentDescriptor,
    region: Region,
    radius: int,
    backend: SynthesisBackend,
    ledger: InvocationLedger,
    clock: float,
    char: Characterization | None = None,
) -> Region:
    """Replace the upper-left corner by the fastest unconstrained point near ``mu_max``.

    The corner only moves if the new point is strictly faster.
    """
    if radius <= 0 or region.degenerate:
        return region
    best = None
    lo = max(region.mu_min + 1, region.mu_max - radius)
    for u in range(lo, region.mu_max + 1):
        try:
            res = ledger.hls(backend, component, KnobSetting(u, region.ports, clock), None, "characterization")
        except Exception as exc:
            log.warning("%s: neighborhood synthesis u=%d failed: %s", component.name, u, exc)
            continue
        area = res.logic_area + region.plm_area
        if char is not None and u != region.mu_max:
            char.all_points.append(CharPoint(u, region.ports, res.effective_latency, area, "neighborhood"))
        cand = (res.effective_latency, area, u)
        if best is None or cand < best:
            best = cand
    if best is None or best[0] >= region.lambda_min:
        return region
    lat, area, u = best
    return Region(
        ports=region.ports,
        mu_min=region.mu_min,
        mu_max=u,
        lambda_max=region.lambda_max,
        lambda_min=lat,
        alpha_min=region.alpha_min,
        alpha_max=area,
        plm_area=region.plm_area,
    )
