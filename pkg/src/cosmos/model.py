"""Core value types, Pareto dominance, and the span / mismatch metrics.

Component-level points live on the (latency, area) plane where both axes are
minimized.  System-level points live on the (throughput, area) plane where
throughput is maximized.  A :class:`DesignPoint` carries its axis so the two
conventions can never be mixed silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal, Sequence

from cosmos.errors import UsageError

Axis = Literal["latency", "throughput"]

NS_PER_MS = 1_000_000


def is_power_of_two(n: int) -> bool:
    return isinstance(n, int) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, order=True)
class KnobSetting:
    unrolls: int
    ports: int
    clock: float  # ns

    def __post_init__(self) -> None:
        if not isinstance(self.unrolls, int) or self.unrolls < 1:
            raise UsageError(f"unrolls must be a positive integer, got {self.unrolls!r}")
        if not is_power_of_two(self.ports):
            raise UsageError(f"ports must be a power of two, got {self.ports!r}")
        if not self.clock > 0:
            raise UsageError(f"clock must be positive, got {self.clock!r}")


@dataclass(frozen=True)
class SynthesisResult:
    """Outcome of one synthesis run.  ``logic_area`` excludes the PLM."""

    latency_cycles: int
    effective_latency: float  # ms
    logic_area: float  # mm^2
    states_per_iteration: int
    constraint_satisfied: bool = True

    @classmethod
    def from_cycles(
        cls,
        cycles: int,
        clock_ns: float,
        logic_area: float,
        states: int,
        constraint_satisfied: bool = True,
    ) -> SynthesisResult:
        return cls(
            latency_cycles=cycles,
            effective_latency=cycles * clock_ns / NS_PER_MS,
            logic_area=logic_area,
            states_per_iteration=states,
            constraint_satisfied=constraint_satisfied,
        )


@dataclass(frozen=True)
class AreaModel:
    """Logic area of the simulated backend: ``base + unit*unrolls + port*ports``."""

    base: float = 0.05
    unit: float = 0.01
    port: float = 0.005


@dataclass(frozen=True)
class PlmModel:
    """PLM area of the simulated backend: ``ports*bank + word*capacity_words``."""

    bank: float = 0.01
    word: float = 1e-5
    capacity_words: int = 4096


@dataclass(frozen=True)
class ComponentDescriptor:
    """One accelerator component.

    Either ``fixed_latency`` (ms) is set, for components executed in software,
    or the synthesizable parameters drive the backend.  ``gamma_r``,
    ``gamma_w`` and ``eta`` are the per-iteration read/write access counts and
    non-memory states that bound the loop schedule.
    """

    name: str
    gamma_r: int = 0
    gamma_w: int = 0
    eta: int = 0
    trip_count: int = 1
    base_cycles: int = 0
    max_unrolls: int = 1
    ports_options: tuple[int, ...] = (1,)
    fixed_latency: float | None = None
    area: AreaModel = field(default_factory=AreaModel)
    plm: PlmModel = field(default_factory=PlmModel)
    noise_rate: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ports_options", tuple(self.ports_options))
        problems = self.problems()
        if problems:
            raise UsageError(f"component '{self.name}': " + "; ".join(problems))

    @property
    def synthesizable(self) -> bool:
        return self.fixed_latency is None

    def problems(self) -> list[str]:
        out = []
        if not self.name:
            out.append("name must be non-empty")
        if self.fixed_latency is not None:
            if not self.fixed_latency > 0:
                out.append("fixed_latency must be positive")
            return out
        for attr in ("gamma_r", "gamma_w", "eta", "base_cycles"):
            v = getattr(self, attr)
            if not isinstance(v, int) or v < 0:
                out.append(f"{attr} must be a nonnegative integer")
        for attr in ("trip_count", "max_unrolls"):
            v = getattr(self, attr)
            if not isinstance(v, int) or v < 1:
                out.append(f"{attr} must be a positive integer")
        if not self.ports_options:
            out.append("ports_options must be non-empty")
        elif not all(is_power_of_two(p) for p in self.ports_options):
            out.append("ports_options must be powers of two")
        elif list(self.ports_options) != sorted(set(self.ports_options)):
            out.append("ports_options must be strictly increasing")
        elif isinstance(self.max_unrolls, int) and self.max_unrolls < max(self.ports_options):
            out.append("max_unrolls must be >= the largest ports option")
        if not 0.0 <= self.noise_rate <= 1.0:
            out.append("noise_rate must lie in [0, 1]")
        return out

    def check_knobs(self, knobs: KnobSetting) -> None:
        if not self.synthesizable:
            raise UsageError(f"component '{self.name}' has a fixed latency and cannot be synthesized")
        if knobs.unrolls > self.max_unrolls:
            raise UsageError(
                f"component '{self.name}': unrolls {knobs.unrolls} exceeds max_unrolls {self.max_unrolls}"
            )
        if knobs.ports not in self.ports_options:
            raise UsageError(
                f"component '{self.name}': ports {knobs.ports} not in {list(self.ports_options)}"
            )


@dataclass(frozen=True)
class DesignPoint:
    """A (performance, area) pair.

    ``perf`` is a latency in ms when ``axis == "latency"`` and a throughput in
    1/ms when ``axis == "throughput"``.
    """

    perf: float
    area: float
    axis: Axis = "latency"
    provenance: Any = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.axis not in ("latency", "throughput"):
            raise UsageError(f"unknown axis {self.axis!r}")
        if not (self.perf > 0 and self.area > 0):
            raise UsageError(f"design point must be strictly positive, got ({self.perf}, {self.area})")

    @property
    def latency(self) -> float:
        if self.axis != "latency":
            raise UsageError("system-level point has no latency")
        return self.perf

    @property
    def throughput(self) -> float:
        if self.axis != "throughput":
            raise UsageError("component-level point has no throughput")
        return self.perf


@dataclass(frozen=True)
class Region:
    """Design-space slice for one port count.

    Bounded by the lower-right corner ``(lambda_max, alpha_min)`` at
    ``mu_min`` unrolls and the upper-left corner ``(lambda_min, alpha_max)`` at
    ``mu_max`` unrolls.  Areas include the PLM.
    """

    ports: int
    mu_min: int
    mu_max: int
    lambda_max: float
    lambda_min: float
    alpha_min: float
    alpha_max: float
    plm_area: float

    @property
    def degenerate(self) -> bool:
        return self.mu_min == self.mu_max

    @property
    def slow_corner(self) -> DesignPoint:
        return DesignPoint(self.lambda_max, self.alpha_min, provenance=(self.mu_min, self.ports))

    @property
    def fast_corner(self) -> DesignPoint:
        return DesignPoint(self.lambda_min, self.alpha_max, provenance=(self.mu_max, self.ports))

    def problems(self, max_unrolls: int | None = None) -> list[str]:
        out = []
        if self.lambda_min > self.lambda_max:
            out.append("lambda_min > lambda_max")
        if self.alpha_min > self.alpha_max:
            out.append("alpha_min > alpha_max")
        if self.mu_min != self.ports:
            out.append("mu_min != ports")
        if self.mu_max < self.mu_min:
            out.append("mu_max < mu_min")
        if max_unrolls is not None and self.mu_max > max_unrolls:
            out.append("mu_max > max_unrolls")
        return out


def _check_axis(a: DesignPoint, b: DesignPoint) -> None:
    if a.axis != b.axis:
        raise UsageError(f"cannot compare a {a.axis} point with a {b.axis} point")


def dominates(a: DesignPoint, b: DesignPoint) -> bool:
    """True iff ``a`` is no worse than ``b`` on both axes and better on one."""
    _check_axis(a, b)
    if a.axis == "latency":
        perf_ok, perf_better = a.perf <= b.perf, a.perf < b.perf
    else:
        perf_ok, perf_better = a.perf >= b.perf, a.perf > b.perf
    return perf_ok and a.area <= b.area and (perf_better or a.area < b.area)


def pareto_filter(points: Sequence[DesignPoint]) -> list[DesignPoint]:
    """Non-dominated subset, best performance first.

    Points equal on both axes collapse to the first one in input order.
    """
    if not points:
        raise UsageError("pareto_filter needs at least one point")
    axis = points[0].axis
    for p in points:
        if p.axis != axis:
            raise UsageError("pareto_filter got points on mixed axes")
    sign = 1.0 if axis == "latency" else -1.0
    order = sorted(range(len(points)), key=lambda i: (sign * points[i].perf, points[i].area, i))
    front: list[DesignPoint] = []
    best_area = float("inf")
    for i in order:
        if points[i].area < best_area:
            front.append(points[i])
            best_area = points[i].area
    return front


def span(points: Sequence[DesignPoint]) -> tuple[float, float]:
    """``(max perf / min perf, max area / min area)``."""
    if not points:
        raise UsageError("span needs at least one point")
    perfs = [p.perf for p in points]
    areas = [p.area for p in points]
    return max(perfs) / min(perfs), max(areas) / min(areas)


def mismatch(planned_area: float, mapped_area: float) -> float:
    """Relative area error of a mapped point against its planned point."""
    if not planned_area > 0:
        raise UsageError(f"planned area must be positive, got {planned_area}")
    return abs(mapped_area - planned_area) / planned_area


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def lambda_bound(gamma_r: int, gamma_w: int, eta: int, ports: int, unrolls: int) -> int:
    """States that should suffice to schedule one unrolled loop iteration.

    ``ceil(gamma_r*unrolls/ports) + ceil(gamma_w/ports) + eta``
    """
    if ports < 1 or unrolls < 1:
        raise UsageError("ports and unrolls must be positive")
    return _ceil_div(gamma_r * unrolls, ports) + _ceil_div(gamma_w, ports) + eta
