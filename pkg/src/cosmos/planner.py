"""System-level synthesis planning.

Each component's characterized corners are summarized by a convex,
non-increasing piecewise-linear cost function of its latency.  For a target
throughput ``theta`` the planner solves

    min  sum_i f_i(tau_i)
    s.t. A @ sigma + M0 / theta >= tau_in      (one row per place)
         lambda_min_i <= tau_i <= lambda_max_i

where ``tau_in`` picks, for every place, the delay of its producer
transition and ``sigma`` are transition initiation times.  Each ``f_i`` is
encoded with an epigraph variable bounded below by every segment line.
Time is rescaled internally so the largest latency is about 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from cosmos.characterize import Characterization
from cosmos.errors import PlanningError, UsageError
from cosmos.lp import LpInstance, solve_lp
from cosmos.model import DesignPoint
from cosmos.tmg import (
    TimedMarkedGraph,
    critical_cycle,
    cycles,
    effective_throughput,
    incidence_matrix,
    scc_decompose,
    check_deadlock,
)

log = logging.getLogger(__name__)

REL_TOL = 1e-9
# the bisection oracle must resolve periods well below REL_TOL
ORACLE_TOL = 1e-13


@dataclass(frozen=True)
class PiecewiseLinearCost:
    """Convex, non-increasing cost over ``[breakpoints[0].λ, +inf)``.

    Beyond the last breakpoint the cost stays at the last area.
    """

    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        bp = self.breakpoints
        if not bp:
            raise UsageError("a cost function needs at least one breakpoint")
        for (l0, a0), (l1, a1) in zip(bp, bp[1:]):
            if not (l1 > l0 and a1 < a0):
                raise UsageError("breakpoints must increase in latency and decrease in area")
        s = self.slopes
        if any(s1 < s0 - 1e-12 * max(1.0, abs(s0)) for s0, s1 in zip(s, s[1:])):
            raise UsageError("cost function is not convex")

    @property
    def slopes(self) -> list[float]:
        bp = self.breakpoints
        return [(a1 - a0) / (l1 - l0) for (l0, a0), (l1, a1) in zip(bp, bp[1:])]

    @property
    def lambda_min(self) -> float:
        return self.breakpoints[0][0]

    def segments(self) -> list[tuple[float, float]]:
        """``(slope, intercept)`` of every affine piece, including the flat tail."""
        bp = self.breakpoints
        out = [(s, a0 - s * l0) for s, (l0, a0) in zip(self.slopes, bp)]
        out.append((0.0, bp[-1][1]))
        return out

    def __call__(self, latency: float) -> float:
        bp = self.breakpoints
        if latency <= bp[0][0]:
            if len(bp) == 1:
                return bp[0][1]
            s = self.slopes[0]
            return bp[0][1] + s * (latency - bp[0][0])
        return max(s * latency + c for s, c in self.segments())


def lower_envelope(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Decreasing part of the lower convex hull of ``(latency, area)`` points."""
    pts = sorted(set(points))
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop hull[-1] if it is on or above the chord hull[-2] -> p
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        if hull and hull[-1][0] == p[0]:
            continue  # same latency, larger area
        hull.append(p)
    # keep from the leftmost point down to the minimum-area point
    k = min(range(len(hull)), key=lambda i: (hull[i][1], hull[i][0]))
    return hull[: k + 1]


def build_cost_function(char: Characterization) -> PiecewiseLinearCost:
    if not char.regions:
        raise UsageError(f"component '{char.component}' has no regions")
    pts = [(p.latency, p.area) for p in char.corner_points()]
    return PiecewiseLinearCost(tuple(lower_envelope(pts)))


# ------------------------------------------------------------ planning data


@dataclass(frozen=True)
class ComponentRange:
    """Latency interval and cost function of one synthesizable transition."""

    lambda_min: float
    lambda_max: float
    cost: PiecewiseLinearCost


@dataclass
class PlannedPoint:
    theta: float
    tau: dict[str, float]  # transition name -> planned latency (ms)
    initiation_times: dict[str, float]
    planned_cost: float
    component_costs: dict[str, float] = field(default_factory=dict)

    def design_point(self) -> DesignPoint:
        return DesignPoint(self.theta, self.planned_cost, axis="throughput")


def component_ranges(
    g: TimedMarkedGraph,
    chars: Mapping[str, Characterization],
    fixed: Mapping[str, float] | None = None,
) -> dict[str, ComponentRange]:
    """Latency range and cost function of every characterized component in ``g``."""
    fixed = fixed or {}
    out = {}
    for b in g.bindings:
        if b.component is not None and b.component not in out and b.component not in fixed:
            if b.component not in chars:
                raise UsageError(f"component '{b.component}' is not characterized")
            ch = chars[b.component]
            out[b.component] = ComponentRange(ch.lambda_min, ch.lambda_max, build_cost_function(ch))
    return out


def _tau_vector(g: TimedMarkedGraph, ranges: Mapping[str, ComponentRange], fixed: Mapping[str, float], which: str) -> np.ndarray:
    tau = np.zeros(g.n)
    for j, b in enumerate(g.bindings):
        if b.delay is not None:
            tau[j] = b.delay
        elif b.component in fixed:
            tau[j] = fixed[b.component]
        else:
            r = ranges[b.component]
            tau[j] = r.lambda_max if which == "max" else r.lambda_min
    return tau


def theta_bounds(
    g: TimedMarkedGraph,
    chars: Mapping[str, Characterization],
    fixed: Mapping[str, float] | None = None,
) -> tuple[float, float]:
    """Throughput with every component at its slowest and at its fastest corner."""
    fixed = dict(fixed or {})
    if not g.bindings:
        raise UsageError("graph transitions carry no bindings")
    ranges = component_ranges(g, chars, fixed)
    lo = effective_throughput(g, _tau_vector(g, ranges, fixed, "max"))
    hi = effective_throughput(g, _tau_vector(g, ranges, fixed, "min"))
    return lo, hi


def _cyclic_structure(g: TimedMarkedGraph) -> tuple[set[int], list[int]]:
    """Transitions lying on some cycle and places internal to a cyclic SCC."""
    on_cycle: set[int] = set()
    places: list[int] = []
    for scc in scc_decompose(g):
        if scc.cyclic:
            on_cycle.update(scc.transitions)
            places.extend(scc.places)
    return on_cycle, sorted(places)


def plan_at_theta(
    g: TimedMarkedGraph,
    costs: Mapping[str, ComponentRange],
    fixed: Mapping[str, float] | None,
    theta: float,
) -> PlannedPoint:
    """Cheapest per-component latencies that sustain throughput ``theta``.

    Transitions bound to the same component share one latency variable.
    Transitions outside every cycle do not constrain throughput and are
    planned at their slowest latency.
    """
    fixed = dict(fixed or {})
    if not theta > 0:
        raise UsageError(f"theta must be positive, got {theta}")
    check_deadlock(g)
    on_cycle, places = _cyclic_structure(g)
    prod, cons = g.producers_consumers()

    comps = sorted({b.component for b in g.bindings if b.component is not None and b.component not in fixed})
    comp_on_cycle = {c for j, b in enumerate(g.bindings) if j in on_cycle and (c := b.component) in comps}

    scale = max([costs[c].lambda_max for c in comps] + [b.delay for b in g.bindings if b.delay] + list(fixed.values()) + [1e-300])

    def const_delay(j: int) -> float | None:
        b = g.bindings[j]
        if b.delay is not None:
            return b.delay
        if b.component in fixed:
            return fixed[b.component]
        return None

    # variable layout: [tau_c for c in comps] + [sigma_j for transitions on a cycle] + [cost_c for c in comps]
    nc = len(comps)
    cyc_ts = sorted(on_cycle)
    sig_idx = {j: nc + k for k, j in enumerate(cyc_ts)}
    cost_base = nc + len(cyc_ts)
    nvar = cost_base + nc
    comp_idx = {c: k for k, c in enumerate(comps)}

    rows: list[np.ndarray] = []
    rhs: list[float] = []
    names: list[str] = []
    inf = math.inf
    period = (1.0 / theta) / scale if math.isfinite(theta) else 0.0
    for i in places:
        p, c = prod[i], cons[i]
        # tau_p - sigma_c + sigma_p <= M0 * period
        row = np.zeros(nvar)
        row[sig_idx[c]] -= 1.0
        row[sig_idx[p]] += 1.0
        b = g.marking[i] * period
        d = const_delay(p)
        if d is None:
            row[comp_idx[g.bindings[p].component]] += 1.0
        else:
            b -= d / scale
        rows.append(row)
        rhs.append(b)
        names.append(g.places[i])
    for c in comps:
        for slope, icpt in costs[c].cost.segments():
            # slope*tau + icpt <= cost  (tau in scaled units)
            row = np.zeros(nvar)
            row[comp_idx[c]] = slope * scale
            row[cost_base + comp_idx[c]] = -1.0
            rows.append(row)
            rhs.append(-icpt)
            names.append(f"epigraph[{c}]")

    bounds: list[tuple[float, float]] = []
    for c in comps:
        r = costs[c]
        if c in comp_on_cycle:
            bounds.append((r.lambda_min / scale, r.lambda_max / scale))
        else:
            bounds.append((r.lambda_max / scale, r.lambda_max / scale))
    bounds += [(0.0, inf)] * len(cyc_ts)
    bounds += [(-inf, inf)] * nc
    obj = np.zeros(nvar)
    obj[cost_base:] = 1.0

    inst = LpInstance(
        c=obj,
        A_ub=np.array(rows) if rows else None,
        b_ub=np.array(rhs) if rows else None,
        bounds=bounds,
        var_names=[f"tau[{c}]" for c in comps] + [f"sigma[{g.transitions[j]}]" for j in cyc_ts] + [f"cost[{c}]" for c in comps],
        row_names=names,
    )
    res = solve_lp(inst)
    if res.status != "optimal":
        raise PlanningError(_infeasibility_message(g, costs, fixed, theta, res.status))

    tau = {c: float(res.x[comp_idx[c]] * scale) for c in comps}
    for c in comps:
        r = costs[c]
        tau[c] = min(max(tau[c], r.lambda_min), r.lambda_max)
    init = {g.transitions[j]: float(res.x[sig_idx[j]] * scale) for j in cyc_ts}
    comp_costs = {c: costs[c].cost(tau[c]) for c in comps}
    return PlannedPoint(
        theta=theta,
        tau=tau,
        initiation_times=init,
        planned_cost=math.fsum(comp_costs.values()),
        component_costs=comp_costs,
    )


def _infeasibility_message(g, costs, fixed, theta, status) -> str:
    tau = _tau_vector(g, costs, fixed, "min")
    cl = cycles(g)
    if cl:
        ratio, cyc = critical_cycle(g, tau, cl)
        names = " -> ".join(g.transitions[t] for t in cyc.transitions)
        return (
            f"throughput {theta:.9g} is not reachable ({status}); binding cycle {names} "
            f"limits throughput to {1.0 / ratio:.9g}"
        )
    return f"throughput {theta:.9g} is not reachable ({status})"


def sweep_thetas(theta_min: float, theta_max: float, delta: float) -> list[float]:
    """Geometric grid from ``theta_min`` to ``theta_max`` with step ratio strictly below ``1 + delta``.

    The number of intervals is the number of ``(1 + delta)`` steps needed to
    pass ``theta_max``; the grid is then spread evenly in log space so every
    consecutive ratio is at most, and in practice strictly below, ``1 + delta``.
    """
    if not delta > 0:
        raise UsageError(f"delta must be positive, got {delta}")
    if not (math.isfinite(theta_min) and math.isfinite(theta_max)):
        return [theta_max]
    if theta_max < theta_min * (1 - REL_TOL):
        raise UsageError("theta_max is below theta_min")
    if math.isclose(theta_min, theta_max, rel_tol=1e-12):
        return [theta_max]
    steps = math.log(theta_max / theta_min) / math.log1p(delta)
    n = math.floor(steps + 1e-9) + 1
    ratio = (theta_max / theta_min) ** (1.0 / n)
    out = [theta_min * ratio**k for k in range(n)]
    out.append(theta_max)
    return out


def sweep(
    g: TimedMarkedGraph,
    costs: Mapping[str, ComponentRange],
    fixed: Mapping[str, float] | None,
    delta: float,
    theta_range: tuple[float, float] | None = None,
) -> list[PlannedPoint]:
    fixed = dict(fixed or {})
    if theta_range is None:
        lo = effective_throughput(g, _tau_vector(g, costs, fixed, "max"))
        hi = effective_throughput(g, _tau_vector(g, costs, fixed, "min"))
    else:
        lo, hi = theta_range
    return [plan_at_theta(g, costs, fixed, th) for th in sweep_thetas(lo, hi, delta)]


def alpha_gaps(points: Sequence[PlannedPoint], delta: float) -> list[tuple[int, float]]:
    """Consecutive planned points whose area ratio gap is not below ``delta``."""
    out = []
    for k in range(1, len(points)):
        a0, a1 = sorted((points[k - 1].planned_cost, points[k].planned_cost))
        gap = a1 / a0 - 1.0
        if gap >= delta:
            out.append((k, gap))
    return out


# ------------------------------------------------------------ LP cycle-time oracle


def _periodic_feasible(A: np.ndarray, tau_in: np.ndarray, marking: np.ndarray, period: float) -> bool:
    """Is there ``sigma >= 0`` with ``A @ sigma + M0 * period >= tau_in``?"""
    m, n = A.shape
    res = solve_lp(
        LpInstance(
            c=np.zeros(n),
            A_ub=-A.astype(float),
            b_ub=marking * period - tau_in,
            bounds=[(0.0, math.inf)] * n,
        ),
        tol=ORACLE_TOL,
    )
    return res.status == "optimal"


def min_cycle_time_bisection(g: TimedMarkedGraph, tau: Sequence[float], rel_tol: float = 1e-12) -> float:
    """Smallest period admitting a periodic schedule, by bisection on LP feasibility.

    Independent of cycle enumeration; used as the fallback for very dense
    graphs and as a cross-check.
    """
    tau = np.asarray(tau, dtype=float)
    A = incidence_matrix(g)
    prod, _ = g.producers_consumers()
    scale = float(tau.max())
    t = tau / scale
    tau_in = t[prod]
    marking = np.asarray(g.marking, dtype=float)
    hi = float(t.sum())
    if not _periodic_feasible(A, tau_in, marking, hi):
        raise PlanningError("no finite period is feasible; some cycle carries no token")
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _periodic_feasible(A, tau_in, marking, mid):
            hi = mid
        else:
            lo = mid
    return hi * scale
