"""End-to-end flows behind the command-line interface.

Each ``run_*`` function reads its inputs, does the work, writes its
artifacts into ``out_dir`` and returns the in-memory results.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

from cosmos.artifacts import characterization_to_dict, load_regions, read_json, write_csv, write_json
from cosmos.backend import InvocationLedger, SimulatedBackend, SynthesisBackend, TableBackend, ledger_report
from cosmos.characterize import Characterization, CharacterizationConfig, characterize_component
from cosmos.config import ExplorationConfig
from cosmos.errors import CosmosError, UsageError
from cosmos.exhaustive import CombinationGuardError, ExhaustiveResult, grid_size, run_exhaustive
from cosmos.mapper import SystemDesignPoint, map_solution
from cosmos.model import DesignPoint, pareto_filter, span
from cosmos.planner import PlannedPoint, alpha_gaps, component_ranges, sweep, theta_bounds

log = logging.getLogger(__name__)

REGIONS = "regions.json"
LEDGER = "ledger.json"
PLANNED_JSON = "planned.json"
PLANNED_CSV = "planned.csv"
PARETO_JSON = "pareto.json"
PARETO_CSV = "pareto.csv"
EXHAUSTIVE_JSON = "exhaustive.json"
EXHAUSTIVE_CSV = "exhaustive_pareto.csv"
REPORT_JSON = "report.json"


def make_backend(cfg: ExplorationConfig) -> SynthesisBackend:
    if cfg.backend.kind == "simulated":
        return SimulatedBackend(cfg.seed)
    return TableBackend.from_csv(cfg.table_path(), interpolate=cfg.backend.interpolate)


def _char_config(cfg: ExplorationConfig) -> CharacterizationConfig:
    return CharacterizationConfig(clock=cfg.clock_ns, neighborhood_search=cfg.neighborhood, radius=cfg.radius)


def _ledger_doc(cfg: ExplorationConfig, ledger: InvocationLedger) -> dict:
    grid = {c.name: grid_size(c) for c in cfg.synthesizable}
    doc = ledger.to_dict()
    doc["exhaustive_grid"] = grid
    doc["summary"] = ledger_report(ledger, grid)
    return doc


def characterize_all(
    cfg: ExplorationConfig,
    backend: SynthesisBackend,
    ledger: InvocationLedger,
    jobs: int = 1,
) -> tuple[dict[str, Characterization], dict[str, str]]:
    """Characterize every synthesizable component; failures are collected, not raised."""
    ccfg = _char_config(cfg)
    comps = cfg.synthesizable

    def one(c):
        try:
            return c.name, characterize_component(c, ccfg, backend, ledger), None
        except CosmosError as exc:
            log.error("%s: %s", c.name, exc)
            return c.name, None, str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, comps))
    else:
        results = [one(c) for c in comps]
    chars = {n: ch for n, ch, _ in results if ch is not None}
    errors = {n: e for n, _, e in results if e is not None}
    return chars, errors


def run_characterize(cfg: ExplorationConfig, out_dir: Path, jobs: int = 1) -> tuple[dict[str, Characterization], dict[str, str]]:
    out_dir.mkdir(parents=True, exist_ok=True)
    backend = make_backend(cfg)
    ledger = InvocationLedger()
    chars, errors = characterize_all(cfg, backend, ledger, jobs)
    doc = {
        "clock_ns": cfg.clock_ns,
        "seed": cfg.seed,
        "backend": cfg.backend.kind,
        "components": [characterization_to_dict(chars[c.name], ledger) for c in cfg.synthesizable if c.name in chars],
        "failed": errors,
    }
    write_json(out_dir / REGIONS, doc)
    write_json(out_dir / LEDGER, _ledger_doc(cfg, ledger))
    return chars, errors


def _load_ledger(path: Path) -> InvocationLedger:
    if path.exists():
        return InvocationLedger.from_dict(read_json(path))
    return InvocationLedger()


def explore(
    cfg: ExplorationConfig,
    chars: dict[str, Characterization],
    backend: SynthesisBackend,
    ledger: InvocationLedger,
    delta: float,
) -> tuple[tuple[float, float], list[PlannedPoint], list[SystemDesignPoint]]:
    fixed = cfg.fixed_latencies
    g = cfg.graph
    missing = sorted(
        {b.component for b in g.bindings if b.component is not None and b.component not in fixed} - set(chars)
    )
    if missing:
        raise UsageError("components without characterization: " + ", ".join(missing))
    bounds = theta_bounds(g, chars, fixed)
    ranges = component_ranges(g, chars, fixed)
    planned = sweep(g, ranges, fixed, delta, bounds)
    comps = cfg.component_map()
    mapped = [map_solution(p, chars, comps, g, backend, ledger, cfg.clock_ns, fixed) for p in planned]
    return bounds, planned, mapped


def _planned_doc(bounds, planned: list[PlannedPoint], delta: float) -> dict:
    gaps = alpha_gaps(planned, delta)
    return {
        "delta": delta,
        "theta_min": bounds[0],
        "theta_max": bounds[1],
        "points": [
            {
                "theta": p.theta,
                "planned_cost_mm2": p.planned_cost,
                "tau_ms": dict(sorted(p.tau.items())),
                "component_cost_mm2": dict(sorted(p.component_costs.items())),
            }
            for p in planned
        ],
        "alpha_gap_violations": [{"index": k, "gap": gap} for k, gap in gaps],
    }


def _pareto_doc(mapped: list[SystemDesignPoint]) -> dict:
    pts = [m.design_point() for m in mapped]
    front = pareto_filter(pts) if pts else []
    front_ids = sorted({id(p) for p in front})
    keep = [i for i, p in enumerate(pts) if id(p) in front_ids]
    recs = []
    for m in mapped:
        recs.append(
            {
                "planned_theta": m.planned.theta,
                "planned_area_mm2": m.planned.planned_cost,
                "realized_theta": m.theta,
                "realized_area_mm2": m.area,
                "sigma": m.mismatch,
                "shortfall": m.shortfall,
                "new_invocations": m.new_invocations,
                "components": {
                    name: {
                        "lambda_target_ms": o.lambda_target,
                        "ports": o.ports,
                        "unrolls": o.unrolls,
                        "latency_ms": o.realized.latency,
                        "area_mm2": o.realized.area,
                        "fallback": o.fallback,
                        "corner_reuse": o.corner_reuse,
                        "shortfall": o.shortfall,
                    }
                    for name, o in sorted(m.outcomes.items())
                },
            }
        )
    return {
        "points": recs,
        "pareto_indices": keep,
        "filtered_differs": len(keep) != len(recs),
    }


def run_explore(
    cfg: ExplorationConfig,
    out_dir: Path,
    regions_path: Path | None = None,
    delta: float | None = None,
) -> tuple[list[PlannedPoint], list[SystemDesignPoint]]:
    out_dir.mkdir(parents=True, exist_ok=True)
    regions_path = regions_path or out_dir / REGIONS
    chars = load_regions(regions_path)
    delta = cfg.delta if delta is None else delta
    if not delta > 0:
        raise UsageError(f"delta must be positive, got {delta}")
    backend = make_backend(cfg)
    ledger = _load_ledger(out_dir / LEDGER)
    bounds, planned, mapped = explore(cfg, chars, backend, ledger, delta)

    names = sorted({n for p in planned for n in p.tau})
    write_json(out_dir / PLANNED_JSON, _planned_doc(bounds, planned, delta))
    write_csv(
        out_dir / PLANNED_CSV,
        ["theta", "planned_cost_mm2"] + [f"tau_ms:{n}" for n in names],
        ([p.theta, p.planned_cost] + [p.tau.get(n) for n in names] for p in planned),
    )
    pdoc = _pareto_doc(mapped)
    write_json(out_dir / PARETO_JSON, pdoc)
    front = set(pdoc["pareto_indices"])
    write_csv(
        out_dir / PARETO_CSV,
        ["planned_theta", "planned_area_mm2", "realized_theta", "realized_area_mm2", "sigma", "shortfall", "pareto_optimal"]
        + [f"{n}:{k}" for n in names for k in ("ports", "unrolls", "fallback")],
        (
            [m.planned.theta, m.planned.planned_cost, m.theta, m.area, m.mismatch, m.shortfall, i in front]
            + [v for n in names for v in (m.outcomes[n].ports, m.outcomes[n].unrolls, m.outcomes[n].fallback)]
            for i, m in enumerate(mapped)
        ),
    )
    write_json(out_dir / LEDGER, _ledger_doc(cfg, ledger))
    return planned, mapped


def run_exhaustive_cmd(cfg: ExplorationConfig, out_dir: Path) -> ExhaustiveResult:
    """Run the baseline; re-raises the guard error after writing the refusal record."""
    out_dir.mkdir(parents=True, exist_ok=True)
    backend = make_backend(cfg)
    try:
        res = run_exhaustive(cfg.components, cfg.graph, backend, cfg.clock_ns, cfg.max_combinations)
        guard = None
    except CombinationGuardError as exc:
        res, guard = exc.result, exc
    doc: dict[str, Any] = {
        "refused": res.refused,
        "combinations": res.combinations,
        "max_combinations": cfg.max_combinations,
        "hls_invocations": res.total_invocations,
        "components": {
            name: {"grid": res.invocations[name], "pareto_points": len(res.pareto[name])} for name in res.grid
        },
        "front": [
            {
                "theta": p.throughput,
                "area_mm2": p.area,
                "choices": {n: list(q.provenance) for n, q in sorted(p.provenance.items())},
            }
            for p in res.system_front
        ],
    }
    write_json(out_dir / EXHAUSTIVE_JSON, doc)
    if not res.refused:
        names = sorted(res.pareto)
        write_csv(
            out_dir / EXHAUSTIVE_CSV,
            ["theta", "area_mm2"] + [f"{n}:{k}" for n in names for k in ("unrolls", "ports")],
            (
                [p.throughput, p.area]
                + [v for n in names for v in (p.provenance[n].provenance if n in p.provenance else (None, None))]
                for p in res.system_front
            ),
        )
    if guard is not None:
        raise guard
    return res


# ------------------------------------------------------------ report


def restricted_span(points: list[DesignPoint], ports: int = 1) -> tuple[float, float] | None:
    """Span over the points synthesized with a single standard dual-port memory."""
    sub = [p for p in points if p.provenance is not None and p.provenance[1] == ports]
    return span(sub) if sub else None


def run_report(out_dir: Path) -> dict:
    required = [out_dir / REGIONS, out_dir / LEDGER]
    missing = [str(p) for p in required if not p.exists()]
    if missing:
        raise UsageError("report needs these files first: " + ", ".join(missing))
    chars = load_regions(out_dir / REGIONS)
    ledger_doc = read_json(out_dir / LEDGER)
    ledger = InvocationLedger.from_dict(ledger_doc)
    grid = {k: int(v) for k, v in ledger_doc.get("exhaustive_grid", {}).items()}
    exhaustive_doc = read_json(out_dir / EXHAUSTIVE_JSON) if (out_dir / EXHAUSTIVE_JSON).exists() else None
    if exhaustive_doc is not None:
        grid = {k: int(v["grid"]) for k, v in exhaustive_doc["components"].items()} or grid

    comp_rows = []
    span_rows = []
    for name in sorted(chars):
        ch = chars[name]
        pts = [p.design_point() for p in ch.all_points]
        full = span(pts)
        dual = restricted_span(pts, 1)
        comp_rows.append(
            {
                "component": name,
                "regions": len(ch.regions),
                "lambda_span": full[0],
                "alpha_span": full[1],
                "dual_port_lambda_span": dual[0] if dual else None,
                "dual_port_alpha_span": dual[1] if dual else None,
            }
        )
        span_rows.append([name, len(ch.regions), full[0], full[1], dual[0] if dual else None, dual[1] if dual else None])

    inv = ledger_report(ledger, grid or None)
    avg = {}
    if comp_rows:
        for k in ("lambda_span", "alpha_span"):
            avg[k] = math.fsum(r[k] for r in comp_rows) / len(comp_rows)
        duals = [r for r in comp_rows if r["dual_port_lambda_span"] is not None]
        for k in ("dual_port_lambda_span", "dual_port_alpha_span"):
            avg[k] = math.fsum(r[k] for r in duals) / len(duals) if duals else None

    report: dict[str, Any] = {
        "components": comp_rows,
        "average_spans": avg,
        "invocations": inv,
    }
    if exhaustive_doc is not None:
        report["exhaustive"] = {
            "refused": exhaustive_doc["refused"],
            "combinations": exhaustive_doc["combinations"],
            "hls_invocations": exhaustive_doc["hls_invocations"],
        }
    pareto = read_json(out_dir / PARETO_JSON) if (out_dir / PARETO_JSON).exists() else None
    if pareto is not None:
        sig = [float(p["sigma"]) for p in pareto["points"]]
        report["system"] = {
            "points": len(pareto["points"]),
            "max_sigma": max(sig) if sig else None,
            "mean_sigma": math.fsum(sig) / len(sig) if sig else None,
            "shortfalls": sum(1 for p in pareto["points"] if p["shortfall"]),
        }
        write_csv(
            out_dir / "plot_system_pareto.csv",
            ["planned_theta", "planned_area_mm2", "realized_theta", "realized_area_mm2", "sigma"],
            (
                [p["planned_theta"], p["planned_area_mm2"], p["realized_theta"], p["realized_area_mm2"], p["sigma"]]
                for p in pareto["points"]
            ),
        )

    write_json(out_dir / REPORT_JSON, report)
    write_csv(
        out_dir / "spans.csv",
        ["component", "regions", "lambda_span", "alpha_span", "dual_port_lambda_span", "dual_port_alpha_span"],
        span_rows,
    )
    write_csv(
        out_dir / "plot_invocations.csv",
        ["component", "characterization", "constraint_failure", "mapping", "total", "exhaustive"],
        (
            [n, r["characterization"], r["constraint-failure"], r["mapping"], r["total"], r.get("exhaustive")]
            for n, r in inv["components"].items()
        ),
    )
    write_csv(
        out_dir / "plot_component_points.csv",
        ["component", "ports", "unrolls", "latency_ms", "area_mm2", "role"],
        ([n, p.ports, p.unrolls, p.latency, p.area, p.role] for n in sorted(chars) for p in chars[n].all_points),
    )
    return report


def format_report(report: dict) -> str:
    lines = [f"{'component':<16}{'reg':>4}{'lam_span':>10}{'area_span':>10}{'dp_lam':>8}{'dp_area':>8}"]

    def f(x):
        return f"{x:.2f}x" if isinstance(x, (int, float)) else "-"

    for r in report["components"]:
        lines.append(
            f"{r['component']:<16}{r['regions']:>4}{f(r['lambda_span']):>10}{f(r['alpha_span']):>10}"
            f"{f(r['dual_port_lambda_span']):>8}{f(r['dual_port_alpha_span']):>8}"
        )
    avg = report.get("average_spans") or {}
    if avg:
        lines.append(
            f"{'average':<16}{'':>4}{f(avg['lambda_span']):>10}{f(avg['alpha_span']):>10}"
            f"{f(avg['dual_port_lambda_span']):>8}{f(avg['dual_port_alpha_span']):>8}"
        )
    inv = report["invocations"]
    lines.append("")
    lines.append(f"{'component':<16}{'char':>6}{'fail':>6}{'map':>6}{'total':>7}{'exh':>7}{'ratio':>8}")
    for n, r in inv["components"].items():
        ratio = r.get("ratio")
        lines.append(
            f"{n:<16}{r['characterization']:>6}{r['constraint-failure']:>6}{r['mapping']:>6}{r['total']:>7}"
            f"{r.get('exhaustive', '-'):>7}{(f'{ratio:.2f}x' if ratio else '-'):>8}"
        )
    t = inv["totals"]
    ratio = inv.get("ratio")
    lines.append(
        f"{'total':<16}{t['characterization']:>6}{t['constraint-failure']:>6}{t['mapping']:>6}{t['total']:>7}"
        f"{t.get('exhaustive', '-'):>7}{(f'{ratio:.2f}x' if ratio else '-'):>8}"
    )
    if "exhaustive" in report:
        ex = report["exhaustive"]
        state = "refused" if ex["refused"] else "enumerated"
        lines.append(f"exhaustive combinations: {ex['combinations']} ({state})")
    if "system" in report:
        s = report["system"]
        lines.append(
            f"system points: {s['points']}, max sigma {s['max_sigma']:.3f}, shortfalls {s['shortfalls']}"
        )
    return "\n".join(lines)
