"""Canonical JSON/CSV output and the regions file round-trip.

All floats are written with 9 significant digits and every record has a
fixed field order, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from cosmos.backend import InvocationLedger
from cosmos.characterize import Characterization, CharPoint
from cosmos.errors import ConfigError
from cosmos.model import Region


def num(x: float) -> float | str:
    if isinstance(x, bool) or isinstance(x, int):
        return x
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.9g}")


def canon(obj: Any) -> Any:
    if isinstance(obj, float):
        return num(obj)
    if isinstance(obj, dict):
        return {k: canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canon(v) for v in obj]
    return obj


def unnum(x: Any) -> float:
    if isinstance(x, str):
        return float(x)
    return float(x)


def write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(canon(obj), indent=2) + "\n", encoding="utf-8")


def read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno) from None


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.9g}"
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


# ------------------------------------------------------------ regions file


def region_to_dict(r: Region) -> dict:
    return {
        "ports": r.ports,
        "mu_min": r.mu_min,
        "mu_max": r.mu_max,
        "lambda_max_ms": r.lambda_max,
        "lambda_min_ms": r.lambda_min,
        "alpha_min_mm2": r.alpha_min,
        "alpha_max_mm2": r.alpha_max,
        "plm_area_mm2": r.plm_area,
    }


def region_from_dict(d: dict) -> Region:
    return Region(
        ports=int(d["ports"]),
        mu_min=int(d["mu_min"]),
        mu_max=int(d["mu_max"]),
        lambda_max=unnum(d["lambda_max_ms"]),
        lambda_min=unnum(d["lambda_min_ms"]),
        alpha_min=unnum(d["alpha_min_mm2"]),
        alpha_max=unnum(d["alpha_max_mm2"]),
        plm_area=unnum(d["plm_area_mm2"]),
    )


def characterization_to_dict(ch: Characterization, ledger: InvocationLedger | None = None) -> dict:
    out: dict[str, Any] = {
        "component": ch.component,
        "regions": [region_to_dict(r) for r in ch.regions],
        "points": [
            {"unrolls": p.unrolls, "ports": p.ports, "latency_ms": p.latency, "area_mm2": p.area, "role": p.role}
            for p in ch.all_points
        ],
        "errors": list(ch.errors),
    }
    if ledger is not None:
        plm = {r.ports: r.plm_area for r in ch.regions}
        out["synthesized"] = [
            {
                "unrolls": e.unrolls,
                "ports": e.ports,
                "phase": e.phase,
                "latency_ms": e.result.effective_latency,
                "logic_area_mm2": e.result.logic_area,
                "area_mm2": e.result.logic_area + plm[e.ports] if e.ports in plm else None,
                "states": e.result.states_per_iteration,
            }
            for e in ledger.entries()
            if e.component == ch.component
        ]
    return out


def characterization_from_dict(d: dict) -> Characterization:
    return Characterization(
        component=d["component"],
        regions=[region_from_dict(r) for r in d["regions"]],
        all_points=[
            CharPoint(int(p["unrolls"]), int(p["ports"]), unnum(p["latency_ms"]), unnum(p["area_mm2"]), p["role"])
            for p in d.get("points", [])
        ],
        errors=list(d.get("errors", [])),
    )


def load_regions(path: Path) -> dict[str, Characterization]:
    data = read_json(path)
    try:
        return {c["component"]: characterization_from_dict(c) for c in data["components"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed regions file {path}: {exc}") from None
