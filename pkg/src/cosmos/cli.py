"""``cosmos`` command line: characterize, explore, exhaustive, report."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from cosmos import pipeline
from cosmos.config import BackendSpec, load_config
from cosmos.errors import ConfigError, DeadlockError, MappingError, PlanningError, TableLookupError, UsageError
from cosmos.exhaustive import CombinationGuardError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_PLANNING = 3
EXIT_REFUSED = 4

log = logging.getLogger("cosmos")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cosmos", description="Compositional design-space exploration for accelerator SoCs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, type=Path, help="exploration config (JSON)")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--backend", choices=["simulated", "table"], default=None)
        p.add_argument("--table", type=Path, default=None, help="CSV for the table backend")
        p.add_argument("--interpolate", action="store_true", help="interpolate missing table rows")
        p.add_argument("--delta", type=float, default=None, help="sweep granularity")
        p.add_argument("--jobs", type=int, default=1, help="characterization workers")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("characterize", help="run component characterization"))
    p = sub.add_parser("explore", help="plan and map the system Pareto curve")
    common(p)
    p.add_argument("--regions", type=Path, default=None, help="regions file (default: OUT/regions.json)")
    common(sub.add_parser("exhaustive", help="naive full-grid baseline"))
    rp = sub.add_parser("report", help="summarize artifacts in OUT")
    rp.add_argument("--out", required=True, type=Path)
    rp.add_argument("--config", type=Path, default=None, help="accepted for symmetry; unused")
    rp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _load(args):
    cfg = load_config(args.config, seed=args.seed)
    if args.backend is not None or args.table is not None:
        kind = args.backend or ("table" if args.table is not None else cfg.backend.kind)
        table = str(args.table.resolve()) if args.table is not None else cfg.backend.table
        if kind == "table" and table is None:
            raise ConfigError("--backend table needs --table", field="backend.table")
        cfg.backend = BackendSpec(kind, table, args.interpolate or cfg.backend.interpolate)
    elif args.interpolate:
        cfg.backend.interpolate = True
    if args.delta is not None:
        if not args.delta > 0:
            raise ConfigError(f"delta must be positive, got {args.delta}", field="delta")
        cfg.delta = args.delta
    return cfg


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "report":
            rep = pipeline.run_report(args.out)
            print(pipeline.format_report(rep))
            return EXIT_OK
        cfg = _load(args)
        if args.command == "characterize":
            chars, errors = pipeline.run_characterize(cfg, args.out, jobs=max(1, args.jobs))
            for name, ch in chars.items():
                print(f"{name}: {len(ch.regions)} region(s)")
            for name, msg in errors.items():
                print(f"{name}: FAILED {msg}", file=sys.stderr)
            return EXIT_FAILURE if errors else EXIT_OK
        if args.command == "explore":
            planned, mapped = pipeline.run_explore(cfg, args.out, args.regions, cfg.delta)
            print(f"{len(planned)} planned point(s), {len(mapped)} mapped")
            return EXIT_OK
        if args.command == "exhaustive":
            res = pipeline.run_exhaustive_cmd(cfg, args.out)
            print(f"{res.combinations} combination(s), {res.total_invocations} HLS invocation(s)")
            return EXIT_OK
    except CombinationGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ConfigError, TableLookupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PlanningError, MappingError, DeadlockError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command == "report" else EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_FAILURE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
