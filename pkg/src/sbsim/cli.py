"""Command line: run scenarios, export CSV, print reports, serve the gateway.

Exit codes: 0 ok, 1 scenario/usage error, 2 internal error. SB_SEED
overrides the default seed for every subcommand.
"""

import argparse
import os
import sys
from pathlib import Path

from .clock import parse_ts
from .errors import NoData, ParseError, SimError, ValidationError
from .gateway import GatewayServer
from .runtime import (RunConfig, Runtime, render_report_text, run_scenario,
                      simulate)
from .scenario import load_scenario
from .store import RangeQuery, TimeSeriesStore


def _default_seed() -> int:
    return int(os.environ.get("SB_SEED", "1"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbsim",
                                description="desk-scale smart-building simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write CSV + reports")
    run.add_argument("scenario", type=Path)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--hours", type=float, default=24.0)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--tick-ms", type=int, default=100)
    run.add_argument("--no-setback", action="store_true",
                     help="pin thermostats to comfort mode (baseline behavior)")

    exp = sub.add_parser("export", help="re-export a stored CSV over a time range")
    exp.add_argument("--store", type=Path, required=True, help="readings.csv to load")
    exp.add_argument("--from", dest="from_ts", required=True)
    exp.add_argument("--to", dest="to_ts", required=True)
    exp.add_argument("--out", type=Path, required=True)

    rep = sub.add_parser("report", help="energy report for a finished run")
    rep.add_argument("--run", type=Path, required=True, help="output dir of `sbsim run`")
    rep.add_argument("--room", required=True)
    rep.add_argument("--from", dest="from_ts", default=None)
    rep.add_argument("--to", dest="to_ts", default=None)
    rep.add_argument("--format", choices=("text", "csv"), default="text")

    srv = sub.add_parser("serve", help="serve the NDJSON gateway on a TCP port")
    srv.add_argument("scenario", type=Path)
    srv.add_argument("--port", type=int, default=7700)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--seed", type=int, default=None)
    srv.add_argument("--rate", type=float, default=10.0,
                     help="simulated ticks per wall second (10 = real time)")
    return p


def _cmd_run(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    duration = round(args.hours * 3_600_000 / args.tick_ms)
    cfg = RunConfig(seed=seed, tick_ms=args.tick_ms,
                    setback_enabled=not args.no_setback)
    manifest = run_scenario(args.scenario, seed, duration, args.out, cfg)
    print(f"wrote {args.out} (scenario={manifest['scenario']} seed={seed} "
          f"ticks={manifest['duration_ticks']})")
    return 0


def _cmd_export(args) -> int:
    store = TimeSeriesStore()
    with open(args.store, "r", encoding="utf-8") as fh:
        store.import_csv(fh)
    q = RangeQuery(parse_ts(args.from_ts), parse_ts(args.to_ts))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        rows = store.export_csv(q, fh)
    print(f"wrote {rows} rows to {args.out}")
    return 0


def _cmd_report(args) -> int:
    import json
    run_dir = Path(args.run)
    manifest = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    scenario = load_scenario(run_dir / "scenario.scn")
    cfg = RunConfig(seed=manifest["seed"], tick_ms=manifest["tick_ms"],
                    setback_enabled=manifest.get("setback_enabled", True))
    rt = simulate(scenario, cfg, manifest["duration_ticks"])
    from_ms = parse_ts(args.from_ts) if args.from_ts else None
    to_ms = parse_ts(args.to_ts) if args.to_ts else None
    report = rt.energy_report(args.room, from_ms, to_ms)
    intervals = rt.tracker.absence_intervals(args.room, report.from_ms, report.to_ms,
                                             rt.config.min_gap_ms)
    if args.format == "text":
        sys.stdout.write(render_report_text(report, intervals))
    else:
        from .runtime import render_report_csv
        sys.stdout.write(render_report_csv([report]))
    return 0


def _cmd_serve(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    scenario = load_scenario(args.scenario)
    rt = Runtime(scenario, RunConfig(seed=seed))
    server = GatewayServer(rt, host=args.host, port=args.port,
                           rate_ticks_per_s=args.rate)
    print(f"gateway on {server.host}:{server.port} (seed={seed}, rate={args.rate} ticks/s)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "export": _cmd_export,
                "report": _cmd_report, "serve": _cmd_serve}
    try:
        return handlers[args.command](args)
    except (ParseError, ValidationError, NoData, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SimError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
