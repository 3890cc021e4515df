"""``wormhole-dtn`` command line: run, matrix, report, replay.

Exit codes: 0 success, 2 usage error (unknown flag, bad argument), 3 missing
or unreadable file, 4 invalid configuration, 5 malformed trace or CSV input.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ScenarioConfig, config_from_mapping, load_config, parse_document
from .detector import detect
from .engine import run_simulation
from .harness import ExperimentMatrix, read_csv, rows_to_csv, run_matrix, write_report
from .trace import EventTrace, TraceFormatError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_CONFIG = 4
EXIT_INPUT = 5


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE, message)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_MISSING, f"cannot read {path}: {exc.strerror or exc}") from None


def _base_config(args, nodes: int | None = None) -> ScenarioConfig:
    cfg = load_config(_read(args.config)) if args.config else ScenarioConfig()
    overrides = {}
    if args.protocol is not None:
        overrides["routing_protocol"] = args.protocol
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    if args.duration is not None:
        overrides["sim_duration"] = args.duration
    try:
        cfg = replace(cfg, **overrides)
    except ValueError as exc:
        raise ConfigError("routing.protocol", str(exc)) from None
    if nodes is not None:
        cfg = cfg.with_total_nodes(nodes)
    return cfg.validate()


def cmd_run(args) -> int:
    cfg = _base_config(args, args.nodes)
    trace, report = run_simulation(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace.save(out / "trace.txt")
    (out / "report.txt").write_text(report.to_text())
    print(f"{cfg.routing_protocol.value} nodes={cfg.num_nodes} seed={cfg.rng_seed}: "
          f"{report.true_detections} true / {report.false_detections} false pairs "
          f"-> {out / 'trace.txt'}, {out / 'report.txt'}")
    return EXIT_OK


def cmd_matrix(args) -> int:
    base = _base_config(args)
    kw = {"base_config": base, "seeds": range(1, args.seeds + 1)}
    if args.nodes:
        kw["node_totals"] = args.nodes
    if args.protocols:
        kw["protocols"] = args.protocols
    try:
        matrix = ExperimentMatrix(**kw)
    except ValueError as exc:
        raise ConfigError("matrix", str(exc)) from None
    matrix.cells()  # reject invalid cells before anything runs

    def progress(row):
        print(f"  {row.protocol.value:>12} n={row.node_total} seed={row.seed}: "
              f"{row.true_detections}/{row.false_detections} ({row.wall_time:.1f}s)", file=sys.stderr)

    rows = run_matrix(matrix, workers=args.workers, trace_dir=args.traces, progress=progress)
    Path(args.out).write_text(rows_to_csv(rows))
    print(f"{len(rows)} rows -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        rows = read_csv(_read(args.csv))
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_INPUT, f"malformed results file {args.csv}: {exc}") from None
    if not rows:
        raise CliError(EXIT_INPUT, f"{args.csv} holds no rows")
    tables = write_report(rows, args.out_dir)
    print(f"{len(rows)} rows, {len(tables.cells)} summary cells -> {args.out_dir}")
    print(f"{'protocol':>12} {'nodes':>5} {'runs':>4} {'true':>11} {'false':>11} {'time(s)':>9}")
    for (proto, total), c in sorted(tables.cells.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        mdt = c.mean["mean_detection_time"]
        print(f"{proto.value:>12} {total:>5} {c.runs:>4} "
              f"{c.mean['true_detections']:5.2f}±{c.std['true_detections']:<4.2f} "
              f"{c.mean['false_detections']:5.2f}±{c.std['false_detections']:<4.2f} "
              f"{'-' if mdt is None else f'{mdt:9.0f}'}")
    return EXIT_OK


def cmd_replay(args) -> int:
    text = _read(args.trace)
    try:
        trace = EventTrace.parse(text)
        cfg = trace.config
    except TraceFormatError as exc:
        raise CliError(EXIT_INPUT, f"malformed trace {args.trace}: {exc}") from None
    params = cfg.detector_params
    if args.params:
        doc = parse_document(_read(args.params))
        bad = [k for k in doc if not k.startswith("detector.")]
        if bad:
            raise ConfigError(bad[0], "only detector.* settings may be overridden on replay")
        params = config_from_mapping(doc, cfg).detector_params
    report = detect(trace, params)
    out = report.to_text()
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wormhole-dtn", description="Wormhole attack simulation and detection in opportunistic networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_flags(sp):
        sp.add_argument("--config", help="scenario document (key = value lines)")
        sp.add_argument("--protocol", help="epidemic, sprayandwait, prophet or firstcontact")
        sp.add_argument("--duration", type=float, help="simulated seconds (default 43200)")

    r = sub.add_parser("run", help="simulate one scenario")
    scenario_flags(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--nodes", type=int, help="total population including wormhole endpoints")
    r.add_argument("--out", default="run-out", help="output directory for trace.txt and report.txt")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("matrix", help="sweep node totals x protocols x seeds")
    scenario_flags(m)
    m.add_argument("--seeds", type=int, default=5, help="seeds 1..N per cell")
    m.add_argument("--nodes", type=int, nargs="+", help="node totals (default 58 64 70 76)")
    m.add_argument("--protocols", nargs="+")
    m.add_argument("--workers", type=int, help="worker processes (default $WDTN_WORKERS or 1)")
    m.add_argument("--traces", help="also save every trace into this directory")
    m.add_argument("--out", default="results.csv")
    m.set_defaults(func=cmd_matrix)

    rep = sub.add_parser("report", help="summarize a results CSV")
    rep.add_argument("csv")
    rep.add_argument("--out-dir", default="report")
    rep.set_defaults(func=cmd_report)

    rp = sub.add_parser("replay", help="rerun the detector on a saved trace")
    rp.add_argument("--trace", required=True)
    rp.add_argument("--params", help="document with detector.* overrides")
    rp.add_argument("--out", help="write the report here instead of stdout")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "seeds", 1) < 1:
            raise CliError(EXIT_USAGE, "--seeds must be >= 1")
        return args.func(args)
    except CliError as exc:
        print(f"wormhole-dtn: error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"wormhole-dtn: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
