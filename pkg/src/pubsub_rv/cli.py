"""Command-line front end: validate, run, check, summarize.

Exit codes: 0 ok, 1 negative verdict or ordering hazard, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from .battery import RunReport, ScenarioConfig, run_case_study
from .config import ConfigError, parse_config, validate_ordering_safety
from .events import EventParseError
from .monitor import WAIT_CSV_HEADER
from .oracle import PropertyFileError, check_log, parse_property_file

OK, NEGATIVE, USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _IOProblem(f"cannot read {path}: {exc.strerror or exc}") from None


class _IOProblem(Exception):
    pass


def _load_config(path: str, allow_hazards: bool):
    cfg = parse_config(_read(path))
    hazards = validate_ordering_safety(cfg)
    for hazard in hazards:
        print(f"hazard: {hazard}", file=sys.stderr)
    return cfg, hazards and not allow_hazards


def cmd_validate(args) -> int:
    cfg, blocked = _load_config(args.config, args.allow_hazards)
    if blocked:
        return NEGATIVE
    ordered = [name for name in cfg.channel_names if cfg.is_ordered(name)]
    print(f"{args.config}: ok ({len(cfg.channel_names)} channels, {len(ordered)} ordered)")
    return OK


def cmd_run(args) -> int:
    cfg, blocked = _load_config(args.config, args.allow_hazards)
    if blocked:
        print("refusing to run a configuration with ordering hazards (use --allow-hazards)", file=sys.stderr)
        return NEGATIVE
    specs = parse_property_file(_read(args.properties))
    properties = [(s.property_id, s.text) for s in specs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    monitor = args.monitor == "on"
    ordering = args.ordering == "on"

    reports: list[RunReport] = []
    for run in range(args.runs):
        report = run_case_study(
            args.seed + run,
            ordering=ordering,
            monitor=monitor,
            jitter=args.jitter_ns,
            scenario=ScenarioConfig(stop_percentage=args.stop_percentage),
            config=cfg,
            properties=properties,
            trace=args.dump_trace,
        )
        reports.append(report)
        if monitor:
            (out / f"run{run:03d}.events.jsonl").write_text(report.event_log)
            (out / f"run{run:03d}.verdicts.jsonl").write_text(report.verdict_log)
        if args.dump_trace:
            (out / f"run{run:03d}.trace.jsonl").write_text("".join(line + "\n" for line in report.trace))
    write_run_csvs(reports, out)
    meta = {
        "runs": args.runs,
        "seeds": [r.seed for r in reports],
        "monitor": monitor,
        "ordering": ordering and monitor,
        "jitter_ns": reports[0].jitter if reports else args.jitter_ns,
        "stop_percentage": args.stop_percentage,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    negatives = sum(r.total_negatives for r in reports)
    print(f"{args.runs} run(s) -> {out}; negative verdicts: {negatives}")
    return NEGATIVE if negatives else OK


def write_run_csvs(reports: Sequence[RunReport], out: Path) -> None:
    with open(out / "roundtrip.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "call_index", "ns"])
        for run, report in enumerate(reports):
            for rt in report.roundtrips:
                w.writerow([run, rt.call_index, rt.duration])
    with open(out / "wait.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run"] + WAIT_CSV_HEADER)
        for run, report in enumerate(reports):
            for r in report.wait_records:
                w.writerow([run, r.channel.name, r.channel.kind.value, r.seq, r.pub_time, r.buffered_at, r.released_at])
    with open(out / "verdicts.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "property", "negatives"])
        for run, report in enumerate(reports):
            for pid in report.property_ids:
                w.writerow([run, pid, report.negatives(pid)])


def cmd_check(args) -> int:
    specs = parse_property_file(_read(args.properties))
    lines = _read(args.log).splitlines()
    if args.out:
        with open(args.out, "w") as fh:
            negative = check_log(lines, specs, fh)
    else:
        negative = check_log(lines, specs, sys.stdout)
    return NEGATIVE if negative else OK


def summarize(rows: Sequence[dict], key_fields: Sequence[str], value_field: str) -> list[dict]:
    """Mean and population standard deviation of ``value_field`` per key."""
    groups: dict[tuple, list[float]] = defaultdict(list)
    for row in rows:
        groups[tuple(row[k] for k in key_fields)].append(float(row[value_field]))
    out = []
    for key in sorted(groups, key=lambda k: tuple(_sortable(v) for v in k)):
        values = groups[key]
        out.append(
            dict(zip(key_fields, key))
            | {"n": len(values), "mean": statistics.fmean(values), "std": statistics.pstdev(values)}
        )
    return out


def _sortable(value: str):
    try:
        return (0, float(value), "")
    except ValueError:
        return (1, 0.0, value)


def cmd_summarize(args) -> int:
    """Summarize the CSVs of one or more run directories.

    Rows are grouped by (mode, call_index) for round trips, and by
    (mode, channel, kind) for buffer waits; mode is the directory's
    monitor/ordering setting.
    """
    round_rows, wait_rows = [], []
    for directory in args.dirs:
        d = Path(directory)
        meta = json.loads(_read(str(d / "meta.json")))
        mode = "no-monitor" if not meta["monitor"] else ("ordered" if meta["ordering"] else "unordered")
        for row in csv.DictReader(_read(str(d / "roundtrip.csv")).splitlines()):
            round_rows.append(row | {"mode": mode})
        for row in csv.DictReader(_read(str(d / "wait.csv")).splitlines()):
            wait_rows.append(row | {"mode": mode, "wait": int(row["released_at"]) - int(row["buffered_at"])})

    # waits are averaged per run first so each run counts once
    per_run: dict[tuple, list[int]] = defaultdict(list)
    for row in wait_rows:
        per_run[(row["mode"], row["channel"], row["kind"], row["run"])].append(row["wait"])
    run_means = [
        {"mode": m, "channel": c, "kind": k, "run": r, "wait": statistics.fmean(v)}
        for (m, c, k, r), v in per_run.items()
    ]
    out = sys.stdout if not args.out else open(args.out, "w", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["series", "mode", "key", "n", "mean", "std"])
        for s in summarize(round_rows, ["mode", "call_index"], "ns"):
            w.writerow(["roundtrip", s["mode"], s["call_index"], s["n"], f"{s['mean']:.1f}", f"{s['std']:.1f}"])
        for s in summarize(run_means, ["mode", "channel", "kind"], "wait"):
            w.writerow(["wait", s["mode"], f"{s['channel']}:{s['kind']}", s["n"], f"{s['mean']:.1f}", f"{s['std']:.1f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pubsub-rv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="parse a monitor config and report ordering hazards")
    p.add_argument("config")
    p.add_argument("--allow-hazards", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run the battery scenario for several seeds")
    p.add_argument("config")
    p.add_argument("properties")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ordering", choices=["on", "off"], default="on")
    p.add_argument("--monitor", choices=["on", "off"], default="on")
    p.add_argument("--jitter-ns", type=int, default=None, help="max extra delivery delay to the monitor")
    p.add_argument("--stop-percentage", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--allow-hazards", action="store_true")
    p.add_argument("--dump-trace", action="store_true", help="write every bus delivery as JSON Lines")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="replay an event log through the oracle")
    p.add_argument("log")
    p.add_argument("properties")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("summarize", help="mean/std of round trips and waits over run directories")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (_IOProblem, ConfigError, PropertyFileError, EventParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
