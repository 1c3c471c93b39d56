"""``exmine`` command line: variants, classify, synth, analyze.

Exit codes: 0 success, 1 input error, 2 analysis skipped for every scenario.
"""
from __future__ import annotations

import argparse
import csv
import sys

from . import __version__
from .analysis import GroupingPolicy, analyze, case_records
from .classify import sorted_types
from .conformance import parse_model
from .errors import InputError
from .eventlog import (
    SECONDS_PER_UNIT, LogSchema, build_traces, extract_variants, filter_completed, parse_event_log,
    parse_rfc3339,
)
from .report import PATH_SEP, fmt, render_report
from .scenarios import OutcomePolicy, assign_scenarios, parse_outcome_policy
from .synth import generate_log, load_synth_config, write_log_csv, write_truth_csv, model_for

EXIT_OK, EXIT_INPUT, EXIT_SKIPPED = 0, 1, 2


def _add_log_args(p):
    p.add_argument("--log", required=True, help="CSV event log")
    p.add_argument("--case-col", default="case_id")
    p.add_argument("--activity-col", default="activity")
    p.add_argument("--timestamp-col", default="timestamp")
    p.add_argument("--completed-after", help="keep cases whose last event is at or after this RFC 3339 instant")
    p.add_argument("--completed-before", help="keep cases whose last event is before this RFC 3339 instant")


def _load_traces(args):
    schema = LogSchema(args.case_col, args.activity_col, args.timestamp_col)
    log = parse_event_log(args.log, schema)
    traces = build_traces(log)
    try:
        after = parse_rfc3339(args.completed_after) if args.completed_after else None
        before = parse_rfc3339(args.completed_before) if args.completed_before else None
    except ValueError as exc:
        raise InputError(f"bad completion-date filter: {exc}") from exc
    if after is not None or before is not None:
        traces = filter_completed(traces, after, before)
        if not traces:
            raise InputError("no cases left after the completion-date filter")
    return log, traces


def _outcome(args) -> OutcomePolicy:
    return parse_outcome_policy(args.outcome) if args.outcome else OutcomePolicy()


def _writer(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w", newline="", encoding="utf-8"), True
    except OSError as exc:
        raise InputError(f"cannot write {path!r}: {exc.strerror}") from exc


def cmd_variants(args) -> int:
    _, traces = _load_traces(args)
    table = extract_variants(traces)
    fh, own = _writer(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "cases", "case_share", "length", "path"])
        limit = args.top if args.top else len(table)
        for rank, v in enumerate(table[:limit], start=1):
            w.writerow([rank, v.case_count, fmt(v.case_share), len(v.path), PATH_SEP.join(v.path)])
    finally:
        if own:
            fh.close()
    return EXIT_OK


def cmd_classify(args) -> int:
    _, traces = _load_traces(args)
    model = parse_model(args.model) if args.model else None
    fh, own = _writer(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "scenario", "types", "alignable", "expectedness"])
        for scenario in assign_scenarios(traces, _outcome(args)):
            for rec in case_records(scenario, model):
                w.writerow([
                    rec.trace.case_id, rec.scenario,
                    ";".join(t.name for t in sorted_types(rec.profile.types)),
                    "true" if rec.profile.alignable else "false",
                    rec.expectedness.value if rec.expectedness else "",
                ])
    finally:
        if own:
            fh.close()
    return EXIT_OK


def cmd_synth(args) -> int:
    config = load_synth_config(args.config, seed=args.seed)
    synth = generate_log(config)
    try:
        write_log_csv(synth.log, args.out)
        if args.truth:
            write_truth_csv(synth, args.truth)
        if args.model_out:
            with open(args.model_out, "w", encoding="utf-8") as fh:
                fh.write(model_for(config).to_text())
    except OSError as exc:
        raise InputError(f"cannot write synthetic output: {exc}") from exc
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.min_group < 2:
        raise InputError("--min-group must be at least 2")
    log, traces = _load_traces(args)
    model = parse_model(args.model) if args.model else None
    policy = GroupingPolicy(max_types=args.max_types, min_group_size=args.min_group - 1, alpha=args.alpha)
    result = analyze(traces, _outcome(args), policy, model, top_k=args.top, source=log.source)
    render_report(result, args.out, args.format, args.unit, args.top)
    if model is None:
        print("no model supplied: expected/unexpected analysis not performed", file=sys.stderr)
    if not result.any_analyzed:
        print("no scenario had eligible groups; see summary.json", file=sys.stderr)
        return EXIT_SKIPPED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exmine", description="Exception analysis of process event logs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("variants", help="list path variants by frequency")
    _add_log_args(p)
    p.add_argument("--top", type=int, default=0, help="only the first N variants (0 = all)")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_variants)

    p = sub.add_parser("classify", help="exception types per case")
    _add_log_args(p)
    p.add_argument("--outcome", help="outcome policy file (key=value lines)")
    p.add_argument("--model", help="process model file (A -> B lines)")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synth", help="generate a synthetic log with injected exceptions")
    p.add_argument("--config", required=True, help="JSON generator config")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", required=True, help="log CSV to write")
    p.add_argument("--truth", help="ground-truth CSV to write")
    p.add_argument("--model-out", help="write a process model making expected_types walks")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="full analysis and report bundle")
    _add_log_args(p)
    p.add_argument("--model", help="process model file (A -> B lines)")
    p.add_argument("--outcome", help="outcome policy file (key=value lines)")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--min-group", type=int, default=26, help="smallest group size analysed")
    p.add_argument("--max-types", type=int, default=2)
    p.add_argument("--top", type=int, default=15)
    p.add_argument("--unit", choices=sorted(SECONDS_PER_UNIT), default="days")
    p.add_argument("--format", choices=("markdown", "csv_bundle"), default="markdown")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(f"exmine: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
