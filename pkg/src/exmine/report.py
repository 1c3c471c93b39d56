"""Report bundle: ``report.md``, ``summary.json`` and ``tables/*.csv``.

Numbers are written with 6 significant digits, rounding half to even on the
shortest decimal representation of the float.
"""
from __future__ import annotations

import csv
import io
import json
import os
from datetime import datetime, timezone
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

from .analysis import (
    EXPECTED, UNEXPECTED, UNEXPECTED_VS_EXPECTED, AnalysisResult,
)
from .classify import ExceptionType
from .conformance import Expectedness
from .errors import InputError
from .eventlog import SECONDS_PER_UNIT
from .stats import Direction, descriptive_stats

ARROWS = {
    Direction.LONGER: "↑",
    Direction.SHORTER: "↓",
    Direction.NOT_SIGNIFICANT: "↔",
    Direction.NOT_APPLICABLE: "",
}
# column order used by the type-frequency table
TYPE_COLUMNS = (
    ExceptionType.EARLY_ENTRY, ExceptionType.LATE_ENTRY, ExceptionType.EARLY_EXIT,
    ExceptionType.LATE_EXIT, ExceptionType.REPEAT, ExceptionType.STEP_BACK,
    ExceptionType.ADD, ExceptionType.SKIP,
)
PATH_SEP = " > "


def fmt(x) -> str:
    """Format a number at 6 significant digits (half-even); ints pass through."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, int):
        return str(x)
    if x != x:
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    d = Decimal(repr(float(x)))
    if d == 0:
        return "0"
    r = d.quantize(Decimal(1).scaleb(d.adjusted() - 5), rounding=ROUND_HALF_EVEN).normalize()
    if -6 <= r.adjusted() < 15:
        return format(r, "f")
    return format(r, "E")


def _date(seconds: float) -> str:
    return datetime.fromtimestamp(seconds, tz=timezone.utc).strftime("%Y-%m-%d")


def _path(path) -> str:
    return PATH_SEP.join(path)


def _types_display(types) -> str:
    return ";".join(t.name for t in sorted(types, key=lambda t: t.name))


class Bundle:
    """Collects tables in memory so the CSV and markdown views share one source."""

    def __init__(self, result: AnalysisResult, unit: str = "days", top_k: int = 15):
        if unit not in SECONDS_PER_UNIT:
            raise InputError(f"unknown duration unit {unit!r}")
        self.result = result
        self.unit = unit
        self.scale = SECONDS_PER_UNIT[unit]
        self.top_k = top_k
        self.tables: dict[str, list[list[str]]] = {}
        self._build()

    def dur(self, seconds):
        return None if seconds is None else seconds / self.scale

    def _build(self):
        r = self.result
        u = self.unit
        # table 1: descriptives of the whole log
        tp = [t.throughput for t in r.traces]
        st = descriptive_stats(tp)
        self.tables["table1"] = [
            ["process", "start_date", "end_date", "cases", f"avg_throughput_{u}", f"std_throughput_{u}"],
            [_process_name(r.source), _date(min(t.start for t in r.traces)),
             _date(max(t.end for t in r.traces)), fmt(st.n), fmt(self.dur(st.mean)), fmt(self.dur(st.std))],
        ]
        # table 2: normal/exception path counts per scenario
        rows = [["scenario", "path_type", "paths", "cases", "avg_cases_per_path"]]
        for s in r.scenarios:
            if s.scenario.normal_flow is None:
                continue
            n_norm = s.normal_count
            rows.append([s.label, "normal", "1", fmt(n_norm), fmt(float(n_norm))])
            paths, cases = s.path_counts()
            rows.append([s.label, "exceptions", fmt(paths), fmt(cases), fmt(cases / paths) if paths else ""])
        self.tables["table2"] = rows
        if r.model_supplied:
            rows = [["scenario", "path_type", "in_model", "paths", "cases", "avg_cases_per_path"]]
            for s in r.scenarios:
                if s.scenario.normal_flow is None:
                    continue
                n_norm = s.normal_count
                in_model = fmt(s.normal_expectedness is Expectedness.EXPECTED)
                rows.append([s.label, "normal", in_model, "1", fmt(n_norm), fmt(float(n_norm))])
                for name, cls in (("expected", Expectedness.EXPECTED), ("unexpected", Expectedness.UNEXPECTED)):
                    paths, cases = s.path_counts(cls)
                    rows.append([s.label, name, fmt(cls is Expectedness.EXPECTED), fmt(paths), fmt(cases),
                                 fmt(cases / paths) if paths else ""])
            self.tables["table3"] = rows
        # table 4: type frequencies, path and case bases
        rows = [["scope", "basis", "denominator"] + [f"{t.name.lower()}_pct" for t in TYPE_COLUMNS]]
        scopes = [(s.label, s.frequency) for s in r.scenarios if s.frequency is not None]
        scopes.append(("ALL", r.frequency))
        for label, fq in scopes:
            rows.append([label, "path", fmt(fq.exception_paths)] + [fmt(100.0 * fq.per_path[t]) for t in TYPE_COLUMNS])
            rows.append([label, "case", fmt(fq.exception_cases)] + [fmt(100.0 * fq.per_case[t]) for t in TYPE_COLUMNS])
        self.tables["table4"] = rows
        if r.model_supplied:
            self.tables["table5"] = self._direction_table(
                [(s, s.exp_analysis, s.exp_groups) for s in r.scenarios if s.exp_analysis is not None],
                "comparison")
        self.tables["table6"] = self._direction_table(
            [(s, s.type_analysis, s.type_groups) for s in r.scenarios if s.type_analysis is not None],
            "group")
        self.tables["h1"] = self._direction_table(
            [(s, s.h1_analysis, s.h1_groups) for s in r.scenarios if s.h1_analysis is not None],
            "group")
        self.tables["figure2"] = [["rank", "path", "case_share"]] + [
            [str(rank), _path(path), fmt(share)] for rank, path, share in r.top.rows]
        self.tables["hypotheses"] = [["hypothesis", "subject", "verdict"]]
        self.tables["hypothesis_cells"] = [["hypothesis", "role", "scenario", "group", "direction", "p_adjusted"]]
        for v in r.verdicts:
            self.tables["hypotheses"].append([v.hypothesis, "overall", v.verdict.value])
            for t, tv in v.type_verdicts.items():
                self.tables["hypotheses"].append([v.hypothesis, t.name, tv.value])
            for role, refs in (("supporting", v.supporting), ("opposing", v.opposing)):
                for ref in refs:
                    self.tables["hypothesis_cells"].append(
                        [v.hypothesis, role, ref.scenario, ref.group, ref.direction.value, fmt(ref.p_adjusted)])
        pol = r.policy
        self.tables["run"] = [
            ["setting", "value"],
            ["alpha", fmt(pol.alpha)],
            ["max_types", fmt(pol.max_types)],
            ["min_group_exclusive", fmt(pol.min_group_size)],
            ["min_group", fmt(pol.min_group_size + 1)],
            ["top_k", fmt(self.top_k)],
            ["duration_unit", u],
            ["post_hoc", "dunn_pooled_ranks"],
            ["adjustment", "bonferroni"],
        ]

    def _direction_table(self, items, key_name):
        u = self.unit
        head = ["scenario", "n_analyzed", f"avg_throughput_{u}", f"std_{u}", "skewness", "kurtosis_excess",
                "omnibus_h", "omnibus_df", "omnibus_p", key_name, "types", "direction", "group_size",
                "z", "p_raw", "p_adjusted", "comparisons", "note"]
        rows = [head]
        for s, an, gs in items:
            d = an.descriptives
            desc = [fmt(d.n), fmt(self.dur(d.mean)), fmt(self.dur(d.std)), fmt(d.skewness), fmt(d.kurtosis)] \
                if d else ["", "", "", "", ""]
            om = an.omnibus
            omni = [fmt(om.statistic), fmt(om.df), fmt(om.p_raw)] if om else ["", "", ""]
            if not an.cells:
                rows.append([s.label] + desc + omni + ["", "", Direction.NOT_APPLICABLE.value, "", "", "", "",
                                                      fmt(an.m), an.note or ""])
            for c in an.cells:
                rows.append([s.label] + desc + omni + [
                    c.group, _types_display(c.types), c.direction.value, fmt(c.size) if c.size else "",
                    fmt(c.z), fmt(c.p_raw), fmt(c.p_adjusted), fmt(an.m), an.note or ""])
        return rows

    # -- serialisation -------------------------------------------------------

    def csv_text(self, name: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerows(self.tables[name])
        return buf.getvalue()

    def summary(self) -> dict:
        r = self.result
        scen = []
        for s in r.scenarios:
            entry = {
                "label": s.label,
                "cases": s.scenario.case_count,
                "normal_flow": list(s.scenario.normal_flow) if s.scenario.normal_flow else None,
                "skip_reason": s.skip_reason,
            }
            if r.model_supplied and s.normal_expectedness is not None:
                entry["normal_flow_in_model"] = s.normal_expectedness is Expectedness.EXPECTED
            for name, gs in (("type_set", s.type_groups), ("expectedness", s.exp_groups),
                             ("normal_vs_exception", s.h1_groups)):
                if gs is None:
                    continue
                entry[name] = {
                    "eligible": gs.eligible, "excluded": gs.excluded, "skipped": gs.skipped,
                    "skip_reason": gs.skip_reason,
                    "exclusions": [{"group": e.group, "size": e.size, "reason": e.reason} for e in gs.exclusions],
                }
            scen.append(entry)
        return {
            "source": r.source,
            "cases": len(r.traces),
            "model_supplied": r.model_supplied,
            "analyzed": r.any_analyzed,
            "policy": {"alpha": r.policy.alpha, "max_types": r.policy.max_types,
                       "min_group_exclusive": r.policy.min_group_size},
            "methods": {"omnibus": "kruskal_wallis_tie_corrected", "post_hoc": "dunn_pooled_ranks",
                        "adjustment": "bonferroni"},
            "scenarios": scen,
            "verdicts": {v.hypothesis: v.verdict.value for v in r.verdicts},
        }

    def markdown(self) -> str:
        return _markdown(self)


def _process_name(source: str) -> str:
    return Path(source).stem if source and not source.startswith("<") else source


def _md_table(rows) -> str:
    out = ["| " + " | ".join(rows[0]) + " |", "|" + "---|" * len(rows[0])]
    out += ["| " + " | ".join(c.replace("|", "\\|") for c in row) + " |" for row in rows[1:]]
    return "\n".join(out)


def _cell_text(cell) -> str:
    arrow = ARROWS[cell.direction]
    if cell.direction is Direction.NOT_APPLICABLE:
        return ""
    return arrow


def _markdown(b: Bundle) -> str:
    r = b.result
    t = b.tables
    parts = [f"# Exception analysis: {_process_name(r.source)}", ""]
    parts += ["## Process descriptives", "", _md_table(t["table1"]), ""]
    parts += ["## Scenarios and paths", "", _md_table(t["table2"]), ""]
    if r.model_supplied:
        parts += ["## Expected and unexpected exception paths", "", _md_table(t["table3"]), ""]
    parts += ["## Relative frequency of exception types (%)", "", _md_table(t["table4"]), ""]
    if r.model_supplied:
        parts += ["## Expected/unexpected exceptions and throughput time", ""]
        rows = [["scenario", "Expected", "Unexpected", "Unexpected vs expected"]]
        for s in r.scenarios:
            if s.exp_analysis is None:
                continue
            by = {c.group: c for c in s.exp_analysis.cells}
            rows.append([s.label] + [_cell_text(by[g]) for g in (EXPECTED, UNEXPECTED, UNEXPECTED_VS_EXPECTED)])
        parts += [_md_table(rows), "", "Legend: ↑ longer, ↓ shorter, ↔ no significant difference, empty not applicable.",
                  "", _md_table(t["table5"]), ""]
    else:
        parts += ["No model supplied: expected/unexpected analysis not performed.", ""]
    parts += ["## Exception types and throughput time", ""]
    parts += [_type_matrix(r), "",
              "Legend: ↑ longer, ↓ shorter, ↔ no significant difference, empty not applicable.", ""]
    parts += [_md_table(t["table6"]), ""]
    parts += ["## Exceptions versus normal flow (pooled)", "", _md_table(t["h1"]), ""]
    parts += ["## Most frequent paths", "", _md_table(t["figure2"]), ""]
    parts += ["## Hypotheses", "", _md_table(t["hypotheses"]), "", _md_table(t["hypothesis_cells"]), ""]
    skipped = [s for s in r.scenarios if s.skip_reason]
    if skipped:
        parts += ["## Skipped scenarios", ""]
        parts += [f"- {s.label}: {s.skip_reason}" for s in skipped]
        parts += [""]
    parts += ["## Settings", "", _md_table(t["run"]), ""]
    return "\n".join(parts)


def _type_matrix(r: AnalysisResult) -> str:
    scen = [s for s in r.scenarios if s.type_analysis is not None and s.type_analysis.cells]
    if not scen:
        return "No scenario had an eligible exception group."
    rows = [["exception type"] + [s.label for s in scen]]
    for et in TYPE_COLUMNS:
        row = [et.display]
        for s in scen:
            bits = []
            for c in s.type_analysis.cells:
                if et not in c.types:
                    continue
                others = [o.display for o in sorted(c.types - {et}, key=lambda o: o.name)]
                text = ARROWS[c.direction]
                if others:
                    text += " (with " + " & ".join(others) + ")"
                bits.append(text)
            row.append(" ".join(bits))
        rows.append(row)
    return _md_table(rows)


TABLE_FILES = ("table1", "table2", "table3", "table4", "table5", "table6", "h1", "figure2",
               "hypotheses", "hypothesis_cells", "run")


def render_report(result: AnalysisResult, out_dir, fmt_name: str = "markdown", unit: str = "days",
                  top_k: int = 15) -> list[Path]:
    """Write the report bundle under ``out_dir`` and return the files written."""
    if fmt_name not in ("markdown", "csv_bundle"):
        raise InputError(f"unknown report format {fmt_name!r}")
    bundle = Bundle(result, unit, top_k)
    out = Path(out_dir)
    try:
        (out / "tables").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {os.fspath(out)!r}: {exc.strerror}") from exc
    written = []

    def put(path: Path, text: str):
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"cannot write {os.fspath(path)!r}: {exc.strerror}") from exc
        written.append(path)

    for name in TABLE_FILES:
        if name in bundle.tables:
            put(out / "tables" / f"{name}.csv", bundle.csv_text(name))
    put(out / "summary.json", json.dumps(bundle.summary(), indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    if fmt_name == "markdown":
        put(out / "report.md", bundle.markdown())
    return written
