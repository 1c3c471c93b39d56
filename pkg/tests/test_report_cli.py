import csv
import json
import re

import pytest

from exmine.classify import ExceptionType as T
from exmine.cli import main
from exmine.report import fmt
from exmine.synth import ScenarioSpec, SynthConfig, generate_log, model_for, write_log_csv


@pytest.mark.parametrize("x,text", [
    (3.857142857142857, "3.85714"),
    (0.049535, "0.049535"),
    (2.5000005, "2.5"),
    (1234567.0, "1234570"),
    (0.0000123456789, "0.0000123457"),
    (1e-12, "1E-12"),
    (0.125, "0.125"),
    (1.0000025, "1"),
    (7, "7"),
    (True, "yes"),
    (None, ""),
    (0.0, "0"),
])
def test_fmt(x, text):
    assert fmt(x) == text


def test_fmt_half_even():
    assert fmt(1.234565) == "1.23456"  # repr is exact here, so the tie goes to even
    assert fmt(1.234575) == "1.23458"


def _synth(tmp_path, rates=None, cases=2000, seed=5, expected=(T.REPEAT, T.SKIP)):
    rates = rates or {frozenset(): 0.6, frozenset({T.ADD}): 0.1, frozenset({T.SKIP}): 0.1,
                      frozenset({T.REPEAT}): 0.1, frozenset({T.EARLY_EXIT}): 0.1}
    cfg = SynthConfig((ScenarioSpec("done", tuple("ABCDE"), cases, rates),), seed=seed,
                      effects={T.ADD: 3, T.REPEAT: 2}, expected_types=frozenset(expected))
    log = tmp_path / "log.csv"
    write_log_csv(generate_log(cfg).log, log)
    model = tmp_path / "model.txt"
    model.write_text(model_for(cfg).to_text())
    outcome = tmp_path / "outcome.cfg"
    outcome.write_text("mode=case_attribute\nattribute=outcome\n")
    return log, model, outcome


def _run(log, out, *extra):
    return main(["analyze", "--log", str(log), "--out", str(out), *map(str, extra)])


def test_report_bytes_deterministic(tmp_path):
    log, model, outcome = _synth(tmp_path)
    assert _run(log, tmp_path / "a", "--model", model, "--outcome", outcome) == 0
    assert _run(log, tmp_path / "b", "--model", model, "--outcome", outcome) == 0
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert {p.name for p in (tmp_path / "a" / "tables").iterdir()} >= {
        f"table{i}.csv" for i in range(1, 7)} | {"figure2.csv"}


NUMBER = re.compile(r"-?\d+(?:\.\d+)?(?:E[+-]?\d+)?")


def test_every_markdown_number_is_in_a_csv(tmp_path):
    log, model, outcome = _synth(tmp_path)
    _run(log, tmp_path / "r", "--model", model, "--outcome", outcome)
    md = (tmp_path / "r" / "report.md").read_text()
    cells = set()
    for f in (tmp_path / "r" / "tables").glob("*.csv"):
        for row in csv.reader(f.open()):
            for cell in row:
                cells.update(NUMBER.findall(cell))
    missing = set(NUMBER.findall(md)) - cells
    assert not missing


def test_no_model_note(tmp_path, capsys):
    log, _, outcome = _synth(tmp_path)
    assert _run(log, tmp_path / "r", "--outcome", outcome) == 0
    assert "no model supplied" in capsys.readouterr().err
    md = (tmp_path / "r" / "report.md").read_text()
    assert "No model supplied" in md
    assert not (tmp_path / "r" / "tables" / "table5.csv").exists()
    assert not (tmp_path / "r" / "tables" / "table3.csv").exists()


def test_csv_bundle_has_no_markdown(tmp_path):
    log, model, outcome = _synth(tmp_path, cases=400)
    assert _run(log, tmp_path / "r", "--format", "csv_bundle", "--outcome", outcome) == 0
    assert not (tmp_path / "r" / "report.md").exists()
    assert (tmp_path / "r" / "summary.json").exists()


def test_directions_spelled_out_in_csv_arrows_in_markdown(tmp_path):
    log, model, outcome = _synth(tmp_path)
    _run(log, tmp_path / "r", "--model", model, "--outcome", outcome)
    table6 = (tmp_path / "r" / "tables" / "table6.csv").read_text()
    assert "LONGER" in table6 and "↑" not in table6
    assert "↑" in (tmp_path / "r" / "report.md").read_text()


def test_unreadable_log_exit_1(tmp_path, capsys):
    assert _run(tmp_path / "nope.csv", tmp_path / "r") == 1
    assert "exmine: error" in capsys.readouterr().err


def test_bad_row_exit_1(tmp_path, capsys):
    log = tmp_path / "log.csv"
    log.write_text("case_id,activity,timestamp\nc,A,2021-01-01T00:00:00Z\nc,B,yesterday\n")
    assert _run(log, tmp_path / "r") == 1
    assert "line 3" in capsys.readouterr().err


def test_nothing_analyzable_exit_2(tmp_path):
    log = tmp_path / "log.csv"
    log.write_text("case_id,activity,timestamp\nc,A,0\nc,B,60\n")
    assert _run(log, tmp_path / "r") == 2
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    (entry,) = summary["scenarios"]
    assert entry["skip_reason"]


def test_summary_accounting(tmp_path):
    rates = {frozenset(): 0.6, frozenset({T.ADD}): 0.2, frozenset({T.SKIP}): 0.05,
             frozenset({T.REPEAT}): 0.05, frozenset({T.ADD, T.SKIP}): 0.1}
    log, model, outcome = _synth(tmp_path, rates=rates)
    assert _run(log, tmp_path / "r", "--model", model, "--outcome", outcome, "--min-group", 150) == 0
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    (entry,) = summary["scenarios"]
    for grouping in ("type_set", "expectedness", "normal_vs_exception"):
        acc = entry[grouping]
        assert acc["eligible"] + acc["excluded"] + acc["skipped"] == entry["cases"]
    assert {e["group"] for e in entry["type_set"]["exclusions"]} == {"SKIP", "REPEAT"}
    assert all("not larger than 149" in e["reason"] for e in entry["type_set"]["exclusions"])


def test_table2_average(tmp_path):
    rows = ["case_id,activity,timestamp"]
    k = 0
    for _ in range(100):
        rows += [f"n{k},A,0", f"n{k},B,10", f"n{k},C,20"]
        k += 1
    for variant in (["A", "C"], ["A", "X", "B", "C"], ["A", "B"], ["B", "C"]):
        for _ in range(5):
            rows += [f"e{k},{a},{10 * i}" for i, a in enumerate(variant)]
            k += 1
    log = tmp_path / "log.csv"
    log.write_text("\n".join(rows) + "\n")
    outcome = tmp_path / "o.cfg"
    outcome.write_text("mode=marker_set\nmarker.A=all\nmarker.B=all\n")
    _run(log, tmp_path / "r", "--outcome", outcome, "--format", "csv_bundle")
    table = list(csv.DictReader((tmp_path / "r" / "tables" / "table2.csv").open()))
    exc = [r for r in table if r["path_type"] == "exceptions"]
    assert [(r["paths"], r["cases"], r["avg_cases_per_path"]) for r in exc] == [("4", "20", "5")]


def test_figure2_two_variants(tmp_path):
    log = tmp_path / "log.csv"
    log.write_text("case_id,activity,timestamp\na,A,0\na,B,5\nb,A,0\nb,B,5\nc,A,0\nc,C,5\n")
    _run(log, tmp_path / "r")
    rows = list(csv.DictReader((tmp_path / "r" / "tables" / "figure2.csv").open()))
    assert [r["rank"] for r in rows] == ["1", "2"]
    shares = [float(r["case_share"]) for r in rows]
    assert shares == sorted(shares, reverse=True)


def test_variants_and_classify_commands(tmp_path, capsys):
    log, model, outcome = _synth(tmp_path, cases=200)
    assert main(["variants", "--log", str(log), "--top", "3"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "rank,cases,case_share,length,path" and len(out) == 4
    assert main(["classify", "--log", str(log), "--model", str(model), "--outcome", str(outcome)]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 200
    assert {r["expectedness"] for r in rows} <= {"Expected", "Unexpected"}
    assert all(r["alignable"] == "true" for r in rows)


def test_synth_command(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenarios": [{"name": "x", "normal_flow": ["A", "B", "C"], "cases": 50,
                                              "rates": {"NORMAL": 0.5, "SKIP": 0.5}}]}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", "--config", str(cfg), "--seed", "4", "--out", str(a),
                 "--truth", str(tmp_path / "t.csv"), "--model-out", str(tmp_path / "m.txt")]) == 0
    assert main(["synth", "--config", str(cfg), "--seed", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "t.csv").read_text().startswith("case_id,injected_types\n")


def test_completion_filter_options(tmp_path, capsys):
    log = tmp_path / "log.csv"
    log.write_text("case_id,activity,timestamp\n"
                   "a,A,2020-01-01T00:00:00Z\na,B,2020-01-02T00:00:00Z\n"
                   "b,A,2020-01-01T00:00:00Z\nb,C,2020-03-01T00:00:00Z\n")
    assert main(["variants", "--log", str(log), "--completed-after", "2020-02-01T00:00:00Z"]) == 0
    assert capsys.readouterr().out.splitlines()[1].endswith("A > C")
    assert main(["variants", "--log", str(log), "--completed-after", "2021-01-01T00:00:00Z"]) == 1
