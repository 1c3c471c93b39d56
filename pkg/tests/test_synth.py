import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from exmine.classify import ExceptionType as T, classify_path
from exmine.conformance import Expectedness, classify_expectedness
from exmine.errors import ConfigError
from exmine.eventlog import build_traces, parse_event_log
from exmine.synth import (
    ScenarioSpec, SplitMix64, SynthConfig, generate_log, inject, load_synth_config, log_csv_bytes,
    model_for, parse_injection_key, write_truth_csv,
)

FLOW = ("register", "check", "decide", "notify", "archive")


def _config(rates, cases=1000, seed=7, flow=FLOW, **kw):
    return SynthConfig((ScenarioSpec("s", flow, cases, rates),), seed=seed, **kw)


def test_splitmix64_reference_outputs():
    # published first outputs for seed 0
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    assert 0.0 <= SplitMix64(1).uniform() < 1.0


def test_normal_only():
    synth = generate_log(_config({frozenset(): 1.0}, cases=200))
    traces = build_traces(synth.log)
    assert all(t.path == FLOW for t in traces)
    assert all(not v for v in synth.truth.values())


def test_same_seed_same_bytes():
    cfg = _config({frozenset(): 0.5, frozenset({T.ADD}): 0.5})
    assert log_csv_bytes(generate_log(cfg).log) == log_csv_bytes(generate_log(cfg).log)
    other = _config({frozenset(): 0.5, frozenset({T.ADD}): 0.5}, seed=8)
    assert log_csv_bytes(generate_log(cfg).log) != log_csv_bytes(generate_log(other).log)


def test_repeat_rate_concentration():
    synth = generate_log(_config({frozenset(): 0.9, frozenset({T.REPEAT}): 0.1}, cases=100_000))
    share = sum(1 for v in synth.truth.values() if v) / len(synth.truth)
    assert abs(share - 0.1) <= 0.005


@pytest.mark.parametrize("t", list(T), ids=lambda t: t.name)
def test_single_injection_round_trip(t):
    synth = generate_log(_config({frozenset({t}): 1.0}, cases=500))
    for trace in build_traces(synth.log):
        assert trace.path != FLOW
        assert classify_path(trace.path, FLOW).types == {t}


@settings(max_examples=1000)
@given(st.sampled_from(list(T)), st.integers(0, 2**64 - 1),
       st.lists(st.sampled_from("ABCDEFGH"), min_size=3, max_size=8, unique=True))
def test_round_trip_property(t, seed, flow):
    path = inject(flow, {t}, SplitMix64(seed), ("x1", "x2", "x3"))
    assert path != flow
    assert classify_path(path, flow).types == {t}


def test_csv_round_trip_through_parser():
    synth = generate_log(_config({frozenset(): 0.5, frozenset({T.SKIP}): 0.5}, cases=300))
    log = parse_event_log(io.BytesIO(log_csv_bytes(synth.log)))
    assert {k: [e.activity for e in v] for k, v in log.cases.items()} == \
        {k: [e.activity for e in v] for k, v in synth.log.cases.items()}
    assert all(t.attributes["outcome"] == "s" for t in build_traces(log))


def test_effects_shift_throughput():
    cfg = _config({frozenset(): 0.5, frozenset({T.ADD}): 0.5}, cases=4000,
                  effects={T.ADD: 3})
    synth = generate_log(cfg)
    traces = build_traces(synth.log)
    normal = [t.throughput for t in traces if not synth.truth[t.case_id]]
    added = [t.throughput for t in traces if synth.truth[t.case_id]]
    # 4 units vs 7 units of mean 1 day
    assert sum(normal) / len(normal) == pytest.approx(4 * 86400, rel=0.05)
    assert sum(added) / len(added) == pytest.approx(7 * 86400, rel=0.05)


def test_truth_csv():
    synth = generate_log(_config({frozenset({T.ADD, T.SKIP}): 1.0}, cases=2))
    buf = io.StringIO()
    write_truth_csv(synth, buf)
    assert buf.getvalue() == "case_id,injected_types\ns1c000001,ADD;SKIP\ns1c000002,ADD;SKIP\n"


@pytest.mark.parametrize("rates,msg", [
    ({frozenset(): 0.5}, "sum"),
    ({frozenset(): 1.2, frozenset({T.ADD}): -0.2}, "outside"),
])
def test_invalid_rates(rates, msg):
    with pytest.raises(ConfigError, match=msg):
        _config(rates)


def test_invalid_flows():
    with pytest.raises(ConfigError, match="distinct"):
        _config({frozenset(): 1.0}, flow=("A", "B", "A"))
    with pytest.raises(ConfigError, match="too short"):
        _config({frozenset({T.SKIP}): 1.0}, flow=("A", "B"))
    with pytest.raises(ConfigError):
        _config({frozenset(): 1.0}, base_delay_mean=0)


def test_injection_keys():
    assert parse_injection_key("normal") == frozenset()
    assert parse_injection_key("add+skip") == {T.ADD, T.SKIP}
    with pytest.raises(ConfigError):
        parse_injection_key("ADD+ADD")
    with pytest.raises(ConfigError):
        parse_injection_key("WOBBLE")


def test_load_config_file(tmp_path):
    raw = {"seed": 3, "scenarios": [{"name": "ok", "normal_flow": list("ABCD"), "cases": 10,
                                     "rates": {"NORMAL": 0.8, "REPEAT": 0.2}}],
           "effects": {"repeat": 2}, "expected_types": ["REPEAT"]}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    cfg = load_synth_config(path)
    assert cfg.seed == 3 and cfg.effect(T.REPEAT) == 2 and cfg.effect(T.ADD) == 1
    assert load_synth_config(path, seed=9).seed == 9
    path.write_text("{")
    with pytest.raises(ConfigError):
        load_synth_config(path)


def test_model_for_expected_types():
    expected = {T.REPEAT, T.SKIP, T.EARLY_EXIT}
    cfg = _config({frozenset({t}): 1 / 8 for t in T}, cases=800, expected_types=frozenset(expected))
    model = model_for(cfg)
    synth = generate_log(cfg)
    for trace in build_traces(synth.log):
        (t,) = synth.truth[trace.case_id]
        want = Expectedness.EXPECTED if t in expected else Expectedness.UNEXPECTED
        assert classify_expectedness(trace.path, model) is want
    assert classify_expectedness(FLOW, model) is Expectedness.EXPECTED
