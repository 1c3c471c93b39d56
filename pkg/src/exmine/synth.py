"""Seeded synthetic event logs with ground-truth exception injection.

Random numbers come from SplitMix64 so a given seed yields the same log on
every platform:

    state <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z <- state
    z <- (z xor (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z <- (z xor (z >> 27)) * 0x94D049BB133111EB mod 2^64
    output z xor (z >> 31)

A uniform double is ``(output >> 11) * 2^-53``; an exponential draw with
mean ``mu`` is ``-mu * ln(1 - u)``; an integer in ``[0, n)`` is
``floor(u * n)``. Scenario ``i`` (0-based, config order) uses its own
stream seeded with ``seed + i``.

Per case the stream is consumed in this order: arrival gap, injection
choice, edit positions and fresh labels, work units, gap spacings.

Timing model: a case carries ``len(normal) - 1`` units of work, plus
``effect[T]`` units for each injected add-family type and minus
``effect[T]`` for each skip-family type (never below zero). Its throughput is
the sum of that many exponential delays of mean ``base_delay_mean``; the
observed path's gaps split the throughput in proportion to further unit
exponential draws. With every effect at zero, throughput is independent of
the path structure.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .classify import ADD_FAMILY, ExceptionType, sorted_types
from .conformance import END, START, ProcessModel
from .errors import ConfigError
from .eventlog import Event, EventLog, format_rfc3339, parse_rfc3339

_MASK = (1 << 64) - 1
NORMAL_KEY = "NORMAL"
DEFAULT_START = "2020-01-01T00:00:00Z"


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def below(self, n: int) -> int:
        return int(self.uniform() * n)

    def exponential(self, mean: float) -> float:
        return -mean * math.log(1.0 - self.uniform())


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    normal_flow: tuple[str, ...]
    cases: int
    # injection set -> probability; the empty set is the normal flow
    rates: Mapping[frozenset, float]


@dataclass(frozen=True)
class SynthConfig:
    scenarios: tuple[ScenarioSpec, ...]
    seed: int = 0
    base_delay_mean: float = 86400.0
    arrival_mean: float = 3600.0
    start: float = field(default_factory=lambda: parse_rfc3339(DEFAULT_START))
    effects: Mapping[ExceptionType, int] = field(default_factory=dict)
    extra_labels: int = 3
    expected_types: frozenset = frozenset()

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("synth config needs at least one scenario")
        if self.base_delay_mean <= 0 or self.arrival_mean <= 0:
            raise ConfigError("delay means must be positive")
        if self.extra_labels < 2:
            raise ConfigError("extra_labels must be at least 2")
        names = set()
        for sc in self.scenarios:
            if sc.name in names:
                raise ConfigError(f"duplicate scenario name {sc.name!r}")
            names.add(sc.name)
            _validate_scenario(sc)
        for t, units in self.effects.items():
            if units < 0:
                raise ConfigError(f"effect for {t.name} must be non-negative")

    def effect(self, t: ExceptionType) -> int:
        return self.effects.get(t, 1)

    @property
    def fresh_labels(self) -> tuple[str, ...]:
        used = {a for sc in self.scenarios for a in sc.normal_flow}
        out, k = [], 1
        while len(out) < self.extra_labels:
            label = f"extra {k}"
            if label not in used:
                out.append(label)
            k += 1
        return tuple(out)


def parse_injection_key(key: str) -> frozenset:
    if key.strip().upper() == NORMAL_KEY:
        return frozenset()
    names = [p.strip().upper() for p in key.split("+")]
    try:
        types = frozenset(ExceptionType[n] for n in names)
    except KeyError as exc:
        raise ConfigError(f"unknown exception type in rate key {key!r}") from exc
    if len(types) != len(names) or len(types) > 2:
        raise ConfigError(f"rate key {key!r} must name one type or two distinct types")
    return types


def injection_key(types) -> str:
    return "+".join(t.name for t in sorted_types(types)) if types else NORMAL_KEY


def _validate_scenario(sc: ScenarioSpec):
    if not sc.normal_flow:
        raise ConfigError(f"scenario {sc.name!r}: empty normal flow")
    if len(set(sc.normal_flow)) != len(sc.normal_flow):
        raise ConfigError(f"scenario {sc.name!r}: normal flow activities must be distinct")
    if sc.cases < 0:
        raise ConfigError(f"scenario {sc.name!r}: negative case count")
    total = 0.0
    for types, rate in sc.rates.items():
        if not 0.0 <= rate <= 1.0:
            raise ConfigError(f"scenario {sc.name!r}: rate for {injection_key(types)} outside [0, 1]")
        total += rate
        if not _feasible(len(sc.normal_flow), types):
            raise ConfigError(f"scenario {sc.name!r}: normal flow too short for {injection_key(types)}")
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"scenario {sc.name!r}: rates sum to {total}, expected 1")


def _feasible(length: int, types) -> bool:
    for t in _ORDER:
        if t not in types:
            continue
        if length < _MIN_LENGTH[t]:
            return False
        length += _LENGTH_DELTA.get(t, 0)
    return True


def load_synth_config(source, seed: int | None = None) -> SynthConfig:
    """Build a :class:`SynthConfig` from a JSON file path or a parsed mapping.

    ``seed`` overrides the file's seed when given.
    """
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read synth config {os.fspath(source)!r}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"synth config is not valid JSON: {exc}") from exc
    else:
        raw = source
    try:
        scenarios = tuple(
            ScenarioSpec(
                name=str(s["name"]),
                normal_flow=tuple(s["normal_flow"]),
                cases=int(s["cases"]),
                rates={parse_injection_key(k): float(v) for k, v in s.get("rates", {NORMAL_KEY: 1.0}).items()},
            )
            for s in raw["scenarios"]
        )
        effects = {ExceptionType[k.upper()]: int(v) for k, v in raw.get("effects", {}).items()}
        expected = frozenset(ExceptionType[k.upper()] for k in raw.get("expected_types", []))
    except KeyError as exc:
        raise ConfigError(f"synth config: missing or unknown key {exc}") from exc
    return SynthConfig(
        scenarios=scenarios,
        seed=int(raw.get("seed", 0)) if seed is None else seed,
        base_delay_mean=float(raw.get("base_delay_mean", 86400.0)),
        arrival_mean=float(raw.get("arrival_mean", 3600.0)),
        start=parse_rfc3339(raw.get("start", DEFAULT_START)),
        effects=effects,
        extra_labels=int(raw.get("extra_labels", 3)),
        expected_types=expected,
    )


# -- structural edits --------------------------------------------------------

_ORDER = (
    ExceptionType.EARLY_EXIT, ExceptionType.EARLY_ENTRY, ExceptionType.SKIP,
    ExceptionType.ADD, ExceptionType.LATE_ENTRY, ExceptionType.LATE_EXIT,
    ExceptionType.STEP_BACK, ExceptionType.REPEAT,
)

_MIN_LENGTH = {
    ExceptionType.EARLY_EXIT: 2, ExceptionType.EARLY_ENTRY: 2, ExceptionType.SKIP: 3,
    ExceptionType.ADD: 2, ExceptionType.LATE_ENTRY: 1, ExceptionType.LATE_EXIT: 1,
    ExceptionType.STEP_BACK: 2, ExceptionType.REPEAT: 1,
}
_LENGTH_DELTA = {
    ExceptionType.EARLY_EXIT: -1, ExceptionType.EARLY_ENTRY: -1, ExceptionType.SKIP: -1,
    ExceptionType.ADD: 1, ExceptionType.LATE_ENTRY: 1, ExceptionType.LATE_EXIT: 1,
}


def _apply(path: list, t: ExceptionType, rng: SplitMix64, fresh: list):
    n = len(path)
    if t is ExceptionType.EARLY_EXIT:
        del path[-1]
    elif t is ExceptionType.EARLY_ENTRY:
        del path[0]
    elif t is ExceptionType.SKIP:
        del path[1 + rng.below(n - 2)]
    elif t is ExceptionType.LATE_EXIT:
        path.append(fresh.pop(rng.below(len(fresh))))
    elif t is ExceptionType.LATE_ENTRY:
        path.insert(0, fresh.pop(rng.below(len(fresh))))
    elif t is ExceptionType.ADD:
        at = 1 + rng.below(n - 1)
        path.insert(at, fresh.pop(rng.below(len(fresh))))
    elif t is ExceptionType.REPEAT:
        i = rng.below(n)
        path.insert(i + 1, path[i])
    elif t is ExceptionType.STEP_BACK:
        i = rng.below(n - 1)
        j = i + 1 + rng.below(n - 1 - i)
        path[j + 1:j + 1] = path[i:j + 1]


def inject(normal: Sequence[str], types, rng: SplitMix64, fresh_labels: Sequence[str]) -> list[str]:
    """Apply one structural edit per type, deletions before insertions before repetitions."""
    for _ in range(100):
        path = list(normal)
        fresh = list(fresh_labels)
        for t in _ORDER:
            if t in types:
                _apply(path, t, rng, fresh)
        if not types or path != list(normal):
            return path
    raise ConfigError(f"could not inject {injection_key(types)} into {list(normal)}")


@dataclass(frozen=True)
class SynthLog:
    log: EventLog
    truth: Mapping[str, frozenset]
    scenario_of: Mapping[str, str]


def generate_log(config: SynthConfig) -> SynthLog:
    fresh = config.fresh_labels
    cases: dict[str, tuple[Event, ...]] = {}
    attrs: dict[str, dict[str, str]] = {}
    truth: dict[str, frozenset] = {}
    scenario_of: dict[str, str] = {}
    row = 1  # header occupies line 1 of the CSV form
    for si, sc in enumerate(config.scenarios):
        rng = SplitMix64(config.seed + si)
        choices = [(types, rate) for types, rate in sc.rates.items() if rate > 0]
        clock = config.start
        base_units = len(sc.normal_flow) - 1
        for ci in range(sc.cases):
            case_id = f"s{si + 1}c{ci + 1:06d}"
            clock += rng.exponential(config.arrival_mean)
            u = rng.uniform()
            types = choices[-1][0]
            acc = 0.0
            for cand, rate in choices:
                acc += rate
                if u < acc:
                    types = cand
                    break
            path = inject(sc.normal_flow, types, rng, fresh)
            units = base_units
            for t in types:
                units += config.effect(t) if t in ADD_FAMILY else -config.effect(t)
            units = max(units, 0)
            total = sum(rng.exponential(config.base_delay_mean) for _ in range(units))
            if len(path) == 1:
                stamps = [clock]
            else:
                weights = [rng.exponential(1.0) for _ in range(len(path) - 1)]
                scale = total / sum(weights)
                stamps = [clock]
                for w in weights[:-1]:
                    stamps.append(stamps[-1] + w * scale)
                stamps.append(clock + total)
            events = []
            for activity, ts in zip(path, stamps):
                row += 1
                events.append(Event(case_id, activity, float(round(ts)), row))
            cases[case_id] = tuple(events)
            attrs[case_id] = {"outcome": sc.name}
            truth[case_id] = frozenset(types)
            scenario_of[case_id] = sc.name
    log = EventLog(cases=cases, source="<synth>", row_count=row - 1, attributes=attrs)
    return SynthLog(log, truth, scenario_of)


def write_log_csv(log: EventLog, out) -> None:
    """Write ``case_id,activity,timestamp,outcome`` rows (RFC 3339, whole seconds)."""
    own = isinstance(out, (str, os.PathLike))
    fh = open(out, "w", newline="", encoding="utf-8") if own else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "activity", "timestamp", "outcome"])
        for case_id, events in log.cases.items():
            outcome = log.attributes.get(case_id, {}).get("outcome", "")
            for e in events:
                w.writerow([case_id, e.activity, format_rfc3339(e.timestamp), outcome])
    finally:
        if own:
            fh.close()


def write_truth_csv(synth: SynthLog, out) -> None:
    own = isinstance(out, (str, os.PathLike))
    fh = open(out, "w", newline="", encoding="utf-8") if own else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "injected_types"])
        for case_id, types in synth.truth.items():
            w.writerow([case_id, ";".join(t.name for t in sorted_types(types))])
    finally:
        if own:
            fh.close()


def log_csv_bytes(log: EventLog) -> bytes:
    buf = io.StringIO()
    write_log_csv(log, buf)
    return buf.getvalue().encode("utf-8")


def model_for(config: SynthConfig, expected_types=None) -> ProcessModel:
    """Directly-follows model under which every single injection of an
    ``expected_types`` type is a walk.

    When scenarios share no activities, single injections of the remaining
    types are not walks.
    """
    expected = config.expected_types if expected_types is None else frozenset(expected_types)
    fresh = config.fresh_labels
    edges = set()
    for sc in config.scenarios:
        nf = sc.normal_flow
        chain = (START, *nf, END)
        edges.update(zip(chain, chain[1:]))
        n = len(nf)
        if ExceptionType.REPEAT in expected:
            edges.update((a, a) for a in nf)
        if ExceptionType.STEP_BACK in expected:
            edges.update((nf[j], nf[i]) for i in range(n) for j in range(i + 1, n))
        if ExceptionType.SKIP in expected:
            edges.update((nf[i - 1], nf[i + 1]) for i in range(1, n - 1))
        if ExceptionType.EARLY_EXIT in expected and n >= 2:
            edges.add((nf[-2], END))
        if ExceptionType.EARLY_ENTRY in expected and n >= 2:
            edges.add((START, nf[1]))
        if ExceptionType.LATE_EXIT in expected:
            edges.update((nf[-1], x) for x in fresh)
            edges.update((x, END) for x in fresh)
        if ExceptionType.LATE_ENTRY in expected:
            edges.update((START, x) for x in fresh)
            edges.update((x, nf[0]) for x in fresh)
        if ExceptionType.ADD in expected:
            for i in range(n - 1):
                edges.update((nf[i], x) for x in fresh)
                edges.update((x, nf[i + 1]) for x in fresh)
    return ProcessModel(frozenset(edges))
