"""Per-scenario grouping, rank tests against the normal flow, and hypothesis voting."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .classify import (
    ADD_FAMILY, SKIP_FAMILY, ExceptionProfile, ExceptionType, classify_path, sorted_types, types_key,
)
from .conformance import Expectedness, ProcessModel, classify_expectedness
from .eventlog import Trace, TopVariants, extract_variants, top_k_variants
from .scenarios import UNLABELED, OutcomePolicy, Scenario, assign_scenarios
from .stats import (
    Direction, GroupStats, RankContext, TestResult, adjust_bonferroni, descriptive_stats,
    dunn_pairwise, kruskal_wallis,
)

NORMAL = "NORMAL"
EXCEPTION = "EXCEPTION"
UNALIGNABLE = "UNALIGNABLE"
EXPECTED = "EXPECTED"
UNEXPECTED = "UNEXPECTED"
UNEXPECTED_VS_EXPECTED = "UNEXPECTED_VS_EXPECTED"


class Grouping(enum.Enum):
    BY_TYPE_SET = "by_type_set"
    BY_EXPECTEDNESS = "by_expectedness"
    NORMAL_VS_EXCEPTION = "normal_vs_exception"


class Verdict(enum.Enum):
    SUPPORTED = "SUPPORTED"
    CONTRADICTED = "CONTRADICTED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class GroupingPolicy:
    max_types: int = 2
    # a group is kept only when its size is strictly larger than this
    min_group_size: int = 25
    alpha: float = 0.01

    def __post_init__(self):
        if self.max_types < 1:
            raise ValueError("max_types must be at least 1")
        if self.min_group_size < 1:
            raise ValueError("min_group_size must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class CaseRecord:
    trace: Trace
    scenario: str
    profile: ExceptionProfile
    expectedness: Expectedness | None = None

    @property
    def throughput(self) -> float:
        return self.trace.throughput


@dataclass(frozen=True)
class Exclusion:
    group: str
    size: int
    reason: str


@dataclass
class GroupSet:
    grouping: Grouping
    groups: dict[str, list[float]]
    exclusions: list[Exclusion]
    eligible: int
    excluded: int
    skipped: int
    skip_reason: str | None = None
    group_types: dict[str, frozenset] = field(default_factory=dict)

    @property
    def skipped_entirely(self) -> bool:
        return self.skip_reason is not None


@dataclass(frozen=True)
class DirectionCell:
    group: str
    direction: Direction
    p_raw: float | None = None
    p_adjusted: float | None = None
    size: int = 0
    z: float | None = None
    types: frozenset = frozenset()


@dataclass
class Analysis:
    omnibus: TestResult | None
    cells: list[DirectionCell]
    descriptives: GroupStats | None
    m: int = 0
    note: str | None = None


def _group_label(case: CaseRecord, grouping: Grouping) -> str:
    if grouping is Grouping.BY_TYPE_SET:
        return types_key(case.profile.types)
    if grouping is Grouping.NORMAL_VS_EXCEPTION:
        return EXCEPTION
    if case.expectedness is None:
        raise ValueError("expectedness grouping needs cases classified against a model")
    return EXPECTED if case.expectedness is Expectedness.EXPECTED else UNEXPECTED


def build_groups(cases: Sequence[CaseRecord], policy: GroupingPolicy, grouping: Grouping) -> GroupSet:
    """Split a scenario's cases into the normal group and exception groups.

    Unalignable cases, cases with more than ``max_types`` distinct types and
    groups not larger than ``min_group_size`` are excluded. When the normal
    group or every exception group fails, the scenario is skipped as a whole.
    """
    total = len(cases)
    limit = policy.min_group_size
    normal: list[float] = []
    buckets: dict[str, list[float]] = {}
    bucket_types: dict[str, frozenset] = {}
    dropped: dict[str, list[int]] = {}
    reasons: dict[str, str] = {}

    def drop(label, reason):
        dropped.setdefault(label, [0])[0] += 1
        reasons[label] = reason

    for c in cases:
        prof = c.profile
        if prof.is_normal:
            normal.append(c.throughput)
        elif not prof.alignable:
            drop(UNALIGNABLE, "no activity in common with the normal flow")
        elif len(prof.types) > policy.max_types:
            drop(types_key(prof.types), f"more than {policy.max_types} exception types")
        else:
            label = _group_label(c, grouping)
            buckets.setdefault(label, []).append(c.throughput)
            bucket_types.setdefault(label, prof.types if grouping is Grouping.BY_TYPE_SET else frozenset())

    exclusions = [Exclusion(label, n[0], reasons[label]) for label, n in sorted(dropped.items())]
    excluded = sum(e.size for e in exclusions)

    if len(normal) <= limit:
        return GroupSet(grouping, {}, exclusions, 0, 0, total,
                        f"normal group size {len(normal)} not larger than {limit}")

    groups = {NORMAL: normal}
    kept_types = {NORMAL: frozenset()}
    for label in _ordered(buckets, grouping):
        members = buckets[label]
        if len(members) > limit:
            groups[label] = members
            kept_types[label] = bucket_types[label]
        else:
            exclusions.append(Exclusion(label, len(members), f"group size {len(members)} not larger than {limit}"))
            excluded += len(members)
    if len(groups) < 2:
        return GroupSet(grouping, {}, exclusions, 0, 0, total,
                        f"no exception group larger than {limit}")
    eligible = sum(len(g) for g in groups.values())
    return GroupSet(grouping, groups, exclusions, eligible, excluded, 0, None, kept_types)


def _ordered(buckets, grouping):
    if grouping is Grouping.BY_EXPECTEDNESS:
        return [k for k in (EXPECTED, UNEXPECTED) if k in buckets]
    return sorted(buckets)


def _pooled_stats(groups: Mapping[str, list[float]]) -> GroupStats | None:
    pooled = [x for g in groups.values() for x in g]
    return descriptive_stats(pooled) if pooled else None


def _against_normal(gs: GroupSet, alpha: float) -> Analysis:
    labels = list(gs.groups)
    samples = [gs.groups[k] for k in labels]
    ctx = RankContext.from_groups(samples)
    omnibus = kruskal_wallis(samples, ctx)
    m = len(labels) - 1
    cells = []
    for i, label in enumerate(labels[1:], start=1):
        d = dunn_pairwise(samples, i, 0, ctx)
        p_adj = adjust_bonferroni([d.p_raw], m)[0]
        direction = d.direction if p_adj < alpha else Direction.NOT_SIGNIFICANT
        cells.append(DirectionCell(label, direction, d.p_raw, p_adj, len(samples[i]), d.statistic,
                                   gs.group_types.get(label, frozenset())))
    return Analysis(omnibus, cells, _pooled_stats(gs.groups), m)


def run_type_analysis(gs: GroupSet, alpha: float = 0.01) -> Analysis:
    if gs.skipped_entirely:
        return Analysis(None, [], None, 0, gs.skip_reason)
    return _against_normal(gs, alpha)


def run_h1_analysis(gs: GroupSet, alpha: float = 0.01) -> Analysis:
    return run_type_analysis(gs, alpha)


def run_expectedness_analysis(gs: GroupSet | None, alpha: float = 0.01) -> Analysis:
    """Omnibus test over normal/expected/unexpected plus the three pairwise tests.

    Cells come back in a fixed order: EXPECTED (vs normal), UNEXPECTED (vs
    normal), UNEXPECTED_VS_EXPECTED. Pairs whose groups are not eligible are
    NOT_APPLICABLE and do not count towards the Bonferroni factor.
    """
    pairs = ((EXPECTED, NORMAL), (UNEXPECTED, NORMAL), (UNEXPECTED, EXPECTED))
    names = (EXPECTED, UNEXPECTED, UNEXPECTED_VS_EXPECTED)
    if gs is None:
        return Analysis(None, [DirectionCell(n, Direction.NOT_APPLICABLE) for n in names], None, 0,
                        "no model supplied")
    if gs.skipped_entirely:
        return Analysis(None, [DirectionCell(n, Direction.NOT_APPLICABLE) for n in names], None, 0,
                        gs.skip_reason)
    labels = list(gs.groups)
    samples = [gs.groups[k] for k in labels]
    ctx = RankContext.from_groups(samples)
    omnibus = kruskal_wallis(samples, ctx)
    performed = [(name, a, b) for name, (a, b) in zip(names, pairs) if a in gs.groups and b in gs.groups]
    m = len(performed)
    results = {}
    for name, a, b in performed:
        d = dunn_pairwise(samples, labels.index(a), labels.index(b), ctx)
        p_adj = adjust_bonferroni([d.p_raw], m)[0]
        direction = d.direction if p_adj < alpha else Direction.NOT_SIGNIFICANT
        results[name] = DirectionCell(name, direction, d.p_raw, p_adj, len(gs.groups[a]), d.statistic)
    cells = [results.get(n, DirectionCell(n, Direction.NOT_APPLICABLE)) for n in names]
    return Analysis(omnibus, cells, _pooled_stats(gs.groups), m)


@dataclass(frozen=True)
class TypeFrequency:
    per_path: dict[ExceptionType, float]
    per_case: dict[ExceptionType, float]
    exception_paths: int
    exception_cases: int


def type_frequency(cases: Sequence[CaseRecord]) -> TypeFrequency:
    """Share of exception paths (and cases) whose profile contains each type.

    A path is identified by its scenario and activity sequence; unalignable
    cases are left out of both bases.
    """
    paths: dict[tuple, frozenset] = {}
    case_hits = {t: 0 for t in ExceptionType}
    n_cases = 0
    for c in cases:
        if c.profile.is_normal or not c.profile.alignable:
            continue
        n_cases += 1
        paths[(c.scenario, c.trace.path)] = c.profile.types
        for t in c.profile.types:
            case_hits[t] += 1
    n_paths = len(paths)
    per_path = {t: (sum(1 for ts in paths.values() if t in ts) / n_paths if n_paths else 0.0)
                for t in ExceptionType}
    per_case = {t: (case_hits[t] / n_cases if n_cases else 0.0) for t in ExceptionType}
    return TypeFrequency(per_path, per_case, n_paths, n_cases)


# -- per-scenario orchestration ----------------------------------------------

@dataclass
class ScenarioResult:
    scenario: Scenario
    cases: list[CaseRecord]
    skip_reason: str | None = None
    normal_expectedness: Expectedness | None = None
    type_groups: GroupSet | None = None
    type_analysis: Analysis | None = None
    exp_groups: GroupSet | None = None
    exp_analysis: Analysis | None = None
    h1_groups: GroupSet | None = None
    h1_analysis: Analysis | None = None
    frequency: TypeFrequency | None = None

    @property
    def label(self) -> str:
        return self.scenario.label

    @property
    def normal_count(self) -> int:
        return sum(1 for c in self.cases if c.profile.is_normal)

    def path_counts(self, expectedness: Expectedness | None = None) -> tuple[int, int]:
        """(distinct exception paths, exception cases), optionally for one expectedness class."""
        paths, n = set(), 0
        for c in self.cases:
            if c.profile.is_normal:
                continue
            if expectedness is not None and c.expectedness is not expectedness:
                continue
            paths.add(c.trace.path)
            n += 1
        return len(paths), n


def case_records(scenario: Scenario, model: ProcessModel | None = None) -> list[CaseRecord]:
    records = []
    if scenario.normal_flow is None:
        empty = ExceptionProfile(frozenset(), (), False, ())
        return [CaseRecord(t, scenario.label, empty, None) for t in scenario.traces]
    exp_cache: dict[tuple, Expectedness] = {}
    for t in scenario.traces:
        profile = classify_path(t.path, scenario.normal_flow)
        exp = None
        if model is not None:
            exp = exp_cache.get(t.path)
            if exp is None:
                exp = exp_cache[t.path] = classify_expectedness(t.path, model)
        records.append(CaseRecord(t, scenario.label, profile, exp))
    return records


def analyze_scenario(scenario: Scenario, policy: GroupingPolicy,
                     model: ProcessModel | None = None) -> ScenarioResult:
    cases = case_records(scenario, model)
    res = ScenarioResult(scenario, cases)
    if scenario.label == UNLABELED:
        res.skip_reason = "cases without an outcome label"
        return res
    if model is not None:
        res.normal_expectedness = classify_expectedness(scenario.normal_flow, model)
    res.frequency = type_frequency(cases)
    res.type_groups = build_groups(cases, policy, Grouping.BY_TYPE_SET)
    res.type_analysis = run_type_analysis(res.type_groups, policy.alpha)
    res.h1_groups = build_groups(cases, policy, Grouping.NORMAL_VS_EXCEPTION)
    res.h1_analysis = run_h1_analysis(res.h1_groups, policy.alpha)
    if model is not None:
        res.exp_groups = build_groups(cases, policy, Grouping.BY_EXPECTEDNESS)
        res.exp_analysis = run_expectedness_analysis(res.exp_groups, policy.alpha)
    else:
        res.exp_analysis = run_expectedness_analysis(None, policy.alpha)
    res.skip_reason = res.type_groups.skip_reason
    return res


# -- hypotheses --------------------------------------------------------------

@dataclass(frozen=True)
class CellRef:
    scenario: str
    group: str
    direction: Direction
    p_adjusted: float | None


@dataclass
class HypothesisVerdict:
    hypothesis: str
    verdict: Verdict
    statement: str
    supporting: list[CellRef] = field(default_factory=list)
    opposing: list[CellRef] = field(default_factory=list)
    type_verdicts: dict[ExceptionType, Verdict] = field(default_factory=dict)


HYPOTHESES = {
    "H1": "exception paths have a longer throughput time than normal flows",
    "H2": "unexpected exceptions have a longer throughput time than expected exceptions",
    "H3": "exceptions adding activities have a longer throughput time than the normal flow",
    "H4": "exceptions removing activities have a shorter throughput time than the normal flow",
}


def _opposite(d: Direction) -> Direction:
    return Direction.SHORTER if d is Direction.LONGER else Direction.LONGER


def _vote(agree: int, oppose: int) -> Verdict:
    if agree and not oppose:
        return Verdict.SUPPORTED
    if oppose and not agree:
        return Verdict.CONTRADICTED
    return Verdict.INCONCLUSIVE


def _simple_verdict(name, refs: list[CellRef], want: Direction) -> HypothesisVerdict:
    sup = [r for r in refs if r.direction is want]
    opp = [r for r in refs if r.direction is _opposite(want)]
    return HypothesisVerdict(name, _vote(len(sup), len(opp)), HYPOTHESES[name], sup, opp)


def type_verdict(cells: Sequence[tuple[str, DirectionCell]], t: ExceptionType,
                 want: Direction) -> tuple[Verdict, list[CellRef], list[CellRef]]:
    """Vote on one type across scenarios.

    Cells where ``t`` appears without a partner from the opposite family are
    decisive. Cells pairing ``t`` with an opposite-family type are only used
    when no decisive cell exists, and an opposite direction there never
    contradicts (the partner can explain it).
    """
    rival = SKIP_FAMILY if t in ADD_FAMILY else ADD_FAMILY
    clean_for, clean_against, paired_for, paired_against = [], [], [], []
    for scenario, cell in cells:
        if t not in cell.types or cell.direction not in (Direction.LONGER, Direction.SHORTER):
            continue
        ref = CellRef(scenario, cell.group, cell.direction, cell.p_adjusted)
        paired = bool(cell.types & rival)
        if cell.direction is want:
            (paired_for if paired else clean_for).append(ref)
        else:
            (paired_against if paired else clean_against).append(ref)
    if clean_for or clean_against:
        verdict = _vote(len(clean_for), len(clean_against))
        return verdict, clean_for + paired_for, clean_against
    if paired_for and not paired_against:
        return Verdict.SUPPORTED, paired_for, []
    return Verdict.INCONCLUSIVE, paired_for, []


def _family_verdict(name, family, want, cells) -> HypothesisVerdict:
    out = HypothesisVerdict(name, Verdict.INCONCLUSIVE, HYPOTHESES[name])
    for t in sorted_types(family):
        v, sup, opp = type_verdict(cells, t, want)
        out.type_verdicts[t] = v
        out.supporting.extend(sup)
        out.opposing.extend(opp)
    votes = list(out.type_verdicts.values())
    out.verdict = _vote(votes.count(Verdict.SUPPORTED), votes.count(Verdict.CONTRADICTED))
    return out


def hypothesis_verdicts(results: Sequence[ScenarioResult]) -> list[HypothesisVerdict]:
    h1_refs, h2_refs, type_cells = [], [], []
    for r in results:
        if r.h1_analysis is not None:
            for c in r.h1_analysis.cells:
                h1_refs.append(CellRef(r.label, c.group, c.direction, c.p_adjusted))
        if r.exp_analysis is not None:
            for c in r.exp_analysis.cells:
                if c.group == UNEXPECTED_VS_EXPECTED and c.direction is not Direction.NOT_APPLICABLE:
                    h2_refs.append(CellRef(r.label, c.group, c.direction, c.p_adjusted))
        if r.type_analysis is not None:
            type_cells.extend((r.label, c) for c in r.type_analysis.cells)
    return [
        _simple_verdict("H1", h1_refs, Direction.LONGER),
        _simple_verdict("H2", h2_refs, Direction.LONGER),
        _family_verdict("H3", ADD_FAMILY, Direction.LONGER, type_cells),
        _family_verdict("H4", SKIP_FAMILY, Direction.SHORTER, type_cells),
    ]


# -- whole-log entry point ---------------------------------------------------

@dataclass
class AnalysisResult:
    source: str
    traces: list[Trace]
    scenarios: list[ScenarioResult]
    verdicts: list[HypothesisVerdict]
    top: TopVariants
    policy: GroupingPolicy
    model_supplied: bool
    frequency: TypeFrequency

    @property
    def any_analyzed(self) -> bool:
        return any(r.type_analysis is not None and r.type_analysis.omnibus is not None
                   for r in self.scenarios)


def analyze(traces: Sequence[Trace], outcome: OutcomePolicy | None = None,
            policy: GroupingPolicy | None = None, model: ProcessModel | None = None,
            top_k: int = 15, source: str = "<memory>") -> AnalysisResult:
    policy = policy or GroupingPolicy()
    scenarios = assign_scenarios(traces, outcome)
    results = [analyze_scenario(s, policy, model) for s in scenarios]
    all_cases = [c for r in results if r.label != UNLABELED for c in r.cases]
    return AnalysisResult(
        source=source,
        traces=list(traces),
        scenarios=results,
        verdicts=hypothesis_verdicts(results),
        top=top_k_variants(extract_variants(traces), top_k),
        policy=policy,
        model_supplied=model is not None,
        frequency=type_frequency(all_cases),
    )
