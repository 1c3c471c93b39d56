"""Outcome scenarios and normal-flow election."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConfigError
from .eventlog import Trace, Variant, extract_variants, variant_order_key

UNLABELED = "__UNLABELED__"
MODES = ("last_activity", "marker_set", "case_attribute")


@dataclass(frozen=True)
class OutcomePolicy:
    mode: str = "last_activity"
    markers: Mapping[str, str] = field(default_factory=dict)
    attribute: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown outcome mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.mode == "marker_set" and not self.markers:
            raise ConfigError("marker_set mode needs at least one marker.<activity>=<outcome> entry")
        if self.mode == "case_attribute" and not self.attribute:
            raise ConfigError("case_attribute mode needs attribute=<name>")

    def label(self, trace: Trace) -> str:
        if self.mode == "last_activity":
            return trace.path[-1]
        if self.mode == "marker_set":
            found = {self.markers[a] for a in trace.path if a in self.markers}
            return "+".join(sorted(found)) if found else UNLABELED
        value = trace.attributes.get(self.attribute, "")
        return value if value else UNLABELED


def parse_outcome_policy(source) -> OutcomePolicy:
    """Read a ``key=value`` outcome policy file (``#`` starts a comment line).

    Recognised keys: ``mode``, ``attribute`` and ``marker.<activity label>``.
    """
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read outcome policy {os.fspath(source)!r}: {exc.strerror}") from exc
    else:
        text = source.read()
    mode, attribute, markers = "last_activity", "", {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"outcome policy line {lineno}: expected key=value")
        key, value = key.strip(), value.strip()
        if key == "mode":
            mode = value
        elif key == "attribute":
            attribute = value
        elif key.startswith("marker."):
            markers[key[len("marker."):].strip()] = value
        else:
            raise ConfigError(f"outcome policy line {lineno}: unknown key {key!r}")
    return OutcomePolicy(mode=mode, markers=markers, attribute=attribute)


@dataclass(frozen=True)
class Scenario:
    label: str
    traces: tuple[Trace, ...]
    variants: tuple[Variant, ...]
    normal_flow: tuple[str, ...] | None

    @property
    def case_count(self) -> int:
        return len(self.traces)


def select_normal_flow(variants: Sequence[Variant]) -> tuple[str, ...]:
    if not variants:
        raise ValueError("cannot elect a normal flow from an empty variant table")
    best = min(variants, key=lambda v: variant_order_key(v.path, v.case_count))
    return best.path


def assign_scenarios(traces: Sequence[Trace], policy: OutcomePolicy | None = None) -> list[Scenario]:
    """Partition traces by outcome label; scenarios come back sorted by label.

    The unlabeled bucket, when present, carries no normal flow.
    """
    policy = policy or OutcomePolicy()
    buckets: dict[str, list[Trace]] = {}
    for t in traces:
        buckets.setdefault(policy.label(t), []).append(t)
    scenarios = []
    for label in sorted(buckets):
        members = buckets[label]
        variants = extract_variants(members)
        normal = None if label == UNLABELED else select_normal_flow(variants)
        scenarios.append(Scenario(label, tuple(members), tuple(variants), normal))
    return scenarios
