"""Event-log parsing, trace assembly and path-variant mining.

Timestamps are held as float seconds since the Unix epoch (UTC). Naive
RFC 3339 values without an offset are read as UTC.
"""
from __future__ import annotations

import csv
import io
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

from .errors import InputError, RowError, SchemaError

SECONDS_PER_UNIT = {
    "seconds": 1.0,
    "minutes": 60.0,
    "hours": 3600.0,
    "days": 86400.0,
    "weeks": 604800.0,
}

_EPOCH = re.compile(r"^[+-]?\d+$")
_FRACTION = re.compile(r"\.(\d+)")


@dataclass(frozen=True)
class LogSchema:
    case: str = "case_id"
    activity: str = "activity"
    timestamp: str = "timestamp"
    # None keeps every extra column as a case attribute; () keeps none.
    attributes: tuple[str, ...] | None = None


@dataclass(frozen=True, slots=True)
class Event:
    case_id: str
    activity: str
    timestamp: float
    row_index: int


@dataclass(frozen=True)
class EventLog:
    cases: Mapping[str, tuple[Event, ...]]
    source: str = "<memory>"
    row_count: int = 0
    attributes: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    def __len__(self):
        return len(self.cases)


@dataclass(frozen=True)
class Trace:
    case_id: str
    path: tuple[str, ...]
    start: float
    end: float
    attributes: Mapping[str, str] = field(default_factory=dict, compare=False, hash=False)

    @property
    def throughput(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Variant:
    path: tuple[str, ...]
    case_count: int
    case_ids: tuple[str, ...]
    case_share: float


class TopVariants(NamedTuple):
    rows: list[tuple[int, tuple[str, ...], float]]
    tail_fraction: float


def parse_rfc3339(text: str) -> float:
    s = text.strip()
    if s[-1:] in ("Z", "z"):
        s = s[:-1] + "+00:00"
    # fromisoformat (3.10) only takes 3 or 6 fractional digits
    s = _FRACTION.sub(lambda m: "." + (m.group(1) + "000000")[:6], s, count=1)
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_rfc3339(seconds: float) -> str:
    dt = datetime.fromtimestamp(seconds, tz=timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _open_text(source) -> tuple[IO[str], str, bool]:
    if isinstance(source, (str, os.PathLike)):
        try:
            return open(source, newline="", encoding="utf-8-sig"), os.fspath(source), True
        except OSError as exc:
            raise InputError(f"cannot read log {os.fspath(source)!r}: {exc.strerror}") from exc
    name = getattr(source, "name", "<stream>")
    if isinstance(source, io.TextIOBase):
        return source, str(name), False
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline=""), str(name), False


def parse_event_log(source, schema: LogSchema | None = None) -> EventLog:
    """Read a CSV event log into an :class:`EventLog`.

    ``source`` is a path or a byte/text stream. The timestamp format (RFC 3339
    or integer epoch seconds) is fixed by the first data row; every later row
    must use the same format.
    """
    schema = schema or LogSchema()
    handle, name, owned = _open_text(source)
    try:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{name}: empty file")
        header = [h.strip() for h in header]
        index = {h: i for i, h in enumerate(header)}
        for col in (schema.case, schema.activity, schema.timestamp):
            if col not in index:
                raise SchemaError(col, header)
        ci, ai, ti = index[schema.case], index[schema.activity], index[schema.timestamp]
        core = {ci, ai, ti}
        if schema.attributes is None:
            extra = [(h, i) for i, h in enumerate(header) if i not in core]
        else:
            for col in schema.attributes:
                if col not in index:
                    raise SchemaError(col, header)
            extra = [(h, index[h]) for h in schema.attributes]

        cases: dict[str, list[Event]] = {}
        attrs: dict[str, dict[str, str]] = {}
        epoch = None
        rows = 0
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise RowError(line, f"expected {len(header)} fields, got {len(row)}")
            case_id = row[ci].strip()
            activity = row[ai].strip()
            raw_ts = row[ti].strip()
            if not activity:
                raise RowError(line, "empty activity")
            if epoch is None:
                epoch = bool(_EPOCH.match(raw_ts))
            try:
                if epoch:
                    if not _EPOCH.match(raw_ts):
                        raise ValueError
                    ts = float(int(raw_ts))
                else:
                    ts = parse_rfc3339(raw_ts)
            except (ValueError, OverflowError, IndexError):
                raise RowError(line, f"unparseable timestamp {raw_ts!r}") from None
            cases.setdefault(case_id, []).append(Event(case_id, activity, ts, line))
            if extra:
                slot = attrs.setdefault(case_id, {})
                for col, i in extra:
                    value = row[i].strip()
                    if value and col not in slot:
                        slot[col] = value
            rows += 1
        if rows == 0:
            raise InputError(f"{name}: no data rows")
    finally:
        if owned:
            handle.close()
    return EventLog(
        cases={k: tuple(v) for k, v in cases.items()},
        source=name,
        row_count=rows,
        attributes=attrs,
    )


def build_traces(log: EventLog) -> list[Trace]:
    if not log.cases:
        raise InputError("event log has no cases")
    traces = []
    for case_id, events in log.cases.items():
        # list.sort is stable: equal timestamps keep source row order
        ordered = sorted(events, key=lambda e: (e.timestamp, e.row_index))
        traces.append(
            Trace(
                case_id=case_id,
                path=tuple(e.activity for e in ordered),
                start=ordered[0].timestamp,
                end=ordered[-1].timestamp,
                attributes=log.attributes.get(case_id, {}),
            )
        )
    return traces


def filter_completed(traces: Iterable[Trace], after: float | None = None,
                     before: float | None = None) -> list[Trace]:
    """Keep traces whose last event falls in ``[after, before)``."""
    out = []
    for t in traces:
        if after is not None and t.end < after:
            continue
        if before is not None and t.end >= before:
            continue
        out.append(t)
    return out


def variant_order_key(path: Sequence[str], count: int):
    return (-count, len(path), tuple(path))


def extract_variants(traces: Sequence[Trace]) -> list[Variant]:
    members: dict[tuple[str, ...], list[str]] = {}
    for t in traces:
        members.setdefault(t.path, []).append(t.case_id)
    total = len(traces)
    table = [
        Variant(path, len(ids), tuple(ids), len(ids) / total)
        for path, ids in members.items()
    ]
    table.sort(key=lambda v: variant_order_key(v.path, v.case_count))
    return table


def top_k_variants(table: Sequence[Variant], k: int = 15) -> TopVariants:
    if k < 1:
        raise ValueError("k must be positive")
    rows = [(rank, v.path, v.case_share) for rank, v in enumerate(table[:k], start=1)]
    if not table:
        return TopVariants(rows, 0.0)
    small = sum(1 for v in table if v.case_share < 0.01)
    return TopVariants(rows, small / len(table))


