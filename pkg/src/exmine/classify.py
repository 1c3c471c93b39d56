"""Classification of an observed path against a normal flow into exception types.

The pipeline is fixed: immediate repetitions are consumed first (REPEAT,
STEP_BACK), the repetition-free remainder is aligned to the normal flow with
a deterministic LCS, and each unmatched block is typed by where it sits
relative to the first and last match.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence


class ExceptionType(enum.Enum):
    EARLY_EXIT = "Early-Exit"
    LATE_EXIT = "Late-Exit"
    EARLY_ENTRY = "Early-Entry"
    LATE_ENTRY = "Late-Entry"
    REPEAT = "Repeat"
    STEP_BACK = "Step-Back"
    ADD = "Add"
    SKIP = "Skip"

    @property
    def display(self) -> str:
        return self.value


# types that put work into the normal flow / take work out of it
ADD_FAMILY = frozenset({
    ExceptionType.ADD, ExceptionType.REPEAT, ExceptionType.STEP_BACK,
    ExceptionType.LATE_ENTRY, ExceptionType.LATE_EXIT,
})
SKIP_FAMILY = frozenset({ExceptionType.SKIP, ExceptionType.EARLY_EXIT, ExceptionType.EARLY_ENTRY})


def sorted_types(types) -> list[ExceptionType]:
    return sorted(types, key=lambda t: t.name)


def types_key(types) -> str:
    """Canonical '+'-joined name of a type set, e.g. ``ADD+SKIP``."""
    return "+".join(t.name for t in sorted_types(types))


@dataclass(frozen=True)
class EditRecord:
    kind: ExceptionType
    activities: tuple[str, ...]
    position: int


@dataclass(frozen=True)
class ExceptionProfile:
    types: frozenset[ExceptionType]
    records: tuple[EditRecord, ...]
    alignable: bool = True
    # (observed index, normal index) pairs of the alignment
    matches: tuple[tuple[int, int], ...] = ()

    @property
    def is_normal(self) -> bool:
        return self.alignable and not self.types


MATCH, INSERT, DELETE = "match", "insert", "delete"


class Edit(NamedTuple):
    op: str
    observed: int | None
    normal: int | None


def _find_repetition(seq: Sequence[str]) -> tuple[int, int] | None:
    n = len(seq)
    for start in range(n - 1):
        head = seq[start]
        for size in range(1, (n - start) // 2 + 1):
            if seq[start + size] == head and seq[start:start + size] == seq[start + size:start + 2 * size]:
                return start, size
    return None


def _reduce(path: Sequence[str]):
    seq = list(path)
    origin = list(range(len(seq)))
    records = []
    while True:
        hit = _find_repetition(seq)
        if hit is None:
            break
        start, size = hit
        block = tuple(seq[start:start + size])
        kind = ExceptionType.REPEAT if size == 1 else ExceptionType.STEP_BACK
        records.append(EditRecord(kind, block, origin[start + size]))
        del seq[start + size:start + 2 * size]
        del origin[start + size:start + 2 * size]
    return tuple(seq), tuple(origin), records


def reduce_repetitions(path: Sequence[str]) -> tuple[tuple[str, ...], list[EditRecord]]:
    """Strip immediate block repetitions, leftmost first and shortest first.

    >>> reduce_repetitions(["A", "B", "C", "B", "C", "D"])[0]
    ('A', 'B', 'C', 'D')
    """
    if not path:
        raise ValueError("path must be non-empty")
    reduced, _, records = _reduce(path)
    return reduced, records


def align_lcs(observed: Sequence[str], normal: Sequence[str]) -> list[Edit]:
    """Edit script realising an LCS of ``observed`` and ``normal``.

    Ties are broken by preferring a match, then consuming from ``observed``
    (insertion), then from ``normal`` (deletion).
    """
    n, m = len(observed), len(normal)
    # suffix table: L[i][j] = |LCS(observed[i:], normal[j:])|
    L = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below, a = L[i], L[i + 1], observed[i]
        for j in range(m - 1, -1, -1):
            if a == normal[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = below[j] if below[j] >= row[j + 1] else row[j + 1]
    script = []
    i = j = 0
    while i < n or j < m:
        if i < n and j < m and observed[i] == normal[j]:
            script.append(Edit(MATCH, i, j))
            i += 1
            j += 1
        elif i < n and (j == m or L[i + 1][j] == L[i][j]):
            script.append(Edit(INSERT, i, None))
            i += 1
        else:
            script.append(Edit(DELETE, None, j))
            j += 1
    return script


@lru_cache(maxsize=1 << 16)
def _classify(path: tuple[str, ...], normal: tuple[str, ...]) -> ExceptionProfile:
    if path == normal:
        return ExceptionProfile(frozenset(), (), True, tuple((i, i) for i in range(len(path))))
    reduced, origin, records = _reduce(path)
    script = align_lcs(reduced, normal)
    match_at = [k for k, e in enumerate(script) if e.op == MATCH]
    if not match_at:
        return ExceptionProfile(frozenset(), (), False, ())
    first, last = match_at[0], match_at[-1]

    k = 0
    while k < len(script):
        if script[k].op == MATCH:
            k += 1
            continue
        end = k
        while end < len(script) and script[end].op != MATCH:
            end += 1
        gap = script[k:end]
        inserted = [e.observed for e in gap if e.op == INSERT]
        deleted = [e.normal for e in gap if e.op == DELETE]
        leading, trailing = k < first, k > last
        if inserted:
            kind = (ExceptionType.LATE_ENTRY if leading else
                    ExceptionType.LATE_EXIT if trailing else ExceptionType.ADD)
            records.append(EditRecord(kind, tuple(reduced[i] for i in inserted), origin[inserted[0]]))
        if deleted:
            kind = (ExceptionType.EARLY_ENTRY if leading else
                    ExceptionType.EARLY_EXIT if trailing else ExceptionType.SKIP)
            # anchored at the next observed activity, or the last one at the tail
            pos = origin[script[end].observed] if end < len(script) else len(path) - 1
            records.append(EditRecord(kind, tuple(normal[j] for j in deleted), pos))
        k = end

    matches = tuple((origin[script[k].observed], script[k].normal) for k in match_at)
    return ExceptionProfile(frozenset(r.kind for r in records), tuple(records), True, matches)


def classify_path(path: Sequence[str], normal: Sequence[str]) -> ExceptionProfile:
    if not path or not normal:
        raise ValueError("path and normal flow must be non-empty")
    return _classify(tuple(path), tuple(normal))
