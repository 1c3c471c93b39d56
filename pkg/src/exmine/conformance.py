"""Directly-follows process models and walk-membership conformance."""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ModelError

START = "__START__"
END = "__END__"


class Expectedness(enum.Enum):
    EXPECTED = "Expected"
    UNEXPECTED = "Unexpected"


@dataclass(frozen=True)
class ProcessModel:
    edges: frozenset[tuple[str, str]]

    def __post_init__(self):
        if not any(a == START for a, _ in self.edges):
            raise ModelError("model has no start")
        if not any(b == END for _, b in self.edges):
            raise ModelError("model has no end")
        for a, b in self.edges:
            if b == START:
                raise ModelError(f"edge into {START} is not allowed ({a} -> {b})")
            if a == END:
                raise ModelError(f"edge out of {END} is not allowed ({a} -> {b})")

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]]) -> "ProcessModel":
        return cls(frozenset(edges))

    @property
    def activities(self) -> frozenset[str]:
        nodes = {n for e in self.edges for n in e}
        return frozenset(nodes - {START, END})

    def to_text(self) -> str:
        return "".join(f"{a} -> {b}\n" for a, b in sorted(self.edges))


def parse_model(source) -> ProcessModel:
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ModelError(f"cannot read model {os.fspath(source)!r}: {exc.strerror}") from exc
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    edges = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("->")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ModelError(f"line {lineno}: expected '<source> -> <target>', got {raw!r}")
        edges.add((parts[0].strip(), parts[1].strip()))
    return ProcessModel(frozenset(edges))


def classify_expectedness(path: Sequence[str], model: ProcessModel) -> Expectedness:
    if not path:
        raise ValueError("path must be non-empty")
    edges = model.edges
    steps = zip((START, *path), (*path, END))
    if all(step in edges for step in steps):
        return Expectedness.EXPECTED
    return Expectedness.UNEXPECTED
