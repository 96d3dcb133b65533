"""Headerless one-context-line diff scripts.

A script is a sequence of hunks; each hunk is context (' '), removed ('-')
and added ('+') lines. There are no @@ headers or file names: hunks are
located at apply time by matching their context, and the rendered form joins
hunks with a single empty line. A blank context line renders as a lone space,
so the empty-line separator is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .canonicalize import SourceUnit

__all__ = [
    "Marker",
    "Hunk",
    "DiffScript",
    "MalformedDiff",
    "MalformedReason",
    "IdenticalInputs",
    "diff_lines",
    "split_lines",
    "synthesize",
    "render",
    "parse",
]

# Two change blocks whose 1-line context regions would touch or overlap are
# emitted as one hunk; that happens when at most 2 unchanged lines separate
# them.
_MERGE_GAP = 2


class Marker(str, Enum):
    CONTEXT = " "
    REMOVED = "-"
    ADDED = "+"


@dataclass(frozen=True)
class Hunk:
    lines: tuple[tuple[Marker, str], ...]

    def __post_init__(self) -> None:
        if not any(m is not Marker.CONTEXT for m, _ in self.lines):
            raise ValueError("hunk carries no change")
        for _, content in self.lines:
            if "\n" in content:
                raise ValueError("hunk line content contains a newline")

    @property
    def anchor(self) -> tuple[str, ...]:
        """Old-side lines (context + removed) in order; what apply matches."""
        return tuple(c for m, c in self.lines if m is not Marker.ADDED)

    @property
    def replacement(self) -> tuple[str, ...]:
        """New-side lines (context + added) in order."""
        return tuple(c for m, c in self.lines if m is not Marker.REMOVED)


@dataclass(frozen=True)
class DiffScript:
    hunks: tuple[Hunk, ...]

    def __post_init__(self) -> None:
        if not self.hunks:
            raise ValueError("empty script is not a valid optimization")


class MalformedReason(str, Enum):
    UNKNOWN_MARKER = "UnknownMarker"
    EMPTY_SCRIPT = "EmptyScript"
    HUNK_WITHOUT_CHANGE = "HunkWithoutChange"
    EXCESS_CONTEXT = "ExcessContext"


class MalformedDiff(ValueError):
    def __init__(self, reason: MalformedReason, detail: str = ""):
        super().__init__(f"{reason.value}{': ' + detail if detail else ''}")
        self.reason = reason


class IdenticalInputs(ValueError):
    """synthesize() needs two different programs."""


def split_lines(text: str) -> list[str]:
    """Lines without terminators; canonical text 'a\\nb\\n' gives ['a', 'b']."""
    if not text:
        return []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def join_lines(lines: list[str]) -> str:
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


def diff_lines(a: list[str], b: list[str]) -> list[tuple[str, str]]:
    """Minimal line edit script as (op, line), op in {'=', '-', '+'}.

    Myers greedy O((N+M)D); ties resolved by the standard forward scan, so
    output is deterministic."""
    n, m = len(a), len(b)
    if n == 0:
        return [("+", ln) for ln in b]
    if m == 0:
        return [("-", ln) for ln in a]

    v: dict[int, int] = {1: 0}
    trace: list[dict[int, int]] = []
    found = False
    for d in range(n + m + 1):
        trace.append(dict(v))
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v.get(k - 1, 0) < v.get(k + 1, 0)):
                x = v.get(k + 1, 0)
            else:
                x = v.get(k - 1, 0) + 1
            y = x - k
            while x < n and y < m and a[x] == b[y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                found = True
                break
        if found:
            break

    ops: list[tuple[str, str]] = []
    x, y = n, m
    for d in range(len(trace) - 1, -1, -1):
        vd = trace[d]
        k = x - y
        if k == -d or (k != d and vd.get(k - 1, 0) < vd.get(k + 1, 0)):
            prev_k = k + 1
        else:
            prev_k = k - 1
        prev_x = vd.get(prev_k, 0)
        prev_y = prev_x - prev_k
        while x > prev_x and y > prev_y:
            ops.append(("=", a[x - 1]))
            x -= 1
            y -= 1
        if d > 0:
            if x == prev_x:
                ops.append(("+", b[prev_y]))
            else:
                ops.append(("-", a[prev_x]))
            x, y = prev_x, prev_y
    ops.reverse()
    return ops


def _change_blocks(ops: list[tuple[str, str]]) -> list[tuple[int, list[str], list[str]]]:
    """(index of first op, removed lines, added lines) per maximal change run."""
    blocks = []
    i = 0
    while i < len(ops):
        if ops[i][0] == "=":
            i += 1
            continue
        start = i
        removed, added = [], []
        while i < len(ops) and ops[i][0] != "=":
            if ops[i][0] == "-":
                removed.append(ops[i][1])
            else:
                added.append(ops[i][1])
            i += 1
        blocks.append((start, removed, added))
    return blocks


def synthesize(original: SourceUnit, improved: SourceUnit) -> DiffScript:
    """Minimal line diff grouped into one-context-line hunks.

    Within a change block all removed lines precede all added lines; blocks
    separated by at most two unchanged lines share a hunk, with the gap kept
    as interior context."""
    if original.text == improved.text:
        raise IdenticalInputs(original.id)
    a = split_lines(original.text)
    b = split_lines(improved.text)
    ops = diff_lines(a, b)
    blocks = _change_blocks(ops)

    hunks: list[Hunk] = []
    bi = 0
    while bi < len(blocks):
        group = [blocks[bi]]
        while bi + 1 < len(blocks):
            gap_start = group[-1][0] + len(group[-1][1]) + len(group[-1][2])
            gap = blocks[bi + 1][0] - gap_start
            if gap <= _MERGE_GAP:
                group.append(blocks[bi + 1])
                bi += 1
            else:
                break
        bi += 1

        lines: list[tuple[Marker, str]] = []
        first_op = group[0][0]
        if first_op > 0 and ops[first_op - 1][0] == "=":
            lines.append((Marker.CONTEXT, ops[first_op - 1][1]))
        for gi, (start, removed, added) in enumerate(group):
            if gi > 0:
                prev = group[gi - 1]
                for j in range(prev[0] + len(prev[1]) + len(prev[2]), start):
                    lines.append((Marker.CONTEXT, ops[j][1]))
            lines.extend((Marker.REMOVED, ln) for ln in removed)
            lines.extend((Marker.ADDED, ln) for ln in added)
        last = group[-1]
        after = last[0] + len(last[1]) + len(last[2])
        if after < len(ops) and ops[after][0] == "=":
            lines.append((Marker.CONTEXT, ops[after][1]))
        hunks.append(Hunk(tuple(lines)))

    return DiffScript(tuple(hunks))


def render(script: DiffScript) -> str:
    """Marker char + content per line, hunks joined by one empty line,
    trailing newline. This rendering is the external training-target format."""
    parts = []
    for hunk in script.hunks:
        parts.append("\n".join(m.value + c for m, c in hunk.lines))
    return "\n\n".join(parts) + "\n"


_MARKERS = {m.value: m for m in Marker}


def _check_context_runs(lines: list[tuple[Marker, str]]) -> None:
    runs: list[tuple[bool, int]] = []  # (is_context, length)
    for m, _ in lines:
        is_ctx = m is Marker.CONTEXT
        if runs and runs[-1][0] == is_ctx:
            runs[-1] = (is_ctx, runs[-1][1] + 1)
        else:
            runs.append((is_ctx, 1))
    for idx, (is_ctx, length) in enumerate(runs):
        if not is_ctx:
            continue
        leading = idx == 0
        trailing = idx == len(runs) - 1
        limit = 1 if (leading or trailing) else _MERGE_GAP
        if length > limit:
            raise MalformedDiff(
                MalformedReason.EXCESS_CONTEXT,
                f"{length} context lines on one side of a change",
            )


def parse(raw: str) -> DiffScript:
    """Parse untrusted model output into a DiffScript or raise MalformedDiff.

    Splits on empty lines, classifies lines by their first character, and
    enforces the hunk shape (at least one change; at most one context line
    on each side of a change block)."""
    pieces = raw.split("\n")
    if pieces and pieces[-1] == "":
        pieces.pop()  # the trailing newline, when present
    if not any(pieces):
        raise MalformedDiff(MalformedReason.EMPTY_SCRIPT)

    groups: list[list[str]] = [[]]
    for piece in pieces:
        if piece == "":
            groups.append([])
        else:
            groups[-1].append(piece)

    hunks = []
    for group in groups:
        if not group:
            raise MalformedDiff(MalformedReason.HUNK_WITHOUT_CHANGE, "empty hunk")
        lines = []
        for ln in group:
            marker = _MARKERS.get(ln[0])
            if marker is None:
                raise MalformedDiff(MalformedReason.UNKNOWN_MARKER, ln[:40])
            lines.append((marker, ln[1:]))
        if not any(m is not Marker.CONTEXT for m, _ in lines):
            raise MalformedDiff(MalformedReason.HUNK_WITHOUT_CHANGE)
        _check_context_runs(lines)
        hunks.append(Hunk(tuple(lines)))

    return DiffScript(tuple(hunks))
