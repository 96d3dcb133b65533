"""Apply a diff script to a program by greedy forward context matching.

Each hunk's anchor (its context plus removed lines, in order) is located as
an exact consecutive line match, scanning forward from the end of the
previous hunk's match. A hunk whose anchor cannot be found rejects the whole
script; the caller discards the candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .canonicalize import SourceUnit
from .diffrep import DiffScript, join_lines, split_lines

__all__ = ["PatchStatus", "PatchResult", "apply"]


class PatchStatus(str, Enum):
    APPLIED = "Applied"
    UNMATCHED = "Unmatched"


@dataclass(frozen=True)
class PatchResult:
    status: PatchStatus
    output: str | None = None
    failed_hunk: int | None = None

    @property
    def applied(self) -> bool:
        return self.status is PatchStatus.APPLIED


def _find(lines: list[str], anchor: tuple[str, ...], start: int) -> int:
    last = len(lines) - len(anchor)
    for pos in range(start, last + 1):
        if all(lines[pos + k] == anchor[k] for k in range(len(anchor))):
            return pos
    return -1


def apply(script: DiffScript, original: SourceUnit) -> PatchResult:
    """Patch ``original`` (canonical text) with ``script``.

    Anchors match by exact line equality; the first match at or after the
    previous hunk's consumed region wins. A context-free pure insertion
    anchors at file start, and only as the first hunk."""
    lines = split_lines(original.text)
    pos = 0
    edits: list[tuple[int, int, tuple[str, ...]]] = []
    for idx, hunk in enumerate(script.hunks):
        anchor = hunk.anchor
        if not anchor:
            if idx != 0:
                return PatchResult(PatchStatus.UNMATCHED, failed_hunk=idx)
            edits.append((0, 0, hunk.replacement))
            continue
        at = _find(lines, anchor, pos)
        if at < 0:
            return PatchResult(PatchStatus.UNMATCHED, failed_hunk=idx)
        edits.append((at, len(anchor), hunk.replacement))
        pos = at + len(anchor)

    out: list[str] = []
    cursor = 0
    for at, length, replacement in edits:
        out.extend(lines[cursor:at])
        out.extend(replacement)
        cursor = at + length
    out.extend(lines[cursor:])
    return PatchResult(PatchStatus.APPLIED, output=join_lines(out))
