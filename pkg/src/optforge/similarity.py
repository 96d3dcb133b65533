"""Character-level Gestalt pattern matching (Ratcliff-Obershelp).

Score is 2*M/T where M is the total length of the recursively-found longest
matching blocks and T the combined input length. The popularity-based junk
heuristic found in common sequence matchers is deliberately disabled so that
scores are bit-stable regardless of input length; any external oracle must be
configured the same way.

Matching is index-asymmetric on rare inputs (it inherits the b-side tie
breaking of the classic algorithm), so callers fix the argument order as
ratio(original, candidate) throughout this codebase.
"""

from __future__ import annotations

__all__ = ["InputTooLarge", "MAX_INPUT_CHARS", "ratio", "passes_threshold"]

# Quadratic worst case; beyond this we refuse rather than hang.
MAX_INPUT_CHARS = 1_000_000


class InputTooLarge(ValueError):
    """Input exceeds MAX_INPUT_CHARS."""


def _longest_match(
    a: str, b: str, b2j: dict[str, list[int]], alo: int, ahi: int, blo: int, bhi: int
) -> tuple[int, int, int]:
    """Longest block with a[i:i+k] == b[j:j+k] inside the given windows.

    Ties go to the block starting earliest in ``a``, then earliest in ``b``
    (the classic tie break; required for oracle equivalence)."""
    besti, bestj, bestsize = alo, blo, 0
    j2len: dict[int, int] = {}
    for i in range(alo, ahi):
        newj2len: dict[int, int] = {}
        for j in b2j.get(a[i], ()):
            if j < blo:
                continue
            if j >= bhi:
                break
            k = newj2len[j] = j2len.get(j - 1, 0) + 1
            if k > bestsize:
                besti, bestj, bestsize = i - k + 1, j - k + 1, k
        j2len = newj2len
    return besti, bestj, bestsize


def _matched_chars(a: str, b: str) -> int:
    b2j: dict[str, list[int]] = {}
    for j, ch in enumerate(b):
        b2j.setdefault(ch, []).append(j)
    total = 0
    queue = [(0, len(a), 0, len(b))]
    while queue:
        alo, ahi, blo, bhi = queue.pop()
        i, j, k = _longest_match(a, b, b2j, alo, ahi, blo, bhi)
        if k == 0:
            continue
        total += k
        if alo < i and blo < j:
            queue.append((alo, i, blo, j))
        if i + k < ahi and j + k < bhi:
            queue.append((i + k, ahi, j + k, bhi))
    return total


def ratio(a: str, b: str) -> float:
    """Similarity in [0.0, 1.0]; 1.0 for identical inputs (and two empties)."""
    if len(a) > MAX_INPUT_CHARS or len(b) > MAX_INPUT_CHARS:
        raise InputTooLarge(
            f"refusing inputs of {len(a)}/{len(b)} chars (limit {MAX_INPUT_CHARS})"
        )
    t = len(a) + len(b)
    if t == 0:
        return 1.0
    return 2.0 * _matched_chars(a, b) / t


def passes_threshold(a: str, b: str, threshold: float) -> bool:
    """True iff ratio(a, b) >= threshold. Threshold must lie in [0, 1]."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold out of range: {threshold}")
    return ratio(a, b) >= threshold
