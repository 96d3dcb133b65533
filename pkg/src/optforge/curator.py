"""Mine optimization pairs from judge submission dumps.

Input is JSONL, one accepted submission per line. Pairs are consecutive
submissions by the same author to the same problem, in chronological order,
where the later one strictly improves running time or memory. Small-edit
filters (changed lines, changed fraction, string similarity) keep the pairs
that look like targeted optimizations rather than rewrites.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import similarity
from .canonicalize import FormatterConfig, Language, SourceUnit, canonicalize
from .diffrep import diff_lines, render, split_lines, synthesize

__all__ = [
    "Origin",
    "SubmissionRecord",
    "OptimizationPair",
    "IngestResult",
    "MiningReport",
    "DatasetSplit",
    "CorpusUnreadable",
    "InsufficientPairs",
    "ingest",
    "mine_pairs",
    "count_changes",
    "split",
    "pair_record",
    "write_dataset",
    "default_sizes",
]

MAX_CHANGED_LINES = 20
MAX_CHANGED_FRACTION = 0.20
MIN_SIMILARITY = 0.8

# Table I proportions, used only to derive default split sizes.
_SPLIT_WEIGHTS = (312876, 1000, 559)


class Origin(str, Enum):
    AIZU = "AIZU"
    ATCODER = "AtCoder"
    CODEFORCES = "Codeforces"


class CorpusUnreadable(OSError):
    pass


class InsufficientPairs(ValueError):
    pass


@dataclass(frozen=True)
class SubmissionRecord:
    origin: Origin
    author: str
    contest_id: str
    submission_id: str
    creation_time: int
    problem: str
    programming_language: Language
    cpu_time: int  # milliseconds
    memory: int  # kilobytes
    source_code: str  # canonical after ingest
    notes: tuple[str, ...] = field(default=(), compare=False)

    def unit(self) -> SourceUnit:
        return SourceUnit(
            id=f"{self.origin.value}:{self.submission_id}",
            language=self.programming_language,
            text=self.source_code,
        )


@dataclass(frozen=True)
class OptimizationPair:
    before: SubmissionRecord
    after: SubmissionRecord
    improved_dimension: frozenset[str]  # subset of {"time", "memory"}
    changed_lines: int
    changed_fraction: float
    similarity: float

    @property
    def program_id(self) -> str:
        return f"{self.before.origin.value}:{self.before.submission_id}"


@dataclass
class IngestResult:
    records: list[SubmissionRecord]
    rejected: list[tuple[int, str]]  # (1-based line, reason)
    duplicates: int

    def as_dict(self) -> dict:
        return {
            "records": len(self.records),
            "rejected": [{"line": n, "reason": r} for n, r in self.rejected],
            "duplicates": self.duplicates,
        }


@dataclass
class MiningReport:
    """Counts of pairs surviving each filter stage, in order."""

    records: int = 0
    groups: int = 0
    consecutive_pairs: int = 0
    improving: int = 0
    distinct_text: int = 0
    within_line_limit: int = 0
    within_fraction_limit: int = 0
    above_similarity: int = 0

    def as_dict(self) -> dict:
        return dict(vars(self))


_LANGUAGES = {"C": Language.C, "CPP": Language.CPP, "C++": Language.CPP}
_ORIGINS = {o.value: o for o in Origin}
_REQUIRED = (
    "origin",
    "author",
    "contest_id",
    "submission_id",
    "creation_time",
    "problem",
    "programming_language",
    "cpu_time",
    "source_code",
)


def _parse_record(obj: dict, formatter: FormatterConfig | None, lossy: bool) -> SubmissionRecord:
    for key in _REQUIRED:
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    origin = _ORIGINS.get(str(obj["origin"]))
    if origin is None:
        raise ValueError(f"unknown origin {obj['origin']!r}")
    language = _LANGUAGES.get(str(obj["programming_language"]))
    if language is None:
        raise ValueError(f"unknown programming_language {obj['programming_language']!r}")
    cpu_time = int(obj["cpu_time"])
    if "memory_bytes" in obj:
        memory = int(obj["memory_bytes"]) // 1024
    elif "memory" in obj:
        memory = int(obj["memory"])
    else:
        raise ValueError("missing field 'memory'")
    if cpu_time < 0:
        raise ValueError(f"cpu_time must be >= 0, got {cpu_time}")
    if memory < 0:
        raise ValueError(f"memory must be >= 0, got {memory}")

    notes = ("lossy_utf8",) if lossy else ()
    raw = SourceUnit(id=str(obj["submission_id"]), language=language, text=str(obj["source_code"]))
    canonical = canonicalize(raw, formatter)
    return SubmissionRecord(
        origin=origin,
        author=str(obj["author"]),
        contest_id=str(obj["contest_id"]),
        submission_id=str(obj["submission_id"]),
        creation_time=int(obj["creation_time"]),
        problem=str(obj["problem"]),
        programming_language=language,
        cpu_time=cpu_time,
        memory=memory,
        source_code=canonical.text,
        notes=notes,
    )


def ingest(path: str | Path, formatter: FormatterConfig | None = None) -> IngestResult:
    """Read a submissions JSONL dump; bad lines are reported, not fatal.

    Sources are canonicalized here so every later stage sees canonical text.
    Non-UTF-8 bytes are decoded with replacement characters and the record is
    flagged in its notes. Duplicate (origin, submission_id) keep the first
    occurrence."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CorpusUnreadable(f"cannot read corpus {path}: {exc}") from exc

    records: list[SubmissionRecord] = []
    rejected: list[tuple[int, str]] = []
    seen: set[tuple[Origin, str]] = set()
    duplicates = 0
    for line_no, raw_line in enumerate(blob.split(b"\n"), start=1):
        if not raw_line.strip():
            continue
        lossy = False
        try:
            text = raw_line.decode("utf-8")
        except UnicodeDecodeError:
            text = raw_line.decode("utf-8", errors="replace")
            lossy = True
        try:
            obj = json.loads(text)
            if not isinstance(obj, dict):
                raise ValueError("record is not a JSON object")
            record = _parse_record(obj, formatter, lossy)
        except (ValueError, TypeError) as exc:
            rejected.append((line_no, f"RecordInvalid: {exc}"))
            continue
        key = (record.origin, record.submission_id)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        records.append(record)
    return IngestResult(records=records, rejected=rejected, duplicates=duplicates)


def count_changes(a: str, b: str) -> tuple[int, float]:
    """Changed lines (removed + added; a replaced line counts twice) and the
    fraction of the before program's lines that count represents."""
    ops = diff_lines(split_lines(a), split_lines(b))
    changed = sum(1 for op, _ in ops if op != "=")
    denom = max(len(split_lines(a)), 1)
    return changed, changed / denom


def _improvement(before: SubmissionRecord, after: SubmissionRecord) -> frozenset[str]:
    dims = set()
    if after.cpu_time < before.cpu_time:
        dims.add("time")
    if after.memory < before.memory:
        dims.add("memory")
    return frozenset(dims)


def mine_pairs(
    records: list[SubmissionRecord],
    max_changed_lines: int = MAX_CHANGED_LINES,
    max_changed_fraction: float = MAX_CHANGED_FRACTION,
    min_similarity: float = MIN_SIMILARITY,
) -> tuple[list[OptimizationPair], MiningReport]:
    """Group by (origin, author, problem), order chronologically, pair
    consecutive submissions, and keep pairs that improve and pass the
    small-edit filters. Input order does not matter."""
    report = MiningReport(records=len(records))
    groups: dict[tuple[Origin, str, str], list[SubmissionRecord]] = {}
    for rec in records:
        groups.setdefault((rec.origin, rec.author, rec.problem), []).append(rec)
    report.groups = len(groups)

    pairs: list[OptimizationPair] = []
    for key in sorted(groups, key=lambda k: (k[0].value, k[1], k[2])):
        members = sorted(groups[key], key=lambda r: (r.creation_time, r.submission_id))
        for before, after in zip(members, members[1:]):
            report.consecutive_pairs += 1
            improved = _improvement(before, after)
            if not improved:
                continue
            report.improving += 1
            if before.source_code == after.source_code:
                continue  # measurement moved, code did not
            report.distinct_text += 1
            changed, fraction = count_changes(before.source_code, after.source_code)
            if changed > max_changed_lines:
                continue
            report.within_line_limit += 1
            if fraction > max_changed_fraction:
                continue
            report.within_fraction_limit += 1
            score = similarity.ratio(before.source_code, after.source_code)
            if score < min_similarity:
                continue
            report.above_similarity += 1
            pairs.append(
                OptimizationPair(
                    before=before,
                    after=after,
                    improved_dimension=improved,
                    changed_lines=changed,
                    changed_fraction=fraction,
                    similarity=score,
                )
            )
    return pairs, report


@dataclass
class DatasetSplit:
    train: list[OptimizationPair]
    valid: list[OptimizationPair]
    test: list[OptimizationPair]
    dropped: int
    seed: int


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def split(
    pairs: list[OptimizationPair], seed: int, sizes: tuple[int, int, int]
) -> DatasetSplit:
    """Deterministic leakage-free split.

    Pairs sharing an (origin, author, problem) group or an exact before-text
    are kept in the same split. Components are shuffled by ``seed`` and
    first-fit assigned to train/valid/test; components that fit nowhere are
    dropped. Raises InsufficientPairs when a requested size cannot be met."""
    if sum(sizes) > len(pairs):
        raise InsufficientPairs(f"requested {sum(sizes)} of {len(pairs)} pairs")

    uf = _UnionFind(len(pairs))
    by_group: dict[tuple, int] = {}
    by_text: dict[str, int] = {}
    for i, pair in enumerate(pairs):
        gkey = (pair.before.origin, pair.before.author, pair.before.problem)
        if gkey in by_group:
            uf.union(i, by_group[gkey])
        else:
            by_group[gkey] = i
        tkey = pair.before.source_code
        if tkey in by_text:
            uf.union(i, by_text[tkey])
        else:
            by_text[tkey] = i

    components: dict[int, list[int]] = {}
    for i in range(len(pairs)):
        components.setdefault(uf.find(i), []).append(i)
    ordered = [components[root] for root in sorted(components)]
    random.Random(seed).shuffle(ordered)

    buckets: list[list[OptimizationPair]] = [[], [], []]
    remaining = list(sizes)
    dropped = 0
    for comp in ordered:
        for slot in range(3):
            if remaining[slot] >= len(comp):
                buckets[slot].extend(pairs[i] for i in comp)
                remaining[slot] -= len(comp)
                break
        else:
            dropped += len(comp)
    if any(remaining):
        raise InsufficientPairs(
            f"could not fill requested sizes {sizes}; short by {tuple(remaining)}"
        )
    return DatasetSplit(
        train=buckets[0], valid=buckets[1], test=buckets[2], dropped=dropped, seed=seed
    )


def default_sizes(n: int) -> tuple[int, int, int]:
    """Split sizes mirroring the reference corpus proportions."""
    if n < 3:
        return (n, 0, 0)
    total = sum(_SPLIT_WEIGHTS)
    valid = max(1, round(n * _SPLIT_WEIGHTS[1] / total))
    test = max(1, round(n * _SPLIT_WEIGHTS[2] / total))
    return (n - valid - test, valid, test)


def pair_record(pair: OptimizationPair) -> dict:
    """JSONL record for one pair, including the rendered diff target."""
    diff = render(synthesize(pair.before.unit(), pair.after.unit()))
    return {
        "program_id": pair.program_id,
        "origin": pair.before.origin.value,
        "author": pair.before.author,
        "contest_id": pair.before.contest_id,
        "problem": pair.before.problem,
        "programming_language": pair.before.programming_language.value,
        "before_submission_id": pair.before.submission_id,
        "after_submission_id": pair.after.submission_id,
        "before_creation_time": pair.before.creation_time,
        "after_creation_time": pair.after.creation_time,
        "before_cpu_time": pair.before.cpu_time,
        "after_cpu_time": pair.after.cpu_time,
        "before_memory": pair.before.memory,
        "after_memory": pair.after.memory,
        "improved_dimension": sorted(pair.improved_dimension),
        "changed_lines": pair.changed_lines,
        "changed_fraction": pair.changed_fraction,
        "similarity": pair.similarity,
        "before_text": pair.before.source_code,
        "after_text": pair.after.source_code,
        "diff": diff,
    }


def write_dataset(dataset: DatasetSplit, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, pairs in (("train", dataset.train), ("valid", dataset.valid), ("test", dataset.test)):
        with open(out / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for pair in pairs:
                fh.write(json.dumps(pair_record(pair), sort_keys=True) + "\n")
