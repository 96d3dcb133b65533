"""%OPT and PI metrics over judge outcomes.

A program counts as optimized on a dimension when its best accepted candidate
improves the baseline by at least the PI threshold (default 1.2, to absorb
measurement noise). Running time on Codeforces is quantized into 16 ms blocks
before the ratio is taken, because the judge reports times at that
granularity; memory is never blocked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .curator import Origin
from .generator import Candidate, CandidateStatus

__all__ = [
    "Verdict",
    "EvalOutcome",
    "Baseline",
    "DimensionMetrics",
    "MetricsReport",
    "UnknownProgram",
    "DanglingOutcome",
    "time_block",
    "pi",
    "score",
    "sweep_similarity",
]

DIMENSIONS = ("time", "memory")
PI_THRESHOLD = 1.2
PI_CAP = 100.0  # ceiling applied to infinite/huge ratios in mean aggregation
TIME_BLOCK_MS = 16


class Verdict(str, Enum):
    ACCEPTED = "Accepted"
    COMPILE_ERROR = "CompileError"
    WRONG_ANSWER = "WrongAnswer"
    TIME_LIMIT = "TimeLimit"
    MEMORY_LIMIT = "MemoryLimit"
    RUNTIME_ERROR = "RuntimeError"


class UnknownProgram(KeyError):
    pass


class DanglingOutcome(ValueError):
    pass


@dataclass(frozen=True)
class EvalOutcome:
    program_id: str
    candidate_index: int
    verdict: Verdict
    cpu_time: int
    memory: int
    origin: Origin

    @classmethod
    def from_dict(cls, obj: dict) -> EvalOutcome:
        return cls(
            program_id=obj["program_id"],
            candidate_index=int(obj["candidate_index"]),
            verdict=Verdict(obj["verdict"]),
            cpu_time=int(obj["cpu_time"]),
            memory=int(obj["memory"]),
            origin=Origin(obj["origin"]),
        )


@dataclass(frozen=True)
class Baseline:
    """Original measurements a candidate must beat. Taken from the submission
    record, never re-measured."""

    program_id: str
    origin: Origin
    cpu_time: int
    memory: int

    @classmethod
    def from_dict(cls, obj: dict) -> Baseline:
        return cls(
            program_id=obj["program_id"],
            origin=Origin(obj["origin"]),
            cpu_time=int(obj.get("cpu_time", obj.get("before_cpu_time", 0))),
            memory=int(obj.get("memory", obj.get("before_memory", 0))),
        )


def time_block(t_ms: int) -> int:
    """16 ms block number: 0..15 is block 1, 16..31 is block 2, and so on."""
    if t_ms < 0:
        raise ValueError(f"negative time: {t_ms}")
    return t_ms // TIME_BLOCK_MS + 1


def pi(old_val: int, new_val: int, dimension: str, origin: Origin) -> float:
    """Performance improvement old/new.

    Codeforces running times are compared by block number. A new measurement
    of 0 against a positive old one gives inf (capped later when averaged);
    0 against 0 is 1.0."""
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension: {dimension}")
    if old_val < 0 or new_val < 0:
        raise ValueError("measurements must be >= 0")
    if dimension == "time" and origin is Origin.CODEFORCES:
        return time_block(old_val) / time_block(new_val)
    if old_val == 0 and new_val == 0:
        return 1.0
    if new_val == 0:
        return math.inf
    return old_val / new_val


@dataclass
class ProgramBest:
    program_id: str
    origin: Origin
    best_pi: dict[str, float | None]
    best_candidate: dict[str, int | None]


@dataclass
class DimensionMetrics:
    opt_count: int
    total: int
    opt_percent: float  # 0..100
    mean_pi: float  # over optimized programs only; 0.0 when none

    def as_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class MetricsReport:
    overall: dict[str, DimensionMetrics]
    by_origin: dict[str, dict[str, DimensionMetrics]]
    programs: list[ProgramBest]
    pi_threshold: float

    def as_dict(self) -> dict:
        return {
            "pi_threshold": self.pi_threshold,
            "overall": {d: m.as_dict() for d, m in self.overall.items()},
            "by_origin": {
                o: {d: m.as_dict() for d, m in dims.items()}
                for o, dims in self.by_origin.items()
            },
            "programs": [
                {
                    "program_id": p.program_id,
                    "origin": p.origin.value,
                    "best_pi": p.best_pi,
                    "best_candidate": p.best_candidate,
                }
                for p in self.programs
            ],
        }


def _eligible_keys(candidates: list[Candidate]) -> set[tuple[str, int]]:
    return {
        (c.program_id, c.index)
        for c in candidates
        if c.status is CandidateStatus.ELIGIBLE
    }


def _check_outcomes(
    outcomes: list[EvalOutcome],
    known: set[tuple[str, int]],
    baselines: dict[str, Baseline],
) -> None:
    for out in outcomes:
        base = baselines.get(out.program_id)
        if base is None:
            raise UnknownProgram(out.program_id)
        if (out.program_id, out.candidate_index) not in known:
            raise DanglingOutcome(
                f"{out.program_id}#{out.candidate_index} has no eligible candidate"
            )
        if out.origin is not base.origin:
            raise DanglingOutcome(
                f"{out.program_id}: outcome origin {out.origin.value} != "
                f"baseline origin {base.origin.value}"
            )


def _best_per_program(
    outcomes: list[EvalOutcome],
    allowed: set[tuple[str, int]],
    baselines: dict[str, Baseline],
) -> list[ProgramBest]:
    best: dict[str, ProgramBest] = {
        pid: ProgramBest(
            program_id=pid,
            origin=base.origin,
            best_pi={d: None for d in DIMENSIONS},
            best_candidate={d: None for d in DIMENSIONS},
        )
        for pid, base in baselines.items()
    }
    for out in outcomes:
        if out.verdict is not Verdict.ACCEPTED:
            continue
        if (out.program_id, out.candidate_index) not in allowed:
            continue
        base = baselines[out.program_id]
        row = best[out.program_id]
        for dim, old, new in (
            ("time", base.cpu_time, out.cpu_time),
            ("memory", base.memory, out.memory),
        ):
            value = pi(old, new, dim, out.origin)
            current = row.best_pi[dim]
            # ties prefer the lowest candidate index, for order independence
            if (
                current is None
                or value > current
                or (value == current and out.candidate_index < row.best_candidate[dim])
            ):
                row.best_pi[dim] = value
                row.best_candidate[dim] = out.candidate_index
    return [best[pid] for pid in sorted(best)]


def _aggregate(
    programs: list[ProgramBest], pi_threshold: float, pi_cap: float
) -> dict[str, DimensionMetrics]:
    metrics = {}
    for dim in DIMENSIONS:
        optimized = [
            p.best_pi[dim]
            for p in programs
            if p.best_pi[dim] is not None and p.best_pi[dim] >= pi_threshold
        ]
        total = len(programs)
        count = len(optimized)
        mean = (
            sum(min(v, pi_cap) for v in optimized) / count if count else 0.0
        )
        metrics[dim] = DimensionMetrics(
            opt_count=count,
            total=total,
            opt_percent=100.0 * count / total if total else 0.0,
            mean_pi=mean,
        )
    return metrics


def score(
    outcomes: list[EvalOutcome],
    candidates: list[Candidate],
    baselines: dict[str, Baseline],
    pi_threshold: float = PI_THRESHOLD,
    pi_cap: float = PI_CAP,
) -> MetricsReport:
    """Aggregate judge outcomes into %OPT and mean PI, overall and per origin.

    Only accepted outcomes of eligible candidates count; a program with none
    counts as not optimized. mean_pi averages best PI over the optimized
    programs only, with infinite ratios capped at ``pi_cap``."""
    eligible = _eligible_keys(candidates)
    _check_outcomes(outcomes, eligible, baselines)
    programs = _best_per_program(outcomes, eligible, baselines)
    by_origin: dict[str, dict[str, DimensionMetrics]] = {}
    for origin in sorted({p.origin for p in programs}, key=lambda o: o.value):
        subset = [p for p in programs if p.origin is origin]
        by_origin[origin.value] = _aggregate(subset, pi_threshold, pi_cap)
    return MetricsReport(
        overall=_aggregate(programs, pi_threshold, pi_cap),
        by_origin=by_origin,
        programs=programs,
        pi_threshold=pi_threshold,
    )


def sweep_similarity(
    outcomes: list[EvalOutcome],
    candidates: list[Candidate],
    baselines: dict[str, Baseline],
    thresholds: list[float],
    pi_threshold: float = PI_THRESHOLD,
    pi_cap: float = PI_CAP,
) -> list[tuple[float, float, float]]:
    """%OPT at each similarity threshold, as (threshold, time, memory) rows.

    The similarity gate is re-run per threshold over every candidate that
    reached the similarity stage, so the curve is monotone non-increasing."""
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    if thresholds and not (0.0 <= thresholds[0] and thresholds[-1] <= 1.0):
        raise ValueError("thresholds must lie in [0, 1]")

    pool = [c for c in candidates if c.similarity is not None]
    pool_keys = {(c.program_id, c.index) for c in pool}
    _check_outcomes(outcomes, pool_keys, baselines)
    curve = []
    for threshold in thresholds:
        allowed = {
            (c.program_id, c.index) for c in pool if c.similarity >= threshold
        }
        usable = [
            o for o in outcomes if (o.program_id, o.candidate_index) in allowed
        ]
        programs = _best_per_program(usable, allowed, baselines)
        metrics = _aggregate(programs, pi_threshold, pi_cap)
        curve.append(
            (threshold, metrics["time"].opt_percent, metrics["memory"].opt_percent)
        )
    return curve
