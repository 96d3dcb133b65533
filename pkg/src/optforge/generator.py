"""Candidate generation and gating.

A pluggable backend produces N raw outputs per program: replay from a file,
an external command, or an OpenAI-style chat-completions endpoint. Every raw
output is then gated: diff outputs are parsed and applied, the patched (or
verbatim) program is similarity-checked against the original, and the result
is a Candidate with exactly one status. The ledger counts candidates by
status.
"""

from __future__ import annotations

import json
import logging
import os
import re
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import requests

from . import similarity
from .canonicalize import SourceUnit
from .diffrep import MalformedDiff, parse
from .patcher import apply

__all__ = [
    "SYSTEM_PROMPT",
    "BackendMode",
    "GeneratorBackend",
    "CandidateKind",
    "CandidateStatus",
    "Candidate",
    "BreakdownReport",
    "BackendUnavailable",
    "MissingReplayKey",
    "extract_code_block",
    "build_chat_request",
    "load_replay",
    "generate",
    "generate_corpus",
    "gate",
    "ledger",
]

log = logging.getLogger(__name__)

# Sent verbatim as the system message in http_chat mode.
SYSTEM_PROMPT = (
    "I want you to act as an experienced C and C++ developer and your task is "
    "to optimize my written C or C++ programs. I want you to optimize my "
    "program for running time and memory usage. I will type my C or C++ "
    "program and you will optimize the program and return the optimized "
    "program. I want you to only reply with the fixed program inside one "
    "unique code block, and nothing else. Do not write explanations."
)


class BackendMode(str, Enum):
    REPLAY = "replay"
    COMMAND = "command"
    HTTP_CHAT = "http_chat"


class BackendUnavailable(RuntimeError):
    pass


class MissingReplayKey(KeyError):
    pass


@dataclass
class GeneratorBackend:
    mode: BackendMode = BackendMode.REPLAY
    replay_path: str | None = None
    command: list[str] | None = None
    endpoint: str | None = None
    model: str = ""
    api_key_env: str | None = None  # env var NAME; the key never lives in files
    samples_per_program: int = 10
    request_params: dict = field(default_factory=dict)  # passed through opaquely
    retries: int = 3
    backoff: float = 0.5
    timeout: float = 60.0

    def __post_init__(self) -> None:
        self.mode = BackendMode(self.mode)
        if self.samples_per_program < 1:
            raise ValueError("samples_per_program must be >= 1")


class CandidateKind(str, Enum):
    DIFF_OUTPUT = "DiffOutput"
    FULL_PROGRAM = "FullProgram"


class CandidateStatus(str, Enum):
    MALFORMED = "Malformed"
    APPLY_FAILED = "ApplyFailed"
    REJECTED_SIMILARITY = "RejectedSimilarity"
    ELIGIBLE = "Eligible"


@dataclass(frozen=True)
class Candidate:
    program_id: str
    index: int
    raw_output: str
    kind: CandidateKind
    status: CandidateStatus
    patched_text: str | None = None
    similarity: float | None = None

    def as_dict(self) -> dict:
        return {
            "program_id": self.program_id,
            "index": self.index,
            "raw_output": self.raw_output,
            "kind": self.kind.value,
            "status": self.status.value,
            "patched_text": self.patched_text,
            "similarity": self.similarity,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> Candidate:
        return cls(
            program_id=obj["program_id"],
            index=int(obj["index"]),
            raw_output=obj["raw_output"],
            kind=CandidateKind(obj["kind"]),
            status=CandidateStatus(obj["status"]),
            patched_text=obj.get("patched_text"),
            similarity=obj.get("similarity"),
        )


_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def extract_code_block(text: str) -> tuple[str, bool]:
    """Content of the first fenced code block, or (whole text, False) when no
    fence is present."""
    match = _FENCE.search(text)
    if match:
        return match.group(1), True
    return text, False


def build_chat_request(unit: SourceUnit, backend: GeneratorBackend) -> dict:
    body = {
        "model": backend.model,
        "messages": [
            {"role": "system", "content": SYSTEM_PROMPT},
            {"role": "user", "content": unit.text},
        ],
        "n": backend.samples_per_program,
    }
    body.update(backend.request_params)
    return body


def load_replay(path: str | Path) -> dict[str, list[str]]:
    """Replay file: JSONL of {program_id, outputs: [text, ...]}."""
    book: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            book[obj["program_id"]] = list(obj["outputs"])
    return book


def _with_retries(call, backend: GeneratorBackend, what: str):
    last: Exception | None = None
    for attempt in range(backend.retries):
        try:
            return call()
        except Exception as exc:  # noqa: BLE001 - every backend failure retries
            last = exc
            if attempt + 1 < backend.retries:
                time.sleep(backend.backoff * (2**attempt))
    raise BackendUnavailable(f"{what} failed after {backend.retries} tries: {last}")


def _run_command_once(command: list[str], text: str, timeout: float) -> str:
    proc = subprocess.run(
        command, input=text, capture_output=True, text=True, timeout=timeout
    )
    if proc.returncode != 0:
        raise RuntimeError(f"exit {proc.returncode}: {proc.stderr.strip()[:200]}")
    return proc.stdout


def _http_chat(unit: SourceUnit, backend: GeneratorBackend) -> list[str]:
    if not backend.endpoint:
        raise BackendUnavailable("http_chat backend has no endpoint configured")
    headers = {"Content-Type": "application/json"}
    if backend.api_key_env:
        key = os.environ.get(backend.api_key_env)
        if not key:
            raise BackendUnavailable(f"environment variable {backend.api_key_env} is not set")
        headers["Authorization"] = f"Bearer {key}"
    body = build_chat_request(unit, backend)

    def call() -> list[str]:
        resp = requests.post(
            backend.endpoint, json=body, headers=headers, timeout=backend.timeout
        )
        if resp.status_code != 200:
            raise RuntimeError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        payload = resp.json()
        return [choice["message"]["content"] for choice in payload["choices"]]

    contents = _with_retries(call, backend, f"chat request for {unit.id}")
    outputs = []
    for content in contents:
        code, fenced = extract_code_block(content)
        if not fenced:
            log.warning("program %s: response had no code fence; using whole body", unit.id)
        outputs.append(code)
    return outputs


def _pad(outputs: list[str], want: int, program_id: str) -> list[str]:
    if len(outputs) < want:
        log.warning(
            "program %s: %d of %d outputs; padding with empty (failed) samples",
            program_id,
            len(outputs),
            want,
        )
        outputs = outputs + [""] * (want - len(outputs))
    return outputs[:want]


def generate(
    unit: SourceUnit,
    backend: GeneratorBackend,
    replay: dict[str, list[str]] | None = None,
) -> list[str]:
    """Exactly samples_per_program raw outputs for one canonical program."""
    want = backend.samples_per_program
    if backend.mode is BackendMode.REPLAY:
        book = replay if replay is not None else load_replay(backend.replay_path or "")
        if unit.id not in book:
            raise MissingReplayKey(unit.id)
        return _pad(list(book[unit.id]), want, unit.id)
    if backend.mode is BackendMode.COMMAND:
        if not backend.command:
            raise BackendUnavailable("command backend has no command configured")
        outputs = []
        for _ in range(want):
            outputs.append(
                _with_retries(
                    lambda: _run_command_once(backend.command, unit.text, backend.timeout),
                    backend,
                    f"command for {unit.id}",
                )
            )
        return outputs
    return _pad(_http_chat(unit, backend), want, unit.id)


def generate_corpus(
    units: list[SourceUnit],
    backend: GeneratorBackend,
    concurrency: int = 4,
) -> dict[str, list[str]]:
    """Run generate() over a corpus with bounded concurrency."""
    replay = None
    if backend.mode is BackendMode.REPLAY:
        replay = load_replay(backend.replay_path or "")
    results: dict[str, list[str]] = {}
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = {
            unit.id: pool.submit(generate, unit, backend, replay) for unit in units
        }
        for program_id, future in futures.items():
            results[program_id] = future.result()
    return results


def gate(
    unit: SourceUnit,
    raw: str,
    kind: CandidateKind = CandidateKind.DIFF_OUTPUT,
    threshold: float = 0.8,
    index: int = 0,
) -> Candidate:
    """Classify one raw output.

    Diff outputs go through parse -> apply -> similarity; any parse error is
    Malformed and any unmatched hunk is ApplyFailed. Full-program outputs are
    taken verbatim and only similarity-gated. Similarity is always computed
    as ratio(original, candidate)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold out of range: {threshold}")
    if kind is CandidateKind.DIFF_OUTPUT:
        try:
            script = parse(raw)
        except MalformedDiff:
            return Candidate(unit.id, index, raw, kind, CandidateStatus.MALFORMED)
        result = apply(script, unit)
        if not result.applied:
            return Candidate(unit.id, index, raw, kind, CandidateStatus.APPLY_FAILED)
        patched = result.output or ""
    else:
        patched = raw
    score = similarity.ratio(unit.text, patched)
    status = (
        CandidateStatus.ELIGIBLE
        if score >= threshold
        else CandidateStatus.REJECTED_SIMILARITY
    )
    return Candidate(unit.id, index, raw, kind, status, patched_text=patched, similarity=score)


@dataclass(frozen=True)
class BreakdownReport:
    malformed: int
    apply_failed: int
    rejected_similarity: int
    eligible: int

    @property
    def total(self) -> int:
        return self.malformed + self.apply_failed + self.rejected_similarity + self.eligible

    def as_dict(self) -> dict:
        return {
            "malformed": self.malformed,
            "apply_failed": self.apply_failed,
            "rejected_similarity": self.rejected_similarity,
            "eligible": self.eligible,
            "total": self.total,
        }


def ledger(candidates: list[Candidate]) -> BreakdownReport:
    """Counts by status; the four statuses partition the input."""
    counts = {status: 0 for status in CandidateStatus}
    for cand in candidates:
        counts[cand.status] += 1
    return BreakdownReport(
        malformed=counts[CandidateStatus.MALFORMED],
        apply_failed=counts[CandidateStatus.APPLY_FAILED],
        rejected_similarity=counts[CandidateStatus.REJECTED_SIMILARITY],
        eligible=counts[CandidateStatus.ELIGIBLE],
    )
