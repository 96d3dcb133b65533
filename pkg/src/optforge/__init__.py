"""optforge: a corpus-to-report toolchain for learned C/C++ source-code
optimization. Canonicalizes programs, mines optimization pairs from judge
submission dumps, encodes/decodes a headerless one-context-line diff
representation, applies predicted edits by greedy context matching, drives a
pluggable candidate generator, and scores results with %OPT / PI metrics."""

from .canonicalize import (
    FormatterConfig,
    Language,
    SourceUnit,
    canonicalize,
    normalize_format,
    strip_comments,
)
from .config import ToolConfig, load_config
from .curator import (
    OptimizationPair,
    Origin,
    SubmissionRecord,
    count_changes,
    ingest,
    mine_pairs,
    split,
)
from .diffrep import DiffScript, Hunk, MalformedDiff, Marker, parse, render, synthesize
from .evaluator import Baseline, EvalOutcome, Verdict, pi, score, sweep_similarity, time_block
from .generator import (
    SYSTEM_PROMPT,
    Candidate,
    CandidateKind,
    CandidateStatus,
    GeneratorBackend,
    gate,
    generate,
    ledger,
)
from .patcher import PatchResult, PatchStatus, apply
from .similarity import passes_threshold, ratio

__version__ = "0.1.0"
