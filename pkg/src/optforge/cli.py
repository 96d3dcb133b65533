"""optforge command line.

Subcommands compose over files: canonicalize, similarity, diff, apply,
curate, generate, gate, score, sweep, and the monolithic evaluate that runs
canonicalize -> generate -> gate -> score in one go. Exit status is 0 on
success, 1 on any fatal error, 2 on usage errors. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import yaml

from . import curator, evaluator, generator
from .canonicalize import ExternalFormatterFailed, Language, SourceUnit, canonicalize
from .config import ToolConfig, load_config
from .curator import CorpusUnreadable, InsufficientPairs
from .diffrep import IdenticalInputs, MalformedDiff, parse, render, synthesize
from .evaluator import Baseline, DanglingOutcome, EvalOutcome, UnknownProgram
from .generator import (
    BackendMode,
    BackendUnavailable,
    Candidate,
    CandidateKind,
    GeneratorBackend,
    MissingReplayKey,
)
from .jsonlio import read_jsonl, write_json, write_jsonl
from .patcher import apply as apply_patch
from .similarity import InputTooLarge, ratio

_FATAL = (
    BackendUnavailable,
    ExternalFormatterFailed,
    MissingReplayKey,
    UnknownProgram,
    OSError,
    ValueError,  # covers MalformedDiff, IdenticalInputs, InsufficientPairs, ...
    yaml.YAMLError,
)


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _unit_from_row(row: dict) -> SourceUnit:
    language = Language(row.get("language", "CPP"))
    return SourceUnit(id=str(row["id"]), language=language, text=row["text"])


def _load_units(path: str) -> list[SourceUnit]:
    return [_unit_from_row(row) for row in read_jsonl(path)]


def _load_candidates(path: str) -> list[Candidate]:
    return [Candidate.from_dict(row) for row in read_jsonl(path)]


def _load_outcomes(path: str) -> list[EvalOutcome]:
    return [EvalOutcome.from_dict(row) for row in read_jsonl(path)]


def _load_baselines(path: str) -> dict[str, Baseline]:
    baselines = {}
    for row in read_jsonl(path):
        base = Baseline.from_dict(row)
        baselines[base.program_id] = base
    return baselines


def _backend_from_args(args, config: ToolConfig) -> GeneratorBackend:
    backend = config.backend
    if args.backend:
        backend.mode = BackendMode(args.backend)
    if getattr(args, "replay", None):
        backend.replay_path = args.replay
    if getattr(args, "command", None):
        backend.command = args.command
    if getattr(args, "endpoint", None):
        backend.endpoint = args.endpoint
    if getattr(args, "model", None):
        backend.model = args.model
    if args.samples is not None:
        backend.samples_per_program = args.samples
    else:
        backend.samples_per_program = config.samples_per_program
    return backend


def cmd_canonicalize(args, config: ToolConfig) -> int:
    if args.jsonl:
        if args.infile:
            rows = read_jsonl(args.infile)
        else:
            rows = [json.loads(line) for line in sys.stdin if line.strip()]
        out_rows = []
        for row in rows:
            unit = canonicalize(_unit_from_row(row), config.formatter)
            out_rows.append({"id": unit.id, "language": unit.language.value, "text": unit.text})
        if args.out:
            write_jsonl(args.out, out_rows)
        else:
            for row in out_rows:
                sys.stdout.write(json.dumps(row, sort_keys=True) + "\n")
        return 0
    text = _read_text(args.infile)
    unit = SourceUnit(id=args.infile or "<stdin>", language=Language(args.language), text=text)
    _write_text(args.out, canonicalize(unit, config.formatter).text)
    return 0


def cmd_similarity(args, config: ToolConfig) -> int:
    a = _read_text(args.a)
    b = _read_text(args.b)
    print(f"{ratio(a, b):.6f}")
    return 0


def cmd_diff(args, config: ToolConfig) -> int:
    before = canonicalize(
        SourceUnit("before", Language.CPP, _read_text(args.before)), config.formatter
    )
    after = canonicalize(
        SourceUnit("after", Language.CPP, _read_text(args.after)), config.formatter
    )
    _write_text(args.out, render(synthesize(before, after)))
    return 0


def cmd_apply(args, config: ToolConfig) -> int:
    script = parse(_read_text(args.diff))
    original = canonicalize(
        SourceUnit("original", Language.CPP, _read_text(args.original)), config.formatter
    )
    result = apply_patch(script, original)
    if not result.applied:
        print(f"error: hunk {result.failed_hunk} did not match the original", file=sys.stderr)
        return 1
    _write_text(args.out, result.output or "")
    return 0


def cmd_curate(args, config: ToolConfig) -> int:
    ingest_result = curator.ingest(args.infile, config.formatter)
    pairs, mining = curator.mine_pairs(
        ingest_result.records,
        max_changed_lines=args.max_changed_lines
        if args.max_changed_lines is not None
        else config.max_changed_lines,
        max_changed_fraction=args.max_changed_fraction
        if args.max_changed_fraction is not None
        else config.max_changed_fraction,
        min_similarity=args.threshold if args.threshold is not None else config.similarity_threshold,
    )
    seed = args.seed if args.seed is not None else config.seed
    sizes = _parse_sizes(args.sizes) if args.sizes else curator.default_sizes(len(pairs))
    dataset = curator.split(pairs, seed, sizes)
    curator.write_dataset(dataset, args.out)
    write_json(
        Path(args.out) / "mining_report.json",
        {
            "ingest": ingest_result.as_dict(),
            "funnel": mining.as_dict(),
            "split": {
                "seed": seed,
                "sizes": list(sizes),
                "train": len(dataset.train),
                "valid": len(dataset.valid),
                "test": len(dataset.test),
                "dropped": dataset.dropped,
            },
        },
    )
    print(
        f"curated {mining.above_similarity} pairs from {mining.records} records "
        f"(train={len(dataset.train)} valid={len(dataset.valid)} test={len(dataset.test)})",
        file=sys.stderr,
    )
    return 0


def _parse_sizes(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3 or any(p < 0 for p in parts):
        raise ValueError("--sizes expects three non-negative integers: train,valid,test")
    return (parts[0], parts[1], parts[2])


def cmd_generate(args, config: ToolConfig) -> int:
    units = _load_units(args.infile)
    backend = _backend_from_args(args, config)
    concurrency = args.concurrency if args.concurrency is not None else config.concurrency
    outputs = generator.generate_corpus(units, backend, concurrency)
    rows = [
        {"program_id": unit.id, "outputs": outputs[unit.id]} for unit in units
    ]
    write_jsonl(args.out, rows)
    print(f"generated {sum(len(r['outputs']) for r in rows)} outputs", file=sys.stderr)
    return 0


def cmd_gate(args, config: ToolConfig) -> int:
    units = {unit.id: unit for unit in _load_units(args.units)}
    threshold = args.threshold if args.threshold is not None else config.similarity_threshold
    kind = CandidateKind.DIFF_OUTPUT if args.kind == "diff" else CandidateKind.FULL_PROGRAM
    candidates = []
    for row in read_jsonl(args.raw):
        unit = units.get(row["program_id"])
        if unit is None:
            raise UnknownProgram(row["program_id"])
        for index, raw in enumerate(row["outputs"]):
            candidates.append(generator.gate(unit, raw, kind, threshold, index=index))
    write_jsonl(args.out, [c.as_dict() for c in candidates])
    breakdown = generator.ledger(candidates)
    if args.ledger:
        write_json(args.ledger, breakdown.as_dict())
    print(
        "gate: {malformed} malformed, {apply_failed} apply-failed, "
        "{rejected_similarity} rejected, {eligible} eligible of {total}".format(
            **breakdown.as_dict()
        ),
        file=sys.stderr,
    )
    return 0


def cmd_score(args, config: ToolConfig) -> int:
    report = evaluator.score(
        _load_outcomes(args.outcomes),
        _load_candidates(args.candidates),
        _load_baselines(args.baselines),
        pi_threshold=args.pi_threshold if args.pi_threshold is not None else config.pi_threshold,
        pi_cap=config.pi_cap,
    )
    write_json(args.out, report.as_dict())
    for dim, metrics in report.overall.items():
        print(
            f"{dim}: %OPT {metrics.opt_percent:.1f}% ({metrics.opt_count}) "
            f"mean PI {metrics.mean_pi:.2f}",
            file=sys.stderr,
        )
    return 0


def cmd_sweep(args, config: ToolConfig) -> int:
    thresholds = [float(t) for t in args.thresholds.split(",")]
    curve = evaluator.sweep_similarity(
        _load_outcomes(args.outcomes),
        _load_candidates(args.candidates),
        _load_baselines(args.baselines),
        thresholds,
        pi_threshold=args.pi_threshold if args.pi_threshold is not None else config.pi_threshold,
        pi_cap=config.pi_cap,
    )
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "opt_percent_time", "opt_percent_memory"])
        for threshold, opt_time, opt_memory in curve:
            writer.writerow([threshold, opt_time, opt_memory])
    return 0


def cmd_evaluate(args, config: ToolConfig) -> int:
    """Monolithic canonicalize -> generate -> gate -> score."""
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    units = [canonicalize(u, config.formatter) for u in _load_units(args.units)]
    backend = _backend_from_args(args, config)
    concurrency = args.concurrency if args.concurrency is not None else config.concurrency
    outputs = generator.generate_corpus(units, backend, concurrency)
    threshold = args.threshold if args.threshold is not None else config.similarity_threshold
    kind = CandidateKind.DIFF_OUTPUT if args.kind == "diff" else CandidateKind.FULL_PROGRAM
    candidates = []
    for unit in units:
        for index, raw in enumerate(outputs[unit.id]):
            candidates.append(generator.gate(unit, raw, kind, threshold, index=index))
    write_jsonl(out_dir / "candidates.jsonl", [c.as_dict() for c in candidates])
    write_json(out_dir / "ledger.json", generator.ledger(candidates).as_dict())
    report = evaluator.score(
        _load_outcomes(args.outcomes),
        candidates,
        _load_baselines(args.baselines),
        pi_threshold=args.pi_threshold if args.pi_threshold is not None else config.pi_threshold,
        pi_cap=config.pi_cap,
    )
    write_json(out_dir / "metrics.json", report.as_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (YAML); or set OPTFORGE_CONFIG")

    ap = argparse.ArgumentParser(prog="optforge", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("canonicalize", parents=[common], help="strip comments and normalize format")
    p.add_argument("--in", dest="infile", help="source file or units JSONL (default stdin)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--jsonl", action="store_true", help="treat input as units JSONL")
    p.add_argument("--language", default="CPP", choices=["C", "CPP"])
    p.set_defaults(fn=cmd_canonicalize)

    p = sub.add_parser("similarity", parents=[common], help="gestalt similarity of two files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(fn=cmd_similarity)

    p = sub.add_parser("diff", parents=[common], help="synthesize a diff script")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_diff)

    p = sub.add_parser("apply", parents=[common], help="apply a diff script")
    p.add_argument("--diff", required=True)
    p.add_argument("--original", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_apply)

    p = sub.add_parser("curate", parents=[common], help="mine and split optimization pairs")
    p.add_argument("--in", dest="infile", required=True, help="submissions JSONL")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--sizes", help="train,valid,test sizes (default: corpus proportions)")
    p.add_argument("--threshold", type=float, help="similarity filter (default 0.8)")
    p.add_argument("--max-changed-lines", type=int)
    p.add_argument("--max-changed-fraction", type=float)
    p.set_defaults(fn=cmd_curate)

    def add_backend_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--backend", choices=[m.value for m in BackendMode])
        p.add_argument("--replay", help="replay JSONL for --backend replay")
        p.add_argument("--command", nargs="+", help="argv for --backend command")
        p.add_argument("--endpoint", help="chat-completions URL for --backend http_chat")
        p.add_argument("--model", help="model name for --backend http_chat")
        p.add_argument("--samples", type=int, help="candidates per program (default 10)")
        p.add_argument("--concurrency", type=int)

    p = sub.add_parser("generate", parents=[common], help="produce raw candidates per program")
    p.add_argument("--in", dest="infile", required=True, help="canonical units JSONL")
    p.add_argument("--out", required=True, help="raw outputs JSONL")
    add_backend_flags(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("gate", parents=[common], help="parse/apply/similarity-gate raw outputs")
    p.add_argument("--raw", required=True, help="raw outputs JSONL")
    p.add_argument("--units", required=True, help="canonical units JSONL")
    p.add_argument("--kind", choices=["diff", "full"], default="diff")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True, help="candidates JSONL")
    p.add_argument("--ledger", help="write the status breakdown JSON here")
    p.set_defaults(fn=cmd_gate)

    p = sub.add_parser("score", parents=[common], help="compute %%OPT / PI metrics")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--baselines", required=True)
    p.add_argument("--pi-threshold", type=float)
    p.add_argument("--out", required=True, help="metrics JSON")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("sweep", parents=[common], help="%%OPT at several similarity thresholds")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--baselines", required=True)
    p.add_argument("--thresholds", required=True, help="comma-separated ascending values")
    p.add_argument("--pi-threshold", type=float)
    p.add_argument("--out", required=True, help="sweep CSV")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("evaluate", parents=[common], help="canonicalize+generate+gate+score")
    p.add_argument("--units", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--baselines", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--kind", choices=["diff", "full"], default="diff")
    p.add_argument("--threshold", type=float)
    p.add_argument("--pi-threshold", type=float)
    add_backend_flags(p)
    p.set_defaults(fn=cmd_evaluate)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return args.fn(args, config)
    except _FATAL as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
