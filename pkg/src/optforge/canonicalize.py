"""Comment stripping and format normalization for C/C++ sources.

Everything downstream (pair mining, diff synthesis, similarity, candidate
gating) operates on the canonical form produced here, so these functions
must be deterministic and idempotent.
"""

from __future__ import annotations

import subprocess
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

__all__ = [
    "Language",
    "SourceUnit",
    "FormatterConfig",
    "ExternalFormatterFailed",
    "UnterminatedBlockCommentWarning",
    "strip_comments",
    "normalize_format",
    "canonicalize",
    "comment_spans",
    "string_literals",
]


class Language(str, Enum):
    C = "C"
    CPP = "CPP"


@dataclass(frozen=True)
class SourceUnit:
    """One program. ``text`` is raw on input, canonical after canonicalize()."""

    id: str
    language: Language
    text: str
    notes: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class FormatterConfig:
    """Optional external reformatter run between comment strip and builtin
    normalization. ``external_command`` is an argv list; the program text is
    piped on stdin and the formatted text read from stdout."""

    external_command: list[str] | None = None
    on_failure: str = "fallback_builtin"  # or "abort"

    def __post_init__(self) -> None:
        if self.on_failure not in ("fallback_builtin", "abort"):
            raise ValueError(f"unknown on_failure policy: {self.on_failure!r}")


class ExternalFormatterFailed(RuntimeError):
    """External formatter exited nonzero or could not be executed."""


class UnterminatedBlockCommentWarning(UserWarning):
    """Input ended inside a block comment; the scanner consumed to EOF."""


_HEXDIGITS = set("0123456789abcdefABCDEF")
_IDENT = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")
_RAW_PREFIXES = ("R", "uR", "UR", "LR", "u8R")


def _splice_end(src: str, i: int) -> int:
    """End of one line splice starting at the backslash at ``i``, or ``i``
    when there is none. Whitespace between the backslash and the newline is
    tolerated (matching preprocessor behavior), which also keeps scanning
    stable across the normalizer's trailing-whitespace trim."""
    n = len(src)
    if i >= n or src[i] != "\\":
        return i
    j = i + 1
    while j < n and src[j] in " \t\f\v":
        j += 1
    if j < n and src[j] == "\r":
        return j + 2 if j + 1 < n and src[j + 1] == "\n" else j + 1
    if j < n and src[j] == "\n":
        return j + 1
    return i


def _skip_splices(src: str, i: int) -> int:
    """Advance past any run of line splices starting at ``i``."""
    while True:
        j = _splice_end(src, i)
        if j == i:
            return i
        i = j


def _line_comment_end(src: str, i: int) -> int:
    # A trailing backslash splices the next physical line into the comment.
    n = len(src)
    while i < n:
        i = _skip_splices(src, i)
        if i >= n or src[i] in "\r\n":
            return i
        i += 1
    return n


def _block_comment_end(src: str, i: int) -> tuple[int, bool]:
    n = len(src)
    while i < n:
        if src[i] == "*":
            j = _skip_splices(src, i + 1)
            if j < n and src[j] == "/":
                return j + 1, True
        i += 1
    return n, False


def _quoted_end(src: str, i: int, quote: str) -> int:
    """End of an ordinary string/char literal whose opening quote precedes
    ``i``. An unescaped line end terminates scanning (lenient recovery for
    invalid code); the newline itself is not consumed."""
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\\":
            spliced = _splice_end(src, i)
            i = spliced if spliced != i else i + 2
            continue
        if c == quote:
            return i + 1
        if c in "\r\n":
            return i
        i += 1
    return n


def _is_raw_string_quote(src: str, i: int) -> bool:
    # src[i] is '"'. True when it opens R"..." with an optional encoding
    # prefix, and the prefix is a whole identifier (FOOBAR"..." is not raw).
    for p in _RAW_PREFIXES:
        start = i - len(p)
        if start >= 0 and src[start:i] == p:
            if start == 0 or src[start - 1] not in _IDENT:
                return True
    return False


def _raw_string_end(src: str, i: int) -> int:
    """End of a raw string literal opened by the quote at ``i``."""
    n = len(src)
    j = i + 1
    delim = []
    while j < n and src[j] != "(":
        if src[j] in ' )\\"\r\n' or len(delim) >= 16:
            # Not a well-formed raw delimiter; rescan as an ordinary string.
            return _quoted_end(src, i + 1, '"')
        delim.append(src[j])
        j += 1
    if j >= n:
        return n
    closer = ")" + "".join(delim) + '"'
    end = src.find(closer, j + 1)
    if end < 0:
        return n
    return end + len(closer)


def _scan(src: str) -> list[tuple[str, int, int]]:
    """Lexical spans as (kind, start, end) with kind in {code, line_comment,
    block_comment, string, char, raw_string}. Adjacent code is not merged."""
    spans: list[tuple[str, int, int]] = []
    n = len(src)
    i = 0
    code_start = 0

    def flush_code(upto: int) -> None:
        if upto > code_start:
            spans.append(("code", code_start, upto))

    while i < n:
        c = src[i]
        if c == "/":
            j = _skip_splices(src, i + 1)
            nxt = src[j] if j < n else ""
            if nxt == "/":
                end = _line_comment_end(src, j + 1)
                flush_code(i)
                spans.append(("line_comment", i, end))
                i = code_start = end
                continue
            if nxt == "*":
                end, terminated = _block_comment_end(src, j + 1)
                flush_code(i)
                spans.append(("block_comment", i, end))
                if not terminated:
                    warnings.warn(
                        "input ends inside a block comment",
                        UnterminatedBlockCommentWarning,
                        stacklevel=3,
                    )
                i = code_start = end
                continue
            i += 1
        elif c == '"':
            if _is_raw_string_quote(src, i):
                end = _raw_string_end(src, i)
                kind = "raw_string"
            else:
                end = _quoted_end(src, i + 1, '"')
                kind = "string"
            flush_code(i)
            spans.append((kind, i, end))
            i = code_start = end
        elif c == "'":
            # C++14 digit separator: 1'000'000 is one number, not a char.
            if (
                i > 0
                and src[i - 1] in _HEXDIGITS
                and i + 1 < n
                and src[i + 1] in _HEXDIGITS
            ):
                i += 1
                continue
            end = _quoted_end(src, i + 1, "'")
            flush_code(i)
            spans.append(("char", i, end))
            i = code_start = end
        else:
            i += 1
    flush_code(n)
    return spans


def strip_comments(src: str) -> str:
    """Replace every comment outside string/char/raw-string literals with a
    single space. Literal contents are preserved byte for byte."""
    out = []
    for kind, start, end in _scan(src):
        if kind in ("line_comment", "block_comment"):
            out.append(" ")
        else:
            out.append(src[start:end])
    return "".join(out)


def comment_spans(src: str) -> list[tuple[int, int]]:
    """(start, end) of every comment token found by the scanner."""
    return [(s, e) for kind, s, e in _scan(src) if kind.endswith("_comment")]


def string_literals(src: str) -> list[str]:
    """Full text of every string/char/raw-string token, in order."""
    return [src[s:e] for kind, s, e in _scan(src) if kind in ("string", "char", "raw_string")]


def normalize_format(src: str) -> str:
    """Builtin whitespace normalizer: CRLF to LF, tabs to two spaces, no
    trailing whitespace, blank-line runs collapsed to one, exactly one final
    newline. A file with no non-blank lines normalizes to the empty string."""
    text = src.replace("\r\n", "\n").replace("\r", "\n")
    text = text.replace("\t", "  ")
    lines = [ln.rstrip() for ln in text.split("\n")]

    collapsed: list[str] = []
    for ln in lines:
        if ln == "" and collapsed and collapsed[-1] == "":
            continue
        collapsed.append(ln)
    while collapsed and collapsed[-1] == "":
        collapsed.pop()
    if not collapsed:
        return ""
    return "\n".join(collapsed) + "\n"


def _run_external(command: list[str], text: str) -> str:
    try:
        proc = subprocess.run(
            command,
            input=text,
            capture_output=True,
            text=True,
            check=False,
        )
    except OSError as exc:
        raise ExternalFormatterFailed(f"cannot run {command!r}: {exc}") from exc
    if proc.returncode != 0:
        raise ExternalFormatterFailed(
            f"{command!r} exited {proc.returncode}: {proc.stderr.strip()[:200]}"
        )
    return proc.stdout


def canonicalize(unit: SourceUnit, formatter: FormatterConfig | None = None) -> SourceUnit:
    """Strip comments, optionally run the external formatter, then apply the
    builtin normalizer. Idempotent with the builtin formatter."""
    text = strip_comments(unit.text)
    if formatter is not None and formatter.external_command:
        try:
            text = _run_external(formatter.external_command, text)
        except ExternalFormatterFailed:
            if formatter.on_failure == "abort":
                raise
    return replace(unit, text=normalize_format(text))
