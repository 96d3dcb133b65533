"""Random-input builders shared by the module tests and the acceptance suite."""

from __future__ import annotations

import random
import string

_LINE_ALPHA = string.ascii_letters + string.digits + " _(){};=<>+-*"


def random_line(rng: random.Random, width: tuple[int, int] = (0, 40)) -> str:
    return "".join(rng.choice(_LINE_ALPHA) for _ in range(rng.randint(*width)))


def random_program(rng: random.Random, lines: tuple[int, int] = (30, 120)) -> str:
    """Line-structured text; some lines repeat to exercise anchor ambiguity."""
    n = rng.randint(*lines)
    pool = [random_line(rng) for _ in range(max(4, n // 3))]
    out = [rng.choice(pool) if rng.random() < 0.4 else random_line(rng) for _ in range(n)]
    return "\n".join(out) + "\n"


def mutate_lines(rng: random.Random, text: str, max_edits: int = 20) -> str:
    """Apply 1..max_edits random line edits (replace/insert/delete); always
    returns something different from ``text``."""
    base = text.split("\n")[:-1]
    while True:
        lines = list(base)
        for _ in range(rng.randint(1, max_edits)):
            kind = rng.random()
            if kind < 0.4 and lines:
                lines[rng.randrange(len(lines))] = random_line(rng)
            elif kind < 0.7:
                lines.insert(rng.randint(0, len(lines)), random_line(rng))
            elif lines:
                del lines[rng.randrange(len(lines))]
        mutated = "\n".join(lines) + "\n" if lines else ""
        if mutated != text:
            return mutated


_IDENTIFIERS = ["x", "count", "total", "m", "buf", "acc", "tmp", "n"]
_STATEMENTS = [
    "int {id} = {num};",
    "{id} += {num};",
    "for (int i = 0; i < {num}; ++i) {id} += i;",
    "if ({id} > {num}) {id} = 0;",
    "printf(\"%d\", {id});",
    "std::string s{num} = {str};",
    "char c = {chr};",
    "const long long MOD = 1'000'000'007;",
    "auto r = R\"{delim}(raw // not a comment /* nope */ {num}){delim}\";",
]


def _string_literal(rng: random.Random) -> str:
    body = "".join(
        rng.choice(["a", "b", "//", "/*", "*/", "\\\"", "\\\\", " ", "\\n"])
        for _ in range(rng.randint(0, 6))
    )
    return f'"{body}"'


def _char_literal(rng: random.Random) -> str:
    return rng.choice(["'a'", "'\\''", "'\\\\'", "'\\n'", "'*'", "'/'"])


def c_like_source(rng: random.Random, max_lines: int = 40) -> str:
    """Source with comments, escaped strings, raw strings, digit separators
    and line continuations, for canonicalizer property tests."""
    lines = []
    for _ in range(rng.randint(1, max_lines)):
        stmt = rng.choice(_STATEMENTS).format(
            id=rng.choice(_IDENTIFIERS),
            num=rng.randint(0, 99),
            str=_string_literal(rng),
            chr=_char_literal(rng),
            delim=rng.choice(["", "x", "ab"]),
        )
        roll = rng.random()
        if roll < 0.25:
            stmt += " // trailing note"
        elif roll < 0.35:
            stmt += " /* block */"
        elif roll < 0.42:
            stmt += " // continued \\"
        elif roll < 0.5:
            stmt = "/* lead */ " + stmt
        if rng.random() < 0.1:
            lines.append("/* open")
            lines.append(" spans lines */ " + stmt)
            continue
        lines.append(stmt)
        if rng.random() < 0.15:
            lines.append("")
    return "\n".join(lines) + "\n"
