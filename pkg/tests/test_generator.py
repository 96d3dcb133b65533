from __future__ import annotations

import json
import logging
import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from optforge.canonicalize import Language, SourceUnit
from optforge.diffrep import render, synthesize
from optforge.generator import (
    SYSTEM_PROMPT,
    BackendMode,
    BackendUnavailable,
    CandidateKind,
    CandidateStatus,
    GeneratorBackend,
    MissingReplayKey,
    build_chat_request,
    extract_code_block,
    gate,
    generate,
    generate_corpus,
    ledger,
    load_replay,
)


def unit(text: str, uid: str = "u") -> SourceUnit:
    return SourceUnit(uid, Language.CPP, text)


# ------------------------------------------------------------------ prompt


def test_system_prompt_matches_golden_file(prompt_golden):
    assert SYSTEM_PROMPT == prompt_golden


def test_chat_request_carries_prompt_and_program(listing1_unit):
    backend = GeneratorBackend(mode="http_chat", model="gpt-4", samples_per_program=10)
    body = build_chat_request(listing1_unit, backend)
    assert body["messages"][0] == {"role": "system", "content": SYSTEM_PROMPT}
    assert body["messages"][1] == {"role": "user", "content": listing1_unit.text}
    assert body["n"] == 10
    assert body["model"] == "gpt-4"


def test_request_params_passed_through_opaquely(listing1_unit):
    backend = GeneratorBackend(
        mode="http_chat", request_params={"temperature": 0.8, "top_p": 0.9}
    )
    body = build_chat_request(listing1_unit, backend)
    assert body["temperature"] == 0.8
    assert body["top_p"] == 0.9


# ------------------------------------------------------------------ fences


def test_extract_single_fenced_block():
    assert extract_code_block("```cpp\nint main(){}\n```") == ("int main(){}\n", True)


def test_extract_fence_without_language():
    assert extract_code_block("```\nx\n```") == ("x\n", True)


def test_extract_first_of_multiple_fences():
    text = "```cpp\nfirst\n```\nand\n```cpp\nsecond\n```"
    assert extract_code_block(text) == ("first\n", True)


def test_no_fence_uses_whole_body_and_reports_it():
    body = "int main() { return 1; }"
    assert extract_code_block(body) == (body, False)


# ------------------------------------------------------------------ replay


def test_replay_returns_outputs_in_order(tmp_path):
    path = tmp_path / "replay.jsonl"
    path.write_text(json.dumps({"program_id": "p", "outputs": ["one", "two", "three"]}) + "\n")
    backend = GeneratorBackend(mode="replay", replay_path=str(path), samples_per_program=3)
    assert generate(unit("x\n", "p"), backend) == ["one", "two", "three"]


def test_replay_missing_key(tmp_path):
    path = tmp_path / "replay.jsonl"
    path.write_text(json.dumps({"program_id": "other", "outputs": []}) + "\n")
    backend = GeneratorBackend(mode="replay", replay_path=str(path), samples_per_program=1)
    with pytest.raises(MissingReplayKey):
        generate(unit("x\n", "p"), backend)


def test_replay_short_read_padded_with_empty_failures(tmp_path, caplog):
    path = tmp_path / "replay.jsonl"
    path.write_text(json.dumps({"program_id": "p", "outputs": ["only"]}) + "\n")
    backend = GeneratorBackend(mode="replay", replay_path=str(path), samples_per_program=3)
    with caplog.at_level(logging.WARNING):
        outputs = generate(unit("x\n", "p"), backend)
    assert outputs == ["only", "", ""]
    assert "padding" in caplog.text


def test_replay_long_read_truncated(tmp_path):
    path = tmp_path / "replay.jsonl"
    path.write_text(json.dumps({"program_id": "p", "outputs": ["a", "b", "c"]}) + "\n")
    backend = GeneratorBackend(mode="replay", replay_path=str(path), samples_per_program=2)
    assert generate(unit("x\n", "p"), backend) == ["a", "b"]


def test_load_replay_roundtrip(tmp_path):
    path = tmp_path / "replay.jsonl"
    path.write_text(
        json.dumps({"program_id": "a", "outputs": ["1"]})
        + "\n"
        + json.dumps({"program_id": "b", "outputs": ["2", "3"]})
        + "\n"
    )
    assert load_replay(path) == {"a": ["1"], "b": ["2", "3"]}


# ----------------------------------------------------------------- command


def test_command_backend_pipes_program_text():
    backend = GeneratorBackend(
        mode="command",
        command=[sys.executable, "-c", "import sys; sys.stdout.write(sys.stdin.read().upper())"],
        samples_per_program=2,
        retries=1,
        backoff=0.0,
    )
    assert generate(unit("abc\n"), backend) == ["ABC\n", "ABC\n"]


def test_command_backend_failure_after_retries():
    backend = GeneratorBackend(
        mode="command",
        command=[sys.executable, "-c", "raise SystemExit(9)"],
        samples_per_program=1,
        retries=2,
        backoff=0.0,
    )
    with pytest.raises(BackendUnavailable):
        generate(unit("abc\n"), backend)


def test_samples_must_be_positive():
    with pytest.raises(ValueError):
        GeneratorBackend(samples_per_program=0)


# --------------------------------------------------------------- http_chat


class _ChatHandler(BaseHTTPRequestHandler):
    requests: list[dict] = []
    responses: list[tuple[int, dict]] = []

    def do_POST(self):  # noqa: N802 - http.server API
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        type(self).requests.append(
            {"body": body, "auth": self.headers.get("Authorization")}
        )
        status, payload = type(self).responses.pop(0)
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    _ChatHandler.requests = []
    _ChatHandler.responses = []
    server = HTTPServer(("127.0.0.1", 0), _ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions", _ChatHandler
    server.shutdown()


def _choices(*contents: str) -> dict:
    return {"choices": [{"message": {"content": c}} for c in contents]}


def test_http_chat_round_trip(chat_server, monkeypatch, prompt_golden):
    endpoint, handler = chat_server
    handler.responses.append(
        (200, _choices("```cpp\nint main(){}\n```", "no fence here"))
    )
    monkeypatch.setenv("TEST_CHAT_KEY", "sk-secret")
    backend = GeneratorBackend(
        mode="http_chat",
        endpoint=endpoint,
        model="tiny",
        api_key_env="TEST_CHAT_KEY",
        samples_per_program=2,
        retries=1,
        backoff=0.0,
    )
    outputs = generate(unit("int x;\n", "prog"), backend)
    assert outputs == ["int main(){}\n", "no fence here"]
    recorded = handler.requests[0]
    # golden-file check: the system prompt goes out byte for byte
    assert recorded["body"]["messages"][0]["content"] == prompt_golden
    assert recorded["body"]["n"] == 2
    assert recorded["auth"] == "Bearer sk-secret"


def test_http_chat_no_fence_is_flagged(chat_server, caplog):
    endpoint, handler = chat_server
    handler.responses.append((200, _choices("plain body")))
    backend = GeneratorBackend(
        mode="http_chat", endpoint=endpoint, samples_per_program=1, retries=1, backoff=0.0
    )
    with caplog.at_level(logging.WARNING):
        outputs = generate(unit("int x;\n", "prog"), backend)
    assert outputs == ["plain body"]
    assert "no code fence" in caplog.text


def test_http_chat_retries_after_server_error(chat_server):
    endpoint, handler = chat_server
    handler.responses.append((500, {"error": "boom"}))
    handler.responses.append((200, _choices("```\nok\n```")))
    backend = GeneratorBackend(
        mode="http_chat", endpoint=endpoint, samples_per_program=1, retries=3, backoff=0.0
    )
    assert generate(unit("x\n", "p"), backend) == ["ok\n"]
    assert len(handler.requests) == 2


def test_http_chat_gives_up_after_bounded_retries(chat_server):
    endpoint, handler = chat_server
    for _ in range(3):
        handler.responses.append((503, {"error": "down"}))
    backend = GeneratorBackend(
        mode="http_chat", endpoint=endpoint, samples_per_program=1, retries=3, backoff=0.0
    )
    with pytest.raises(BackendUnavailable):
        generate(unit("x\n", "p"), backend)
    assert len(handler.requests) == 3


def test_http_chat_missing_api_key_env(chat_server, monkeypatch):
    endpoint, _ = chat_server
    monkeypatch.delenv("NO_SUCH_KEY", raising=False)
    backend = GeneratorBackend(
        mode="http_chat", endpoint=endpoint, api_key_env="NO_SUCH_KEY", retries=1
    )
    with pytest.raises(BackendUnavailable):
        generate(unit("x\n", "p"), backend)


def test_generate_corpus_bounded_concurrency(tmp_path):
    rows = [
        {"program_id": f"p{i}", "outputs": [f"out{i}"]} for i in range(7)
    ]
    path = tmp_path / "replay.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    backend = GeneratorBackend(mode="replay", replay_path=str(path), samples_per_program=1)
    units = [unit(f"text{i}\n", f"p{i}") for i in range(7)]
    outputs = generate_corpus(units, backend, concurrency=3)
    assert outputs == {f"p{i}": [f"out{i}"] for i in range(7)}


# -------------------------------------------------------------------- gate


def test_gate_fig2_diff_is_eligible(listing1_unit, listing2, listing2_unit):
    raw = render(synthesize(listing1_unit, listing2_unit))
    cand = gate(listing1_unit, raw, CandidateKind.DIFF_OUTPUT, 0.8)
    assert cand.status is CandidateStatus.ELIGIBLE
    assert cand.patched_text == listing2
    assert cand.similarity is not None and cand.similarity >= 0.8


def test_gate_garbage_is_malformed(listing1_unit):
    cand = gate(listing1_unit, "this is not a diff\n", CandidateKind.DIFF_OUTPUT, 0.8)
    assert cand.status is CandidateStatus.MALFORMED
    assert cand.patched_text is None
    assert cand.similarity is None


def test_gate_empty_output_is_malformed(listing1_unit):
    cand = gate(listing1_unit, "", CandidateKind.DIFF_OUTPUT, 0.8)
    assert cand.status is CandidateStatus.MALFORMED


def test_gate_unmatched_context_is_apply_failed(listing1_unit):
    raw = " no such context\n-missing line\n+whatever\n"
    cand = gate(listing1_unit, raw, CandidateKind.DIFF_OUTPUT, 0.8)
    assert cand.status is CandidateStatus.APPLY_FAILED


def test_gate_full_rewrite_rejected_by_similarity(listing1_unit):
    rewrite = "#include <cstdio>\nint main(void){puts(\"anagrams\");}\n"
    cand = gate(listing1_unit, rewrite, CandidateKind.FULL_PROGRAM, 0.8)
    assert cand.status is CandidateStatus.REJECTED_SIMILARITY
    assert cand.patched_text == rewrite  # full-program output taken verbatim
    assert cand.similarity is not None and cand.similarity < 0.8


def test_gate_full_program_identity_is_eligible(listing1_unit, listing1):
    cand = gate(listing1_unit, listing1, CandidateKind.FULL_PROGRAM, 0.8)
    assert cand.status is CandidateStatus.ELIGIBLE
    assert cand.similarity == 1.0


def test_gate_threshold_validated(listing1_unit):
    with pytest.raises(ValueError):
        gate(listing1_unit, "x", CandidateKind.FULL_PROGRAM, 1.5)


def test_gate_is_deterministic(listing1_unit, listing2_unit):
    raw = render(synthesize(listing1_unit, listing2_unit))
    first = gate(listing1_unit, raw, CandidateKind.DIFF_OUTPUT, 0.8, index=3)
    second = gate(listing1_unit, raw, CandidateKind.DIFF_OUTPUT, 0.8, index=3)
    assert first == second


# ------------------------------------------------------------------ ledger


def test_ledger_counts_partition_input(listing1_unit, listing2_unit):
    raws = [
        ("garbage\n", CandidateKind.DIFF_OUTPUT),
        ("garbage two\n", CandidateKind.DIFF_OUTPUT),
        (" nope\n-missing\n+x\n", CandidateKind.DIFF_OUTPUT),
        ("full rewrite, nothing alike", CandidateKind.FULL_PROGRAM),
        (render(synthesize(listing1_unit, listing2_unit)), CandidateKind.DIFF_OUTPUT),
    ]
    candidates = [
        gate(listing1_unit, raw, kind, 0.8, index=i) for i, (raw, kind) in enumerate(raws)
    ]
    report = ledger(candidates)
    assert report.malformed == 2
    assert report.apply_failed == 1
    assert report.rejected_similarity == 1
    assert report.eligible == 1
    assert report.total == len(candidates)


def test_ledger_empty():
    report = ledger([])
    assert report.as_dict() == {
        "malformed": 0,
        "apply_failed": 0,
        "rejected_similarity": 0,
        "eligible": 0,
        "total": 0,
    }
