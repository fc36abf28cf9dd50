from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plrh.data_model import Dataset
from plrh.errors import (
    ContextLengthError,
    FixtureMissError,
    LLMClientError,
    RetryBudgetExceededError,
)
from plrh.llm_client import (
    CompletionRequest,
    HttpBackend,
    complete,
    truncate_at_stop,
)
from plrh.mocks import (
    ConstantMockBackend,
    DatasetOracleMockBackend,
    EchoMockBackend,
    HashMockBackend,
    RecordingBackend,
    ScriptedMockBackend,
)
from plrh.prompting import (
    DEFAULT_STAGE3_HEAD,
    ExampleBlock,
    build_stage2,
    build_stage3,
    prompt_sha256,
    render,
)


def _req(prompt: str = "Say something.", **over) -> CompletionRequest:
    fields = {
        "prompt_text": prompt,
        "max_new_tokens": 16,
        "temperature": 0.0,
        "stop_sequences": (),
        "model_id": "test-model",
    }
    fields.update(over)
    return CompletionRequest(**fields)


def test_truncate_at_stop_prefers_earliest_match() -> None:
    assert truncate_at_stop("abc===def\n\nghi", ("===", "\n\n")) == ("abc", True)
    assert truncate_at_stop("ab\n\nc===d", ("===", "\n\n")) == ("ab", True)
    assert truncate_at_stop("no stops here", ("===",)) == ("no stops here", False)
    assert truncate_at_stop("\nstarts with stop", ("\n",)) == ("", True)


def test_complete_truncates_then_trims_leading_whitespace() -> None:
    backend = ConstantMockBackend(" afternoon\nmore text")
    resp = complete(backend, _req(stop_sequences=("\n",)))
    assert resp.text == "afternoon"
    assert resp.finish_reason == "stop"
    assert resp.latency_ms >= 0.0


def test_complete_without_stop_keeps_reason() -> None:
    backend = ConstantMockBackend("plain output")
    resp = complete(backend, _req())
    assert resp.text == "plain output"
    assert resp.finish_reason == "length"


@given(
    raw=st.text(max_size=80),
    stops=st.lists(st.sampled_from(["\n", "\n\n", "===", "stop"]), max_size=3),
)
@settings(max_examples=100, deadline=None)
def test_completed_text_never_contains_a_stop_sequence(raw: str, stops: list[str]) -> None:
    backend = ConstantMockBackend(raw)
    resp = complete(backend, _req(prompt="x", stop_sequences=tuple(stops)))
    for s in stops:
        assert s not in resp.text


def test_request_validation() -> None:
    backend = EchoMockBackend()
    with pytest.raises(LLMClientError, match="empty prompt"):
        complete(backend, _req(prompt=""))
    with pytest.raises(LLMClientError, match="max_new_tokens"):
        complete(backend, _req(max_new_tokens=0))
    with pytest.raises(LLMClientError, match="temperature"):
        complete(backend, _req(temperature=-0.5))
    with pytest.raises(LLMClientError, match="stop sequences"):
        complete(backend, _req(stop_sequences=("",)))
    assert backend.call_count == 0


def test_call_count_is_atomic_under_threads() -> None:
    backend = ConstantMockBackend("ok")
    with ThreadPoolExecutor(max_workers=32) as pool:
        for _ in pool.map(lambda _: complete(backend, _req()), range(800)):
            pass
    assert backend.call_count == 800
    backend.reset_call_count()
    assert backend.call_count == 0


def test_scripted_backend_replays_and_misses(tmp_path: Path) -> None:
    prompt = "What is 2+2?"
    fixture = tmp_path / "fixture.jsonl"
    fixture.write_text(
        json.dumps({"prompt_hash": prompt_sha256(prompt), "completion": " four\n"}) + "\n",
        encoding="utf-8",
    )
    backend = ScriptedMockBackend(fixture)
    assert len(backend) == 1
    resp = complete(backend, _req(prompt=prompt, stop_sequences=("\n",)))
    assert resp.text == "four"
    with pytest.raises(FixtureMissError) as info:
        complete(backend, _req(prompt="unseen prompt"))
    assert info.value.prompt_hash == prompt_sha256("unseen prompt")
    assert backend.call_count == 2  # the miss still counts as a resolution


def test_scripted_backend_rejects_bad_fixture(tmp_path: Path) -> None:
    fixture = tmp_path / "fixture.jsonl"
    fixture.write_text('{"prompt_hash": "x"}\n', encoding="utf-8")
    with pytest.raises(LLMClientError, match="bad fixture row"):
        ScriptedMockBackend(fixture)


def test_recording_backend_round_trips_through_fixture(tmp_path: Path) -> None:
    inner = HashMockBackend()
    recorder = RecordingBackend(inner)
    prompts = [f"prompt number {i}" for i in range(5)]
    raw_results = {}
    for p in prompts:
        raw_results[p] = complete(recorder, _req(prompt=p)).text
    fixture = tmp_path / "rec.jsonl"
    assert recorder.write_fixture(fixture) == 5

    replay = ScriptedMockBackend(fixture)
    for p in prompts:
        assert complete(replay, _req(prompt=p)).text == raw_results[p]
    assert inner.call_count == 5
    assert recorder.call_count == 5


def test_oracle_mock_answers_with_most_common_gold(demo_dataset: Dataset) -> None:
    backend = DatasetOracleMockBackend(demo_dataset)
    sample = demo_dataset.get("v03")
    examples = [
        ExampleBlock(
            caption="A cat.", question="What?", rationale="Cats are cats.", answer="cat"
        )
    ]
    p = build_stage3(
        DEFAULT_STAGE3_HEAD, examples, sample.caption, sample.question,
        rationale="The caption shows pizza.",
    )
    resp = complete(backend, _req(prompt=render(p), stop_sequences=("\n",)))
    assert resp.text == "pizza"

    p2 = build_stage2(
        "Please generate the rationale according to the context and question.",
        [], sample.caption, sample.question,
    )
    resp2 = complete(backend, _req(prompt=render(p2), stop_sequences=("===", "\n\n")))
    assert resp2.text

    unknown = build_stage3(
        DEFAULT_STAGE3_HEAD, examples, "Never seen.", "Never asked?", rationale="r"
    )
    with pytest.raises(LLMClientError, match="no annotations"):
        complete(backend, _req(prompt=render(unknown)))


class _FakeCompletionServer:
    """Minimal completions endpoint with a scripted response sequence."""

    def __init__(self, responses: list[tuple[int, object]]) -> None:
        self.requests: list[dict] = []
        self._responses = responses
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length) or b"{}")
                with outer._lock:
                    outer.requests.append(
                        {
                            "path": self.path,
                            "payload": payload,
                            "authorization": self.headers.get("Authorization"),
                        }
                    )
                    idx = min(len(outer.requests), len(outer._responses)) - 1
                status, body = outer._responses[idx]
                data = (
                    json.dumps(body).encode("utf-8")
                    if isinstance(body, dict)
                    else str(body).encode("utf-8")
                )
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args: object) -> None:
                pass

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1/completions"

    def __enter__(self) -> "_FakeCompletionServer":
        self._thread.start()
        return self

    def __exit__(self, *exc: object) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()


def _ok_body(text: str, finish_reason: str = "stop") -> dict:
    return {"choices": [{"text": text, "finish_reason": finish_reason}]}


def test_http_backend_posts_wire_format_and_parses() -> None:
    with _FakeCompletionServer([(200, _ok_body(" afternoon\n", "length"))]) as server:
        backend = HttpBackend(server.url, retries=0, token="sekrit")
        resp = complete(
            backend,
            _req(
                prompt="What time is it?",
                max_new_tokens=10,
                temperature=0.0,
                stop_sequences=("\n",),
                model_id="llama-2-7b-chat",
            ),
        )
    assert resp.text == "afternoon"
    assert resp.finish_reason == "stop"
    sent = server.requests[0]
    assert sent["path"] == "/v1/completions"
    assert sent["authorization"] == "Bearer sekrit"
    assert sent["payload"] == {
        "model": "llama-2-7b-chat",
        "prompt": "What time is it?",
        "max_tokens": 10,
        "temperature": 0.0,
        "stop": ["\n"],
    }
    assert backend.call_count == 1


def test_http_backend_retries_server_errors_until_success() -> None:
    responses = [(500, "boom"), (503, "busy"), (200, _ok_body("ok"))]
    with _FakeCompletionServer(responses) as server:
        backend = HttpBackend(server.url, retries=2)
        resp = complete(backend, _req())
    assert resp.text == "ok"
    assert len(server.requests) == 3
    assert backend.call_count == 3  # every network attempt is counted


def test_http_backend_exhausts_retry_budget() -> None:
    with _FakeCompletionServer([(500, "boom")]) as server:
        backend = HttpBackend(server.url, retries=1)
        with pytest.raises(RetryBudgetExceededError, match="2 attempt"):
            complete(backend, _req())
        assert len(server.requests) == 2


def test_http_backend_context_length_is_terminal() -> None:
    body = "This model's maximum context length is 4096 tokens."
    with _FakeCompletionServer([(400, body)]) as server:
        backend = HttpBackend(server.url, retries=5)
        with pytest.raises(ContextLengthError) as info:
            complete(backend, _req(prompt="very long prompt"))
        assert len(server.requests) == 1  # not retried
    assert info.value.prompt_hash == prompt_sha256("very long prompt")


def test_http_backend_client_errors_are_not_retried() -> None:
    with _FakeCompletionServer([(404, "no such route")]) as server:
        backend = HttpBackend(server.url, retries=3)
        with pytest.raises(LLMClientError, match="404"):
            complete(backend, _req())
        assert len(server.requests) == 1


def test_http_backend_rejects_malformed_success_body() -> None:
    with _FakeCompletionServer([(200, {"unexpected": True})]) as server:
        backend = HttpBackend(server.url, retries=0)
        with pytest.raises(LLMClientError, match="malformed"):
            complete(backend, _req())


def test_http_backend_transport_errors_retry_then_fail() -> None:
    # Nothing listens on this port; connection errors burn the whole budget.
    backend = HttpBackend("http://127.0.0.1:9/v1/completions", retries=1, timeout_s=0.5)
    with pytest.raises(RetryBudgetExceededError, match="transport error"):
        complete(backend, _req())
    assert backend.call_count == 2
