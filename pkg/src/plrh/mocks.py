"""Deterministic offline backends for tests, fixtures, and demos.

ScriptedMockBackend replays a JSONL fixture mapping prompt hashes to
completions, so a whole pipeline run resolves without a network. The
recording wrapper produces such fixtures from any other backend.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .data_model import Dataset, most_common_answer
from .errors import FixtureMissError, LLMClientError
from .llm_client import CompletionBackend, CompletionRequest
from .prompting import parse_prompt, prompt_sha256


class ScriptedMockBackend(CompletionBackend):
    """Replay completions from a fixture of {"prompt_hash", "completion"} rows."""

    name = "scripted"

    def __init__(self, fixture_path: str | Path) -> None:
        super().__init__()
        self.fixture_path = Path(fixture_path)
        self._completions: dict[str, str] = {}
        with open(self.fixture_path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    self._completions[row["prompt_hash"]] = row["completion"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise LLMClientError(
                        f"{self.fixture_path}:{lineno}: bad fixture row: {exc}"
                    ) from exc

    def __len__(self) -> int:
        return len(self._completions)

    def _resolve(self, request: CompletionRequest) -> tuple[str, str]:
        h = prompt_sha256(request.prompt_text)
        if h not in self._completions:
            raise FixtureMissError(h)
        return self._completions[h], "length"


class EchoMockBackend(CompletionBackend):
    """Return the prompt itself; handy for testing client-side stop handling."""

    name = "echo"

    def _resolve(self, request: CompletionRequest) -> tuple[str, str]:
        return request.prompt_text, "length"


class ConstantMockBackend(CompletionBackend):
    """Always return the same completion, e.g. an always-wrong answer."""

    name = "constant"

    def __init__(self, text: str) -> None:
        super().__init__()
        self.text = text

    def _resolve(self, request: CompletionRequest) -> tuple[str, str]:
        return self.text, "length"


class HashMockBackend(CompletionBackend):
    """Distinct deterministic output per prompt, derived from its hash."""

    name = "hash"

    def _resolve(self, request: CompletionRequest) -> tuple[str, str]:
        h = prompt_sha256(request.prompt_text)
        return f"mock completion {h[:12]}\n", "length"


class DatasetOracleMockBackend(CompletionBackend):
    """Answer prompts from gold annotations.

    Parses the final prompt block, identifies the sample by its caption and
    question, and returns its most frequent gold answer. Rationale cues get a
    deterministic one-line filler. Useful as a known-perfect backend: soft
    accuracy against the same dataset must come out at 1.0 whenever every
    majority answer has three or more supporting annotations.
    """

    name = "oracle"

    def __init__(self, dataset: Dataset) -> None:
        super().__init__()
        self._by_content: dict[tuple[str, str], str] = {}
        for s in dataset.samples:
            if s.answers:
                self._by_content[(s.caption, s.question)] = most_common_answer(s.answers)

    def _resolve(self, request: CompletionRequest) -> tuple[str, str]:
        _, blocks, cue = parse_prompt(request.prompt_text)
        final = blocks[-1]
        caption = final.get("Context", "")
        question = final.get("Question", "")
        if cue == "Answer:":
            key = (caption, question)
            if key not in self._by_content:
                raise LLMClientError(
                    f"oracle mock has no annotations for question {question!r}"
                )
            return f" {self._by_content[key]}\n", "length"
        return (
            f" The caption {caption!r} points directly at what the question asks.\n",
            "length",
        )


class RecordingBackend(CompletionBackend):
    """Wrap another backend and capture (prompt_hash, completion) pairs.

    write_fixture() emits the captured pairs as a ScriptedMockBackend fixture,
    sorted by hash so regenerated fixtures diff cleanly.
    """

    name = "recording"

    def __init__(self, inner: CompletionBackend) -> None:
        super().__init__()
        self.inner = inner
        self._entries: dict[str, str] = {}
        self._entries_lock = threading.Lock()

    def _resolve(self, request: CompletionRequest) -> tuple[str, str]:
        raw, finish_reason = self.inner.resolve(request)
        with self._entries_lock:
            self._entries[prompt_sha256(request.prompt_text)] = raw
        return raw, finish_reason

    @property
    def entries(self) -> dict[str, str]:
        with self._entries_lock:
            return dict(self._entries)

    def write_fixture(self, path: str | Path) -> int:
        entries = self.entries
        with open(path, "w", encoding="utf-8") as fh:
            for h in sorted(entries):
                row = {"prompt_hash": h, "completion": entries[h]}
                fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
        return len(entries)
