"""Prompt construction for the three pipeline stages.

The rendered layout is fixed and byte-exact:

    <head>\\n
    ===\\n
    Label: value\\n        (one line per field, order fixed per stage)
    ...
    ===\\n
    <input block field lines>
    Rationale:             (or "Answer:"; bare cue, no trailing space or newline)

Stage 1 shows Context/Question/Answer/Rationale examples and asks for a
rationale given Context/Question/Answer. Stage 2 drops the answers. Stage 3
shows Context/Question/Rationale/Answer examples and asks for an answer given
Context/Question/Rationale; in ablation mode every rationale line disappears
and examples carry answers only.

Field values must be single-line; multi-line text would corrupt the grammar,
so builders reject it rather than guessing an escape.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import PromptError

SEPARATOR_LINE = "===\n"

DEFAULT_STAGE1_HEAD = (
    "Please generate the rationale according to the context, question and answer."
)
DEFAULT_STAGE2_HEAD = "Please generate the rationale according to the context and question."
DEFAULT_STAGE3_HEAD = "Please answer the question according to the context and rationale."


class PromptStage(str, Enum):
    STAGE1_RATIONALE = "stage1_rationale"
    STAGE2_RATIONALE = "stage2_rationale"
    STAGE3_ANSWER = "stage3_answer"


@dataclass(frozen=True)
class ExampleBlock:
    """Field values for one block. Unused fields stay None for the stage."""

    caption: str
    question: str
    answer: str | None = None
    rationale: str | None = None


@dataclass(frozen=True)
class Prompt:
    stage: PromptStage
    head: str
    examples: tuple[ExampleBlock, ...]
    input: ExampleBlock
    rendered_hash: str


# (label, attribute) pairs in render order, per stage and block role.
_EXAMPLE_FIELDS: dict[tuple[PromptStage, bool], tuple[tuple[str, str], ...]] = {
    (PromptStage.STAGE1_RATIONALE, False): (
        ("Context", "caption"),
        ("Question", "question"),
        ("Answer", "answer"),
        ("Rationale", "rationale"),
    ),
    (PromptStage.STAGE2_RATIONALE, False): (
        ("Context", "caption"),
        ("Question", "question"),
        ("Rationale", "rationale"),
    ),
    (PromptStage.STAGE3_ANSWER, False): (
        ("Context", "caption"),
        ("Question", "question"),
        ("Rationale", "rationale"),
        ("Answer", "answer"),
    ),
    (PromptStage.STAGE3_ANSWER, True): (  # ablation: no rationale anywhere
        ("Context", "caption"),
        ("Question", "question"),
        ("Answer", "answer"),
    ),
}

_INPUT_FIELDS: dict[tuple[PromptStage, bool], tuple[tuple[str, str], ...]] = {
    (PromptStage.STAGE1_RATIONALE, False): (
        ("Context", "caption"),
        ("Question", "question"),
        ("Answer", "answer"),
    ),
    (PromptStage.STAGE2_RATIONALE, False): (
        ("Context", "caption"),
        ("Question", "question"),
    ),
    (PromptStage.STAGE3_ANSWER, False): (
        ("Context", "caption"),
        ("Question", "question"),
        ("Rationale", "rationale"),
    ),
    (PromptStage.STAGE3_ANSWER, True): (
        ("Context", "caption"),
        ("Question", "question"),
    ),
}

_CUES = {
    PromptStage.STAGE1_RATIONALE: "Rationale:",
    PromptStage.STAGE2_RATIONALE: "Rationale:",
    PromptStage.STAGE3_ANSWER: "Answer:",
}

_ALL_ATTRS = ("caption", "question", "answer", "rationale")


def prompt_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _is_ablation(prompt: Prompt) -> bool:
    """Stage-3 prompts carry no explicit flag; the input block tells.

    A stage-3 input without a rationale is only legal in ablation mode, so
    its absence is the marker. Builders enforce that examples agree.
    """
    return prompt.stage is PromptStage.STAGE3_ANSWER and prompt.input.rationale is None


def _check_block(
    stage: PromptStage,
    block: ExampleBlock,
    fields: tuple[tuple[str, str], ...],
    role: str,
) -> None:
    wanted = {attr for _, attr in fields}
    for attr in _ALL_ATTRS:
        value = getattr(block, attr)
        if attr in wanted:
            if value is None or not value.strip():
                raise PromptError(f"{stage.value} {role} block is missing {attr!r}")
            if "\n" in value or "\r" in value:
                raise PromptError(
                    f"{stage.value} {role} block has a multi-line {attr!r}; "
                    "field values must be single-line"
                )
        elif value is not None:
            raise PromptError(f"{stage.value} {role} block must not carry {attr!r}")


def render(prompt: Prompt) -> str:
    """Render a prompt to its exact byte layout (as UTF-8 text)."""
    if not prompt.head.strip():
        raise PromptError("prompt head must be non-empty")
    if "\n" in prompt.head or "\r" in prompt.head:
        raise PromptError("prompt head must be a single line")
    ablation = _is_ablation(prompt)
    try:
        example_fields = _EXAMPLE_FIELDS[(prompt.stage, ablation)]
        input_fields = _INPUT_FIELDS[(prompt.stage, ablation)]
    except KeyError as exc:  # only possible with a forged stage value
        raise PromptError(f"unknown prompt stage {prompt.stage!r}") from exc

    parts: list[str] = [prompt.head, "\n"]
    for block in prompt.examples:
        _check_block(prompt.stage, block, example_fields, "example")
        parts.append(SEPARATOR_LINE)
        for label, attr in example_fields:
            parts.append(f"{label}: {getattr(block, attr)}\n")
    _check_block(prompt.stage, prompt.input, input_fields, "input")
    parts.append(SEPARATOR_LINE)
    for label, attr in input_fields:
        parts.append(f"{label}: {getattr(prompt.input, attr)}\n")
    parts.append(_CUES[prompt.stage])
    return "".join(parts)


def _build(
    stage: PromptStage,
    head: str,
    examples: Sequence[ExampleBlock],
    input_block: ExampleBlock,
) -> Prompt:
    prompt = Prompt(
        stage=stage,
        head=head,
        examples=tuple(examples),
        input=input_block,
        rendered_hash="",
    )
    text = render(prompt)  # validates structure before the hash is pinned
    return Prompt(
        stage=stage,
        head=head,
        examples=tuple(examples),
        input=input_block,
        rendered_hash=prompt_sha256(text),
    )


def build_stage1(
    head: str,
    examples: Sequence[ExampleBlock],
    caption: str,
    question: str,
    answer: str,
) -> Prompt:
    """Rationale-generation prompt for a train sample with a known answer."""
    input_block = ExampleBlock(caption=caption, question=question, answer=answer)
    return _build(PromptStage.STAGE1_RATIONALE, head, examples, input_block)


def build_stage2(
    head: str,
    examples: Sequence[ExampleBlock],
    caption: str,
    question: str,
) -> Prompt:
    """Rationale-generation prompt for a test sample (no answer available)."""
    input_block = ExampleBlock(caption=caption, question=question)
    return _build(PromptStage.STAGE2_RATIONALE, head, examples, input_block)


def build_stage3(
    head: str,
    examples: Sequence[ExampleBlock],
    caption: str,
    question: str,
    rationale: str | None = None,
    ablation_no_rationale: bool = False,
) -> Prompt:
    """Answer-prediction prompt; ablation mode drops every rationale line."""
    if ablation_no_rationale:
        if rationale is not None:
            raise PromptError("ablation stage-3 prompt must not take an input rationale")
        for block in examples:
            if block.rationale is not None:
                raise PromptError("ablation stage-3 examples must not carry rationales")
    elif rationale is None:
        raise PromptError("stage-3 prompt requires an input rationale outside ablation mode")
    input_block = ExampleBlock(caption=caption, question=question, rationale=rationale)
    return _build(PromptStage.STAGE3_ANSWER, head, examples, input_block)


def parse_prompt(text: str) -> tuple[str, list[dict[str, str]], str]:
    """Split rendered prompt text back into (head, blocks, cue).

    Diagnostic inverse of render for well-formed prompts; each block is a
    label->value dict in encounter order. The final block is the input block
    and the returned cue is its bare trailing label.
    """
    sep = SEPARATOR_LINE.rstrip("\n")
    lines = text.split("\n")
    if len(lines) < 2 or lines[0].strip() == "":
        raise PromptError("prompt text has no head line")
    head = lines[0]
    blocks: list[dict[str, str]] = []
    current: dict[str, str] | None = None
    cue = ""
    for i, line in enumerate(lines[1:], start=1):
        if line == sep:
            current = {}
            blocks.append(current)
            continue
        if current is None:
            raise PromptError(f"line {i} appears before the first separator")
        if i == len(lines) - 1:
            if not line.endswith(":"):
                raise PromptError("prompt does not end with a bare cue line")
            cue = line
            continue
        label, colon, value = line.partition(": ")
        if not colon:
            raise PromptError(f"line {i} is not a 'Label: value' field line")
        current[label] = value
    if not blocks or not cue:
        raise PromptError("prompt has no blocks or no cue line")
    return head, blocks, cue
