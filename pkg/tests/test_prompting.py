from __future__ import annotations

import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plrh.errors import PromptError
from plrh.prompting import (
    DEFAULT_STAGE1_HEAD,
    DEFAULT_STAGE2_HEAD,
    DEFAULT_STAGE3_HEAD,
    ExampleBlock,
    Prompt,
    PromptStage,
    build_stage1,
    build_stage2,
    build_stage3,
    parse_prompt,
    prompt_sha256,
    render,
)

_EX1 = ExampleBlock(
    caption="A cat on a mat.",
    question="Where is the cat?",
    answer="mat",
    rationale="The caption places the cat on a mat.",
)
_EX2 = ExampleBlock(
    caption="A boat on a lake.",
    question="What floats?",
    answer="boat",
    rationale="Boats float on water, and the caption shows a lake.",
)


def _strip(block: ExampleBlock, *drop: str) -> ExampleBlock:
    kept = {
        "caption": block.caption,
        "question": block.question,
        "answer": block.answer,
        "rationale": block.rationale,
    }
    for name in drop:
        kept[name] = None
    return ExampleBlock(**kept)


def test_stage1_layout() -> None:
    p = build_stage1(DEFAULT_STAGE1_HEAD, [_EX1], "A dog.", "What barks?", "dog")
    text = render(p)
    assert text == (
        DEFAULT_STAGE1_HEAD + "\n"
        "===\n"
        "Context: A cat on a mat.\n"
        "Question: Where is the cat?\n"
        "Answer: mat\n"
        "Rationale: The caption places the cat on a mat.\n"
        "===\n"
        "Context: A dog.\n"
        "Question: What barks?\n"
        "Answer: dog\n"
        "Rationale:"
    )
    assert p.rendered_hash == hashlib.sha256(text.encode("utf-8")).hexdigest()


def test_stage2_layout_has_no_answers() -> None:
    p = build_stage2(
        DEFAULT_STAGE2_HEAD, [_strip(_EX1, "answer")], "A dog.", "What barks?"
    )
    text = render(p)
    assert "Answer:" not in text
    assert text.endswith("Question: What barks?\nRationale:")


def test_stage3_layout_full_and_ablation() -> None:
    full = build_stage3(
        DEFAULT_STAGE3_HEAD, [_EX1, _EX2], "A dog.", "What barks?",
        rationale="Dogs bark; the caption shows a dog.",
    )
    text = render(full)
    assert text.endswith("Rationale: Dogs bark; the caption shows a dog.\nAnswer:")
    assert text.count("Rationale:") == 3  # two examples plus the input block

    ablated = build_stage3(
        DEFAULT_STAGE3_HEAD,
        [_strip(_EX1, "rationale"), _strip(_EX2, "rationale")],
        "A dog.",
        "What barks?",
        ablation_no_rationale=True,
    )
    atext = render(ablated)
    assert "Rationale:" not in atext
    assert atext.endswith("Question: What barks?\nAnswer:")
    assert "Answer: mat\n" in atext  # examples keep their answers


def test_zero_example_prompts_render() -> None:
    p = build_stage1(DEFAULT_STAGE1_HEAD, [], "A dog.", "What barks?", "dog")
    assert render(p).count("===") == 1


def test_builders_reject_structurally_bad_blocks() -> None:
    with pytest.raises(PromptError, match="missing 'rationale'"):
        build_stage1(DEFAULT_STAGE1_HEAD, [_strip(_EX1, "rationale")], "A.", "B?", "c")
    with pytest.raises(PromptError, match="must not carry 'answer'"):
        build_stage2(DEFAULT_STAGE2_HEAD, [_EX1], "A.", "B?")
    with pytest.raises(PromptError, match="requires an input rationale"):
        build_stage3(DEFAULT_STAGE3_HEAD, [_EX1], "A.", "B?")
    with pytest.raises(PromptError, match="must not take an input rationale"):
        build_stage3(DEFAULT_STAGE3_HEAD, [], "A.", "B?", rationale="r",
                     ablation_no_rationale=True)
    with pytest.raises(PromptError, match="must not carry rationales"):
        build_stage3(DEFAULT_STAGE3_HEAD, [_EX1], "A.", "B?", ablation_no_rationale=True)
    with pytest.raises(PromptError, match="missing 'answer'"):
        build_stage3(DEFAULT_STAGE3_HEAD, [_strip(_EX1, "answer")], "A.", "B?",
                     rationale="r")


def test_mixed_ablation_blocks_rejected_at_render() -> None:
    # Hand-built stage-3 prompt whose input lacks a rationale (ablation
    # shape) while an example still carries one.
    prompt = Prompt(
        stage=PromptStage.STAGE3_ANSWER,
        head=DEFAULT_STAGE3_HEAD,
        examples=(_EX1,),
        input=ExampleBlock(caption="A dog.", question="What barks?"),
        rendered_hash="",
    )
    with pytest.raises(PromptError, match="must not carry 'rationale'"):
        render(prompt)


def test_multi_line_and_blank_values_rejected() -> None:
    with pytest.raises(PromptError, match="single-line"):
        build_stage1(DEFAULT_STAGE1_HEAD, [], "Line one.\nLine two.", "Q?", "a")
    with pytest.raises(PromptError, match="missing 'caption'"):
        build_stage1(DEFAULT_STAGE1_HEAD, [], "   ", "Q?", "a")
    with pytest.raises(PromptError, match="head"):
        build_stage1("  ", [], "A.", "Q?", "a")
    with pytest.raises(PromptError, match="single line"):
        build_stage1("Two\nlines", [], "A.", "Q?", "a")


def test_prompt_sha256_is_content_hash() -> None:
    assert prompt_sha256("abc") == hashlib.sha256(b"abc").hexdigest()
    p1 = build_stage2(DEFAULT_STAGE2_HEAD, [], "A.", "Q?")
    p2 = build_stage2(DEFAULT_STAGE2_HEAD, [], "A.", "Q!")
    assert p1.rendered_hash != p2.rendered_hash


def test_parse_prompt_inverts_render_with_tricky_values() -> None:
    block = ExampleBlock(
        caption="A sign reading === stop: now ===.",
        question="What does it say: exactly?",
        rationale="Colons: and = signs pass through.",
    )
    p = build_stage2(DEFAULT_STAGE2_HEAD, [block], "Plain caption.", "Plain question?")
    head, blocks, cue = parse_prompt(render(p))
    assert head == DEFAULT_STAGE2_HEAD
    assert cue == "Rationale:"
    assert blocks[0]["Context"] == block.caption
    assert blocks[0]["Question"] == block.question
    assert blocks[0]["Rationale"] == block.rationale
    assert blocks[1] == {"Context": "Plain caption.", "Question": "Plain question?"}


_field_text = (
    st.text(
        alphabet=st.characters(blacklist_characters="\n\r", min_codepoint=32),
        min_size=1,
        max_size=60,
    )
    .map(str.strip)
    .filter(bool)
)


@given(
    head=_field_text,
    captions=st.lists(_field_text, min_size=1, max_size=3),
    question=_field_text,
    rationale=_field_text,
)
@settings(max_examples=80, deadline=None)
def test_parse_render_round_trip_property(
    head: str, captions: list[str], question: str, rationale: str
) -> None:
    examples = [
        ExampleBlock(caption=c, question=question, rationale=rationale) for c in captions
    ]
    p = build_stage2(head, examples, captions[0], question)
    parsed_head, blocks, cue = parse_prompt(render(p))
    assert parsed_head == head
    assert cue == "Rationale:"
    assert len(blocks) == len(captions) + 1
    for block, caption in zip(blocks, captions):
        assert block == {"Context": caption, "Question": question, "Rationale": rationale}
    assert blocks[-1] == {"Context": captions[0], "Question": question}
