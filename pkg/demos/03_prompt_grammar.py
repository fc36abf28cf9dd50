"""Render the three prompt kinds and show the layout rules they share.

Run from the repo root: python demos/03_prompt_grammar.py
"""
from __future__ import annotations

from plrh import (
    DEFAULT_STAGE1_HEAD,
    DEFAULT_STAGE2_HEAD,
    DEFAULT_STAGE3_HEAD,
    ExampleBlock,
    build_stage1,
    build_stage2,
    build_stage3,
    parse_prompt,
    render,
)

RULER = "-" * 72

seed_examples = [
    ExampleBlock(
        caption="A brown horse grazing in a fenced meadow.",
        question="What animal is grazing?",
        answer="horse",
        rationale="The caption names a horse in a meadow, so the grazing animal is a horse.",
    ),
    ExampleBlock(
        caption="A pot of soup simmering on a gas stove.",
        question="What is being cooked?",
        answer="soup",
        rationale="A pot simmering on a stove with soup in it means soup is being cooked.",
    ),
]

print("== stage 1: rationale for a train sample (answer known) ==")
p1 = build_stage1(
    DEFAULT_STAGE1_HEAD,
    seed_examples,
    caption="Two cats sleeping on a sunny windowsill.",
    question="How many cats are there?",
    answer="2",
)
print(RULER)
print(render(p1))
print(RULER)
print(f"prompt hash {p1.rendered_hash[:16]}...")

# Stage 2 examples pair each train sample with its generated rationale; the
# answer never appears because test answers are unknown at this point.
print("\n== stage 2: rationale for a test sample (no answer) ==")
stage2_examples = [
    ExampleBlock(
        caption=b.caption, question=b.question, rationale=b.rationale
    )
    for b in seed_examples
]
p2 = build_stage2(
    DEFAULT_STAGE2_HEAD,
    stage2_examples,
    caption="A puppy leaping for a flying disc on grass.",
    question="What is the puppy catching?",
)
print(RULER)
print(render(p2))
print(RULER)

print("\n== stage 3: answer prediction ==")
stage3_examples = [
    ExampleBlock(
        caption=b.caption, question=b.question,
        rationale=b.rationale, answer=b.answer,
    )
    for b in seed_examples
]
p3 = build_stage3(
    DEFAULT_STAGE3_HEAD,
    stage3_examples,
    caption="A puppy leaping for a flying disc on grass.",
    question="What is the puppy catching?",
    rationale="A disc flying over grass that a puppy leaps for is a frisbee.",
)
print(RULER)
print(render(p3))
print(RULER)

print("\n== stage 3, rationale ablation ==")
# The ablation variant drops every rationale line but keeps the block
# structure, which isolates how much the rationales themselves contribute.
ablated_examples = [
    ExampleBlock(caption=b.caption, question=b.question, answer=b.answer)
    for b in seed_examples
]
p3_ablated = build_stage3(
    DEFAULT_STAGE3_HEAD,
    ablated_examples,
    caption="A puppy leaping for a flying disc on grass.",
    question="What is the puppy catching?",
    ablation_no_rationale=True,
)
print(RULER)
print(render(p3_ablated))
print(RULER)

print("\n== structural facts ==")
text = render(p3)
head, blocks, cue = parse_prompt(text)
print(f"blocks: {len(blocks)}, final cue: {cue!r}")
print(f"ends without trailing newline: {not text.endswith(chr(10))}")
print(f"rebuilding produces the same hash: {p3.rendered_hash == build_stage3(DEFAULT_STAGE3_HEAD, stage3_examples, caption='A puppy leaping for a flying disc on grass.', question='What is the puppy catching?', rationale='A disc flying over grass that a puppy leaps for is a frisbee.').rendered_hash}")
