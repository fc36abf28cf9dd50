"""Pick in-context examples by cosine similarity and cross-check the oracle.

Run from the repo root: python demos/02_example_selection.py
"""
from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np
from _corpus import build_corpus

from plrh import Dataset, Sample, load_dataset, select_examples, select_examples_oracle

scratch = Path(tempfile.mkdtemp(prefix="plrh-demo-"))
samples_path, features_path = build_corpus(scratch)
dataset = load_dataset(samples_path, features_path, "demo-corpus")

print("== top-3 selection per test sample ==")
# Each test feature was built as a noisy copy of one train feature, so the
# intended anchor should come back at rank 1.
for sample in dataset.test_samples():
    result = select_examples(sample.feature, dataset, 3, query_id=sample.id)
    ranked = "  ".join(f"{sid}:{score:.3f}" for sid, score in result.selected)
    print(f"{sample.id}  {ranked}")

print("\n== oracle cross-check ==")
# select_examples is the vectorized path; select_examples_oracle re-derives
# the ranking with compensated scalar sums. They must agree id for id.
agree = all(
    select_examples(s.feature, dataset, 5, query_id=s.id).ids()
    == select_examples_oracle(s.feature, dataset, 5, query_id=s.id).ids()
    for s in dataset.test_samples()
)
print(f"both implementations rank identically: {agree}")

print("\n== exact ties ==")
# Duplicated vectors (and power-of-two rescalings of them) score exactly
# the same, so ranking falls back to ascending sample id.
base = np.array([0.8, -0.2, 0.5, 1.1, -0.7, 0.3])
tied = Dataset(
    name="ties",
    samples=tuple(
        Sample(id=sid, split="train", caption="c", question="q",
               answers=("a",), feature=vec)
        for sid, vec in [
            ("dup_b", base), ("dup_a", base.copy()),
            ("half", base * 0.5), ("off_axis", np.roll(base, 2)),
        ]
    ),
    feature_dim=6,
)
result = select_examples(base, tied, 4, query_id="probe")
for rank, (sid, score) in enumerate(result.selected, start=1):
    print(f"rank {rank}  {sid:8s}  score {score:.15f}")
