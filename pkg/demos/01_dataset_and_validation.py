"""Load a dataset, validate it, and round-trip features through both formats.

Run from the repo root: python demos/01_dataset_and_validation.py
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from _corpus import build_corpus

from plrh import (
    load_dataset,
    read_features,
    validate_dataset,
    write_features_binary,
    write_features_text,
)

scratch = Path(tempfile.mkdtemp(prefix="plrh-demo-"))
samples_path, features_path = build_corpus(scratch)

print("== loading ==")
dataset = load_dataset(samples_path, features_path, "demo-corpus")
print(f"{len(dataset)} samples, feature dim {dataset.feature_dim}")
print(f"train {len(dataset.train_samples())}, test {len(dataset.test_samples())}")
print(f"content hash {dataset.content_hash()[:16]}...")

print("\n== one sample ==")
sample = dataset.get("q01")
print(f"id       {sample.id}")
print(f"caption  {sample.caption}")
print(f"question {sample.question}")
print(f"answers  {sample.answers[:4]}... ({len(sample.answers)} annotations)")

print("\n== validation ==")
violations = validate_dataset(dataset)
print(f"clean dataset: {len(violations)} violations")

# Break a copy of the samples file and show what validation reports.
broken = scratch / "broken.samples.jsonl"
rows = [json.loads(l) for l in samples_path.read_text(encoding="utf-8").splitlines()]
rows[0]["caption"] = "   "
rows[3]["answers"] = []
broken.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
bad = load_dataset(broken, features_path, "broken")
for v in validate_dataset(bad):
    print(f"  {v}")

print("\n== feature formats ==")
# The same vectors can ship as JSONL or as the packed binary layout; the
# loader sniffs the magic bytes, so downstream code never cares which.
features = read_features(features_path)
text_copy = scratch / "copy.jsonl"
binary_copy = scratch / "copy.fbin"
write_features_text(text_copy, features.items())
write_features_binary(binary_copy, features.items())
print(f"text copy   {text_copy.stat().st_size:6d} bytes")
print(f"binary copy {binary_copy.stat().st_size:6d} bytes")
reread = read_features(binary_copy)
same = set(reread) == set(features) and all(
    (reread[k] == features[k]).all() for k in features
)
print(f"binary round trip bit-exact: {same}")
