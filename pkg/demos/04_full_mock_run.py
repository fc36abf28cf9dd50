"""Run all three stages end to end against the gold-answer mock backend.

Run from the repo root: python demos/04_full_mock_run.py
"""
from __future__ import annotations

import tempfile
from pathlib import Path

from _corpus import write_config

from plrh import RecordStore, evaluate_store, load_config, run_pipeline

scratch = Path(tempfile.mkdtemp(prefix="plrh-demo-"))
cfg = load_config(write_config(scratch, scratch / "store"))

print("== first run (cold store) ==")
summary = run_pipeline(cfg)
for outcome in summary.outcomes:
    print(f"  {outcome.describe()}")
print(f"backend calls: {summary.backend_calls}")

print("\n== second run (warm store) ==")
# Every record is keyed by (sample, stage, prompt hash, model), so an
# unchanged configuration replays entirely from the store.
summary = run_pipeline(cfg)
for outcome in summary.outcomes:
    print(f"  {outcome.describe()}")
print(f"backend calls: {summary.backend_calls}")

print("\n== what the store holds ==")
with RecordStore(cfg.store_path, read_only=True) as store:
    print(f"records: {len(store)}")
    predictions = store.latest_predictions()
for pred in predictions[:3]:
    print(f"  {pred.sample_id}: answer {pred.answer!r}, "
          f"examples {', '.join(pred.example_ids)}")
print("  ...")

print("\n== evaluation ==")
# The oracle mock answers with each sample's most frequent gold annotation,
# so soft accuracy must come out at exactly 100%.
report = evaluate_store(cfg)
print(report.summary_text())
for row in report.per_sample[:3]:
    print(f"  {row.sample_id}: predicted {row.predicted!r} "
          f"matches {row.matches} accuracy {row.accuracy:.3f}")
print("  ...")
