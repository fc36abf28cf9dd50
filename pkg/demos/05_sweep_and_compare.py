"""Sweep the example-count grid and tabulate full vs no-rationale runs.

Run from the repo root: python demos/05_sweep_and_compare.py
"""
from __future__ import annotations

import tempfile
from pathlib import Path

from _corpus import write_config

from plrh import (
    compare_runs,
    evaluate_store,
    load_config,
    run_pipeline,
    run_sweep,
)

scratch = Path(tempfile.mkdtemp(prefix="plrh-demo-"))
cfg = load_config(write_config(scratch, scratch / "sweep"))

print("== sweep over n examples, both variants ==")
# Each (n, variant) cell runs in its own store directory, so partial sweeps
# resume for free and cells never share cached completions.
rows, csv_path = run_sweep(cfg, [1, 2, 3], variants=("full", "no_rationale"))
for row in rows:
    print(f"  n={row.n} variant={row.variant:12s} accuracy={row.accuracy:.3f}")
print(f"CSV written to {csv_path}")
print(csv_path.read_text(encoding="utf-8"), end="")

print("\n== comparing two configurations ==")
# The comparison table reports percentage-point deltas against the first
# (baseline) entry. Under the gold-answer mock both land at 100%, so the
# interesting column in real runs, the delta, shows +0.0 here.
full_cfg = cfg.replace(store_path=str(scratch / "full"))
ablated_cfg = cfg.replace(
    store_path=str(scratch / "ablated"), ablation_no_rationale=True
)
run_pipeline(full_cfg)
run_pipeline(ablated_cfg)
table = compare_runs(
    [
        ("full", evaluate_store(full_cfg)),
        ("no_rationale", evaluate_store(ablated_cfg)),
    ]
)
print(table.to_text(), end="")
print("\nas CSV:")
print(table.to_csv(), end="")
