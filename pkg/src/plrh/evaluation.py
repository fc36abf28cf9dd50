"""Soft-accuracy scoring and run comparison.

A prediction scores min(matches / 3, 1) where matches counts gold
annotations equal to the prediction after normalization. Normalization:
lowercase, strip ASCII punctuation, trim and collapse whitespace, then drop
leading articles (a, an, the) repeatedly so the result is a fixed point.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .data_model import Dataset, PredictionRecord
from .errors import EvaluationError

_ARTICLES = frozenset({"a", "an", "the"})
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Canonical answer form; idempotent by construction."""
    tokens = text.lower().translate(_PUNCT_TABLE).split()
    while tokens and tokens[0] in _ARTICLES:
        tokens.pop(0)
    return " ".join(tokens)


def score_sample(predicted: str, annotations: Sequence[str]) -> tuple[int, float]:
    """(match_count, soft accuracy) for one prediction against gold answers."""
    if not annotations:
        raise EvaluationError("cannot score a sample with no annotations")
    target = normalize_answer(predicted)
    if not target:
        return 0, 0.0
    matches = sum(1 for a in annotations if normalize_answer(a) == target)
    return matches, min(matches / 3, 1.0)


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    predicted: str
    normalized: str
    matches: int
    accuracy: float

    def to_dict(self) -> dict[str, object]:
        return {
            "sample_id": self.sample_id,
            "predicted": self.predicted,
            "normalized": self.normalized,
            "matches": self.matches,
            "accuracy": self.accuracy,
        }


@dataclass(frozen=True)
class EvalReport:
    name: str
    n_evaluated: int
    n_skipped: int
    mean_accuracy: float
    per_sample: tuple[SampleScore, ...] = ()

    @property
    def accuracy_percent(self) -> float:
        return self.mean_accuracy * 100.0

    def summary_dict(self) -> dict[str, object]:
        return {
            "name": self.name,
            "n_evaluated": self.n_evaluated,
            "n_skipped": self.n_skipped,
            "mean_accuracy": self.mean_accuracy,
            "accuracy_percent": self.accuracy_percent,
        }

    def summary_text(self) -> str:
        return (
            f"{self.name or 'run'}: accuracy {self.accuracy_percent:.1f} "
            f"({self.n_evaluated} evaluated, {self.n_skipped} skipped)"
        )


def evaluate(
    predictions: Sequence[PredictionRecord],
    dataset: Dataset,
    name: str = "",
) -> EvalReport:
    """Score predictions against their samples' gold annotations.

    Samples without annotations are counted as skipped, not failed. A
    prediction for an id the dataset does not contain is an error: silently
    ignoring it would misstate the mean.
    """
    seen: set[str] = set()
    scores: list[SampleScore] = []
    skipped = 0
    for pred in sorted(predictions, key=lambda p: p.sample_id):
        if pred.sample_id in seen:
            raise EvaluationError(f"duplicate prediction for sample {pred.sample_id!r}")
        seen.add(pred.sample_id)
        sample = dataset.get(pred.sample_id)
        if sample is None:
            raise EvaluationError(f"prediction for unknown sample {pred.sample_id!r}")
        if not sample.answers:
            skipped += 1
            continue
        matches, acc = score_sample(pred.answer, sample.answers)
        scores.append(
            SampleScore(
                sample_id=pred.sample_id,
                predicted=pred.answer,
                normalized=normalize_answer(pred.answer),
                matches=matches,
                accuracy=acc,
            )
        )
    mean = math.fsum(s.accuracy for s in scores) / len(scores) if scores else 0.0
    return EvalReport(
        name=name,
        n_evaluated=len(scores),
        n_skipped=skipped,
        mean_accuracy=mean,
        per_sample=tuple(scores),
    )


def write_report(report: EvalReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Write per-sample scores (JSONL) and a one-object summary (JSON)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_sample_path = out_dir / "eval.per_sample.jsonl"
    summary_path = out_dir / "eval.summary.json"
    with open(per_sample_path, "w", encoding="utf-8") as fh:
        for s in report.per_sample:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report.summary_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    return per_sample_path, summary_path


def load_report_summary(path: str | Path) -> EvalReport:
    """Rebuild a summary-only EvalReport written by write_report."""
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    try:
        return EvalReport(
            name=str(d["name"]),
            n_evaluated=int(d["n_evaluated"]),
            n_skipped=int(d["n_skipped"]),
            mean_accuracy=float(d["mean_accuracy"]),
        )
    except KeyError as exc:
        raise EvaluationError(f"{path}: missing summary field {exc}") from exc


@dataclass(frozen=True)
class ComparisonRow:
    variant: str
    accuracy_pct: float
    delta_pct: float  # percentage points relative to the first row


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]

    def to_csv(self) -> str:
        lines = ["variant,accuracy_pct,delta_pct"]
        for r in self.rows:
            lines.append(f"{r.variant},{r.accuracy_pct:.1f},{r.delta_pct:+.1f}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len("variant"), max(len(r.variant) for r in self.rows))
        lines = [f"{'variant'.ljust(width)}  accuracy  delta"]
        for r in self.rows:
            lines.append(f"{r.variant.ljust(width)}  {r.accuracy_pct:8.1f}  {r.delta_pct:+5.1f}")
        return "\n".join(lines) + "\n"


def compare_runs(labeled_reports: Sequence[tuple[str, EvalReport]]) -> ComparisonTable:
    """Tabulate runs against the first one (the baseline)."""
    if len(labeled_reports) < 2:
        raise EvaluationError("comparison needs at least two runs")
    labels = [label for label, _ in labeled_reports]
    if len(set(labels)) != len(labels):
        raise EvaluationError("comparison labels must be unique")
    base = labeled_reports[0][1].accuracy_percent
    rows = tuple(
        ComparisonRow(
            variant=label,
            accuracy_pct=report.accuracy_percent,
            delta_pct=report.accuracy_percent - base,
        )
        for label, report in labeled_reports
    )
    return ComparisonTable(rows=rows)
