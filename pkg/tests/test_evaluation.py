from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plrh.data_model import Dataset, PredictionRecord, Sample
from plrh.errors import EvaluationError
from plrh.evaluation import (
    EvalReport,
    compare_runs,
    evaluate,
    load_report_summary,
    normalize_answer,
    score_sample,
    write_report,
)


def test_normalize_answer_known_cases() -> None:
    assert normalize_answer("  The  Backyard ") == "backyard"
    assert normalize_answer("stir-fry") == "stirfry"
    assert normalize_answer("A an the cat") == "cat"
    assert normalize_answer("the the") == ""
    assert normalize_answer("it's") == "its"
    assert normalize_answer("HELLO, WORLD!") == "hello world"
    assert normalize_answer("an apple a day") == "apple a day"
    assert normalize_answer("") == ""
    assert normalize_answer("...") == ""
    # punctuation stripping is ASCII-only; other letters pass through
    assert normalize_answer("Café au lait") == "café au lait"


@given(st.text(max_size=60))
@settings(max_examples=200, deadline=None)
def test_normalize_answer_is_idempotent(text: str) -> None:
    once = normalize_answer(text)
    assert normalize_answer(once) == once


@given(st.text(max_size=60))
@settings(max_examples=100, deadline=None)
def test_normalize_answer_postconditions(text: str) -> None:
    out = normalize_answer(text)
    assert out == out.strip()
    assert "  " not in out
    assert out == out.lower()
    if out:
        assert out.split()[0] not in {"a", "an", "the"}


def test_score_sample_match_count_table() -> None:
    gold = ["cat"] * 10
    for matches, expected in [(0, 0.0), (1, 1 / 3), (2, 2 / 3), (3, 1.0), (7, 1.0)]:
        annotations = ["cat"] * matches + ["dog"] * (10 - matches)
        got_matches, got_acc = score_sample("cat", annotations)
        assert got_matches == matches
        assert got_acc == expected
    assert score_sample("cat", gold) == (10, 1.0)


def test_score_sample_matches_through_normalization() -> None:
    matches, acc = score_sample("The Stir-Fry!", ["stir fry", "stirfry", "STIR FRY?"])
    # "stir fry" and "stirfry" normalize differently; hyphen joins the words.
    assert (matches, acc) == (1, 1 / 3)
    matches, acc = score_sample("backyard", ["the backyard", "Backyard", "yard"])
    assert (matches, acc) == (2, 2 / 3)


def test_score_sample_edge_cases() -> None:
    assert score_sample("...", ["anything"]) == (0, 0.0)  # normalizes to empty
    assert score_sample("a", ["a", "a", "a"]) == (0, 0.0)  # bare article vanishes
    with pytest.raises(EvaluationError, match="no annotations"):
        score_sample("cat", [])


def _tiny_dataset() -> Dataset:
    def sample(sid: str, answers: tuple[str, ...], split: str = "test") -> Sample:
        return Sample(
            id=sid, split=split, caption=f"Caption {sid}.", question=f"Question {sid}?",
            answers=answers, feature=np.ones(2, dtype=np.float32),
        )

    return Dataset(
        name="tiny",
        samples=(
            sample("q1", ("cat", "cat", "cat", "dog")),
            sample("q2", ("red", "blue", "blue")),
            sample("q3", ()),  # unannotated: skipped, not failed
            sample("tr", ("x", "x", "x"), split="train"),
        ),
        feature_dim=2,
    )


def _pred(sid: str, answer: str) -> PredictionRecord:
    return PredictionRecord(
        sample_id=sid, answer=answer, example_ids=("tr",), prompt_hash="h", model_id="m"
    )


def test_evaluate_scores_skips_and_orders() -> None:
    ds = _tiny_dataset()
    report = evaluate([_pred("q2", "blue"), _pred("q1", "cat"), _pred("q3", "zzz")], ds, "tiny")
    assert report.n_evaluated == 2
    assert report.n_skipped == 1
    assert [s.sample_id for s in report.per_sample] == ["q1", "q2"]
    assert report.per_sample[0].accuracy == 1.0
    assert report.per_sample[1].accuracy == 2 / 3
    assert report.mean_accuracy == pytest.approx((1.0 + 2 / 3) / 2, abs=1e-15)
    assert report.accuracy_percent == pytest.approx(83.3333333, abs=1e-5)


def test_evaluate_rejects_unknown_and_duplicate_ids() -> None:
    ds = _tiny_dataset()
    with pytest.raises(EvaluationError, match="unknown sample"):
        evaluate([_pred("ghost", "x")], ds)
    with pytest.raises(EvaluationError, match="duplicate prediction"):
        evaluate([_pred("q1", "x"), _pred("q1", "y")], ds)


def test_evaluate_empty_prediction_list() -> None:
    report = evaluate([], _tiny_dataset(), "empty")
    assert report.n_evaluated == 0
    assert report.mean_accuracy == 0.0


def test_mean_uses_compensated_summation() -> None:
    ds_samples = tuple(
        Sample(
            id=f"q{i:03d}", split="test", caption="C.", question="Q?",
            answers=("yes", "yes", "yes", "no", "no", "maybe"),
            feature=np.ones(2, dtype=np.float32),
        )
        for i in range(300)
    )
    ds = Dataset(name="many", samples=ds_samples, feature_dim=2)
    preds = [_pred(s.id, "no") for s in ds_samples]  # 2 matches -> 2/3 each
    report = evaluate(preds, ds)
    exact = math.fsum([2 / 3] * 300) / 300
    assert report.mean_accuracy == exact


def test_write_and_reload_report(tmp_path: Path) -> None:
    ds = _tiny_dataset()
    report = evaluate([_pred("q1", "cat"), _pred("q2", "green")], ds, "tiny")
    per_sample_path, summary_path = write_report(report, tmp_path / "out")
    rows = [json.loads(line) for line in per_sample_path.read_text().splitlines()]
    assert [r["sample_id"] for r in rows] == ["q1", "q2"]
    assert rows[1]["accuracy"] == 0.0

    loaded = load_report_summary(summary_path)
    assert loaded.name == "tiny"
    assert loaded.n_evaluated == 2
    assert loaded.mean_accuracy == report.mean_accuracy
    with pytest.raises(EvaluationError, match="missing summary field"):
        bad = tmp_path / "bad.json"
        bad.write_text("{}", encoding="utf-8")
        load_report_summary(bad)


def _report(name: str, mean: float) -> EvalReport:
    return EvalReport(name=name, n_evaluated=10, n_skipped=0, mean_accuracy=mean)


def test_compare_runs_table_and_formats() -> None:
    table = compare_runs([("full", _report("a", 0.525)), ("no_rationale", _report("b", 0.4917))])
    assert table.rows[0].variant == "full"
    assert table.rows[0].delta_pct == 0.0
    assert table.rows[1].delta_pct == pytest.approx(-3.33, abs=0.005)
    csv_text = table.to_csv()
    assert csv_text.splitlines()[0] == "variant,accuracy_pct,delta_pct"
    assert csv_text.splitlines()[1] == "full,52.5,+0.0"
    assert csv_text.splitlines()[2] == "no_rationale,49.2,-3.3"
    text = table.to_text()
    assert "full" in text and "no_rationale" in text and "-3.3" in text


def test_compare_runs_input_validation() -> None:
    with pytest.raises(EvaluationError, match="at least two"):
        compare_runs([("only", _report("a", 0.5))])
    with pytest.raises(EvaluationError, match="unique"):
        compare_runs([("x", _report("a", 0.5)), ("x", _report("b", 0.6))])
