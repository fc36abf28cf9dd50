"""Command-line interface.

Subcommands: validate, stage1, stage2, stage3, run, sweep, evaluate,
compare, select-debug. Exit codes: 0 full success, 1 partial failure
(per-sample failures, validation findings), 2 configuration or data errors
(argparse uses 2 for usage errors as well).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .config import RunConfig, load_config
from .data_model import load_dataset, validate_dataset
from .errors import PlrhError
from .evaluation import (
    compare_runs,
    load_report_summary,
    write_report,
)
from .orchestrator import (
    RunSummary,
    SWEEP_VARIANTS,
    evaluate_store,
    load_seeds,
    make_backend,
    run_pipeline,
    run_stage1,
    run_stage2,
    run_stage3,
    run_sweep,
)
from .retrieval import select_examples, select_examples_oracle
from .store import RecordStore


def _parse_set_args(pairs: Sequence[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        key, eq, value = pair.partition("=")
        if not eq or not key.strip():
            raise PlrhError(f"--set expects KEY=VALUE, got {pair!r}")
        out[key.strip()] = value
    return out


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = _parse_set_args(args.set or [])
    cfg = load_config(args.config, overrides)
    if getattr(args, "dry_run", False):
        cfg = cfg.replace(dry_run=True)
    cfg.validate()
    return cfg


def _emit(args: argparse.Namespace, payload: dict[str, object], text: str) -> None:
    if args.json_lines:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    else:
        print(text)


def _report_summary(args: argparse.Namespace, summary: RunSummary) -> int:
    for outcome in summary.outcomes:
        payload: dict[str, object] = {
            "stage": outcome.stage,
            "planned": outcome.planned,
            "written": outcome.written,
            "cached": outcome.cached,
            "blocked": outcome.blocked,
            "skipped": outcome.skipped,
            "failed": len(outcome.failures),
        }
        _emit(args, payload, outcome.describe())
    for stage, sid, msg in summary.failures():
        _emit(
            args,
            {"failure": {"stage": stage, "sample_id": sid, "error": msg}},
            f"FAILED {stage} {sid}: {msg}",
        )
    _emit(
        args,
        {"backend_calls": summary.backend_calls, "dry_run": summary.dry_run},
        f"backend calls: {summary.backend_calls}",
    )
    return 0 if not summary.failures() else 1


def _cmd_validate(args: argparse.Namespace) -> int:
    if args.config:
        cfg = _config_from_args(args)
        samples, features, name = cfg.samples_path, cfg.features_path, cfg.dataset_name
    else:
        if not args.samples or not args.features:
            raise PlrhError("validate needs --config or both --samples and --features")
        samples, features, name = args.samples, args.features, ""
    dataset = load_dataset(samples, features, name)
    violations = validate_dataset(dataset)
    for v in violations:
        _emit(
            args,
            {"sample_id": v.sample_id, "rule": v.rule, "message": v.message},
            str(v),
        )
    _emit(
        args,
        {
            "samples": len(dataset),
            "feature_dim": dataset.feature_dim,
            "violations": len(violations),
        },
        f"{len(dataset)} samples, feature dim {dataset.feature_dim}, "
        f"{len(violations)} violation(s)",
    )
    return 0 if not violations else 1


def _run_single_stage(args: argparse.Namespace, stage: str) -> int:
    cfg = _config_from_args(args)
    from .orchestrator import _load_and_check_dataset  # shared loader with run

    dataset = _load_and_check_dataset(cfg)
    seeds = load_seeds(cfg)
    backend = make_backend(cfg, dataset)
    with RecordStore(cfg.store_path) as store:
        if stage == "stage1":
            outcome = run_stage1(dataset, seeds, cfg, backend, store)
        elif stage == "stage2":
            outcome = run_stage2(dataset, cfg, backend, store, seeds=seeds)
        else:
            outcome = run_stage3(dataset, cfg, backend, store, seeds=seeds)
    _emit(
        args,
        {
            "stage": outcome.stage,
            "planned": outcome.planned,
            "written": outcome.written,
            "cached": outcome.cached,
            "blocked": outcome.blocked,
            "failed": len(outcome.failures),
            "backend_calls": backend.call_count,
        },
        outcome.describe(),
    )
    for sid, msg in outcome.failures:
        _emit(
            args,
            {"failure": {"stage": outcome.stage, "sample_id": sid, "error": msg}},
            f"FAILED {outcome.stage} {sid}: {msg}",
        )
    return 0 if outcome.ok() else 1


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    summary = run_pipeline(cfg)
    return _report_summary(args, summary)


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    try:
        n_values = [int(x) for x in args.n_values.split(",") if x.strip()]
    except ValueError as exc:
        raise PlrhError(f"--n-values must be comma-separated integers: {exc}") from exc
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    rows, csv_path = run_sweep(cfg, n_values, variants)
    for row in rows:
        _emit(
            args,
            {"n": row.n, "variant": row.variant, "accuracy": row.accuracy},
            f"n={row.n} variant={row.variant} accuracy={row.accuracy:.6f}",
        )
    if not cfg.dry_run:
        _emit(args, {"csv": str(csv_path)}, f"wrote {csv_path}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    report = evaluate_store(cfg, name=args.name or cfg.dataset_name)
    if args.out_dir:
        per_sample, summary = write_report(report, args.out_dir)
        _emit(
            args,
            {"per_sample": str(per_sample), "summary": str(summary)},
            f"wrote {per_sample} and {summary}",
        )
    _emit(args, report.summary_dict(), report.summary_text())
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    labeled = []
    for spec_arg in args.report:
        label, eq, path = spec_arg.partition("=")
        if not eq or not label.strip():
            raise PlrhError(f"--report expects LABEL=SUMMARY_PATH, got {spec_arg!r}")
        labeled.append((label.strip(), load_report_summary(path)))
    table = compare_runs(labeled)
    if args.csv:
        Path(args.csv).write_text(table.to_csv(), encoding="utf-8")
    if args.json_lines:
        for row in table.rows:
            print(
                json.dumps(
                    {
                        "variant": row.variant,
                        "accuracy_pct": row.accuracy_pct,
                        "delta_pct": row.delta_pct,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
    else:
        print(table.to_text(), end="")
    return 0


def _cmd_select_debug(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    dataset = load_dataset(cfg.samples_path, cfg.features_path, cfg.dataset_name)
    sample = dataset.get(args.query_id)
    if sample is None:
        raise PlrhError(f"unknown sample id {args.query_id!r}")
    n = args.n if args.n is not None else cfg.n_examples
    result = select_examples(sample.feature, dataset, n, query_id=sample.id)
    oracle = select_examples_oracle(sample.feature, dataset, n, query_id=sample.id)
    agrees = result.ids() == oracle.ids()
    for rank, (sid, score) in enumerate(result.selected, start=1):
        _emit(
            args,
            {"rank": rank, "sample_id": sid, "score": score},
            f"{rank:3d}  {sid}  {score:.12f}",
        )
    _emit(
        args,
        {"oracle_agrees": agrees},
        f"oracle agrees: {'yes' if agrees else 'NO'}",
    )
    return 0 if agrees else 1


def _add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="path to a key = value config file")
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a config key; may repeat",
    )
    p.add_argument("--dry-run", action="store_true", help="plan without backend calls or writes")
    p.add_argument(
        "--json-lines",
        action="store_true",
        help="emit one JSON object per output line instead of text",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plrh",
        description=(
            "Three-stage rationale pipeline: generate train rationales, generate "
            "test rationales over selected examples, predict answers."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load a dataset and report content violations")
    _add_common(p, config_required=False)
    p.add_argument("--samples", help="samples JSONL (alternative to --config)")
    p.add_argument("--features", help="features file (alternative to --config)")
    p.set_defaults(func=_cmd_validate)

    for stage in ("stage1", "stage2", "stage3"):
        p = sub.add_parser(stage, help=f"run {stage} only")
        _add_common(p)
        p.set_defaults(func=lambda a, s=stage: _run_single_stage(a, s))

    p = sub.add_parser("run", help="run all stages end to end")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run the pipeline over a grid of n values")
    _add_common(p)
    p.add_argument("--n-values", default="1,2,4,6,8", help="comma-separated n values")
    p.add_argument(
        "--variants",
        default="full",
        help=f"comma-separated subset of {','.join(SWEEP_VARIANTS)}",
    )
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("evaluate", help="score the store's predictions against gold answers")
    _add_common(p)
    p.add_argument("--name", default="", help="report name")
    p.add_argument("--out-dir", help="also write per-sample JSONL and a summary JSON here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="tabulate evaluation summaries against a baseline")
    p.add_argument(
        "--report",
        action="append",
        required=True,
        metavar="LABEL=SUMMARY_PATH",
        help="labeled summary JSON; first one is the baseline; repeat 2+ times",
    )
    p.add_argument("--csv", help="also write the table as CSV here")
    p.add_argument("--json-lines", action="store_true")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("select-debug", help="dump example selection for one sample")
    _add_common(p)
    p.add_argument("--query-id", required=True, help="sample id to select examples for")
    p.add_argument("--n", type=int, help="override n_examples for this dump")
    p.set_defaults(func=_cmd_select_debug)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PlrhError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
