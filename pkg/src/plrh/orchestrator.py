"""Pipeline orchestration over the three prompt stages.

Per stage the flow is: build every prompt deterministically (samples sorted
by id), skip samples whose exact cache key already has a record, resolve the
rest through the backend in parallel, then write records back in sample-id
order so output logs are reproducible byte for byte.

Stage 2 and stage 3 rebuild upstream prompts to derive the exact cache keys
they depend on; a missing upstream record is a hard error outside dry-run
mode. Stage 3 reuses the example selection persisted by stage 2 verbatim.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata, resources
from pathlib import Path
from typing import Callable, Sequence

from .config import RunConfig
from .data_model import (
    Dataset,
    PredictionRecord,
    RationaleRecord,
    Sample,
    load_dataset,
    most_common_answer,
    validate_dataset,
)
from .errors import ConfigError, DatasetError, LLMClientError, StageDependencyError
from .evaluation import EvalReport, evaluate
from .llm_client import (
    CompletionBackend,
    CompletionRequest,
    CompletionResponse,
    HttpBackend,
    complete,
    truncate_at_stop,
)
from .mocks import (
    ConstantMockBackend,
    DatasetOracleMockBackend,
    EchoMockBackend,
    HashMockBackend,
    ScriptedMockBackend,
)
from .prompting import (
    ExampleBlock,
    Prompt,
    PromptStage,
    build_stage1,
    build_stage2,
    build_stage3,
    render,
)
from .retrieval import select_examples
from .store import CacheKey, RecordStore

MAX_RATIONALE_CHARS = 512

SWEEP_CSV_NAME = "sweep.csv"
SWEEP_VARIANTS = ("full", "no_rationale")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _package_version() -> str:
    try:
        return metadata.version("plrh")
    except metadata.PackageNotFoundError:
        return "unknown"


def load_seeds(cfg: RunConfig) -> tuple[ExampleBlock, ...]:
    """Seed examples for stage-1 prompts, from cfg.seeds_path or the packaged set."""
    if cfg.seeds_path:
        text = Path(cfg.seeds_path).read_text(encoding="utf-8")
        where = cfg.seeds_path
    else:
        text = resources.files("plrh").joinpath("data/stage1_seeds.jsonl").read_text(
            encoding="utf-8"
        )
        where = "packaged stage1_seeds.jsonl"
    seeds: list[ExampleBlock] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            seeds.append(
                ExampleBlock(
                    caption=row["caption"],
                    question=row["question"],
                    answer=row["answer"],
                    rationale=row["rationale"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"{where}:{lineno}: bad seed example: {exc}") from exc
    if not seeds:
        raise ConfigError(f"{where}: no seed examples found")
    return tuple(seeds)


def make_backend(cfg: RunConfig, dataset: Dataset | None = None) -> CompletionBackend:
    if cfg.backend == "http":
        return HttpBackend(
            cfg.backend_url,
            timeout_s=cfg.timeout_s,
            retries=cfg.retries,
            token=os.environ.get(cfg.token_env),
        )
    if cfg.backend == "scripted":
        return ScriptedMockBackend(cfg.mock_fixture_path)
    if cfg.backend == "echo":
        return EchoMockBackend()
    if cfg.backend == "constant":
        return ConstantMockBackend(cfg.constant_text)
    if cfg.backend == "hash":
        return HashMockBackend()
    if cfg.backend == "oracle":
        if dataset is None:
            raise ConfigError("oracle backend needs a loaded dataset")
        return DatasetOracleMockBackend(dataset)
    raise ConfigError(f"unknown backend {cfg.backend!r}")


def postprocess_rationale(text: str, stops: Sequence[str]) -> str:
    """One-line rationale: cut at stop artifacts, flatten whitespace, cap length."""
    artifacts = tuple(dict.fromkeys(tuple(stops) + ("===",)))
    cut, _ = truncate_at_stop(text, artifacts)
    flat = " ".join(cut.split())
    return flat[:MAX_RATIONALE_CHARS].strip()


def postprocess_answer(text: str) -> str:
    """First line of the completion with whitespace flattened."""
    return " ".join(text.split("\n", 1)[0].split())


@dataclass
class StageOutcome:
    stage: str
    planned: int = 0  # samples that needed a fresh completion
    written: int = 0
    cached: int = 0
    blocked: int = 0  # dry run only: upstream record not present yet
    skipped: bool = False  # stage not applicable for this config
    failures: list[tuple[str, str]] = field(default_factory=list)

    def ok(self) -> bool:
        return not self.failures

    def describe(self) -> str:
        if self.skipped:
            return f"{self.stage}: skipped"
        bits = [
            f"{self.stage}: planned {self.planned}",
            f"written {self.written}",
            f"cached {self.cached}",
        ]
        if self.blocked:
            bits.append(f"blocked {self.blocked}")
        if self.failures:
            bits.append(f"failed {len(self.failures)}")
        return ", ".join(bits)


@dataclass
class RunSummary:
    dataset_name: str
    dataset_hash: str
    store_path: str
    model_id: str
    dry_run: bool
    backend_calls: int
    outcomes: list[StageOutcome]

    def failures(self) -> list[tuple[str, str, str]]:
        return [
            (o.stage, sid, msg) for o in self.outcomes for sid, msg in o.failures
        ]


def _stage1_prompt(cfg: RunConfig, seeds: Sequence[ExampleBlock], sample: Sample) -> Prompt:
    return build_stage1(
        cfg.stage1_head,
        seeds,
        sample.caption,
        sample.question,
        most_common_answer(sample.answers),
    )


def _ordered_example_ids(cfg: RunConfig, selected_ids: Sequence[str]) -> tuple[str, ...]:
    # Selection results arrive in descending similarity; ascending order puts
    # the best match last, right next to the input block.
    if cfg.example_order == "ascending_similarity":
        return tuple(reversed(selected_ids))
    return tuple(selected_ids)


def _request(cfg: RunConfig, stage: PromptStage, prompt_text: str) -> CompletionRequest:
    per_stage = {
        PromptStage.STAGE1_RATIONALE: (cfg.stage1_max_new_tokens, cfg.stage1_stop),
        PromptStage.STAGE2_RATIONALE: (cfg.stage2_max_new_tokens, cfg.stage2_stop),
        PromptStage.STAGE3_ANSWER: (cfg.stage3_max_new_tokens, cfg.stage3_stop),
    }
    max_new_tokens, stops = per_stage[stage]
    return CompletionRequest(
        prompt_text=prompt_text,
        max_new_tokens=max_new_tokens,
        temperature=cfg.temperature,
        stop_sequences=tuple(stops),
        model_id=cfg.model_id,
    )


def _resolve_many(
    backend: CompletionBackend,
    cfg: RunConfig,
    stage: PromptStage,
    pending: Sequence[tuple[Sample, Prompt]],
) -> dict[str, CompletionResponse | LLMClientError]:
    """Resolve completions in parallel; per-sample failures become values."""
    results: dict[str, CompletionResponse | LLMClientError] = {}
    if not pending:
        return results

    def one(item: tuple[Sample, Prompt]) -> tuple[str, CompletionResponse | LLMClientError]:
        sample, prompt = item
        req = _request(cfg, stage, render(prompt))
        try:
            return sample.id, complete(backend, req)
        except LLMClientError as exc:
            return sample.id, exc

    workers = max(1, min(cfg.concurrency, len(pending)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for sid, res in pool.map(one, pending):
            results[sid] = res
    return results


def _train_rationale_lookup(
    cfg: RunConfig,
    seeds: Sequence[ExampleBlock],
    store: RecordStore,
) -> Callable[[Sample], str | None]:
    """Exact-key lookup of a train sample's stage-1 rationale, memoized."""
    cache: dict[str, str | None] = {}

    def lookup(train_sample: Sample) -> str | None:
        if train_sample.id not in cache:
            prompt = _stage1_prompt(cfg, seeds, train_sample)
            key = CacheKey(
                sample_id=train_sample.id,
                stage=PromptStage.STAGE1_RATIONALE.value,
                prompt_hash=prompt.rendered_hash,
                model_id=cfg.model_id,
            )
            rec = store.get(key)
            cache[train_sample.id] = rec.rationale if isinstance(rec, RationaleRecord) else None
        return cache[train_sample.id]

    return lookup


def run_stage1(
    dataset: Dataset,
    seeds: Sequence[ExampleBlock],
    cfg: RunConfig,
    backend: CompletionBackend,
    store: RecordStore,
) -> StageOutcome:
    """Generate a rationale for every train sample."""
    outcome = StageOutcome(stage=PromptStage.STAGE1_RATIONALE.value)
    pending: list[tuple[Sample, Prompt, CacheKey]] = []
    for s in dataset.train_samples():
        prompt = _stage1_prompt(cfg, seeds, s)
        key = CacheKey(
            sample_id=s.id,
            stage=PromptStage.STAGE1_RATIONALE.value,
            prompt_hash=prompt.rendered_hash,
            model_id=cfg.model_id,
        )
        if key in store:
            outcome.cached += 1
            continue
        pending.append((s, prompt, key))
    outcome.planned = len(pending)
    if cfg.dry_run or not pending:
        return outcome

    results = _resolve_many(
        backend, cfg, PromptStage.STAGE1_RATIONALE, [(s, p) for s, p, _ in pending]
    )
    for s, prompt, key in pending:
        res = results[s.id]
        if isinstance(res, LLMClientError):
            outcome.failures.append((s.id, str(res)))
            continue
        rationale = postprocess_rationale(res.text, cfg.stage1_stop)
        if not rationale:
            outcome.failures.append((s.id, "empty rationale after post-processing"))
            continue
        store.put(
            key,
            RationaleRecord(
                sample_id=s.id,
                stage="train_rationale",
                rationale=rationale,
                prompt_hash=key.prompt_hash,
                model_id=cfg.model_id,
                created_at=utc_now_iso(),
            ),
        )
        outcome.written += 1
    return outcome


def _stage2_prompt_for(
    t: Sample,
    dataset: Dataset,
    cfg: RunConfig,
    lookup: Callable[[Sample], str | None],
) -> tuple[Prompt, tuple[str, ...]] | str:
    """Stage-2 prompt and its example ids, or the id of a missing dependency."""
    selection = select_examples(t.feature, dataset, cfg.n_examples, query_id=t.id)
    ordered = _ordered_example_ids(cfg, selection.ids())
    blocks: list[ExampleBlock] = []
    for tid in ordered:
        train_sample = dataset.get(tid)
        assert train_sample is not None
        rationale = lookup(train_sample)
        if rationale is None:
            return tid
        blocks.append(
            ExampleBlock(
                caption=train_sample.caption,
                question=train_sample.question,
                rationale=rationale,
            )
        )
    return build_stage2(cfg.stage2_head, blocks, t.caption, t.question), ordered


def run_stage2(
    dataset: Dataset,
    cfg: RunConfig,
    backend: CompletionBackend,
    store: RecordStore,
    seeds: Sequence[ExampleBlock] | None = None,
) -> StageOutcome:
    """Generate a rationale for every test sample using selected examples."""
    outcome = StageOutcome(stage=PromptStage.STAGE2_RATIONALE.value)
    seeds = seeds if seeds is not None else load_seeds(cfg)
    lookup = _train_rationale_lookup(cfg, seeds, store)
    pending: list[tuple[Sample, Prompt, CacheKey, tuple[str, ...]]] = []
    for t in dataset.test_samples():
        built = _stage2_prompt_for(t, dataset, cfg, lookup)
        if isinstance(built, str):
            if cfg.dry_run:
                outcome.blocked += 1
                continue
            raise StageDependencyError(
                f"test sample {t.id!r} needs a stage-1 rationale for train sample "
                f"{built!r}; run stage 1 to completion first"
            )
        prompt, ordered = built
        key = CacheKey(
            sample_id=t.id,
            stage=PromptStage.STAGE2_RATIONALE.value,
            prompt_hash=prompt.rendered_hash,
            model_id=cfg.model_id,
        )
        if key in store:
            outcome.cached += 1
            continue
        pending.append((t, prompt, key, ordered))
    outcome.planned = len(pending)
    if cfg.dry_run or not pending:
        return outcome

    results = _resolve_many(
        backend, cfg, PromptStage.STAGE2_RATIONALE, [(t, p) for t, p, _, _ in pending]
    )
    for t, prompt, key, ordered in pending:
        res = results[t.id]
        if isinstance(res, LLMClientError):
            outcome.failures.append((t.id, str(res)))
            continue
        rationale = postprocess_rationale(res.text, cfg.stage2_stop)
        if not rationale:
            outcome.failures.append((t.id, "empty rationale after post-processing"))
            continue
        store.put(
            key,
            RationaleRecord(
                sample_id=t.id,
                stage="test_rationale",
                rationale=rationale,
                prompt_hash=key.prompt_hash,
                model_id=cfg.model_id,
                created_at=utc_now_iso(),
                example_ids=ordered,
            ),
        )
        outcome.written += 1
    return outcome


def run_stage3(
    dataset: Dataset,
    cfg: RunConfig,
    backend: CompletionBackend,
    store: RecordStore,
    seeds: Sequence[ExampleBlock] | None = None,
) -> StageOutcome:
    """Predict an answer for every test sample.

    Outside ablation mode the example selection and rationale stored by
    stage 2 are reused verbatim; ablation mode selects examples itself and
    renders prompts with no rationale lines at all.
    """
    outcome = StageOutcome(stage=PromptStage.STAGE3_ANSWER.value)
    seeds = seeds if seeds is not None else load_seeds(cfg)
    lookup = _train_rationale_lookup(cfg, seeds, store)
    pending: list[tuple[Sample, Prompt, CacheKey, tuple[str, ...], str | None]] = []
    for t in dataset.test_samples():
        if cfg.ablation_no_rationale:
            selection = select_examples(t.feature, dataset, cfg.n_examples, query_id=t.id)
            example_ids = _ordered_example_ids(cfg, selection.ids())
            blocks = []
            for tid in example_ids:
                train_sample = dataset.get(tid)
                assert train_sample is not None
                blocks.append(
                    ExampleBlock(
                        caption=train_sample.caption,
                        question=train_sample.question,
                        answer=most_common_answer(train_sample.answers),
                    )
                )
            prompt = build_stage3(
                cfg.stage3_head,
                blocks,
                t.caption,
                t.question,
                ablation_no_rationale=True,
            )
            rationale_used: str | None = None
        else:
            built = _stage2_prompt_for(t, dataset, cfg, lookup)
            if isinstance(built, str):
                if cfg.dry_run:
                    outcome.blocked += 1
                    continue
                raise StageDependencyError(
                    f"test sample {t.id!r} needs a stage-1 rationale for train sample "
                    f"{built!r}; run stage 1 to completion first"
                )
            stage2_prompt, ordered = built
            stage2_key = CacheKey(
                sample_id=t.id,
                stage=PromptStage.STAGE2_RATIONALE.value,
                prompt_hash=stage2_prompt.rendered_hash,
                model_id=cfg.model_id,
            )
            rec2 = store.get(stage2_key)
            if not isinstance(rec2, RationaleRecord):
                if cfg.dry_run:
                    outcome.blocked += 1
                    continue
                raise StageDependencyError(
                    f"test sample {t.id!r} has no stage-2 rationale under the current "
                    "config; run stage 2 first"
                )
            example_ids = rec2.example_ids if rec2.example_ids is not None else ordered
            blocks = []
            for tid in example_ids:
                train_sample = dataset.get(tid)
                if train_sample is None:
                    raise StageDependencyError(
                        f"stage-2 record for {t.id!r} references unknown sample {tid!r}"
                    )
                rationale = lookup(train_sample)
                if rationale is None:
                    raise StageDependencyError(
                        f"test sample {t.id!r} needs a stage-1 rationale for train "
                        f"sample {tid!r}; run stage 1 to completion first"
                    )
                blocks.append(
                    ExampleBlock(
                        caption=train_sample.caption,
                        question=train_sample.question,
                        rationale=rationale,
                        answer=most_common_answer(train_sample.answers),
                    )
                )
            prompt = build_stage3(
                cfg.stage3_head,
                blocks,
                t.caption,
                t.question,
                rationale=rec2.rationale,
            )
            rationale_used = rec2.rationale
        key = CacheKey(
            sample_id=t.id,
            stage=PromptStage.STAGE3_ANSWER.value,
            prompt_hash=prompt.rendered_hash,
            model_id=cfg.model_id,
        )
        if key in store:
            outcome.cached += 1
            continue
        pending.append((t, prompt, key, example_ids, rationale_used))
    outcome.planned = len(pending)
    if cfg.dry_run or not pending:
        return outcome

    results = _resolve_many(
        backend, cfg, PromptStage.STAGE3_ANSWER, [(t, p) for t, p, _, _, _ in pending]
    )
    for t, prompt, key, example_ids, rationale_used in pending:
        res = results[t.id]
        if isinstance(res, LLMClientError):
            outcome.failures.append((t.id, str(res)))
            continue
        answer = postprocess_answer(res.text)
        if not answer:
            outcome.failures.append((t.id, "empty answer after post-processing"))
            continue
        store.put(
            key,
            PredictionRecord(
                sample_id=t.id,
                answer=answer,
                example_ids=example_ids,
                prompt_hash=key.prompt_hash,
                model_id=cfg.model_id,
                rationale_used=rationale_used,
            ),
        )
        outcome.written += 1
    return outcome


def _load_and_check_dataset(cfg: RunConfig) -> Dataset:
    if not cfg.samples_path or not cfg.features_path:
        raise ConfigError("samples_path and features_path are required")
    dataset = load_dataset(cfg.samples_path, cfg.features_path, cfg.dataset_name)
    _refuse_invalid(dataset)
    return dataset


def _refuse_invalid(dataset: Dataset) -> None:
    violations = validate_dataset(dataset)
    if violations:
        shown = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        raise DatasetError(f"dataset failed validation: {shown}{more}")


def run_pipeline(
    cfg: RunConfig,
    backend: CompletionBackend | None = None,
    dataset: Dataset | None = None,
) -> RunSummary:
    """Run stages 1 to 3 end to end, resuming from whatever is cached."""
    cfg.validate()
    if not cfg.store_path:
        raise ConfigError("store_path is required")
    if dataset is None:
        dataset = _load_and_check_dataset(cfg)
    else:
        _refuse_invalid(dataset)
    seeds = load_seeds(cfg)
    if backend is None:
        backend = make_backend(cfg, dataset)
    calls_before = backend.call_count

    with RecordStore(cfg.store_path) as store:
        if not cfg.dry_run:
            store.append_manifest(
                {
                    "started_at": utc_now_iso(),
                    "dataset_name": dataset.name,
                    "dataset_hash": dataset.content_hash(),
                    "package_version": _package_version(),
                    "config": cfg.snapshot(),
                }
            )
        outcome1 = run_stage1(dataset, seeds, cfg, backend, store)
        if cfg.ablation_no_rationale:
            outcome2 = StageOutcome(stage=PromptStage.STAGE2_RATIONALE.value, skipped=True)
        else:
            outcome2 = run_stage2(dataset, cfg, backend, store, seeds=seeds)
        outcome3 = run_stage3(dataset, cfg, backend, store, seeds=seeds)

    return RunSummary(
        dataset_name=dataset.name,
        dataset_hash=dataset.content_hash(),
        store_path=cfg.store_path,
        model_id=cfg.model_id,
        dry_run=cfg.dry_run,
        backend_calls=backend.call_count - calls_before,
        outcomes=[outcome1, outcome2, outcome3],
    )


def collect_predictions(store_path: str | Path) -> list[PredictionRecord]:
    """Latest prediction per sample from a store, without taking the lock."""
    store = RecordStore(store_path, read_only=True)
    try:
        return store.latest_predictions()
    finally:
        store.close()


@dataclass(frozen=True)
class SweepRow:
    n: int
    variant: str
    accuracy: float


def run_sweep(
    cfg: RunConfig,
    n_values: Sequence[int],
    variants: Sequence[str] = ("full",),
    backend: CompletionBackend | None = None,
) -> tuple[list[SweepRow], Path]:
    """Run the pipeline per (n, variant) cell and tabulate soft accuracy.

    Each cell gets its own store directory under cfg.store_path, so reruns
    hit their own caches and never cross-contaminate. The CSV lands at
    <store_path>/sweep.csv with header n,variant,accuracy.
    """
    cfg.validate()
    if not cfg.store_path:
        raise ConfigError("store_path is required")
    if not n_values:
        raise ConfigError("sweep needs at least one n value")
    if any(n < 1 for n in n_values):
        raise ConfigError("sweep n values must be positive")
    if len(set(n_values)) != len(n_values):
        raise ConfigError("sweep n values must be unique")
    for v in variants:
        if v not in SWEEP_VARIANTS:
            raise ConfigError(f"unknown sweep variant {v!r}; choices: {SWEEP_VARIANTS}")
    if not variants:
        raise ConfigError("sweep needs at least one variant")

    dataset = _load_and_check_dataset(cfg)
    if backend is None:
        backend = make_backend(cfg, dataset)

    root = Path(cfg.store_path)
    root.mkdir(parents=True, exist_ok=True)
    rows: list[SweepRow] = []
    for n in n_values:
        for variant in variants:
            sub = cfg.replace(
                n_examples=n,
                ablation_no_rationale=(variant == "no_rationale"),
                store_path=str(root / f"n{n}-{variant}"),
            )
            run_pipeline(sub, backend=backend, dataset=dataset)
            if cfg.dry_run:
                continue
            report = evaluate(
                collect_predictions(sub.store_path), dataset, name=f"n{n}-{variant}"
            )
            rows.append(SweepRow(n=n, variant=variant, accuracy=report.mean_accuracy))

    csv_path = root / SWEEP_CSV_NAME
    if not cfg.dry_run:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "variant", "accuracy"])
            for row in rows:
                writer.writerow([row.n, row.variant, f"{row.accuracy:.6f}"])
    return rows, csv_path


def evaluate_store(
    cfg: RunConfig,
    dataset: Dataset | None = None,
    name: str = "",
) -> EvalReport:
    """Score the latest predictions in cfg.store_path against the dataset."""
    if dataset is None:
        dataset = _load_and_check_dataset(cfg)
    predictions = collect_predictions(cfg.store_path)
    return evaluate(predictions, dataset, name=name or dataset.name)
