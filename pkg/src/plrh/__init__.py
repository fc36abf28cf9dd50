"""Rationale-heuristic prompting pipeline for knowledge-based VQA.

Three stages: generate rationales for train samples, generate rationales for
test samples over similarity-selected in-context examples, then predict
answers with Context-Question-Rationale-Answer prompts. Includes soft-accuracy
evaluation, an append-only record store for resumable runs, and deterministic
mock backends for offline work.
"""

from .config import RunConfig, load_config
from .data_model import (
    Dataset,
    PredictionRecord,
    RationaleRecord,
    Sample,
    Violation,
    load_dataset,
    most_common_answer,
    read_features,
    validate_dataset,
    write_features_binary,
    write_features_text,
)
from .errors import PlrhError
from .evaluation import (
    EvalReport,
    compare_runs,
    evaluate,
    normalize_answer,
    score_sample,
)
from .llm_client import (
    CompletionBackend,
    CompletionRequest,
    CompletionResponse,
    HttpBackend,
    complete,
)
from .orchestrator import (
    RunSummary,
    StageOutcome,
    collect_predictions,
    evaluate_store,
    run_pipeline,
    run_stage1,
    run_stage2,
    run_stage3,
    run_sweep,
)
from .prompting import (
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
    render,
)
from .retrieval import (
    SelectionResult,
    cosine_similarity,
    select_examples,
    select_examples_oracle,
)
from .store import CacheKey, RecordStore

__version__ = "0.1.0"

__all__ = [
    "CacheKey",
    "CompletionBackend",
    "CompletionRequest",
    "CompletionResponse",
    "DEFAULT_STAGE1_HEAD",
    "DEFAULT_STAGE2_HEAD",
    "DEFAULT_STAGE3_HEAD",
    "Dataset",
    "EvalReport",
    "ExampleBlock",
    "HttpBackend",
    "PlrhError",
    "PredictionRecord",
    "Prompt",
    "PromptStage",
    "RationaleRecord",
    "RecordStore",
    "RunConfig",
    "RunSummary",
    "Sample",
    "SelectionResult",
    "StageOutcome",
    "Violation",
    "build_stage1",
    "build_stage2",
    "build_stage3",
    "collect_predictions",
    "compare_runs",
    "complete",
    "cosine_similarity",
    "evaluate",
    "evaluate_store",
    "load_config",
    "load_dataset",
    "most_common_answer",
    "normalize_answer",
    "parse_prompt",
    "read_features",
    "render",
    "run_pipeline",
    "run_stage1",
    "run_stage2",
    "run_stage3",
    "run_sweep",
    "score_sample",
    "select_examples",
    "select_examples_oracle",
    "validate_dataset",
    "write_features_binary",
    "write_features_text",
]
