"""Dataset records and the two on-disk feature formats.

A dataset is a samples file (JSONL) joined against a features file, which is
either JSONL ({"id", "vector"}) or the binary layout:

    magic "PLRHFV1\\n", u32 count, u32 dim, then per record
    u16 id byte-length, UTF-8 id bytes, dim little-endian float32 values.

All integers are little-endian. Features are stored float32; similarity math
upstream promotes to float64.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .errors import DatasetError

FEATURE_MAGIC = b"PLRHFV1\n"

VALID_SPLITS = ("train", "test")


@dataclass(frozen=True, eq=False)
class Sample:
    """One captioned image/question pair with gold annotations."""

    id: str
    split: str
    caption: str
    question: str
    answers: tuple[str, ...]
    feature: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.id == other.id
            and self.split == other.split
            and self.caption == other.caption
            and self.question == other.question
            and self.answers == other.answers
            and np.array_equal(self.feature, other.feature)
        )

    def __hash__(self) -> int:
        return hash((self.id, self.split, self.caption, self.question, self.answers))


@dataclass(frozen=True)
class RationaleRecord:
    """A generated rationale, either for a train sample or a test sample."""

    sample_id: str
    stage: str  # "train_rationale" or "test_rationale"
    rationale: str
    prompt_hash: str
    model_id: str
    created_at: str
    # Test rationales remember which train samples sat in the prompt, in
    # prompt order, so the answer stage can reuse the selection verbatim.
    example_ids: tuple[str, ...] | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "sample_id": self.sample_id,
            "stage": self.stage,
            "rationale": self.rationale,
            "prompt_hash": self.prompt_hash,
            "model_id": self.model_id,
            "created_at": self.created_at,
        }
        if self.example_ids is not None:
            d["example_ids"] = list(self.example_ids)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RationaleRecord":
        ids = d.get("example_ids")
        return cls(
            sample_id=d["sample_id"],
            stage=d["stage"],
            rationale=d["rationale"],
            prompt_hash=d["prompt_hash"],
            model_id=d["model_id"],
            created_at=d["created_at"],
            example_ids=None if ids is None else tuple(ids),
        )


@dataclass(frozen=True)
class PredictionRecord:
    """A final answer for one test sample.

    Carries no timestamp on purpose: prediction logs from two identical runs
    must match byte for byte.
    """

    sample_id: str
    answer: str
    example_ids: tuple[str, ...]
    prompt_hash: str
    model_id: str
    rationale_used: str | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "sample_id": self.sample_id,
            "answer": self.answer,
            "example_ids": list(self.example_ids),
            "prompt_hash": self.prompt_hash,
            "model_id": self.model_id,
        }
        if self.rationale_used is not None:
            d["rationale_used"] = self.rationale_used
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PredictionRecord":
        return cls(
            sample_id=d["sample_id"],
            answer=d["answer"],
            example_ids=tuple(d["example_ids"]),
            prompt_hash=d["prompt_hash"],
            model_id=d["model_id"],
            rationale_used=d.get("rationale_used"),
        )


@dataclass(frozen=True)
class Violation:
    """One validation finding; sample_id is None for dataset-level findings."""

    sample_id: str | None
    rule: str
    message: str

    def __str__(self) -> str:
        who = self.sample_id if self.sample_id is not None else "<dataset>"
        return f"{who}: [{self.rule}] {self.message}"


@dataclass(frozen=True, eq=False)
class Dataset:
    """An id-indexed collection of samples sharing one feature dimension."""

    name: str
    samples: tuple[Sample, ...]
    feature_dim: int
    _by_id: dict[str, Sample] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        index: dict[str, Sample] = {}
        for s in self.samples:
            if s.id in index:
                raise DatasetError(f"duplicate sample id {s.id!r}")
            index[s.id] = s
        object.__setattr__(self, "_by_id", index)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def get(self, sample_id: str) -> Sample | None:
        return self._by_id.get(sample_id)

    def train_samples(self) -> list[Sample]:
        return sorted((s for s in self.samples if s.split == "train"), key=lambda s: s.id)

    def test_samples(self) -> list[Sample]:
        return sorted((s for s in self.samples if s.split == "test"), key=lambda s: s.id)

    def content_hash(self) -> str:
        """Order-independent digest of every sample, including feature bytes."""
        h = hashlib.sha256()
        h.update(str(self.feature_dim).encode("utf-8"))
        for s in sorted(self.samples, key=lambda s: s.id):
            payload = json.dumps(
                {
                    "id": s.id,
                    "split": s.split,
                    "caption": s.caption,
                    "question": s.question,
                    "answers": list(s.answers),
                },
                sort_keys=True,
                ensure_ascii=False,
            )
            h.update(payload.encode("utf-8"))
            h.update(np.asarray(s.feature, dtype="<f4").tobytes())
        return h.hexdigest()


def most_common_answer(answers: Sequence[str]) -> str:
    """Most frequent annotation; ties resolve to the earliest first occurrence."""
    if not answers:
        raise DatasetError("cannot pick an answer from an empty annotation list")
    counts = Counter(answers)
    best = max(counts.values())
    for a in answers:
        if counts[a] == best:
            return a
    raise AssertionError("unreachable")


def _require(d: dict[str, Any], key: str, where: str) -> Any:
    if key not in d:
        raise DatasetError(f"{where}: missing field {key!r}")
    return d[key]


def _read_jsonl(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def read_features_text(path: str | Path) -> dict[str, np.ndarray]:
    """Read JSONL feature rows. All vectors must share one dimension."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    dim: int | None = None
    for lineno, obj in _read_jsonl(path):
        where = f"{path}:{lineno}"
        fid = _require(obj, "id", where)
        vec = _require(obj, "vector", where)
        if not isinstance(fid, str) or not fid:
            raise DatasetError(f"{where}: feature id must be a non-empty string")
        if fid in out:
            raise DatasetError(f"{where}: duplicate feature id {fid!r}")
        if not isinstance(vec, list) or not vec:
            raise DatasetError(f"{where}: vector must be a non-empty list (id {fid!r})")
        try:
            arr = np.asarray(vec, dtype=np.float32)
        except (TypeError, ValueError) as exc:
            raise DatasetError(f"{where}: non-numeric vector for id {fid!r}") from exc
        if arr.ndim != 1:
            raise DatasetError(f"{where}: vector for id {fid!r} is not one-dimensional")
        if dim is None:
            dim = arr.shape[0]
        elif arr.shape[0] != dim:
            raise DatasetError(
                f"{where}: id {fid!r} has dimension {arr.shape[0]}, expected {dim}"
            )
        out[fid] = arr
    return out


def read_features_binary(path: str | Path) -> dict[str, np.ndarray]:
    """Read the binary feature layout described in the module docstring."""
    path = Path(path)
    data = Path(path).read_bytes()
    if len(data) < len(FEATURE_MAGIC) or not data.startswith(FEATURE_MAGIC):
        raise DatasetError(f"{path}: bad magic, not a binary feature file")
    off = len(FEATURE_MAGIC)
    if len(data) < off + 8:
        raise DatasetError(f"{path}: truncated header")
    count, dim = struct.unpack_from("<II", data, off)
    off += 8
    if dim == 0:
        raise DatasetError(f"{path}: feature dimension must be positive")
    out: dict[str, np.ndarray] = {}
    for idx in range(count):
        if len(data) < off + 2:
            raise DatasetError(f"{path}: truncated at record {idx} (id length)")
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if id_len == 0:
            raise DatasetError(f"{path}: record {idx} has an empty id")
        if len(data) < off + id_len:
            raise DatasetError(f"{path}: truncated at record {idx} (id bytes)")
        try:
            fid = data[off : off + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DatasetError(f"{path}: record {idx} id is not valid UTF-8") from exc
        off += id_len
        vec_bytes = 4 * dim
        if len(data) < off + vec_bytes:
            raise DatasetError(f"{path}: truncated at record {idx} (vector, id {fid!r})")
        arr = np.frombuffer(data, dtype="<f4", count=dim, offset=off).copy()
        off += vec_bytes
        if fid in out:
            raise DatasetError(f"{path}: duplicate feature id {fid!r}")
        out[fid] = arr
    if off != len(data):
        raise DatasetError(f"{path}: {len(data) - off} trailing bytes after {count} records")
    return out


def read_features(path: str | Path) -> dict[str, np.ndarray]:
    """Read either feature format, sniffing the binary magic."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(FEATURE_MAGIC))
    if head == FEATURE_MAGIC:
        return read_features_binary(path)
    return read_features_text(path)


def write_features_text(path: str | Path, features: Iterable[tuple[str, np.ndarray]]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for fid, vec in features:
            arr = np.asarray(vec, dtype=np.float32)
            row = {"id": fid, "vector": [float(x) for x in arr]}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def write_features_binary(path: str | Path, features: Iterable[tuple[str, np.ndarray]]) -> int:
    items = [(fid, np.asarray(vec, dtype="<f4")) for fid, vec in features]
    if not items:
        raise DatasetError("refusing to write a binary feature file with zero records")
    dim = items[0][1].shape[0]
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", len(items), dim))
        for fid, arr in items:
            if arr.ndim != 1 or arr.shape[0] != dim:
                raise DatasetError(f"feature id {fid!r} does not match dimension {dim}")
            id_bytes = fid.encode("utf-8")
            if not id_bytes:
                raise DatasetError("feature ids must be non-empty")
            if len(id_bytes) > 0xFFFF:
                raise DatasetError(f"feature id {fid!r} exceeds 65535 UTF-8 bytes")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(arr.tobytes())
    return len(items)


def load_dataset(
    samples_path: str | Path,
    features_path: str | Path,
    name: str = "",
) -> Dataset:
    """Join a samples file against a features file into a Dataset.

    Every sample id must have a feature row; extra feature rows are ignored
    so one feature file can serve several sample subsets.
    """
    samples_path = Path(samples_path)
    features_path = Path(features_path)
    features = read_features(features_path)

    dim: int | None = None
    for fid, vec in features.items():
        if dim is None:
            dim = int(vec.shape[0])
        elif vec.shape[0] != dim:
            raise DatasetError(f"{features_path}: id {fid!r} breaks the shared dimension {dim}")

    samples: list[Sample] = []
    seen: dict[str, int] = {}
    for lineno, obj in _read_jsonl(samples_path):
        where = f"{samples_path}:{lineno}"
        sid = _require(obj, "id", where)
        split = _require(obj, "split", where)
        caption = _require(obj, "caption", where)
        question = _require(obj, "question", where)
        answers = _require(obj, "answers", where)
        if not isinstance(sid, str) or not sid:
            raise DatasetError(f"{where}: sample id must be a non-empty string")
        if sid in seen:
            raise DatasetError(
                f"{where}: duplicate sample id {sid!r} (first seen on line {seen[sid]})"
            )
        seen[sid] = lineno
        if split not in VALID_SPLITS:
            raise DatasetError(f"{where}: id {sid!r} has unknown split {split!r}")
        if not isinstance(caption, str) or not isinstance(question, str):
            raise DatasetError(f"{where}: id {sid!r} caption and question must be strings")
        if not isinstance(answers, list) or any(not isinstance(a, str) for a in answers):
            raise DatasetError(f"{where}: id {sid!r} answers must be a list of strings")
        if sid not in features:
            raise DatasetError(f"{features_path}: no feature vector for sample id {sid!r}")
        vec = features[sid]
        if not np.all(np.isfinite(vec)):
            raise DatasetError(f"feature vector for id {sid!r} has non-finite values")
        if float(np.linalg.norm(vec.astype(np.float64))) == 0.0:
            raise DatasetError(f"feature vector for id {sid!r} has zero norm")
        samples.append(
            Sample(
                id=sid,
                split=split,
                caption=caption,
                question=question,
                answers=tuple(answers),
                feature=vec,
            )
        )
    if not samples:
        raise DatasetError(f"{samples_path}: no samples found")
    assert dim is not None
    return Dataset(name=name or samples_path.stem, samples=tuple(samples), feature_dim=dim)


def validate_dataset(dataset: Dataset) -> list[Violation]:
    """Content-level checks beyond what load_dataset enforces structurally."""
    violations: list[Violation] = []

    def bad(sid: str | None, rule: str, message: str) -> None:
        violations.append(Violation(sample_id=sid, rule=rule, message=message))

    if not dataset.train_samples():
        bad(None, "empty-split", "dataset has no train samples")

    for s in sorted(dataset.samples, key=lambda s: s.id):
        if not s.id.strip():
            bad(s.id, "blank-id", "sample id is empty or whitespace")
        if s.split not in VALID_SPLITS:
            bad(s.id, "bad-split", f"unknown split {s.split!r}")
        if not s.caption.strip():
            bad(s.id, "blank-caption", "caption is empty")
        if not s.question.strip():
            bad(s.id, "blank-question", "question is empty")
        if s.split == "train" and not s.answers:
            bad(s.id, "unanswered-train", "train sample has no annotations")
        for i, a in enumerate(s.answers):
            if not a.strip():
                bad(s.id, "blank-answer", f"annotation {i} is empty after trimming")
        arr = np.asarray(s.feature, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != dataset.feature_dim:
            bad(s.id, "bad-dimension", f"feature shape {arr.shape} != ({dataset.feature_dim},)")
        elif not np.all(np.isfinite(arr)):
            bad(s.id, "non-finite-feature", "feature vector has NaN or infinity")
        elif float(np.linalg.norm(arr)) == 0.0:
            bad(s.id, "zero-feature", "feature vector has zero norm")
    return violations
