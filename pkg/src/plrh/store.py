"""Append-only JSONL record store for rationales and predictions.

One directory holds three logs plus a run manifest:

    rationales.train.log   stage-1 records
    rationales.test.log    stage-2 records
    predictions.log        stage-3 records
    run_manifest           one JSON line per pipeline run

Lookups are exact-key: (sample_id, stage, prompt_hash, model_id). Later
writes for the same key win. Every put is flushed and fsynced before it
returns, so records survive a crash; a torn trailing line is skipped with a
warning on the next open. A lock file allows one writer at a time (readers
open with read_only=True and skip the lock).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

from .data_model import PredictionRecord, RationaleRecord
from .errors import StoreError, StoreLockedError
from .prompting import PromptStage

log = logging.getLogger(__name__)

TRAIN_RATIONALES_FILE = "rationales.train.log"
TEST_RATIONALES_FILE = "rationales.test.log"
PREDICTIONS_FILE = "predictions.log"
MANIFEST_FILE = "run_manifest"
LOCK_FILE = "store.lock"

_STAGE_FILES = {
    PromptStage.STAGE1_RATIONALE.value: TRAIN_RATIONALES_FILE,
    PromptStage.STAGE2_RATIONALE.value: TEST_RATIONALES_FILE,
    PromptStage.STAGE3_ANSWER.value: PREDICTIONS_FILE,
}

# RationaleRecord.stage value expected for each rationale prompt stage.
_RATIONALE_KIND = {
    PromptStage.STAGE1_RATIONALE.value: "train_rationale",
    PromptStage.STAGE2_RATIONALE.value: "test_rationale",
}


@dataclass(frozen=True)
class CacheKey:
    sample_id: str
    stage: str  # a PromptStage value
    prompt_hash: str
    model_id: str

    def to_dict(self) -> dict[str, str]:
        return {
            "sample_id": self.sample_id,
            "stage": self.stage,
            "prompt_hash": self.prompt_hash,
            "model_id": self.model_id,
        }

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> "CacheKey":
        return cls(
            sample_id=d["sample_id"],
            stage=d["stage"],
            prompt_hash=d["prompt_hash"],
            model_id=d["model_id"],
        )


Record = RationaleRecord | PredictionRecord


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


class RecordStore:
    """Writer/reader over one store directory. Use as a context manager."""

    def __init__(self, path: str | Path, read_only: bool = False) -> None:
        self.path = Path(path)
        self.read_only = read_only
        self.path.mkdir(parents=True, exist_ok=True)
        self._closed = False
        self._locked = False
        if not read_only:
            self._acquire_lock()
        # key -> (sequence, record); sequence preserves write recency across
        # keys so "latest prediction per sample" is well defined.
        self._index: dict[CacheKey, tuple[int, Record]] = {}
        self._seq = 0
        self._handles: dict[str, IO[str]] = {}
        self._load()
        if not read_only:
            for fname in _STAGE_FILES.values():
                self._handles[fname] = open(self.path / fname, "a", encoding="utf-8")

    # -- lifecycle ---------------------------------------------------------

    def __enter__(self) -> "RecordStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        for fh in self._handles.values():
            fh.close()
        self._handles.clear()
        if self._locked:
            try:
                (self.path / LOCK_FILE).unlink()
            except FileNotFoundError:
                pass
            self._locked = False

    def _acquire_lock(self) -> None:
        lock_path = self.path / LOCK_FILE
        for _ in range(2):
            try:
                fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                holder = self._lock_holder(lock_path)
                if holder is not None and not _pid_alive(holder):
                    log.warning("removing stale store lock held by dead pid %d", holder)
                    lock_path.unlink(missing_ok=True)
                    continue
                raise StoreLockedError(
                    f"store {self.path} is locked by pid {holder}; "
                    "close that process or remove the lock file"
                ) from None
            with os.fdopen(fd, "w") as fh:
                fh.write(str(os.getpid()))
            self._locked = True
            return
        raise StoreLockedError(f"could not acquire lock for store {self.path}")

    @staticmethod
    def _lock_holder(lock_path: Path) -> int | None:
        try:
            return int(lock_path.read_text().strip())
        except (OSError, ValueError):
            return None

    # -- persistence -------------------------------------------------------

    def _load(self) -> None:
        for fname in _STAGE_FILES.values():
            fpath = self.path / fname
            if not fpath.exists():
                continue
            is_prediction = fname == PREDICTIONS_FILE
            with open(fpath, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        row = json.loads(line)
                        key = CacheKey.from_dict(row["key"])
                        record: Record
                        if is_prediction:
                            record = PredictionRecord.from_dict(row["record"])
                        else:
                            record = RationaleRecord.from_dict(row["record"])
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        log.warning("%s:%d: skipping unreadable line (%s)", fpath, lineno, exc)
                        continue
                    self._seq += 1
                    self._index[key] = (self._seq, record)

    def _append(self, key: CacheKey, record: Record) -> None:
        fname = _STAGE_FILES[key.stage]
        fh = self._handles[fname]
        row = {"key": key.to_dict(), "record": record.to_dict()}
        fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
        fh.flush()
        os.fsync(fh.fileno())

    # -- operations --------------------------------------------------------

    def put(self, key: CacheKey, record: Record) -> None:
        if self.read_only:
            raise StoreError("store opened read-only")
        if self._closed:
            raise StoreError("store is closed")
        if key.stage not in _STAGE_FILES:
            raise StoreError(f"unknown stage {key.stage!r}")
        if record.sample_id != key.sample_id:
            raise StoreError(
                f"record sample_id {record.sample_id!r} does not match key {key.sample_id!r}"
            )
        if record.prompt_hash != key.prompt_hash:
            raise StoreError("record prompt_hash does not match key")
        if record.model_id != key.model_id:
            raise StoreError("record model_id does not match key")
        if key.stage == PromptStage.STAGE3_ANSWER.value:
            if not isinstance(record, PredictionRecord):
                raise StoreError("stage3_answer keys take PredictionRecord values")
            if not record.answer.strip():
                raise StoreError(f"refusing empty answer for sample {key.sample_id!r}")
        else:
            if not isinstance(record, RationaleRecord):
                raise StoreError(f"{key.stage} keys take RationaleRecord values")
            expected_kind = _RATIONALE_KIND[key.stage]
            if record.stage != expected_kind:
                raise StoreError(
                    f"record kind {record.stage!r} does not belong under {key.stage}"
                )
            if not record.rationale.strip():
                raise StoreError(f"refusing empty rationale for sample {key.sample_id!r}")
        self._append(key, record)
        self._seq += 1
        self._index[key] = (self._seq, record)

    def get(self, key: CacheKey) -> Record | None:
        entry = self._index.get(key)
        return entry[1] if entry is not None else None

    def __contains__(self, key: CacheKey) -> bool:
        return key in self._index

    def __len__(self) -> int:
        return len(self._index)

    def keys(self) -> Iterator[CacheKey]:
        return iter(self._index)

    def latest_predictions(self) -> list[PredictionRecord]:
        """Most recently written prediction per sample id, sorted by id."""
        newest: dict[str, tuple[int, PredictionRecord]] = {}
        for key, (seq, record) in self._index.items():
            if key.stage != PromptStage.STAGE3_ANSWER.value:
                continue
            assert isinstance(record, PredictionRecord)
            held = newest.get(key.sample_id)
            if held is None or seq > held[0]:
                newest[key.sample_id] = (seq, record)
        return [rec for _, (_, rec) in sorted(newest.items())]

    def compact(self) -> int:
        """Rewrite the logs keeping only the surviving record per key.

        Returns the number of dropped lines. get()/latest_predictions()
        results are unchanged: survivors are rewritten in original write
        order, so per-sample recency is preserved.
        """
        if self.read_only:
            raise StoreError("store opened read-only")
        if self._closed:
            raise StoreError("store is closed")
        dropped = 0
        by_file: dict[str, list[tuple[int, CacheKey, Record]]] = {
            fname: [] for fname in _STAGE_FILES.values()
        }
        for key, (seq, record) in self._index.items():
            by_file[_STAGE_FILES[key.stage]].append((seq, key, record))
        for fname, rows in by_file.items():
            fpath = self.path / fname
            self._handles[fname].close()
            kept_lines = [
                json.dumps(
                    {"key": key.to_dict(), "record": record.to_dict()},
                    ensure_ascii=False,
                    sort_keys=True,
                )
                for _, key, record in sorted(rows, key=lambda r: r[0])
            ]
            if fpath.exists():
                with open(fpath, "r", encoding="utf-8") as fh:
                    existing = sum(1 for line in fh if line.strip())
                dropped += existing - len(kept_lines)
            tmp = fpath.with_suffix(fpath.suffix + ".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write("".join(line + "\n" for line in kept_lines))
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, fpath)
            self._handles[fname] = open(fpath, "a", encoding="utf-8")
        return dropped

    def append_manifest(self, entry: dict[str, object]) -> None:
        if self.read_only:
            raise StoreError("store opened read-only")
        with open(self.path / MANIFEST_FILE, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def read_manifest(self) -> list[dict[str, object]]:
        fpath = self.path / MANIFEST_FILE
        if not fpath.exists():
            return []
        entries = []
        with open(fpath, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entries.append(json.loads(line))
        return entries
