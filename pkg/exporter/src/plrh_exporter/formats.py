"""Writers for the two file formats the plrh loader ingests.

The formats are the contract between the packages, so they are implemented
here from their byte layout rather than imported: samples as UTF-8 JSONL
(id/split/caption/question/answers per line) and features as the PLRHFV1
binary container. plrh's own reader is only touched by this package's test
suite, which proves the round trip.

Binary layout: magic b"PLRHFV1\n", little-endian u32 count, little-endian
u32 dim, then per record a little-endian u16 id length, the UTF-8 id bytes,
and dim little-endian float32 values.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ExportError

FEATURE_MAGIC = b"PLRHFV1\n"


def write_samples_jsonl(rows: Iterable[Mapping[str, object]], path: str | Path) -> int:
    """Write sample rows as JSONL, one object per line; returns row count.

    Rows pass through verbatim (no trimming, no re-encoding of answers);
    byte-exactness of captions is part of the contract.
    """
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            record = {
                "id": row["id"],
                "split": row["split"],
                "caption": row["caption"],
                "question": row["question"],
                "answers": list(row["answers"]),
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def write_features_binary(
    features: Sequence[tuple[str, np.ndarray]], path: str | Path
) -> int:
    """Write (id, vector) pairs in the binary container; returns row count."""
    if not features:
        raise ExportError("refusing to write a feature file with zero records")
    dim = int(np.asarray(features[0][1]).shape[0])
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", len(features), dim))
        for fid, vec in features:
            arr = np.asarray(vec, dtype="<f4")
            if arr.ndim != 1 or arr.shape[0] != dim:
                raise ExportError(f"feature for {fid!r} does not match dimension {dim}")
            id_bytes = fid.encode("utf-8")
            if not id_bytes or len(id_bytes) > 0xFFFF:
                raise ExportError(f"feature id {fid!r} must be 1..65535 UTF-8 bytes")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(arr.tobytes())
    return len(features)
