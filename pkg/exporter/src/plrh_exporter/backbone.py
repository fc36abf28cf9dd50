"""Fused-feature backbone: image thumbnail plus hashed question tokens,
pushed through a seed-fixed random projection.

The projection stands in for a trained vision/question encoder. What
matters downstream is the interface: a deterministic float32 vector per
(image, question) pair whose dimension is fixed by the checkpoint. The
checkpoint is a small JSON record (name, seed, dims, checksum) so runs can
verify they are using the matrix they think they are.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import CheckpointError

THUMB_SIDE = 8
QUESTION_BUCKETS = 64
INPUT_DIM = THUMB_SIDE * THUMB_SIDE + QUESTION_BUCKETS

BACKBONE_NAME = "toy-random-projection-v1"


def _checksum(name: str, seed: int, input_dim: int, output_dim: int) -> str:
    canon = json.dumps(
        {"input_dim": input_dim, "name": name, "output_dim": output_dim, "seed": seed},
        sort_keys=True,
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_toy_checkpoint(path: str | Path, output_dim: int = 32, seed: int = 7) -> Path:
    """Write a checkpoint record; the matrix itself is re-derived from seed."""
    if output_dim < 1:
        raise CheckpointError(f"output_dim must be positive, got {output_dim}")
    path = Path(path)
    record = {
        "name": BACKBONE_NAME,
        "seed": seed,
        "input_dim": INPUT_DIM,
        "output_dim": output_dim,
        "checksum": _checksum(BACKBONE_NAME, seed, INPUT_DIM, output_dim),
    }
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


@dataclass(frozen=True)
class Backbone:
    name: str
    seed: int
    output_dim: int
    checksum: str
    matrix: np.ndarray  # (INPUT_DIM, output_dim), float64

    def embed(self, image: Image.Image, question: str) -> np.ndarray:
        """Deterministic float32 feature for one image/question pair."""
        thumb = image.convert("L").resize((THUMB_SIDE, THUMB_SIDE), Image.NEAREST)
        pixels = np.asarray(thumb, dtype=np.float64).reshape(-1) / 255.0

        buckets = np.zeros(QUESTION_BUCKETS, dtype=np.float64)
        for token in question.lower().split():
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            index = int.from_bytes(digest[:4], "little") % QUESTION_BUCKETS
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            buckets[index] += sign

        fused = np.concatenate([pixels, buckets]) @ self.matrix
        return fused.astype("<f4")


def load_checkpoint(path: str | Path) -> Backbone:
    """Load and verify a checkpoint record, then rebuild its matrix."""
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {exc}") from exc

    for key in ("name", "seed", "input_dim", "output_dim", "checksum"):
        if key not in record:
            raise CheckpointError(f"checkpoint {path} is missing {key!r}")
    if record["input_dim"] != INPUT_DIM:
        raise CheckpointError(
            f"checkpoint {path} expects input_dim {record['input_dim']}, "
            f"this backbone produces {INPUT_DIM}"
        )
    expect = _checksum(record["name"], record["seed"], record["input_dim"], record["output_dim"])
    if record["checksum"] != expect:
        raise CheckpointError(f"checkpoint {path} fails its checksum; refusing to embed")

    rng = np.random.default_rng(record["seed"])
    matrix = rng.normal(size=(INPUT_DIM, record["output_dim"]))
    return Backbone(
        name=record["name"],
        seed=record["seed"],
        output_dim=record["output_dim"],
        checksum=record["checksum"],
        matrix=matrix,
    )
