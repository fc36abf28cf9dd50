"""Export operations: annotations to a samples file, images to features.

Both walk the split's annotation rows in sorted-id order, so reruns write
byte-identical files. Manifests carry no timestamps for the same reason.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .backbone import Backbone, load_checkpoint
from .errors import AnnotationError, ExportError
from .formats import write_features_binary, write_samples_jsonl

_SPLIT_CHOICES = ("train", "test", "all")
_REQUIRED_FIELDS = ("id", "split", "caption", "question", "answers")


@dataclass(frozen=True)
class ExportManifest:
    kind: str  # "samples" or "features"
    split: str
    records_written: int
    output_path: str
    feature_dim: int | None = None
    backbone_name: str | None = None
    checkpoint_checksum: str | None = None
    skipped_ids: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict[str, object]:
        out: dict[str, object] = {
            "kind": self.kind,
            "split": self.split,
            "records_written": self.records_written,
            "output_path": self.output_path,
            "skipped_ids": list(self.skipped_ids),
        }
        if self.feature_dim is not None:
            out["feature_dim"] = self.feature_dim
        if self.backbone_name is not None:
            out["backbone_name"] = self.backbone_name
        if self.checkpoint_checksum is not None:
            out["checkpoint_checksum"] = self.checkpoint_checksum
        return out

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_text(), encoding="utf-8")
        return path


def _read_annotations(annotations_path: str | Path, split: str) -> list[dict[str, object]]:
    if split not in _SPLIT_CHOICES:
        raise ExportError(f"split must be one of {_SPLIT_CHOICES}, got {split!r}")
    path = Path(annotations_path)
    rows: dict[str, dict[str, object]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            missing = [f for f in _REQUIRED_FIELDS if f not in row]
            if missing:
                raise AnnotationError(
                    f"{path}:{lineno}: annotation row missing {', '.join(missing)}"
                )
            sid = row["id"]
            if not isinstance(sid, str) or not sid.strip():
                raise AnnotationError(f"{path}:{lineno}: blank sample id")
            if sid in rows:
                raise AnnotationError(f"{path}:{lineno}: duplicate sample id {sid!r}")
            rows[sid] = row
    selected = [
        row for row in rows.values() if split == "all" or row["split"] == split
    ]
    selected.sort(key=lambda r: r["id"])
    return selected


def export_samples(
    annotations_path: str | Path,
    out_path: str | Path,
    split: str = "all",
) -> ExportManifest:
    """Write the samples JSONL for one split (or both); returns its manifest."""
    rows = _read_annotations(annotations_path, split)
    if not rows:
        raise AnnotationError(f"no annotation rows for split {split!r}")
    for row in rows:
        answers = row["answers"]
        if not isinstance(answers, list):
            raise AnnotationError(f"sample {row['id']!r} has a non-list answers field")
        if row["split"] == "train" and not answers:
            raise AnnotationError(f"train sample {row['id']!r} has no annotations")
    written = write_samples_jsonl(rows, out_path)
    return ExportManifest(
        kind="samples",
        split=split,
        records_written=written,
        output_path=str(out_path),
    )


def export_features(
    annotations_path: str | Path,
    images_dir: str | Path,
    checkpoint_path: str | Path,
    out_path: str | Path,
    split: str = "all",
) -> ExportManifest:
    """Embed every listed image and write the binary feature file.

    Images that fail to open or decode are skipped and listed in the
    manifest; a sample with no image file at all counts as the same kind of
    skip. Everything else is embedded with the checkpoint's backbone.
    """
    backbone: Backbone = load_checkpoint(checkpoint_path)
    rows = _read_annotations(annotations_path, split)
    if not rows:
        raise AnnotationError(f"no annotation rows for split {split!r}")
    images_dir = Path(images_dir)

    features = []
    skipped: list[str] = []
    for row in rows:
        sid = str(row["id"])
        image_path = images_dir / f"{sid}.png"
        try:
            with Image.open(image_path) as img:
                img.load()
                vector = backbone.embed(img, str(row["question"]))
        except (FileNotFoundError, UnidentifiedImageError, OSError):
            skipped.append(sid)
            continue
        features.append((sid, vector))
    if not features:
        raise ExportError(f"every image in split {split!r} failed to decode")

    written = write_features_binary(features, out_path)
    return ExportManifest(
        kind="features",
        split=split,
        records_written=written,
        output_path=str(out_path),
        feature_dim=backbone.output_dim,
        backbone_name=backbone.name,
        checkpoint_checksum=backbone.checksum,
        skipped_ids=tuple(skipped),
    )
