"""Seeded toy corpus: drawn images plus annotations, no checkpoints needed.

The toy split exists so the full export path (decode image, embed, write
files) runs offline and reproducibly. Content is simple on purpose: one
colored shape per image, a caption describing it, a question about the
color, and ten annotations with a clear majority answer.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, ImageDraw

IMAGE_SIZE = 64

_SHAPES = ("circle", "square", "triangle")
_COLORS = (
    ("red", (200, 40, 40)),
    ("blue", (40, 60, 200)),
    ("green", (40, 160, 60)),
    ("yellow", (220, 200, 40)),
    ("purple", (140, 40, 180)),
)
_BACKGROUNDS = (("white", (255, 255, 255)), ("gray", (170, 170, 170)))
# Second-opinion annotation per color, as a human rater might phrase it.
_VARIANTS = {
    "red": "crimson",
    "blue": "navy",
    "green": "emerald",
    "yellow": "gold",
    "purple": "violet",
}


@dataclass(frozen=True)
class ToySplit:
    root: Path
    images_dir: Path
    annotations_path: Path
    n_samples: int


def _caption(index: int, color: str, shape: str, bg: str) -> str:
    # Every fifth caption carries non-ASCII text; byte-exact UTF-8 survival
    # through export and load is part of the contract.
    if index % 5 == 4:
        return f"A naïve-style drawing of a {color} {shape} on a {bg} background."
    return f"A {color} {shape} centered on a {bg} background."


def _draw(path: Path, shape: str, rgb: tuple[int, int, int], bg: tuple[int, int, int]) -> None:
    img = Image.new("RGB", (IMAGE_SIZE, IMAGE_SIZE), bg)
    draw = ImageDraw.Draw(img)
    lo, hi = IMAGE_SIZE // 4, 3 * IMAGE_SIZE // 4
    if shape == "circle":
        draw.ellipse((lo, lo, hi, hi), fill=rgb)
    elif shape == "square":
        draw.rectangle((lo, lo, hi, hi), fill=rgb)
    else:
        mid = IMAGE_SIZE // 2
        draw.polygon([(mid, lo), (lo, hi), (hi, hi)], fill=rgb)
    img.save(path, format="PNG")


def build_toy_split(root: str | Path, n_samples: int = 50, train_fraction: float = 0.6) -> ToySplit:
    """Write n_samples images and their annotation rows under root.

    Fully determined by n_samples and train_fraction: content cycles
    through fixed shape/color/background tables, so two builds produce
    identical files.
    """
    if n_samples < 2:
        raise ValueError("toy split needs at least 2 samples (one per split)")
    root = Path(root)
    images_dir = root / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    annotations_path = root / "annotations.jsonl"
    n_train = max(1, min(n_samples - 1, round(n_samples * train_fraction)))

    with open(annotations_path, "w", encoding="utf-8") as fh:
        for i in range(n_samples):
            sid = f"toy{i:04d}"
            shape = _SHAPES[i % len(_SHAPES)]
            color, rgb = _COLORS[i % len(_COLORS)]
            bg_name, bg_rgb = _BACKGROUNDS[(i // len(_COLORS)) % len(_BACKGROUNDS)]
            _draw(images_dir / f"{sid}.png", shape, rgb, bg_rgb)
            row = {
                "id": sid,
                "split": "train" if i < n_train else "test",
                "caption": _caption(i, color, shape, bg_name),
                "question": f"What color is the {shape}?",
                "answers": [color] * 7 + [_VARIANTS[color]] * 3,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return ToySplit(
        root=root,
        images_dir=images_dir,
        annotations_path=annotations_path,
        n_samples=n_samples,
    )
