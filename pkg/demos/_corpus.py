"""Shared corpus builder for the demo scripts.

Every demo starts from the same small seeded dataset so the output is
reproducible offline. Test features are noisy copies of one train feature
each, which gives the cosine selection something real to find.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

DIM = 6

# (id, caption, question, majority answer, distractor answer)
_TRAIN = [
    ("k01", "A kitchen counter with a cutting board and sliced bread.", "What food is on the board?", "bread", "toast"),
    ("k02", "A pot of soup simmering on a gas stove.", "What is being cooked?", "soup", "stew"),
    ("k03", "A bowl of oranges next to a juicer on a table.", "What fruit is in the bowl?", "orange", "tangerine"),
    ("s01", "A red bicycle leaning against a brick wall.", "What vehicle is shown?", "bicycle", "bike"),
    ("s02", "Cars waiting at a crosswalk while people cross.", "What are the people doing?", "crossing", "walking"),
    ("s03", "A yellow bus stopped at a station in the rain.", "What is the weather like?", "rainy", "wet"),
    ("a01", "A brown horse grazing in a fenced meadow.", "What animal is grazing?", "horse", "pony"),
    ("a02", "Two cats sleeping on a sunny windowsill.", "How many cats are there?", "2", "two"),
    ("a03", "A dog catching a frisbee in a park.", "What is the dog catching?", "frisbee", "disc"),
    ("p01", "A violinist performing on a lit stage.", "What instrument is played?", "violin", "fiddle"),
    ("p02", "A painter working on a large canvas outdoors.", "What is the person holding?", "brush", "paintbrush"),
    ("p03", "A chess board mid-game on a wooden table.", "What game is being played?", "chess", "checkers"),
]

# (id, related train id, caption, question, majority answer, distractor)
_TEST = [
    ("q01", "k01", "Slices of bread stacked beside a toaster.", "What food is shown?", "bread", "toast"),
    ("q02", "k03", "A glass of juice with orange halves around it.", "What fruit was juiced?", "orange", "citrus"),
    ("q03", "s01", "A mountain bike parked by a trail sign.", "What vehicle is parked?", "bicycle", "bike"),
    ("q04", "a01", "A foal standing close to its mother in a field.", "What animal is in the field?", "horse", "foal"),
    ("q05", "p01", "An orchestra pit with string players tuning.", "What instruments are visible?", "violin", "cello"),
    ("q06", "a03", "A puppy leaping for a flying disc on grass.", "What is the puppy catching?", "frisbee", "ball"),
]


def build_corpus(root: Path) -> tuple[Path, Path]:
    """Write samples and features JSONL under root; return their paths."""
    # Seed chosen so every test feature lands nearest its own anchor with a
    # comfortable margin; keeps the selection demo output self-explanatory.
    rng = np.random.default_rng(13)
    root.mkdir(parents=True, exist_ok=True)
    samples_path = root / "demo.samples.jsonl"
    features_path = root / "demo.features.jsonl"

    train_vecs: dict[str, np.ndarray] = {}
    sample_rows = []
    feature_rows = []
    for sid, caption, question, majority, distractor in _TRAIN:
        vec = rng.normal(size=DIM)
        train_vecs[sid] = vec
        sample_rows.append({
            "id": sid, "split": "train", "caption": caption,
            "question": question, "answers": [majority] * 7 + [distractor] * 3,
        })
        feature_rows.append({"id": sid, "vector": [float(x) for x in vec]})
    for sid, anchor, caption, question, majority, distractor in _TEST:
        vec = train_vecs[anchor] + 0.2 * rng.normal(size=DIM)
        sample_rows.append({
            "id": sid, "split": "test", "caption": caption,
            "question": question, "answers": [majority] * 8 + [distractor] * 2,
        })
        feature_rows.append({"id": sid, "vector": [float(x) for x in vec]})

    with open(samples_path, "w", encoding="utf-8") as fh:
        for row in sample_rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    with open(features_path, "w", encoding="utf-8") as fh:
        for row in feature_rows:
            fh.write(json.dumps(row) + "\n")
    return samples_path, features_path


def write_config(root: Path, store: Path, **overrides: str) -> Path:
    """Write a runnable config next to the corpus; return its path."""
    samples_path, features_path = build_corpus(root)
    settings = {
        "dataset_name": "demo-corpus",
        "samples_path": str(samples_path),
        "features_path": str(features_path),
        "store_path": str(store),
        "backend": "oracle",
        "model_id": "oracle-mock",
        "n_examples": "3",
        "concurrency": "2",
    }
    settings.update(overrides)
    path = root / "demo.conf"
    lines = [f"{key} = {value}" for key, value in settings.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
