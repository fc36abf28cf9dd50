from __future__ import annotations

from pathlib import Path

import pytest

from plrh_exporter import ToySplit, build_toy_split, write_toy_checkpoint


@pytest.fixture()
def toy_split(tmp_path: Path) -> ToySplit:
    return build_toy_split(tmp_path / "toy", n_samples=50)


@pytest.fixture()
def checkpoint(tmp_path: Path) -> Path:
    return write_toy_checkpoint(tmp_path / "backbone.ckpt.json", output_dim=32, seed=7)
