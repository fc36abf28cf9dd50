from __future__ import annotations

from pathlib import Path

import pytest

from plrh.config import RunConfig, load_config
from plrh.data_model import Dataset, load_dataset

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def demo_dataset() -> Dataset:
    return load_dataset(
        FIXTURES / "demo20.samples.jsonl",
        FIXTURES / "demo20.features.jsonl",
        "demo20",
    )


@pytest.fixture
def demo_cfg(tmp_path: Path) -> RunConfig:
    """The checked-in demo config with a per-test store directory."""
    return load_config(FIXTURES / "demo20.conf", {"store_path": str(tmp_path / "store")})


# One human-readable line per acceptance criterion at the end of the run.
_ACCEPTANCE_LABELS = {
    "test_prompt_fidelity_golden_bytes": "prompt fidelity: golden prompts byte-identical (<1s)",
    "test_retrieval_matches_oracle_across_seeded_datasets": (
        "retrieval equivalence: 200 seeded datasets incl. exact ties (<30s)"
    ),
    "test_selection_invariance_properties": (
        "selection invariance: scaling and permutation (1e-9, property-tested)"
    ),
    "test_metric_exactness": "metric exactness: thirds and 6-sample mean (1e-12)",
    "test_end_to_end_determinism_and_caching": (
        "end-to-end determinism: byte-identical predictions, 0 rerun calls (<10s)"
    ),
    "test_known_good_and_known_bad_backends": (
        "backend sanity: gold-answer mock 1.000, always-wrong mock 0.000"
    ),
    "test_ablation_strips_rationales_and_compares": (
        "ablation: prompts carry no rationale lines; comparison table renders"
    ),
    "test_sweep_grid_and_namespaces": (
        "sweep: n in {1,2,4,6,8}, CSV n,variant,accuracy, per-n cache namespaces"
    ),
    "test_live_endpoint_smoke": "live endpoint smoke (optional, PLRH_LIVE_ENDPOINT)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:  # noqa: ARG001
    outcomes: dict[str, str] = {}
    for status, verdict in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL"), ("skipped", "SKIP")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::" not in nodeid:
                continue
            name = nodeid.split("::")[-1].split("[")[0]
            if name not in _ACCEPTANCE_LABELS:
                continue
            # A FAIL in any phase outranks a PASS from another phase.
            if outcomes.get(name) != "FAIL":
                outcomes[name] = verdict
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, label in _ACCEPTANCE_LABELS.items():
        if name in outcomes:
            terminalreporter.write_line(f"{outcomes[name]:4s} {label}")
