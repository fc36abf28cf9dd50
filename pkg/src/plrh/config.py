"""Run configuration and the `key = value` config file format.

Config files are flat text: one `key = value` per line, `#` comments, blank
lines ignored. Values keep their spelling; types are coerced from the
RunConfig field they land in. Path values are resolved against the config
file's directory so a config can travel with its fixtures. Stop-sequence
lists are comma-separated with `\\n` and `\\\\` escapes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .prompting import (
    DEFAULT_STAGE1_HEAD,
    DEFAULT_STAGE2_HEAD,
    DEFAULT_STAGE3_HEAD,
)

BACKEND_CHOICES = ("http", "scripted", "echo", "constant", "hash", "oracle")
EXAMPLE_ORDER_CHOICES = ("ascending_similarity", "descending_similarity")

_PATH_FIELDS = frozenset(
    {"samples_path", "features_path", "store_path", "seeds_path", "mock_fixture_path"}
)


@dataclass
class RunConfig:
    samples_path: str = ""
    features_path: str = ""
    store_path: str = ""
    dataset_name: str = ""

    backend: str = "http"
    backend_url: str = "http://127.0.0.1:8000/v1/completions"
    token_env: str = "PLRH_API_TOKEN"
    mock_fixture_path: str = ""
    constant_text: str = "unknown"
    model_id: str = "llama-2-7b-chat"

    n_examples: int = 8
    # Order of example blocks inside the prompt. ascending_similarity puts
    # the best match last, adjacent to the input block.
    example_order: str = "ascending_similarity"
    ablation_no_rationale: bool = False

    stage1_head: str = DEFAULT_STAGE1_HEAD
    stage2_head: str = DEFAULT_STAGE2_HEAD
    stage3_head: str = DEFAULT_STAGE3_HEAD
    seeds_path: str = ""  # empty: use the packaged seed examples

    stage1_max_new_tokens: int = 128
    stage2_max_new_tokens: int = 128
    stage3_max_new_tokens: int = 10
    temperature: float = 0.0
    stage1_stop: tuple[str, ...] = ("===", "\n\n")
    stage2_stop: tuple[str, ...] = ("===", "\n\n")
    stage3_stop: tuple[str, ...] = ("\n",)

    concurrency: int = 4
    retries: int = 2
    timeout_s: float = 30.0
    dry_run: bool = False

    def validate(self) -> None:
        if self.backend not in BACKEND_CHOICES:
            raise ConfigError(f"backend must be one of {BACKEND_CHOICES}, got {self.backend!r}")
        if self.backend == "scripted" and not self.mock_fixture_path:
            raise ConfigError("scripted backend requires mock_fixture_path")
        if self.example_order not in EXAMPLE_ORDER_CHOICES:
            raise ConfigError(
                f"example_order must be one of {EXAMPLE_ORDER_CHOICES}, "
                f"got {self.example_order!r}"
            )
        if self.n_examples < 1:
            raise ConfigError(f"n_examples must be at least 1, got {self.n_examples}")
        if self.concurrency < 1:
            raise ConfigError(f"concurrency must be at least 1, got {self.concurrency}")
        if self.retries < 0:
            raise ConfigError(f"retries must be non-negative, got {self.retries}")
        if self.timeout_s <= 0:
            raise ConfigError(f"timeout_s must be positive, got {self.timeout_s}")
        if self.temperature < 0:
            raise ConfigError(f"temperature must be non-negative, got {self.temperature}")
        for name in ("stage1_max_new_tokens", "stage2_max_new_tokens", "stage3_max_new_tokens"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        for name in ("stage1_head", "stage2_head", "stage3_head"):
            head = getattr(self, name)
            if not head.strip():
                raise ConfigError(f"{name} must be non-empty")
            if "\n" in head or "\r" in head:
                raise ConfigError(f"{name} must be a single line")
        for name in ("stage1_stop", "stage2_stop", "stage3_stop"):
            for s in getattr(self, name):
                if not s:
                    raise ConfigError(f"{name} entries must be non-empty")

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def snapshot(self) -> dict[str, Any]:
        """JSON-safe dump of every field, for the run manifest."""
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


def _escape_stop(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape_stop(value: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def format_stops(stops: tuple[str, ...]) -> str:
    return ",".join(_escape_stop(s) for s in stops)


def parse_stops(raw: str) -> tuple[str, ...]:
    parts = [p for p in raw.split(",") if p != ""]
    return tuple(_unescape_stop(p) for p in parts)


_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _coerce(name: str, raw: str, target_type: Any) -> Any:
    try:
        if target_type is bool:
            word = raw.strip().lower()
            if word not in _BOOL_WORDS:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_WORDS[word]
        if target_type is int:
            return int(raw.strip())
        if target_type is float:
            return float(raw.strip())
        if target_type is str:
            return raw
        return parse_stops(raw)  # the only remaining field type is tuple[str, ...]
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc


_FIELD_TYPES: dict[str, Any] = {
    f.name: (bool if f.type == "bool" else int if f.type == "int" else
             float if f.type == "float" else str if f.type == "str" else tuple)
    for f in fields(RunConfig)
}


def apply_settings(
    cfg: RunConfig,
    settings: dict[str, str],
    base_dir: Path | None = None,
) -> RunConfig:
    """Overlay raw string settings onto a config, coercing per field type."""
    changes: dict[str, Any] = {}
    for name, raw in settings.items():
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {name!r}")
        value = _coerce(name, raw, _FIELD_TYPES[name])
        if name in _PATH_FIELDS and value and base_dir is not None:
            value = str((base_dir / value).resolve()) if not Path(value).is_absolute() else value
        changes[name] = value
    return cfg.replace(**changes)


def parse_config_text(text: str, where: str = "<config>") -> dict[str, str]:
    settings: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{where}:{lineno}: expected 'key = value'")
        key = key.strip()
        if not key:
            raise ConfigError(f"{where}:{lineno}: empty key")
        if key in settings:
            raise ConfigError(f"{where}:{lineno}: duplicate key {key!r}")
        settings[key] = value.strip()
    return settings


def load_config(
    path: str | Path,
    overrides: dict[str, str] | None = None,
) -> RunConfig:
    """Read a config file, then apply overrides (resolved against the CWD)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    settings = parse_config_text(text, where=str(path))
    cfg = apply_settings(RunConfig(), settings, base_dir=path.resolve().parent)
    if overrides:
        cfg = apply_settings(cfg, overrides, base_dir=Path.cwd())
    return cfg
