"""Build plrh-compatible datasets: samples JSONL plus binary feature files."""

from .backbone import Backbone, load_checkpoint, write_toy_checkpoint
from .errors import AnnotationError, CheckpointError, ExportError
from .export import ExportManifest, export_features, export_samples
from .formats import FEATURE_MAGIC, write_features_binary, write_samples_jsonl
from .toy import ToySplit, build_toy_split

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "Backbone",
    "CheckpointError",
    "ExportError",
    "ExportManifest",
    "FEATURE_MAGIC",
    "ToySplit",
    "build_toy_split",
    "export_features",
    "export_samples",
    "load_checkpoint",
    "write_features_binary",
    "write_samples_jsonl",
    "write_toy_checkpoint",
]
