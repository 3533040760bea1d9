"""Adapter that exports NRCM embedding/prediction files from JSONL datasets."""

from .encoders import CentroidClassifier, HashingEncoder, UniformClassifier, build_from_spec
from .export import export_embeddings, export_predictions
from .records import ExportError, Record, read_labels, read_records

__version__ = "0.1.0"

__all__ = [
    "CentroidClassifier",
    "HashingEncoder",
    "UniformClassifier",
    "build_from_spec",
    "export_embeddings",
    "export_predictions",
    "ExportError",
    "Record",
    "read_labels",
    "read_records",
    "__version__",
]
