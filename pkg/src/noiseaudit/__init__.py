"""Label-noise auditing toolkit for datasets with a dominant negative class."""

from .core import (
    Dataset,
    Instance,
    LabelSpace,
    NoiseAuditError,
    NoiseManifest,
    load_dataset,
    load_splits,
    read_manifest,
    split_counts,
    write_dataset,
    write_manifest,
)
from .detect import (
    CleanSubset,
    SeedSet,
    extract_seeds,
    extrinsic_eliminate,
    extrinsic_relabel,
    intrinsic_detect,
    map_clean_subset,
)
from .metrics import ConfusionMatrix, ScoreReport, TopKReport, confusion, score, topk_rescore
from .synthbench import (
    InjectionLedger,
    SynthSpec,
    evaluate_detection,
    generate,
    inject_false_negatives,
)
from .transforms import (
    apply_elimination,
    apply_reannotation,
    binary_collapse,
    downsample_negatives,
)
from .vecstore import EmbeddingSet, PredictionSet, cosine, knn, read_matrix, write_matrix

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Instance",
    "LabelSpace",
    "NoiseAuditError",
    "NoiseManifest",
    "load_dataset",
    "load_splits",
    "read_manifest",
    "split_counts",
    "write_dataset",
    "write_manifest",
    "CleanSubset",
    "SeedSet",
    "extract_seeds",
    "extrinsic_eliminate",
    "extrinsic_relabel",
    "intrinsic_detect",
    "map_clean_subset",
    "ConfusionMatrix",
    "ScoreReport",
    "TopKReport",
    "confusion",
    "score",
    "topk_rescore",
    "InjectionLedger",
    "SynthSpec",
    "evaluate_detection",
    "generate",
    "inject_false_negatives",
    "apply_elimination",
    "apply_reannotation",
    "binary_collapse",
    "downsample_negatives",
    "EmbeddingSet",
    "PredictionSet",
    "cosine",
    "knn",
    "read_matrix",
    "write_matrix",
    "__version__",
]
