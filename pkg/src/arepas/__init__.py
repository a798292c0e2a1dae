"""Two-stage anomaly segmentation: edge-conditioned reconstruction of an
anomaly-free image followed by patch-similarity scoring of the residual."""

from .augment import AugmentSpec, augment_edge_map, build_training_pairs
from .config import (
    ConfigError,
    EvalOptions,
    ExperimentConfig,
    InferenceOptions,
    desk_scale_config,
    smoke_config,
)
from .experiments import AblationMode, patch_size_sweep, run_ablation
from .imaging import (
    CannyConfig,
    EdgeMap,
    Image2D,
    Modality,
    canny_edges,
    normalize_ct,
    normalize_mr,
    otsu_threshold,
)
from .inference import (
    AnomalyMap,
    FinalMap,
    apply_threshold,
    final_map,
    heatmap,
    residual_map,
)
from .manifest import DatasetManifest, ManifestRecord, load_manifest, save_manifest
from .metrics import (
    EvalResult,
    auprc,
    confusion_counts,
    dice,
    evaluate_maps,
    pr_curve,
    precision,
    recall,
    select_threshold,
)
from .recon import (
    DiscriminatorSpec,
    GeneratorSpec,
    ReconTrainConfig,
    Reconstructor,
    train_reconstructor,
)
from .siamese import (
    ScorerTrainConfig,
    SiameseScorer,
    SiameseSpec,
    sample_patch_pairs,
    train_scorer,
)
from .synthetic import SynthConfig, gen_dataset, gen_normal, inject_anomaly

__version__ = "0.1.0"

__all__ = [
    "AblationMode",
    "AnomalyMap",
    "AugmentSpec",
    "CannyConfig",
    "ConfigError",
    "DatasetManifest",
    "DiscriminatorSpec",
    "EdgeMap",
    "EvalOptions",
    "EvalResult",
    "ExperimentConfig",
    "FinalMap",
    "GeneratorSpec",
    "Image2D",
    "InferenceOptions",
    "ManifestRecord",
    "Modality",
    "ReconTrainConfig",
    "Reconstructor",
    "ScorerTrainConfig",
    "SiameseScorer",
    "SiameseSpec",
    "SynthConfig",
    "apply_threshold",
    "augment_edge_map",
    "auprc",
    "build_training_pairs",
    "canny_edges",
    "confusion_counts",
    "desk_scale_config",
    "dice",
    "evaluate_maps",
    "final_map",
    "gen_dataset",
    "gen_normal",
    "heatmap",
    "inject_anomaly",
    "load_manifest",
    "normalize_ct",
    "normalize_mr",
    "otsu_threshold",
    "patch_size_sweep",
    "pr_curve",
    "precision",
    "recall",
    "residual_map",
    "run_ablation",
    "sample_patch_pairs",
    "save_manifest",
    "select_threshold",
    "smoke_config",
    "train_reconstructor",
    "train_scorer",
    "__version__",
]
