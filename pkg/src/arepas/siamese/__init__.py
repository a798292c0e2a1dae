from .network import PatchEncoder, SiameseSpec, contrastive_loss, similarity_from_distance
from .pairs import Patch, PatchPair, PatchSource, sample_patch_pairs, valid_origins
from .training import (
    ScorerTrainConfig,
    SiameseCheckpoint,
    SiameseScorer,
    embed,
    load_scorer_checkpoint,
    save_scorer_checkpoint,
    similarity,
    train_scorer,
)

__all__ = [
    "Patch",
    "PatchEncoder",
    "PatchPair",
    "PatchSource",
    "ScorerTrainConfig",
    "SiameseCheckpoint",
    "SiameseScorer",
    "SiameseSpec",
    "contrastive_loss",
    "embed",
    "load_scorer_checkpoint",
    "sample_patch_pairs",
    "save_scorer_checkpoint",
    "similarity",
    "similarity_from_distance",
    "train_scorer",
    "valid_origins",
]
