from .losses import (
    LossBreakdown,
    bce_with_logits,
    build_feature_extractor,
    discriminator_loss,
    generator_loss,
    gradient_penalty,
)
from .networks import DiscriminatorSpec, GeneratorSpec, PatchDiscriminator, build_generator
from .training import (
    ReconCheckpoint,
    ReconTrainConfig,
    Reconstructor,
    TrainingDivergedError,
    from_tanh_range,
    load_recon_checkpoint,
    reconstruct,
    save_recon_checkpoint,
    to_tanh_range,
    train_reconstructor,
)

__all__ = [
    "DiscriminatorSpec",
    "GeneratorSpec",
    "LossBreakdown",
    "PatchDiscriminator",
    "ReconCheckpoint",
    "ReconTrainConfig",
    "Reconstructor",
    "TrainingDivergedError",
    "from_tanh_range",
    "to_tanh_range",
    "bce_with_logits",
    "build_feature_extractor",
    "build_generator",
    "discriminator_loss",
    "generator_loss",
    "gradient_penalty",
    "load_recon_checkpoint",
    "reconstruct",
    "save_recon_checkpoint",
    "train_reconstructor",
]
