"""Experiment configuration: one versioned YAML file drives every stage.

Parsing is strict: unknown keys anywhere in the tree are errors, so typos
never silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import enum
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .augment import AugmentSpec
from .imaging import CannyConfig, Modality
from .recon.networks import DiscriminatorSpec, GeneratorSpec
from .recon.training import ReconTrainConfig
from .siamese.network import SiameseSpec
from .siamese.training import ScorerTrainConfig
from .synthetic import SynthConfig

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class InferenceOptions:
    stride: int | None = None  # None means patch_size // 2
    score_chunk: int = 1024
    overlay_count: int = 4

    def validate(self) -> None:
        if self.stride is not None and self.stride < 1:
            raise ConfigError("inference stride must be >= 1")
        if self.score_chunk < 1:
            raise ConfigError("score_chunk must be >= 1")
        if self.overlay_count < 0:
            raise ConfigError("overlay_count must be >= 0")


@dataclass
class EvalOptions:
    restrict_auprc_to_foreground: bool = False
    sweep_sizes: tuple = (8, 12, 16, 20, 24)

    def __post_init__(self):
        self.sweep_sizes = tuple(int(s) for s in self.sweep_sizes)

    def validate(self) -> None:
        if not self.sweep_sizes:
            raise ConfigError("sweep_sizes must be nonempty")
        if any(s < 2 for s in self.sweep_sizes):
            raise ConfigError("sweep sizes must be >= 2")
        if len(set(self.sweep_sizes)) != len(self.sweep_sizes):
            raise ConfigError("sweep sizes must be distinct")


@dataclass
class ExperimentConfig:
    version: int = CONFIG_VERSION
    modality: Modality = Modality.SYNTH
    image_size: int = 64
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    canny: CannyConfig = field(default_factory=CannyConfig)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    gen_model: GeneratorSpec = field(default_factory=GeneratorSpec)
    disc_model: DiscriminatorSpec = field(default_factory=DiscriminatorSpec)
    recon_train: ReconTrainConfig = field(default_factory=ReconTrainConfig)
    siamese_model: SiameseSpec = field(default_factory=SiameseSpec)
    scorer_train: ScorerTrainConfig = field(default_factory=ScorerTrainConfig)
    inference: InferenceOptions = field(default_factory=InferenceOptions)
    eval: EvalOptions = field(default_factory=EvalOptions)

    def validate(self) -> None:
        if self.version != CONFIG_VERSION:
            raise ConfigError(
                f"unsupported config version {self.version}, expected {CONFIG_VERSION}")
        if self.image_size < 8:
            raise ConfigError("image_size must be >= 8")
        divisor = self.gen_model.size_divisor
        if self.image_size % divisor != 0:
            raise ConfigError(
                f"image_size {self.image_size} must be divisible by {divisor}")
        if self.modality is Modality.SYNTH and self.synth.image_size != self.image_size:
            raise ConfigError("synth.image_size must equal image_size")
        if self.siamese_model.patch_size > self.image_size:
            raise ConfigError("patch_size cannot exceed image_size")
        if any(s > self.image_size for s in self.eval.sweep_sizes):
            raise ConfigError("sweep sizes cannot exceed image_size")
        for sub in (self.synth, self.augment, self.gen_model, self.disc_model,
                    self.recon_train, self.siamese_model, self.scorer_train,
                    self.inference, self.eval):
            sub.validate()

    def to_dict(self) -> dict:
        return _sanitize(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        cfg = _dataclass_from_dict(cls, data, path="config")
        cfg.validate()
        return cfg

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path) -> None:
        Path(path).write_text(self.to_yaml())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        return cls.from_dict(data)


def _sanitize(value):
    """Make a nested structure YAML-safe: tuples to lists, enums to values."""
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, enum.Enum):
        return value.value
    return value


def _dataclass_from_dict(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        hint = hints.get(f.name)
        if dataclasses.is_dataclass(hint):
            kwargs[f.name] = _dataclass_from_dict(hint, value, f"{path}.{f.name}")
        elif hint is Modality or (isinstance(hint, type) and issubclass(hint, enum.Enum)):
            try:
                kwargs[f.name] = hint(value)
            except ValueError as exc:
                raise ConfigError(f"{path}.{f.name}: {exc}") from exc
        else:
            kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def desk_scale_config(seed: int = 0) -> ExperimentConfig:
    """Full-method configuration small enough to train on one CPU core."""
    return ExperimentConfig(
        seed=seed,
        synth=SynthConfig(n_normal=200, n_anomalous=100, seed=seed),
        gen_model=GeneratorSpec(base_width=16, resnet_blocks=4),
        disc_model=DiscriminatorSpec(base_width=16, conv_layers=4),
        augment=AugmentSpec(max_copy_paste_ops=4, max_augmentations_per_image=3,
                            seed=seed),
        recon_train=ReconTrainConfig(epochs=10, seed=seed),
        scorer_train=ScorerTrainConfig(epochs=50, batch_size=256,
                                       pairs_per_image=24, seed=seed),
    )


def smoke_config(seed: int = 0) -> ExperimentConfig:
    """Minutes-scale configuration for pipeline plumbing tests."""
    return ExperimentConfig(
        seed=seed,
        image_size=32,
        synth=SynthConfig(image_size=32, n_normal=4, n_anomalous=4, seed=seed),
        canny=CannyConfig(fallback_threshold=0.1),
        gen_model=GeneratorSpec(base_width=4, resnet_blocks=1),
        disc_model=DiscriminatorSpec(base_width=4, conv_layers=3),
        augment=AugmentSpec(max_copy_paste_ops=1, max_augmentations_per_image=1,
                            seed=seed),
        recon_train=ReconTrainConfig(epochs=1, seed=seed),
        siamese_model=SiameseSpec(patch_size=8),
        scorer_train=ScorerTrainConfig(epochs=2, batch_size=64, pairs_per_image=6,
                                       seed=seed),
        eval=EvalOptions(sweep_sizes=(8, 12)),
    )
