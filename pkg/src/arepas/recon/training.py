"""Alternating adversarial training of the edge-to-image reconstructor."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..imaging import CannyConfig, EdgeMap, Image2D, Modality, canny_edges
from .losses import build_feature_extractor, discriminator_loss, generator_loss, gradient_penalty
from .networks import DiscriminatorSpec, GeneratorSpec, PatchDiscriminator, build_generator

CHECKPOINT_FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class ReconTrainConfig:
    lambda_l1: float = 100.0
    lambda_perceptual: float = 1.0
    lambda_gp: float = 1.0
    real_label: float = 0.9
    lr: float = 2e-4
    beta1: float = 0.5
    batch_size: int = 1
    epochs: int = 10
    seed: int = 0
    use_perceptual: bool = False
    perceptual_weights: str | None = None

    def validate(self) -> None:
        if min(self.lambda_l1, self.lambda_perceptual, self.lambda_gp) < 0:
            raise ValueError("loss weights must be >= 0")
        if not 0.0 < self.real_label <= 1.0:
            raise ValueError("real_label must be in (0, 1]")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass
class ReconCheckpoint:
    format_version: int
    gen_spec: GeneratorSpec
    disc_spec: DiscriminatorSpec
    cfg: ReconTrainConfig
    canny: CannyConfig
    modality: Modality
    image_size: int
    generator_state: dict
    discriminator_state: dict
    epoch_log: list = field(default_factory=list)


def to_tanh_range(img: Image2D) -> np.ndarray:
    """Map pixels into the generator's tanh output range."""
    if img.modality is Modality.MRI:
        return img.pixels * 2.0 - 1.0
    return img.pixels


def from_tanh_range(pixels: np.ndarray, modality: Modality) -> np.ndarray:
    if modality is Modality.MRI:
        return (pixels + 1.0) / 2.0
    return pixels


def train_reconstructor(
    pairs: list[tuple[EdgeMap, Image2D]],
    cfg: ReconTrainConfig,
    gen_spec: GeneratorSpec | None = None,
    disc_spec: DiscriminatorSpec | None = None,
    device: str = "cpu",
    val_images: list[Image2D] | None = None,
    canny_config: CannyConfig | None = None,
    progress=None,
) -> ReconCheckpoint:
    """One discriminator step then one generator step per batch, Adam on
    both sides. Returns the final-epoch weights plus a per-epoch loss log."""
    if not pairs:
        raise ValueError("empty dataset")
    cfg.validate()
    gen_spec = gen_spec or GeneratorSpec()
    disc_spec = disc_spec or DiscriminatorSpec()
    canny_config = canny_config or CannyConfig()
    dev = torch.device(device)

    torch.manual_seed(cfg.seed)
    gen = build_generator(gen_spec).to(dev)
    disc = PatchDiscriminator(disc_spec).to(dev)
    extractor = None
    if cfg.use_perceptual:
        extractor = build_feature_extractor(cfg.perceptual_weights, seed=cfg.seed).to(dev)

    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr, betas=(cfg.beta1, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=(cfg.beta1, 0.999))

    edges_t = torch.stack([torch.from_numpy(e.pixels.astype(np.float32))[None] for e, _ in pairs])
    imgs_t = torch.stack([torch.from_numpy(to_tanh_range(i).astype(np.float32))[None] for _, i in pairs])
    edges_t, imgs_t = edges_t.to(dev), imgs_t.to(dev)
    modality = pairs[0][1].modality
    image_size = pairs[0][1].shape[0]

    order_rng = np.random.default_rng(cfg.seed)
    gp_gen = torch.Generator(device="cpu")
    gp_gen.manual_seed(cfg.seed)

    n = len(pairs)
    epoch_log: list[dict] = []
    for epoch in range(cfg.epochs):
        gen.train()
        disc.train()
        perm = order_rng.permutation(n)
        sums: dict[str, float] = {}
        steps = 0
        for start in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(perm[start:start + cfg.batch_size].copy())
            edge, real = edges_t[idx], imgs_t[idx]
            fake = gen(edge)

            opt_d.zero_grad()
            d_real_logits = disc(torch.cat([edge, real], dim=1))
            d_fake_logits = disc(torch.cat([edge, fake.detach()], dim=1))
            gp = gradient_penalty(disc, real, fake, cond=edge, generator=gp_gen)
            d_loss = discriminator_loss(d_real_logits, d_fake_logits, gp, cfg)
            d_loss.total.backward()
            opt_d.step()

            opt_g.zero_grad()
            g_logits = disc(torch.cat([edge, fake], dim=1))
            g_loss = generator_loss(fake, real, g_logits, cfg, extractor)
            g_loss.total.backward()
            opt_g.step()

            d_vals, g_vals = d_loss.detach(), g_loss.detach()
            if not (math.isfinite(d_vals.total) and math.isfinite(g_vals.total)):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch pair ids {idx.tolist()}"
                )
            for key, val in {
                "g_total": g_vals.total, "g_adversarial": g_vals.adversarial,
                "g_l1": g_vals.l1, "g_perceptual": g_vals.perceptual,
                "d_total": d_vals.total, "d_real": d_vals.d_real,
                "d_fake": d_vals.d_fake, "gp": d_vals.gp,
            }.items():
                sums[key] = sums.get(key, 0.0) + val
            steps += 1

        entry = {k: v / steps for k, v in sums.items()}
        entry["epoch"] = epoch
        if val_images:
            gen.eval()
            per_img = []
            with torch.no_grad():
                for vi in val_images:
                    rec = _run_generator(gen, vi, canny_config, dev)
                    per_img.append(float(np.mean(np.abs(to_tanh_range(vi) - to_tanh_range(rec)))))
            entry["val_l1_mean"] = float(np.mean(per_img))
            entry["val_l1_std"] = float(np.std(per_img))
        epoch_log.append(entry)
        if progress is not None:
            progress(entry)

    return ReconCheckpoint(
        format_version=CHECKPOINT_FORMAT_VERSION,
        gen_spec=gen_spec,
        disc_spec=disc_spec,
        cfg=cfg,
        canny=canny_config,
        modality=modality,
        image_size=image_size,
        generator_state={k: v.cpu() for k, v in gen.state_dict().items()},
        discriminator_state={k: v.cpu() for k, v in disc.state_dict().items()},
        epoch_log=epoch_log,
    )


def _run_generator(gen, img: Image2D, canny_config: CannyConfig, dev) -> Image2D:
    edge = canny_edges(img, canny_config)
    x = torch.from_numpy(edge.pixels.astype(np.float32))[None, None].to(dev)
    out = gen(x)[0, 0].cpu().numpy().astype(np.float64)
    pixels = from_tanh_range(out, img.modality)
    lo, hi = (0.0, 1.0) if img.modality is Modality.MRI else (-1.0, 1.0)
    pixels = np.clip(pixels, lo, hi)
    if img.mask is not None:
        pixels[img.mask == 0] = 0.0
    return Image2D(pixels, img.modality, img.mask)


class Reconstructor:
    """Loaded generator ready for inference; reusable across images."""

    def __init__(self, checkpoint: ReconCheckpoint, device: str = "cpu"):
        self.checkpoint = checkpoint
        self.device = torch.device(device)
        self.gen = build_generator(checkpoint.gen_spec).to(self.device)
        self.gen.load_state_dict(checkpoint.generator_state)
        self.gen.eval()

    def reconstruct(self, img: Image2D, canny_config: CannyConfig | None = None) -> Image2D:
        if img.shape[0] != self.checkpoint.image_size:
            raise ValueError(
                f"image side {img.shape[0]} differs from training size {self.checkpoint.image_size}"
            )
        with torch.no_grad():
            return _run_generator(self.gen, img, canny_config or self.checkpoint.canny, self.device)


def reconstruct(img: Image2D, checkpoint: ReconCheckpoint, device: str = "cpu") -> Image2D:
    return Reconstructor(checkpoint, device).reconstruct(img)


def save_recon_checkpoint(checkpoint: ReconCheckpoint, path) -> None:
    payload = asdict(checkpoint)
    payload["modality"] = checkpoint.modality.value
    torch.save(payload, path)


def load_recon_checkpoint(path) -> ReconCheckpoint:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {payload['format_version']}")
    return ReconCheckpoint(
        format_version=payload["format_version"],
        gen_spec=GeneratorSpec(**payload["gen_spec"]),
        disc_spec=DiscriminatorSpec(**payload["disc_spec"]),
        cfg=ReconTrainConfig(**payload["cfg"]),
        canny=CannyConfig(**payload["canny"]),
        modality=Modality(payload["modality"]),
        image_size=payload["image_size"],
        generator_state=payload["generator_state"],
        discriminator_state=payload["discriminator_state"],
        epoch_log=payload["epoch_log"],
    )
