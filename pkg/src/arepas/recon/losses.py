"""Adversarial, pixel and perceptual loss terms plus the gradient penalty."""

from __future__ import annotations

from dataclasses import dataclass, fields

import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass
class LossBreakdown:
    """One side of an alternating step. Generator steps fill adversarial /
    l1 / perceptual / total; discriminator steps fill d_real / d_fake / gp /
    total. Values are 0-dim tensors during training, floats after detach()."""

    adversarial: object = 0.0
    l1: object = 0.0
    perceptual: object = 0.0
    total: object = 0.0
    d_real: object = 0.0
    d_fake: object = 0.0
    gp: object = 0.0

    def detach(self) -> "LossBreakdown":
        vals = {}
        for f in fields(self):
            v = getattr(self, f.name)
            vals[f.name] = float(v.detach()) if torch.is_tensor(v) else float(v)
        return LossBreakdown(**vals)


def bce_with_logits(logits: torch.Tensor, target_value: float) -> torch.Tensor:
    target = torch.full_like(logits, float(target_value))
    return F.binary_cross_entropy_with_logits(logits, target)


def generator_loss(fake, real, d_fake_logits, cfg, perceptual_extractor=None) -> LossBreakdown:
    """adversarial BCE toward 1.0 + lambda_l1 * L1 + lambda_perceptual *
    feature MSE. The perceptual term is 0 when no extractor is supplied."""
    adversarial = bce_with_logits(d_fake_logits, 1.0)
    l1 = (fake - real).abs().mean()
    if perceptual_extractor is not None:
        perceptual = F.mse_loss(perceptual_extractor(fake), perceptual_extractor(real))
    else:
        perceptual = torch.zeros((), dtype=fake.dtype, device=fake.device)
    total = adversarial + cfg.lambda_l1 * l1 + cfg.lambda_perceptual * perceptual
    return LossBreakdown(adversarial=adversarial, l1=l1, perceptual=perceptual, total=total)


def discriminator_loss(d_real_logits, d_fake_logits, gp_value, cfg) -> LossBreakdown:
    """BCE with real labels smoothed to cfg.real_label, fake labels at 0,
    plus the weighted gradient penalty."""
    d_real = bce_with_logits(d_real_logits, cfg.real_label)
    d_fake = bce_with_logits(d_fake_logits, 0.0)
    if not torch.is_tensor(gp_value):
        gp_value = torch.as_tensor(float(gp_value), dtype=d_real.dtype)
    total = d_real + d_fake + cfg.lambda_gp * gp_value
    return LossBreakdown(d_real=d_real, d_fake=d_fake, gp=gp_value, total=total)


def gradient_penalty(
    disc,
    real: torch.Tensor,
    fake: torch.Tensor,
    cond: torch.Tensor | None = None,
    eps: float | torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Mean squared deviation of the interpolate gradient norm from 1.

    Interpolates x_hat = eps*real + (1-eps)*fake and differentiates the
    discriminator output w.r.t. x_hat only; ``cond`` (the conditioning edge
    channel) is concatenated un-interpolated and receives no gradient push.
    """
    if real.shape != fake.shape:
        raise ValueError("real/fake shapes differ")
    b = real.shape[0]
    if eps is None:
        eps = torch.rand((b,) + (1,) * (real.dim() - 1), dtype=real.dtype, device=real.device, generator=generator)
    elif not torch.is_tensor(eps):
        eps = torch.full((b,) + (1,) * (real.dim() - 1), float(eps), dtype=real.dtype, device=real.device)

    x_hat = (eps * real.detach() + (1.0 - eps) * fake.detach()).requires_grad_(True)
    inp = x_hat if cond is None else torch.cat([cond.detach(), x_hat], dim=1)
    out = disc(inp)
    grads = torch.autograd.grad(out.sum(), x_hat, create_graph=True)[0]
    norms = grads.reshape(b, -1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


_VGGISH_PLAN = (64, 64, "pool", 128, 128, "pool", 256, 256, 256)
_RGB_MEAN = (0.485, 0.456, 0.406)
_RGB_STD = (0.229, 0.224, 0.225)


class FeatureExtractor(nn.Module):
    """Frozen conv stack with the layer plan of the first three blocks of a
    natural-image classifier, tapped after the last conv. Single-channel
    inputs in [-1, 1] are replicated to 3 channels and renormalized."""

    def __init__(self):
        super().__init__()
        layers: list[nn.Module] = []
        cin = 3
        for item in _VGGISH_PLAN:
            if item == "pool":
                layers.append(nn.MaxPool2d(2))
            else:
                layers += [nn.Conv2d(cin, item, 3, padding=1), nn.ReLU(inplace=True)]
                cin = item
        self.features = nn.Sequential(*layers)
        self.register_buffer("mean", torch.tensor(_RGB_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_RGB_STD).view(1, 3, 1, 1))
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] == 1:
            x = x.repeat(1, 3, 1, 1)
        x = (x + 1.0) / 2.0  # tanh range to [0, 1]
        x = (x - self.mean) / self.std
        return self.features(x)

    def train(self, mode: bool = True):  # stays frozen
        return super().train(False)


def build_feature_extractor(weights_path: str | None = None, seed: int = 0) -> FeatureExtractor:
    """Extractor with pretrained weights when a state-dict path is given,
    otherwise a seeded random frozen stack (shape-compatible stand-in for
    environments without downloadable weights)."""
    torch.manual_seed(seed)
    ext = FeatureExtractor()
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        ext.load_state_dict(state)
    return ext
