"""Weight-shared patch encoder, similarity mapping and contrastive loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn


@dataclass
class SiameseSpec:
    conv_channels: tuple = (32, 64)
    kernel: int = 4
    embedding_dim: int = 10
    patch_size: int = 16

    def __post_init__(self):
        self.conv_channels = tuple(self.conv_channels)

    def validate(self) -> None:
        if self.embedding_dim != 10:
            raise ValueError("embedding_dim is fixed at 10")
        if self.patch_size < 4:
            raise ValueError("patch_size must be >= 4")
        if len(self.conv_channels) < 1:
            raise ValueError("need at least one conv layer")


class PatchEncoder(nn.Module):
    """Input batch norm, conv+tanh+avgpool stages, then batch norm and a
    fully connected tanh head producing the 10-d embedding."""

    def __init__(self, spec: SiameseSpec | None = None):
        super().__init__()
        spec = spec or SiameseSpec()
        spec.validate()
        self.spec = spec
        k = spec.kernel
        # asymmetric zero padding keeps even kernels shape-preserving
        lead, trail = (k - 1) // 2, k // 2

        stages: list[nn.Module] = [nn.BatchNorm2d(1)]
        cin = 1
        for cout in spec.conv_channels:
            stages += [
                nn.ZeroPad2d((lead, trail, lead, trail)),
                nn.Conv2d(cin, cout, k),
                nn.Tanh(),
                nn.AvgPool2d(2),
            ]
            cin = cout
        self.stages = nn.Sequential(*stages)

        with torch.no_grad():
            flat = self.stages(torch.zeros(1, 1, spec.patch_size, spec.patch_size)).numel()
        self.head = nn.Sequential(
            nn.Flatten(),
            nn.BatchNorm1d(flat),
            nn.Linear(flat, spec.embedding_dim),
            nn.Tanh(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2:] != (self.spec.patch_size, self.spec.patch_size):
            raise ValueError(
                f"patch shape {tuple(x.shape[-2:])} does not match spec size {self.spec.patch_size}"
            )
        return self.head(self.stages(x))


def similarity_from_distance(d: torch.Tensor) -> torch.Tensor:
    """a = 2*sigmoid(-d): 1 at zero distance, decreasing toward 0."""
    return 2.0 * torch.sigmoid(-d)


def contrastive_loss(a: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Mean of (1-y)*a^2 + y*max(0, 1-a)^2 over the batch."""
    if a.numel() == 0:
        raise ValueError("empty batch")
    a = a.reshape(-1)
    y = y.reshape(-1).to(a.dtype)
    hinge = torch.clamp(1.0 - a, min=0.0)
    return ((1.0 - y) * a * a + y * hinge * hinge).mean()
