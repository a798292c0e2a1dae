"""Contrastive training of the patch scorer with best-accuracy selection."""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..imaging import Image2D
from ..recon.training import TrainingDivergedError
from .network import PatchEncoder, SiameseSpec, contrastive_loss, similarity_from_distance
from .pairs import Patch, PatchPair, sample_patch_pairs

SCORER_FORMAT_VERSION = 1


@dataclass
class ScorerTrainConfig:
    epochs: int = 50
    batch_size: int = 1024
    pairs_per_image: int = 64
    lr: float = 2e-4
    beta1: float = 0.5
    val_fraction: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1 or self.pairs_per_image < 1:
            raise ValueError("epochs and pairs_per_image must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")


@dataclass
class SiameseCheckpoint:
    format_version: int
    spec: SiameseSpec
    cfg: ScorerTrainConfig
    encoder_state: dict
    epoch_log: list = field(default_factory=list)
    best_epoch: int = 0


def _to_batch(patches: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.asarray(patches, dtype=np.float32))[:, None]


def train_scorer(
    image_pairs: list[tuple[Image2D, Image2D]],
    spec: SiameseSpec,
    cfg: ScorerTrainConfig,
    device: str = "cpu",
    progress=None,
) -> SiameseCheckpoint:
    """Sample patch pairs from all (real, reconstructed) couples, hold out a
    validation fraction, minimize the contrastive loss, keep the weights of
    the epoch with the best validation pair accuracy (a > 0.5 predicts 1)."""
    if not image_pairs:
        raise ValueError("empty dataset")
    spec.validate()
    cfg.validate()
    dev = torch.device(device)
    rng = np.random.default_rng(cfg.seed)

    pair_list: list[PatchPair] = []
    for real, rec in image_pairs:
        pair_list.extend(sample_patch_pairs(real, rec, spec.patch_size, cfg.pairs_per_image, rng))
    x1 = torch.stack([torch.from_numpy(p.real_patch.pixels.astype(np.float32))[None] for p in pair_list]).to(dev)
    x2 = torch.stack([torch.from_numpy(p.rec_patch.pixels.astype(np.float32))[None] for p in pair_list]).to(dev)
    y = torch.tensor([p.label for p in pair_list], dtype=torch.float32, device=dev)

    n = len(pair_list)
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * cfg.val_fraction)))
    if n_val >= n:
        raise ValueError("validation split leaves no training pairs")
    val_idx = torch.from_numpy(perm[:n_val].copy())
    train_idx = perm[n_val:]

    torch.manual_seed(cfg.seed)
    enc = PatchEncoder(spec).to(dev)
    opt = torch.optim.Adam(enc.parameters(), lr=cfg.lr, betas=(cfg.beta1, 0.999))

    def scores(i1, i2):
        # eps-regularized distance: the exact norm has no gradient at 0,
        # which positives with identical inputs would hit
        d = torch.nn.functional.pairwise_distance(enc(i1), enc(i2))
        return similarity_from_distance(d)

    best_state, best_epoch, best_acc = None, 0, -1.0
    epoch_log: list[dict] = []
    for epoch in range(cfg.epochs):
        enc.train()
        order = rng.permutation(len(train_idx))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            chunk = train_idx[order[start:start + cfg.batch_size]]
            if len(chunk) == 1 and len(order) > 1:
                continue  # BatchNorm needs >1 sample in train mode
            idx = torch.from_numpy(chunk.copy())
            opt.zero_grad()
            a = scores(x1[idx], x2[idx])
            loss = contrastive_loss(a, y[idx])
            loss.backward()
            opt.step()
            val = float(loss.detach())
            if not math.isfinite(val):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            losses.append(val)

        enc.eval()
        with torch.no_grad():
            a_val = scores(x1[val_idx], x2[val_idx])
            acc = float(((a_val > 0.5).float() == y[val_idx]).float().mean())
        entry = {"epoch": epoch, "train_loss": float(np.mean(losses)), "val_accuracy": acc}
        epoch_log.append(entry)
        if acc > best_acc:
            best_acc, best_epoch = acc, epoch
            best_state = copy.deepcopy({k: v.cpu() for k, v in enc.state_dict().items()})
        if progress is not None:
            progress(entry)

    return SiameseCheckpoint(
        format_version=SCORER_FORMAT_VERSION,
        spec=spec,
        cfg=cfg,
        encoder_state=best_state,
        epoch_log=epoch_log,
        best_epoch=best_epoch,
    )


class SiameseScorer:
    """Loaded encoder exposing batched patch-pair similarity scoring."""

    def __init__(self, checkpoint: SiameseCheckpoint, device: str = "cpu", chunk_size: int = 1024):
        self.checkpoint = checkpoint
        self.device = torch.device(device)
        self.chunk_size = chunk_size
        self.encoder = PatchEncoder(checkpoint.spec).to(self.device)
        self.encoder.load_state_dict(checkpoint.encoder_state)
        self.encoder.eval()

    @property
    def patch_size(self) -> int:
        return self.checkpoint.spec.patch_size

    def similarity_batch(self, real_patches: np.ndarray, rec_patches: np.ndarray) -> np.ndarray:
        real_patches = np.asarray(real_patches)
        rec_patches = np.asarray(rec_patches)
        if real_patches.shape != rec_patches.shape:
            raise ValueError("patch batch shapes differ")
        out = np.empty(len(real_patches), dtype=np.float64)
        with torch.no_grad():
            for start in range(0, len(real_patches), self.chunk_size):
                end = start + self.chunk_size
                e1 = self.encoder(_to_batch(real_patches[start:end]).to(self.device))
                e2 = self.encoder(_to_batch(rec_patches[start:end]).to(self.device))
                # exact norm (no eps): identical patches must score exactly 1
                d = torch.linalg.vector_norm(e1 - e2, dim=1)
                out[start:end] = similarity_from_distance(d).cpu().numpy()
        return out

    def __call__(self, real_patches: np.ndarray, rec_patches: np.ndarray) -> np.ndarray:
        return self.similarity_batch(real_patches, rec_patches)


def embed(patch: Patch | np.ndarray, model: PatchEncoder) -> np.ndarray:
    """10-d embedding of one patch; depends on pixels only."""
    pixels = patch.pixels if isinstance(patch, Patch) else np.asarray(patch)
    model.eval()
    with torch.no_grad():
        vec = model(_to_batch(pixels[None]))
    return vec[0].cpu().numpy().astype(np.float64)


def similarity(patch_a: Patch | np.ndarray, patch_b: Patch | np.ndarray, model: PatchEncoder) -> float:
    va, vb = embed(patch_a, model), embed(patch_b, model)
    d = float(np.linalg.norm(va - vb))
    return float(2.0 / (1.0 + np.exp(d)))


def save_scorer_checkpoint(checkpoint: SiameseCheckpoint, path) -> None:
    payload = asdict(checkpoint)
    torch.save(payload, path)


def load_scorer_checkpoint(path) -> SiameseCheckpoint:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload["format_version"] != SCORER_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {payload['format_version']}")
    return SiameseCheckpoint(
        format_version=payload["format_version"],
        spec=SiameseSpec(**payload["spec"]),
        cfg=ScorerTrainConfig(**payload["cfg"]),
        encoder_state=payload["encoder_state"],
        epoch_log=payload["epoch_log"],
        best_epoch=payload["best_epoch"],
    )
