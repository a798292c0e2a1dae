"""Patch-score aggregation into heat-maps and the final anomaly map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import Image2D

SCORE_TOLERANCE = 1e-9


@dataclass
class AnomalyMap:
    """Per-pixel dissimilarity in [0, 1] plus patch-coverage counts."""

    pixels: np.ndarray
    coverage: np.ndarray

    def validate(self) -> None:
        if self.pixels.min() < -SCORE_TOLERANCE or self.pixels.max() > 1 + SCORE_TOLERANCE:
            raise ValueError("heat-map values outside [0, 1]")
        if (self.coverage < 1).any():
            raise ValueError("uncovered pixels in heat-map")


@dataclass
class FinalMap:
    """Elementwise product of |real - rec| and the heat-map."""

    pixels: np.ndarray

    def validate(self) -> None:
        if (self.pixels < 0).any():
            raise ValueError("final map must be nonnegative")


def patch_grid(side: int, patch_size: int, stride: int) -> np.ndarray:
    return np.arange(0, side - patch_size + 1, stride)


def heatmap(real: Image2D, rec: Image2D, scorer, patch_size: int, stride: int | None = None) -> AnomalyMap:
    """Score patch pairs on a regular origin grid and spread dissimilarity
    1 - a over each patch footprint, averaging overlaps per pixel.

    Coverage of a top-left-anchored regular grid is always a rectangle, so
    uncovered right/bottom margins take the nearest covered value, which is
    the index-clamped pixel.
    """
    if real.shape != rec.shape:
        raise ValueError("real/rec shapes differ")
    h, w = real.shape
    if patch_size > h or patch_size > w:
        raise ValueError(f"patch size {patch_size} exceeds image {real.shape}")
    if stride is None:
        stride = max(1, patch_size // 2)
    if stride < 1:
        raise ValueError("stride must be >= 1")

    rows = patch_grid(h, patch_size, stride)
    cols = patch_grid(w, patch_size, stride)
    origins = [(int(r), int(c)) for r in rows for c in cols]
    real_patches = np.stack([real.pixels[r:r + patch_size, c:c + patch_size] for r, c in origins])
    rec_patches = np.stack([rec.pixels[r:r + patch_size, c:c + patch_size] for r, c in origins])

    scores = np.asarray(scorer(real_patches, rec_patches), dtype=np.float64)
    if scores.shape != (len(origins),):
        raise ValueError(f"scorer returned shape {scores.shape}, expected ({len(origins)},)")
    if scores.min() < -SCORE_TOLERANCE or scores.max() > 1 + SCORE_TOLERANCE:
        raise ValueError("similarity scores outside [0, 1]")

    sums = np.zeros((h, w))
    counts = np.zeros((h, w))
    for (r, c), a in zip(origins, scores):
        sums[r:r + patch_size, c:c + patch_size] += 1.0 - a
        counts[r:r + patch_size, c:c + patch_size] += 1.0

    rmax = int(rows[-1]) + patch_size - 1
    cmax = int(cols[-1]) + patch_size - 1
    avg = np.zeros((h, w))
    covered = counts > 0
    avg[covered] = sums[covered] / counts[covered]

    rr = np.minimum(np.arange(h), rmax)[:, None]
    cc = np.minimum(np.arange(w), cmax)[None, :]
    filled = avg[rr, cc]
    coverage = counts[rr, cc]
    return AnomalyMap(np.clip(filled, 0.0, 1.0), coverage)


def final_map(real: Image2D, rec: Image2D, heat: AnomalyMap) -> FinalMap:
    """|real - rec| weighted by the heat-map; background pixels forced to 0."""
    if real.shape != rec.shape or real.shape != heat.pixels.shape:
        raise ValueError("shape mismatch")
    pixels = np.abs(real.pixels - rec.pixels) * heat.pixels
    if real.mask is not None:
        pixels = np.where(real.mask > 0, pixels, 0.0)
    return FinalMap(pixels)


def residual_map(real: Image2D, rec: Image2D) -> FinalMap:
    """Scorer-free variant: the absolute residual alone."""
    if real.shape != rec.shape:
        raise ValueError("shape mismatch")
    pixels = np.abs(real.pixels - rec.pixels)
    if real.mask is not None:
        pixels = np.where(real.mask > 0, pixels, 0.0)
    return FinalMap(pixels)


def apply_threshold(fm: FinalMap, t: float) -> np.ndarray:
    """Binary mask of pixels strictly above t."""
    if t < 0:
        raise ValueError("threshold must be >= 0")
    return (fm.pixels > t).astype(np.uint8)
