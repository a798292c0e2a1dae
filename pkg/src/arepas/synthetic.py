"""Procedural vessel-phantom generator for desk-scale experiments.

Normal images are elliptical tissue regions containing a dim textured
background and bright curvilinear vessels of varying intensity; anomalous
images add soft-edged intensity blobs with a pixel-exact ground-truth mask.
All randomness flows through explicit generators so datasets are
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.ndimage as ndi

from .imaging import Image2D, Modality
from .manifest import DatasetManifest, ManifestRecord, save_manifest

# Disjoint per-split seed-stream offsets; gaps are far wider than any
# realistic split size, so image streams never collide.
SPLIT_OFFSETS = {"train": 0, "val": 1_000_000, "test": 2_000_000}

_BASE_LEVEL = -0.55
_BASE_TEXTURE_AMP = 0.12
_BASE_TEXTURE_SIGMA = 3.0
_VESSEL_AMP_RANGE = (0.8, 1.55)
_SHADING_AMP_RANGE = (0.12, 0.22)
_SHADING_SIGMA_FRAC = 0.25
_VESSEL_TURN_SIGMA = 0.22
_BLOB_EDGE_SIGMA = 1.5


class SynthDataError(ValueError):
    pass


@dataclass
class SynthConfig:
    image_size: int = 64
    n_normal: int = 200
    n_anomalous: int = 100
    val_fraction: float = 0.5
    vessel_count: tuple[int, int] = (3, 6)
    vessel_width: tuple[float, float] = (1.0, 2.5)
    anomaly_count: tuple[int, int] = (1, 3)
    anomaly_area_frac: tuple[float, float] = (0.02, 0.15)
    anomaly_intensity_shift: tuple[float, float] = (0.3, 0.6)
    seed: int = 0

    def __post_init__(self) -> None:
        self.vessel_count = tuple(self.vessel_count)
        self.vessel_width = tuple(self.vessel_width)
        self.anomaly_count = tuple(self.anomaly_count)
        self.anomaly_area_frac = tuple(self.anomaly_area_frac)
        self.anomaly_intensity_shift = tuple(self.anomaly_intensity_shift)

    def validate(self) -> None:
        if self.image_size < 32:
            raise SynthDataError("image_size must be at least 32")
        if self.n_normal < 1:
            raise SynthDataError("n_normal must be positive")
        if self.n_anomalous < 0:
            raise SynthDataError("n_anomalous must be nonnegative")
        if not 0.0 <= self.val_fraction <= 1.0:
            raise SynthDataError("val_fraction must lie in [0, 1]")
        for name, lo, hi in [
            ("vessel_count", *self.vessel_count),
            ("anomaly_count", *self.anomaly_count),
        ]:
            if lo < 0 or hi < lo:
                raise SynthDataError(f"{name} range must satisfy 0 <= lo <= hi")
        if self.vessel_count[0] < 1:
            raise SynthDataError("vessel_count lower bound must be at least 1")
        for name, (lo, hi) in [
            ("vessel_width", self.vessel_width),
            ("anomaly_area_frac", self.anomaly_area_frac),
            ("anomaly_intensity_shift", self.anomaly_intensity_shift),
        ]:
            if lo <= 0 or hi < lo:
                raise SynthDataError(f"{name} range must satisfy 0 < lo <= hi")
        # Blobs must fit inside the foreground with room to spare.
        if self.anomaly_area_frac[1] >= 0.5:
            raise SynthDataError("anomaly_area_frac upper bound must be below 0.5")


def _elliptical_mask(rng: np.random.Generator, n: int) -> np.ndarray:
    cy = n / 2 + rng.uniform(-0.03, 0.03) * n
    cx = n / 2 + rng.uniform(-0.03, 0.03) * n
    semi_y = rng.uniform(0.34, 0.45) * n
    semi_x = rng.uniform(0.34, 0.45) * n
    yy, xx = np.mgrid[0:n, 0:n]
    inside = ((yy - cy) / semi_y) ** 2 + ((xx - cx) / semi_x) ** 2 <= 1.0
    return inside


def _vessel_layer(rng: np.random.Generator, mask: np.ndarray,
                  width_range: tuple[float, float]) -> np.ndarray:
    """One random-walk centerline rendered with a Gaussian cross-section."""
    n = mask.shape[0]
    line = np.zeros((n, n), dtype=np.float64)
    fg = np.argwhere(mask)
    start = fg[rng.integers(len(fg))]
    pos = start.astype(np.float64)
    theta = rng.uniform(0.0, 2.0 * np.pi)
    for _ in range(int(1.5 * n)):
        theta += rng.normal(0.0, _VESSEL_TURN_SIGMA)
        pos += np.array([np.sin(theta), np.cos(theta)])
        r, c = int(round(pos[0])), int(round(pos[1]))
        if 0 <= r < n and 0 <= c < n:
            line[r, c] = 1.0
    sigma = rng.uniform(*width_range) / 2.0
    blurred = ndi.gaussian_filter(line, sigma)
    peak = blurred.max()
    if peak > 0:
        blurred /= peak
    return blurred


def gen_normal(rng: np.random.Generator, cfg: SynthConfig) -> Image2D:
    """Draw one anomaly-free phantom with background pixels fixed at zero."""
    cfg.validate()
    n = cfg.image_size
    mask = _elliptical_mask(rng, n)

    texture = ndi.gaussian_filter(rng.standard_normal((n, n)), _BASE_TEXTURE_SIGMA)
    spread = texture.std()
    if spread > 0:
        texture = texture / spread
    base = _BASE_LEVEL + _BASE_TEXTURE_AMP * texture

    vessels = np.zeros((n, n), dtype=np.float64)
    count = int(rng.integers(cfg.vessel_count[0], cfg.vessel_count[1] + 1))
    for _ in range(count):
        amp = rng.uniform(*_VESSEL_AMP_RANGE)
        vessels = np.maximum(vessels, amp * _vessel_layer(rng, mask, cfg.vessel_width))

    # Slowly varying illumination/gain field. Too smooth to leave edges, so
    # it is unrecoverable from the edge sketch: reconstructions of normal
    # images carry broad residuals that patch scoring must learn to discount.
    shading = ndi.gaussian_filter(rng.standard_normal((n, n)), _SHADING_SIGMA_FRAC * n)
    peak = np.abs(shading).max()
    if peak > 0:
        shading = shading / peak
    shading *= rng.uniform(*_SHADING_AMP_RANGE)

    pixels = np.clip(base + vessels + shading, -1.0, 1.0)
    pixels[~mask] = 0.0
    img = Image2D(pixels=pixels, modality=Modality.SYNTH, mask=mask.astype(np.uint8))
    img.validate()
    return img


def _draw_blob(rng: np.random.Generator, mask: np.ndarray, target_frac: float,
               lo: float, hi: float) -> tuple[np.ndarray, np.ndarray] | None:
    """Soft disk blob whose thresholded area fraction lands inside [lo, hi].

    Returns (soft profile peaking at 1, boolean blob mask), or None when the
    foreground cannot host a blob of the requested size.
    """
    n = mask.shape[0]
    dist_in = ndi.distance_transform_edt(mask)
    radius = np.sqrt(target_frac * n * n / np.pi)
    yy, xx = np.mgrid[0:n, 0:n]
    for _ in range(8):
        valid = np.argwhere(dist_in > radius + 1.0)
        shrink = 0
        while len(valid) == 0 and shrink < 8:
            radius *= 0.8
            valid = np.argwhere(dist_in > radius + 1.0)
            shrink += 1
        if len(valid) == 0:
            return None
        cy, cx = valid[rng.integers(len(valid))]
        disk = ((yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius).astype(np.float64)
        soft = ndi.gaussian_filter(disk, _BLOB_EDGE_SIGMA)
        peak = soft.max()
        if peak <= 0:
            return None
        soft /= peak
        blob = (soft >= 0.5) & mask
        frac = blob.sum() / (n * n)
        if lo <= frac <= hi:
            return soft, blob
        if frac <= 0:
            radius *= 1.3
        else:
            # Blur then threshold roughly preserves disk area, so one
            # multiplicative correction per round converges quickly.
            radius *= np.sqrt(target_frac / frac)
    return None


def inject_anomaly(img: Image2D, rng: np.random.Generator,
                   cfg: SynthConfig) -> tuple[Image2D, np.ndarray]:
    """Add intensity-shift blobs inside the foreground.

    Returns the modified image plus the union ground-truth mask (uint8).
    Requesting zero blobs yields an untouched copy and an empty mask.
    """
    cfg.validate()
    mask = img.foreground().astype(bool)
    pixels = img.pixels.copy()
    n = pixels.shape[0]
    gt = np.zeros((n, n), dtype=bool)
    lo, hi = cfg.anomaly_area_frac
    count = int(rng.integers(cfg.anomaly_count[0], cfg.anomaly_count[1] + 1))
    for _ in range(count):
        target = rng.uniform(lo, hi)
        drawn = _draw_blob(rng, mask, target, lo, hi)
        if drawn is None:
            continue
        soft, blob = drawn
        shift = rng.uniform(*cfg.anomaly_intensity_shift)
        # soft ramp inside the blob only: pixels outside the gt mask stay
        # bit-identical to the pre-injection image
        pixels += np.where(blob, soft * shift, 0.0)
        gt |= blob
    pixels = np.clip(pixels, -1.0, 1.0)
    pixels[~mask] = 0.0
    out = Image2D(pixels=pixels, modality=img.modality, mask=img.mask)
    out.validate()
    return out, gt.astype(np.uint8)


def _image_rng(seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, SPLIT_OFFSETS[split] + index])


def gen_dataset(cfg: SynthConfig, out_dir, overwrite: bool = False) -> Path:
    """Write a train/val/test phantom dataset plus manifest; returns its path."""
    cfg.validate()
    out = Path(out_dir)
    manifest_path = out / "manifest.csv"
    if manifest_path.exists() and not overwrite:
        raise SynthDataError(f"dataset already exists at {manifest_path}")

    n_val = int(round(cfg.n_anomalous * cfg.val_fraction))
    counts = {"train": cfg.n_normal, "val": n_val, "test": cfg.n_anomalous - n_val}
    records = []
    for split, count in counts.items():
        split_dir = out / split
        split_dir.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            rng = _image_rng(cfg.seed, split, i)
            img = gen_normal(rng, cfg)
            gt = None
            if split != "train":
                img, gt = inject_anomaly(img, rng, cfg)
            image_path = split_dir / f"img_{i:04d}.npy"
            mask_path = split_dir / f"msk_{i:04d}.npy"
            np.save(image_path, img.pixels)
            np.save(mask_path, img.mask)
            gt_path = None
            if gt is not None:
                gt_path = split_dir / f"gt_{i:04d}.npy"
                np.save(gt_path, gt)
            records.append(ManifestRecord(
                image_id=f"{split}_{i:04d}",
                split=split,
                image_path=image_path,
                mask_path=mask_path,
                gt_path=gt_path,
            ))
    manifest = DatasetManifest(records)
    manifest.validate()
    save_manifest(manifest, manifest_path)
    return manifest_path
