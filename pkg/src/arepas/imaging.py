"""Image grids, intensity normalization, Otsu thresholding and Canny edges.

All images are 2D float grids. CT-style data lives in [-1, 1] with the
background pinned at 0, MRI-style data in [0, 1]. Edge maps are binary grids
of the same shape as their source image.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

HU_LOW = -1000.0
HU_HIGH = 0.0
MR_PERCENTILE = 98.0
DEFAULT_IMAGE_SIZE = 256
HISTOGRAM_BINS = 256


class Modality(enum.Enum):
    CT = "ct"
    MRI = "mri"
    SYNTH = "synth"


#: nominal (lower, upper) intensity range per modality
MODALITY_RANGE = {
    Modality.CT: (-1.0, 1.0),
    Modality.MRI: (0.0, 1.0),
    Modality.SYNTH: (-1.0, 1.0),
}


class DegenerateHistogramError(ValueError):
    """Region has a single intensity value, no threshold separates it."""


@dataclass
class Image2D:
    """Square grid of intensities plus an optional foreground mask."""

    pixels: np.ndarray
    modality: Modality = Modality.SYNTH
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.mask is not None:
            self.mask = (np.asarray(self.mask) > 0).astype(np.uint8)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def foreground(self) -> np.ndarray:
        """Foreground selector; all-ones when no mask is attached."""
        if self.mask is None:
            return np.ones(self.pixels.shape, dtype=np.uint8)
        return self.mask

    def validate(self) -> None:
        if self.pixels.ndim != 2:
            raise ValueError(f"expected 2D pixel grid, got ndim={self.pixels.ndim}")
        if self.pixels.shape[0] != self.pixels.shape[1]:
            raise ValueError(f"expected square image, got {self.pixels.shape}")
        lo, hi = MODALITY_RANGE[self.modality]
        if self.pixels.min() < lo - 1e-9 or self.pixels.max() > hi + 1e-9:
            raise ValueError(
                f"{self.modality.value} pixels outside [{lo}, {hi}]: "
                f"[{self.pixels.min():.4f}, {self.pixels.max():.4f}]"
            )
        if self.mask is not None and self.mask.shape != self.pixels.shape:
            raise ValueError("mask shape differs from pixel grid")


@dataclass
class EdgeMap:
    """Binary edge grid aligned with its source image."""

    pixels: np.ndarray
    source_shape: tuple[int, int] = ()

    def __post_init__(self):
        self.pixels = (np.asarray(self.pixels) > 0).astype(np.uint8)
        if not self.source_shape:
            self.source_shape = self.pixels.shape
        self.source_shape = tuple(self.source_shape)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def validate(self) -> None:
        if self.pixels.shape != self.source_shape:
            raise ValueError("edge map shape differs from source shape")
        vals = np.unique(self.pixels)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError(f"edge map is not binary: values {vals}")


@dataclass
class IntensityStats:
    """Histogram summary of a region: 256-bin counts, Otsu split, p98."""

    histogram: np.ndarray
    otsu_threshold: float
    p98: float
    value_range: tuple[float, float] = (0.0, 1.0)


@dataclass
class CannyConfig:
    """Edge-extraction knobs. Both hysteresis thresholds default to the same
    fraction of the region's Otsu threshold."""

    sigma: float = 1.0
    threshold_factor: float = 0.66
    fallback_threshold: float | None = None


def normalize_ct(raw: np.ndarray, lung_mask: np.ndarray, size: int = DEFAULT_IMAGE_SIZE) -> Image2D:
    """Normalize a raw HU slice into a square [-1, 1] image.

    Clips to [-1000, 0] HU, scales linearly to [-1, 1], zeroes the
    background, crops to the square bounding box of the mask and resizes to
    ``size``. Rejects an empty mask.
    """
    raw = np.asarray(raw, dtype=np.float64)
    mask = (np.asarray(lung_mask) > 0).astype(np.uint8)
    if raw.shape != mask.shape:
        raise ValueError(f"raw {raw.shape} and mask {mask.shape} shapes differ")
    if not mask.any():
        raise ValueError("no foreground")

    clipped = np.clip(raw, HU_LOW, HU_HIGH)
    scaled = (clipped - HU_LOW) / (HU_HIGH - HU_LOW) * 2.0 - 1.0
    scaled[mask == 0] = 0.0

    pix_sq, mask_sq = _crop_square_to_mask(scaled, mask)
    pixels = _resize(pix_sq, size, order=1)
    out_mask = _resize(mask_sq.astype(np.float64), size, order=0) > 0.5
    pixels = np.clip(pixels, -1.0, 1.0)
    pixels[~out_mask] = 0.0
    return Image2D(pixels, Modality.CT, out_mask.astype(np.uint8))


def normalize_mr(raw: np.ndarray, size: int | None = None) -> Image2D:
    """Normalize an MR slice: clip at the 98th percentile of nonzero pixels,
    scale to [0, 1] and zero-pad to square (extra row/column after)."""
    raw = np.asarray(raw, dtype=np.float64)
    nonzero = raw[raw > 0]
    if nonzero.size == 0:
        raise ValueError("all-zero input")
    p98 = float(np.percentile(nonzero, MR_PERCENTILE))
    pixels = np.clip(raw, 0.0, p98) / p98

    h, w = pixels.shape
    side = max(h, w)
    pad_r, pad_c = side - h, side - w
    pixels = np.pad(pixels, ((pad_r // 2, pad_r - pad_r // 2), (pad_c // 2, pad_c - pad_c // 2)))
    mask = (pixels > 0).astype(np.uint8)
    if size is not None and size != side:
        pixels = np.clip(_resize(pixels, size, order=1), 0.0, 1.0)
        mask = (_resize(mask.astype(np.float64), size, order=0) > 0.5).astype(np.uint8)
    return Image2D(pixels, Modality.MRI, mask)


def intensity_stats(img: Image2D, region: np.ndarray | None = None) -> IntensityStats:
    """Histogram, Otsu threshold and 98th percentile of a region."""
    pixels = img.pixels if isinstance(img, Image2D) else np.asarray(img, dtype=np.float64)
    sel = pixels[region > 0] if region is not None else pixels.ravel()
    if sel.size == 0:
        raise ValueError("empty region")
    vmin, vmax = float(sel.min()), float(sel.max())
    hist, _ = np.histogram(sel, bins=HISTOGRAM_BINS, range=(vmin, vmax) if vmax > vmin else (vmin, vmin + 1.0))
    thr = otsu_threshold(pixels, region)
    return IntensityStats(hist, thr, float(np.percentile(sel, MR_PERCENTILE)), (vmin, vmax))


def otsu_threshold(img: Image2D | np.ndarray, region: np.ndarray | None = None) -> float:
    """256-bin Otsu threshold of the region's intensities.

    Returns the bin boundary maximizing the between-class variance; ties
    break toward the lower threshold. A constant region is rejected.
    """
    pixels = img.pixels if isinstance(img, Image2D) else np.asarray(img, dtype=np.float64)
    sel = pixels[region > 0] if region is not None else pixels.ravel()
    if sel.size == 0:
        raise ValueError("empty region")
    vmin, vmax = float(sel.min()), float(sel.max())
    if vmax <= vmin:
        raise DegenerateHistogramError("degenerate histogram")

    hist, edges = np.histogram(sel, bins=HISTOGRAM_BINS, range=(vmin, vmax))
    counts = hist.astype(np.float64)
    centers = (edges[:-1] + edges[1:]) / 2.0

    w0 = np.cumsum(counts)
    m0 = np.cumsum(counts * centers)
    total_n, total_m = w0[-1], m0[-1]
    # candidate k splits bins [0..k] | [k+1..255]
    w0, m0 = w0[:-1], m0[:-1]
    w1 = total_n - w0
    mu0 = np.divide(m0, w0, out=np.zeros_like(m0), where=w0 > 0)
    mu1 = np.divide(total_m - m0, w1, out=np.zeros_like(m0), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    k = int(np.argmax(between))  # argmax takes the first (lowest) maximizer
    return float(edges[k + 1])


def gradient_maps(smoothed: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sobel gradients and magnitude of an already-smoothed image."""
    kx = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    ky = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])
    gx = _conv2d_reflect(smoothed, kx)
    gy = _conv2d_reflect(smoothed, ky)
    mag = np.sqrt(gx * gx + gy * gy)
    return gx, gy, mag


def canny_edges(img: Image2D, config: CannyConfig | None = None) -> EdgeMap:
    """Canny edge extraction with both hysteresis thresholds tied to Otsu.

    Pipeline: rescale intensities to [0, 1] for the image's modality,
    Gaussian smoothing, Sobel gradients, 4-direction non-maximum
    suppression, double threshold with low = high =
    ``threshold_factor * otsu``. Otsu runs on the foreground region only;
    a constant region raises unless ``fallback_threshold`` is set.
    """
    cfg = config or CannyConfig()
    lo, hi = MODALITY_RANGE[img.modality]
    unit = (img.pixels - lo) / (hi - lo)

    try:
        otsu = otsu_threshold(unit, img.mask)
        threshold = cfg.threshold_factor * otsu
    except DegenerateHistogramError:
        if cfg.fallback_threshold is None:
            raise
        threshold = cfg.fallback_threshold

    smoothed = gaussian_smooth(unit, cfg.sigma)
    gx, gy, mag = gradient_maps(smoothed)
    nms = nonmax_suppress(gx, gy, mag)
    edges = hysteresis(nms, low=threshold, high=threshold)
    return EdgeMap(edges, img.pixels.shape)


def gaussian_smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur with an explicit truncated kernel and symmetric borders."""
    if sigma <= 0:
        return np.asarray(img, dtype=np.float64).copy()
    kernel = gaussian_kernel_2d(sigma)
    return _conv2d_reflect(np.asarray(img, dtype=np.float64), kernel)


def gaussian_kernel_2d(sigma: float) -> np.ndarray:
    radius = int(4.0 * sigma + 0.5)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    k1 /= k1.sum()
    return np.outer(k1, k1)


def nonmax_suppress(gx: np.ndarray, gy: np.ndarray, mag: np.ndarray) -> np.ndarray:
    """Thin gradient ridges to single-pixel width.

    The gradient direction is quantized to horizontal / vertical / the two
    diagonals; a pixel survives when its magnitude strictly exceeds the
    neighbor at the negative offset and is >= the neighbor at the positive
    offset (keeps exactly one side of a two-pixel plateau). The one-pixel
    border is always suppressed.
    """
    h, w = mag.shape
    out = np.zeros_like(mag)
    if h < 3 or w < 3:
        return out

    ax, ay = np.abs(gx), np.abs(gy)
    t_low = math.sqrt(2.0) - 1.0
    t_high = math.sqrt(2.0) + 1.0
    horiz = ay <= ax * t_low
    vert = ay >= ax * t_high
    diag = ~horiz & ~vert
    diag_main = diag & (gx * gy > 0)
    diag_anti = diag & ~diag_main

    c = mag[1:-1, 1:-1]

    def keep(minus, plus):
        return (c > minus) & (c >= plus)

    interior = np.zeros_like(c, dtype=bool)
    interior |= horiz[1:-1, 1:-1] & keep(mag[1:-1, :-2], mag[1:-1, 2:])
    interior |= vert[1:-1, 1:-1] & keep(mag[:-2, 1:-1], mag[2:, 1:-1])
    interior |= diag_main[1:-1, 1:-1] & keep(mag[:-2, :-2], mag[2:, 2:])
    interior |= diag_anti[1:-1, 1:-1] & keep(mag[:-2, 2:], mag[2:, :-2])
    out[1:-1, 1:-1] = np.where(interior, c, 0.0)
    return out


def hysteresis(nms_mag: np.ndarray, low: float, high: float) -> np.ndarray:
    """Double-threshold linking: weak pixels survive only in 8-connected
    components that contain at least one strong pixel."""
    weak = nms_mag > low
    strong = nms_mag > high
    if not strong.any():
        return np.zeros(nms_mag.shape, dtype=np.uint8)
    labels, _ = ndi.label(weak, structure=np.ones((3, 3), dtype=int))
    keep_ids = np.unique(labels[strong])
    keep_ids = keep_ids[keep_ids > 0]
    return np.isin(labels, keep_ids).astype(np.uint8)


def _conv2d_reflect(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Direct 2D correlation with symmetric (edge-including) padding.

    Accumulates shifted copies in kernel row-major order so a naive
    per-pixel loop with the same order produces bit-identical sums.
    """
    kh, kw = kernel.shape
    rh, rw = kh // 2, kw // 2
    h, w = img.shape
    padded = np.pad(img, ((rh, rh), (rw, rw)), mode="symmetric")
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            out += kernel[i, j] * padded[i:i + h, j:j + w]
    return out


def _crop_square_to_mask(pixels: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = cols[0], cols[-1] + 1
    side = max(r1 - r0, c1 - c0)

    def window(lo, hi, n):
        center = (lo + hi) / 2.0
        start = int(round(center - side / 2.0))
        start = max(0, min(start, n - side))  # clamp; negative when n < side
        return start

    h, w = pixels.shape
    rs, cs = window(r0, r1, h), window(c0, c1, w)
    pr0, pr1 = max(rs, 0), min(rs + side, h)
    pc0, pc1 = max(cs, 0), min(cs + side, w)
    pix = pixels[pr0:pr1, pc0:pc1]
    msk = mask[pr0:pr1, pc0:pc1]
    # pad when the square exceeds the source grid
    dh, dw = side - pix.shape[0], side - pix.shape[1]
    if dh > 0 or dw > 0:
        spec = ((dh // 2, dh - dh // 2), (dw // 2, dw - dw // 2))
        pix = np.pad(pix, spec)
        msk = np.pad(msk, spec)
    return pix, msk


def _resize(arr: np.ndarray, size: int, order: int) -> np.ndarray:
    h, w = arr.shape
    if (h, w) == (size, size):
        return arr.copy()
    zoom = (size / h, size / w)
    return ndi.zoom(arr, zoom, order=order, mode="nearest", grid_mode=True)
