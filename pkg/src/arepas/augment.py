"""Copy-paste corruption of edge maps.

Training pairs for the reconstructor couple a corrupted edge map with the
clean target image: irregular regions of the edge map are swapped between
two non-overlapping placements, so edge-pixel statistics are conserved while
local structure is destroyed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.ndimage as ndi

from .imaging import CannyConfig, EdgeMap, Image2D, canny_edges

AREA_TOLERANCE = 0.02
MAX_RETRIES = 100


@dataclass
class AugmentSpec:
    min_area_frac: float = 0.01
    max_area_frac: float = 0.33
    max_copy_paste_ops: int = 10
    max_augmentations_per_image: int = 20
    blur_sigma: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        if not (0.0 < self.min_area_frac <= self.max_area_frac <= 1.0):
            raise ValueError(f"bad area fractions [{self.min_area_frac}, {self.max_area_frac}]")
        # 0 is a debug mode that disables copy-paste entirely
        if self.max_copy_paste_ops < 0:
            raise ValueError("max_copy_paste_ops must be >= 0")
        if self.max_augmentations_per_image < 1:
            raise ValueError("max_augmentations_per_image must be >= 1")


@dataclass
class RegionShape:
    """Irregular single-component blob plus its tight bounding box."""

    mask: np.ndarray
    bbox: tuple[int, int, int, int]  # row, col, height, width

    @property
    def crop(self) -> np.ndarray:
        r, c, h, w = self.bbox
        return self.mask[r:r + h, c:c + w]

    def area_fraction(self) -> float:
        return float(self.mask.sum()) / self.mask.size


def sample_region_shape(rng: np.random.Generator, image_size: int, spec: AugmentSpec) -> RegionShape:
    """Draw a smooth irregular blob with area fraction inside the configured band.

    Blurred uniform noise is thresholded at a level binary-searched so that,
    after keeping the largest connected component and one open-close
    smoothing pass, the area fraction lands on a uniform target in
    [min_area_frac, max_area_frac] (within +-0.02). Degenerate draws are
    resampled up to 100 times.
    """
    if image_size < 8:
        raise ValueError("image_size must be >= 8")
    spec.validate()
    for _ in range(MAX_RETRIES):
        target = float(rng.uniform(spec.min_area_frac, spec.max_area_frac))
        noise = rng.uniform(size=(image_size, image_size))
        blurred = ndi.gaussian_filter(noise, spec.blur_sigma)

        mask = _best_threshold_mask(blurred, target)
        if mask is None:
            continue
        frac = float(mask.sum()) / mask.size
        if abs(frac - target) > AREA_TOLERANCE:
            continue
        if spec.min_area_frac < spec.max_area_frac and not (
            spec.min_area_frac <= frac <= spec.max_area_frac
        ):
            continue
        return RegionShape(mask.astype(np.uint8), _bbox(mask))
    raise RuntimeError("no acceptable region after 100 retries")


def _best_threshold_mask(blurred: np.ndarray, target: float) -> np.ndarray | None:
    lo, hi = float(blurred.min()), float(blurred.max())
    if hi <= lo:
        return None
    best, best_err = None, np.inf
    for _ in range(22):
        mid = (lo + hi) / 2.0
        mask = _shape_pipeline(blurred, mid)
        frac = float(mask.sum()) / mask.size
        err = abs(frac - target)
        if err < best_err:
            best, best_err = mask, err
        if best_err <= 0.005:
            break
        if frac > target:
            lo = mid  # raise threshold to shrink
        else:
            hi = mid
    return best


_SQUARE3 = np.ones((3, 3), dtype=bool)


def _shape_pipeline(blurred: np.ndarray, threshold: float) -> np.ndarray:
    mask = blurred > threshold
    mask = _largest_component(mask)
    if mask.any():
        mask = ndi.binary_opening(mask, _SQUARE3)
        mask = ndi.binary_closing(mask, _SQUARE3)
        mask = _largest_component(mask)
    return mask


def _largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndi.label(mask, structure=_SQUARE3)
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = ndi.sum_labels(mask, labels, index=np.arange(1, n + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def _bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return int(rows[0]), int(cols[0]), int(rows[-1] - rows[0] + 1), int(cols[-1] - cols[0] + 1)


def copy_paste_once(edges: EdgeMap, rng: np.random.Generator, spec: AugmentSpec) -> EdgeMap:
    """Swap edge content between two non-overlapping placements of one
    sampled region. Conserves the total edge-pixel count.

    Large regions may admit no overlap-free placement pair, so the region is
    redrawn when placements keep colliding; with every budget exhausted the
    input is returned unchanged.
    """
    n = edges.shape[0]
    for _ in range(10):
        region = sample_region_shape(rng, n, spec)
        crop = region.crop.astype(bool)
        h, w = crop.shape
        for _ in range(30):
            r1, c1 = int(rng.integers(0, n - h + 1)), int(rng.integers(0, n - w + 1))
            r2, c2 = int(rng.integers(0, n - h + 1)), int(rng.integers(0, n - w + 1))
            if (r1, c1) == (r2, c2):
                continue
            if _placements_overlap(crop, (r1, c1), (r2, c2)):
                continue
            out = edges.pixels.copy()
            w1 = out[r1:r1 + h, c1:c1 + w]
            w2 = out[r2:r2 + h, c2:c2 + w]
            v1 = w1[crop].copy()
            w1[crop] = w2[crop]
            w2[crop] = v1
            return EdgeMap(out, edges.source_shape)
    return EdgeMap(edges.pixels.copy(), edges.source_shape)


def _placements_overlap(crop: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> bool:
    h, w = crop.shape
    dr, dc = b[0] - a[0], b[1] - a[1]
    if abs(dr) >= h or abs(dc) >= w:
        return False
    # intersect the two shifted copies of the blob inside the common window
    r0, r1 = max(0, dr), min(h, h + dr)
    c0, c1 = max(0, dc), min(w, w + dc)
    return bool((crop[r0:r1, c0:c1] & crop[r0 - dr:r1 - dr, c0 - dc:c1 - dc]).any())


def augment_edge_map(edges: EdgeMap, rng: np.random.Generator, spec: AugmentSpec) -> EdgeMap:
    """Apply k ~ Uniform{1..max_copy_paste_ops} sequential swaps."""
    if spec.max_copy_paste_ops == 0:
        return EdgeMap(edges.pixels.copy(), edges.source_shape)
    k = int(rng.integers(1, spec.max_copy_paste_ops + 1))
    out = edges
    for _ in range(k):
        out = copy_paste_once(out, rng, spec)
    return out


def build_training_pairs(
    img: Image2D,
    spec: AugmentSpec,
    rng: np.random.Generator | None = None,
    canny_config: CannyConfig | None = None,
    edges: EdgeMap | None = None,
) -> list[tuple[EdgeMap, Image2D]]:
    """Clean edge map plus n ~ Uniform{1..max_augmentations_per_image}
    corrupted variants, each paired with the same target image. Variants that
    come out bit-identical to an earlier pair are dropped."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    clean = edges if edges is not None else canny_edges(img, canny_config)
    kept = [clean]
    n = int(rng.integers(1, spec.max_augmentations_per_image + 1))
    for _ in range(n):
        candidate = augment_edge_map(clean, rng, spec)
        if not any(np.array_equal(candidate.pixels, k.pixels) for k in kept):
            kept.append(candidate)
    return [(edge_map, img) for edge_map in kept]
