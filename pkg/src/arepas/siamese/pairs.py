"""Patch-pair sampling from (real, reconstructed) image couples."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..imaging import Image2D

MIN_FOREGROUND_OVERLAP = 0.5
MAX_NEGATIVE_TRIES = 1000


class PatchSource(enum.Enum):
    REAL = "real"
    REC = "rec"


@dataclass
class Patch:
    pixels: np.ndarray
    origin: tuple[int, int]
    source: PatchSource

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


@dataclass
class PatchPair:
    real_patch: Patch
    rec_patch: Patch
    label: int

    def validate(self) -> None:
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        s = self.real_patch.size
        dr = abs(self.real_patch.origin[0] - self.rec_patch.origin[0])
        dc = abs(self.real_patch.origin[1] - self.rec_patch.origin[1])
        if self.label == 1 and (dr, dc) != (0, 0):
            raise ValueError("positive pair with differing origins")
        if self.label == 0 and max(dr, dc) < s / 2:
            raise ValueError("negative pair closer than s/2")


def valid_origins(image: Image2D, patch_size: int, min_overlap: float = MIN_FOREGROUND_OVERLAP) -> np.ndarray:
    """Origins whose patch window overlaps the foreground mask by at least
    ``min_overlap``. Returns an (k, 2) array of (row, col)."""
    h, w = image.shape
    if patch_size > h or patch_size > w:
        raise ValueError(f"patch size {patch_size} exceeds image {image.shape}")
    fg = image.foreground().astype(np.float64)
    # summed-area table for O(1) window sums
    sat = np.zeros((h + 1, w + 1))
    sat[1:, 1:] = fg.cumsum(axis=0).cumsum(axis=1)
    s = patch_size
    win = (
        sat[s:h + 1, s:w + 1] - sat[:h - s + 1, s:w + 1]
        - sat[s:h + 1, :w - s + 1] + sat[:h - s + 1, :w - s + 1]
    )
    ok = win >= min_overlap * s * s
    rows, cols = np.nonzero(ok)
    return np.stack([rows, cols], axis=1)


def sample_patch_pairs(
    real: Image2D,
    rec: Image2D,
    patch_size: int,
    pairs_per_image: int,
    rng: np.random.Generator,
    min_overlap: float = MIN_FOREGROUND_OVERLAP,
) -> list[PatchPair]:
    """pairs_per_image positives at shared origins plus the same number of
    negatives whose two origins are at L-inf distance >= patch_size/2."""
    if real.shape != rec.shape:
        raise ValueError("real/rec shapes differ")
    origins = valid_origins(real, patch_size, min_overlap)
    if len(origins) == 0:
        raise ValueError("no valid patch origins in foreground")

    def cut(img: Image2D, origin, source) -> Patch:
        r, c = int(origin[0]), int(origin[1])
        return Patch(img.pixels[r:r + patch_size, c:c + patch_size].copy(), (r, c), source)

    pairs: list[PatchPair] = []
    for _ in range(pairs_per_image):
        o = origins[int(rng.integers(len(origins)))]
        pairs.append(PatchPair(cut(real, o, PatchSource.REAL), cut(rec, o, PatchSource.REC), 1))

    min_sep = patch_size / 2
    for _ in range(pairs_per_image):
        for _ in range(MAX_NEGATIVE_TRIES):
            o1 = origins[int(rng.integers(len(origins)))]
            o2 = origins[int(rng.integers(len(origins)))]
            if max(abs(int(o1[0]) - int(o2[0])), abs(int(o1[1]) - int(o2[1]))) >= min_sep:
                pairs.append(PatchPair(cut(real, o1, PatchSource.REAL), cut(rec, o2, PatchSource.REC), 0))
                break
        else:
            raise ValueError("could not find separated origins for a negative pair")
    return pairs
