"""Dataset manifests: one CSV row per image, paths relative to the file."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import Image2D, Modality

MANIFEST_HEADER = ["image_id", "split", "image_path", "mask_path", "gt_path"]
SPLITS = ("train", "val", "test")
_GRAYSCALE_SUFFIXES = {".png", ".bmp", ".tif", ".tiff"}


class ManifestError(ValueError):
    pass


@dataclass
class ManifestRecord:
    image_id: str
    split: str
    image_path: Path
    mask_path: Path | None = None
    gt_path: Path | None = None


@dataclass
class DatasetManifest:
    records: list[ManifestRecord] = field(default_factory=list)

    def split(self, name: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == name]

    def validate(self) -> None:
        seen = set()
        for r in self.records:
            if r.split not in SPLITS:
                raise ManifestError(f"unknown split {r.split!r} for {r.image_id}")
            if r.image_id in seen:
                raise ManifestError(f"duplicate image id {r.image_id}")
            seen.add(r.image_id)
            if r.split == "train" and r.gt_path is not None:
                raise ManifestError(f"train record {r.image_id} must not carry a gt mask")
            if r.split in ("val", "test") and r.gt_path is None:
                raise ManifestError(f"{r.split} record {r.image_id} requires a gt mask")


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    base = path.parent
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for r in manifest.records:
            writer.writerow([
                r.image_id,
                r.split,
                _relativize(r.image_path, base),
                _relativize(r.mask_path, base) if r.mask_path else "",
                _relativize(r.gt_path, base) if r.gt_path else "",
            ])


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ManifestError(f"bad manifest header {header}, expected {MANIFEST_HEADER}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ManifestError(f"line {line_no}: expected {len(MANIFEST_HEADER)} fields")
            image_id, split, image_path, mask_path, gt_path = row
            records.append(ManifestRecord(
                image_id=image_id,
                split=split,
                image_path=base / image_path,
                mask_path=base / mask_path if mask_path else None,
                gt_path=base / gt_path if gt_path else None,
            ))
    manifest = DatasetManifest(records)
    manifest.validate()
    return manifest


def _relativize(p: Path, base: Path) -> str:
    p = Path(p)
    try:
        return p.relative_to(base).as_posix()
    except ValueError:
        return p.as_posix()


def _load_grid(path: Path) -> np.ndarray:
    """Raw float grid (.npy) or 8-bit grayscale image mapped onto [0, 1]."""
    if path.suffix == ".npy":
        return np.asarray(np.load(path), dtype=np.float64)
    if path.suffix.lower() in _GRAYSCALE_SUFFIXES:
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        return arr / 255.0
    raise ManifestError(f"unsupported image format: {path}")


def load_record(record: ManifestRecord,
                modality: Modality) -> tuple[Image2D, np.ndarray | None]:
    """Materialize one manifest row as a validated image plus optional gt."""
    pixels = _load_grid(record.image_path)
    mask = None
    if record.mask_path is not None:
        mask = (_load_grid(record.mask_path) > 0).astype(np.uint8)
    img = Image2D(pixels=pixels, modality=modality, mask=mask)
    img.validate()
    gt = None
    if record.gt_path is not None:
        gt = (_load_grid(record.gt_path) > 0).astype(np.uint8)
        if gt.shape != pixels.shape:
            raise ManifestError(
                f"gt shape {gt.shape} does not match image {pixels.shape} "
                f"for {record.image_id}")
    return img, gt
