"""Stage orchestration over a run directory.

Each stage reads earlier artifacts, checks its prerequisites, and writes its
outputs under a fixed layout. Stages refuse to clobber existing outputs
unless asked to overwrite, so a run directory is append-only by default.
Every write is recorded in ``artifacts.json``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .imaging import Image2D, Modality, normalize_ct, normalize_mr
from .inference import FinalMap, final_map, heatmap, residual_map
from .manifest import (
    DatasetManifest,
    ManifestRecord,
    load_manifest,
    load_record,
    save_manifest,
)
from .metrics import EvalResult, evaluate_maps, select_threshold
from .recon.training import (
    Reconstructor,
    load_recon_checkpoint,
    save_recon_checkpoint,
    train_reconstructor,
)
from .augment import build_training_pairs
from .siamese.network import SiameseSpec
from .siamese.training import (
    SiameseScorer,
    load_scorer_checkpoint,
    save_scorer_checkpoint,
    train_scorer,
)
from .synthetic import gen_dataset

METRICS_HEADER = "mode,patch_size,dice,dice_stderr,precision,recall,auprc,threshold"

# Seed-stream offsets per stage so one master seed drives everything without
# coupling the stages' random streams.
_AUG_STREAM = 3_000_000
_SCORER_SEED_OFFSET = 41
_RECON_SEED_OFFSET = 17


class PipelineError(RuntimeError):
    """Base for stage failures; ``code`` is the stable machine-readable tag."""

    code = "E_INTERNAL"


class PrereqError(PipelineError):
    code = "E_PREREQ"


class ExistsError(PipelineError):
    code = "E_EXISTS"


class DataError(PipelineError):
    code = "E_DATA"


@dataclass
class RunPaths:
    """Fixed layout of a run directory."""

    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    @property
    def config_path(self) -> Path:
        return self.root / "config.yaml"

    @property
    def dataset_dir(self) -> Path:
        return self.root / "dataset"

    @property
    def raw_manifest(self) -> Path:
        return self.dataset_dir / "manifest.csv"

    @property
    def processed_dir(self) -> Path:
        return self.root / "processed"

    @property
    def processed_manifest(self) -> Path:
        return self.processed_dir / "manifest.csv"

    @property
    def checkpoints_dir(self) -> Path:
        return self.root / "checkpoints"

    @property
    def recon_ckpt(self) -> Path:
        return self.checkpoints_dir / "recon.pt"

    @property
    def recon_noaug_ckpt(self) -> Path:
        return self.checkpoints_dir / "recon_noaug.pt"

    def scorer_ckpt(self, patch_size: int) -> Path:
        return self.checkpoints_dir / f"scorer_s{patch_size}.pt"

    @property
    def maps_dir(self) -> Path:
        return self.root / "maps"

    def map_path(self, image_id: str) -> Path:
        return self.maps_dir / f"{image_id}.npz"

    @property
    def metrics_dir(self) -> Path:
        return self.root / "metrics"

    @property
    def metrics_csv(self) -> Path:
        return self.metrics_dir / "metrics.csv"

    @property
    def sweep_csv(self) -> Path:
        return self.metrics_dir / "sweep.csv"

    @property
    def per_image_csv(self) -> Path:
        return self.metrics_dir / "per_image.csv"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"

    @property
    def artifacts_path(self) -> Path:
        return self.root / "artifacts.json"


def record_artifacts(run: RunPaths, stage: str, paths) -> None:
    """Merge produced paths (relative to the run root) into artifacts.json."""
    existing = {}
    if run.artifacts_path.exists():
        existing = json.loads(run.artifacts_path.read_text())
    rel = sorted(str(Path(p).relative_to(run.root)) for p in paths)
    existing[stage] = rel
    run.root.mkdir(parents=True, exist_ok=True)
    run.artifacts_path.write_text(json.dumps(existing, indent=2, sort_keys=True) + "\n")


def _guard_exists(path: Path, overwrite: bool) -> None:
    if path.exists() and not overwrite:
        raise ExistsError(f"output already exists: {path} (pass overwrite to replace)")


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise PrereqError(f"missing prerequisite: {path} ({hint})")
    return path


def _load_manifest_checked(path: Path, hint: str) -> DatasetManifest:
    _require(path, hint)
    return load_manifest(path)


def stage_synth(cfg: ExperimentConfig, run: RunPaths, overwrite: bool = False) -> Path:
    """Generate the phantom dataset into <run>/dataset."""
    if cfg.modality is not Modality.SYNTH:
        raise DataError(f"synth stage requires synth modality, got {cfg.modality.value}")
    _guard_exists(run.raw_manifest, overwrite)
    synth_cfg = dataclasses.replace(cfg.synth, seed=cfg.seed)
    manifest_path = gen_dataset(synth_cfg, run.dataset_dir, overwrite=overwrite)
    manifest = load_manifest(manifest_path)
    record_artifacts(run, "synth", [manifest_path] +
                     [r.image_path for r in manifest.records])
    return manifest_path


def stage_preprocess(cfg: ExperimentConfig, run: RunPaths,
                     manifest_path: Path | None = None,
                     overwrite: bool = False) -> Path:
    """Normalize raw images into the model input range and re-manifest them.

    Synthetic phantoms are already normalized, so they are validated and
    copied through; CT and MR inputs go through their modality pipelines.
    """
    src = Path(manifest_path) if manifest_path else run.raw_manifest
    manifest = _load_manifest_checked(src, "run the synth stage or pass a manifest")
    _guard_exists(run.processed_manifest, overwrite)

    out_records = []
    written = []
    for rec in manifest.records:
        split_dir = run.processed_dir / rec.split
        split_dir.mkdir(parents=True, exist_ok=True)
        if cfg.modality is Modality.CT:
            raw = np.asarray(np.load(rec.image_path), dtype=np.float64)
            if rec.mask_path is None:
                raise DataError(f"CT record {rec.image_id} requires a lung mask")
            mask = (np.asarray(np.load(rec.mask_path)) > 0)
            img = normalize_ct(raw, mask, size=cfg.image_size)
        elif cfg.modality is Modality.MRI:
            raw = np.asarray(np.load(rec.image_path), dtype=np.float64)
            img = normalize_mr(raw, size=cfg.image_size)
        else:
            img, _ = load_record(rec, cfg.modality)
        if img.shape[0] != cfg.image_size:
            raise DataError(
                f"{rec.image_id}: preprocessed side {img.shape[0]} != "
                f"configured image_size {cfg.image_size}")

        image_path = split_dir / f"{rec.image_id}.npy"
        mask_path = split_dir / f"{rec.image_id}_mask.npy"
        np.save(image_path, img.pixels)
        np.save(mask_path, img.foreground().astype(np.uint8))
        gt_path = None
        if rec.gt_path is not None:
            _, gt = load_record(rec, cfg.modality)
            if gt.shape != img.pixels.shape:
                raise DataError(f"{rec.image_id}: gt shape changed by preprocessing")
            gt_path = split_dir / f"{rec.image_id}_gt.npy"
            np.save(gt_path, gt)
        out_records.append(ManifestRecord(rec.image_id, rec.split,
                                          image_path, mask_path, gt_path))
        written += [image_path, mask_path] + ([gt_path] if gt_path else [])

    out = DatasetManifest(out_records)
    out.validate()
    save_manifest(out, run.processed_manifest)
    record_artifacts(run, "preprocess", [run.processed_manifest] + written)
    return run.processed_manifest


def _load_split(run: RunPaths, cfg: ExperimentConfig,
                split: str) -> list[tuple[ManifestRecord, Image2D, np.ndarray | None]]:
    manifest = _load_manifest_checked(run.processed_manifest,
                                      "run the preprocess stage first")
    records = manifest.split(split)
    if not records:
        raise DataError(f"no {split} records in {run.processed_manifest}")
    out = []
    for rec in records:
        img, gt = load_record(rec, cfg.modality)
        out.append((rec, img, gt))
    return out


def stage_train_recon(cfg: ExperimentConfig, run: RunPaths,
                      no_augment: bool = False, device: str = "cpu",
                      overwrite: bool = False, progress=None) -> Path:
    """Train the edge-to-image reconstructor on the train split."""
    ckpt_path = run.recon_noaug_ckpt if no_augment else run.recon_ckpt
    _guard_exists(ckpt_path, overwrite)
    train_items = _load_split(run, cfg, "train")

    aug_spec = dataclasses.replace(cfg.augment, seed=cfg.seed)
    if no_augment:
        # copy-paste disabled: each image contributes its clean pair only
        aug_spec = dataclasses.replace(aug_spec, max_copy_paste_ops=0)
    pairs = []
    for idx, (rec, img, _) in enumerate(train_items):
        rng = np.random.default_rng([cfg.seed, _AUG_STREAM + idx])
        pairs.extend(build_training_pairs(img, aug_spec, rng=rng,
                                          canny_config=cfg.canny))

    recon_cfg = dataclasses.replace(cfg.recon_train, seed=cfg.seed + _RECON_SEED_OFFSET)
    ckpt = train_reconstructor(pairs, recon_cfg, gen_spec=cfg.gen_model,
                               disc_spec=cfg.disc_model, device=device,
                               canny_config=cfg.canny, progress=progress)
    run.checkpoints_dir.mkdir(parents=True, exist_ok=True)
    save_recon_checkpoint(ckpt, ckpt_path)
    record_artifacts(run, "train_recon_noaug" if no_augment else "train_recon",
                     [ckpt_path])
    return ckpt_path


def stage_train_scorer(cfg: ExperimentConfig, run: RunPaths,
                       patch_size: int | None = None, device: str = "cpu",
                       overwrite: bool = False, progress=None) -> Path:
    """Train the patch-similarity scorer against reconstructor outputs."""
    size = patch_size or cfg.siamese_model.patch_size
    ckpt_path = run.scorer_ckpt(size)
    _guard_exists(ckpt_path, overwrite)
    _require(run.recon_ckpt, "run train-recon first")

    recon = Reconstructor(load_recon_checkpoint(run.recon_ckpt), device=device)
    image_pairs = []
    for rec, img, _ in _load_split(run, cfg, "train"):
        image_pairs.append((img, recon.reconstruct(img)))

    spec = dataclasses.replace(cfg.siamese_model, patch_size=size)
    scorer_cfg = dataclasses.replace(
        cfg.scorer_train, seed=cfg.seed + _SCORER_SEED_OFFSET + size)
    ckpt = train_scorer(image_pairs, spec, scorer_cfg, device=device,
                        progress=progress)
    run.checkpoints_dir.mkdir(parents=True, exist_ok=True)
    save_scorer_checkpoint(ckpt, ckpt_path)
    record_artifacts(run, f"train_scorer_s{size}", [ckpt_path])
    return ckpt_path


def compute_final_map(img: Image2D, recon: Reconstructor,
                      scorer: SiameseScorer | None,
                      stride: int | None = None) -> tuple[FinalMap, Image2D]:
    """Full method when a scorer is given, reconstruction residual otherwise."""
    rec = recon.reconstruct(img)
    if scorer is None:
        return residual_map(img, rec), rec
    heat = heatmap(img, rec, scorer, scorer.patch_size, stride=stride)
    return final_map(img, rec, heat), rec


def stage_infer(cfg: ExperimentConfig, run: RunPaths, device: str = "cpu",
                overwrite: bool = False) -> Path:
    """Write per-image reconstruction, heat map, and final map arrays."""
    _require(run.recon_ckpt, "run train-recon first")
    size = cfg.siamese_model.patch_size
    _require(run.scorer_ckpt(size), "run train-scorer first")
    recon = Reconstructor(load_recon_checkpoint(run.recon_ckpt), device=device)
    scorer = SiameseScorer(load_scorer_checkpoint(run.scorer_ckpt(size)),
                           device=device, chunk_size=cfg.inference.score_chunk)

    run.maps_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for split in ("val", "test"):
        for rec_row, img, _ in _load_split(run, cfg, split):
            out_path = run.map_path(rec_row.image_id)
            _guard_exists(out_path, overwrite)
            rec = recon.reconstruct(img)
            heat = heatmap(img, rec, scorer, size, stride=cfg.inference.stride)
            fm = final_map(img, rec, heat)
            np.savez(out_path, rec=rec.pixels, heat=heat.pixels,
                     coverage=heat.coverage, final=fm.pixels)
            written.append(out_path)
    record_artifacts(run, "infer", written)
    return run.maps_dir


def _final_maps_from_disk(run: RunPaths, cfg: ExperimentConfig, split: str):
    ids, finals, gts, fgs = [], [], [], []
    for rec, img, gt in _load_split(run, cfg, split):
        path = _require(run.map_path(rec.image_id), "run infer first")
        with np.load(path) as data:
            finals.append(np.asarray(data["final"], dtype=np.float64))
        ids.append(rec.image_id)
        gts.append(np.asarray(gt).astype(bool))
        fgs.append(img.foreground().astype(bool))
    return ids, finals, gts, fgs


def _metrics_row(mode: str, patch_size, result: EvalResult) -> str:
    size_field = "" if patch_size is None else str(patch_size)
    return (f"{mode},{size_field},{result.dice:.6f},{result.dice_stderr:.6f},"
            f"{result.precision:.6f},{result.recall:.6f},{result.auprc:.6f},"
            f"{result.threshold:.8f}")


def write_metrics_csv(path: Path, rows: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join([METRICS_HEADER] + rows) + "\n")


def evaluate_split_maps(run: RunPaths, cfg: ExperimentConfig) -> tuple[EvalResult, list, list]:
    """Pick the threshold on val maps, evaluate on test maps."""
    _, val_finals, val_gts, _ = _final_maps_from_disk(run, cfg, "val")
    test_ids, test_finals, test_gts, test_fgs = _final_maps_from_disk(run, cfg, "test")
    threshold = select_threshold(val_finals, val_gts)
    fgs = test_fgs if cfg.eval.restrict_auprc_to_foreground else None
    result = evaluate_maps(test_finals, test_gts, threshold, foregrounds=fgs)
    return result, test_ids, test_finals


def stage_evaluate(cfg: ExperimentConfig, run: RunPaths,
                   overwrite: bool = False) -> Path:
    """Threshold selection on val plus pooled test metrics, written as CSV."""
    _guard_exists(run.metrics_csv, overwrite)
    result, test_ids, _ = evaluate_split_maps(run, cfg)
    write_metrics_csv(run.metrics_csv,
                      [_metrics_row("full", cfg.siamese_model.patch_size, result)])
    lines = ["image_id,dice"]
    lines += [f"{i},{d:.6f}" for i, d in zip(test_ids, result.per_image_dice)]
    run.per_image_csv.write_text("\n".join(lines) + "\n")
    record_artifacts(run, "evaluate", [run.metrics_csv, run.per_image_csv])
    return run.metrics_csv
