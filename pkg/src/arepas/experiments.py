"""Comparative experiments: component ablations and the patch-size sweep."""

from __future__ import annotations

import enum
from pathlib import Path

from .config import ExperimentConfig
from .imaging import Image2D
from .metrics import EvalResult, evaluate_maps, select_threshold
from .pipeline import (
    RunPaths,
    PrereqError,
    _load_split,
    _metrics_row,
    _require,
    compute_final_map,
    record_artifacts,
    stage_train_scorer,
    write_metrics_csv,
    _guard_exists,
)
from .recon.training import Reconstructor, load_recon_checkpoint
from .siamese.training import SiameseScorer, load_scorer_checkpoint


class AblationMode(enum.Enum):
    FULL = "full"
    NO_PATCH_SCORING = "no_patch_scoring"
    NO_PATCH_SCORING_NO_AUG = "no_patch_scoring_no_aug"


def run_ablation(
    val_images: list[Image2D],
    val_gts: list,
    test_images: list[Image2D],
    test_gts: list,
    reconstructor: Reconstructor,
    mode: AblationMode,
    scorer: SiameseScorer | None = None,
    stride: int | None = None,
    restrict_auprc_to_foreground: bool = False,
) -> EvalResult:
    """Evaluate one method variant: threshold picked on val, scored on test.

    FULL gates the reconstruction residual with patch dissimilarity; the
    NO_PATCH_SCORING variants use the raw residual (their difference is which
    reconstructor the caller passes in: trained with or without edge
    augmentation).
    """
    if mode is AblationMode.FULL:
        if scorer is None:
            raise ValueError("FULL ablation mode requires a patch scorer")
    elif scorer is not None:
        raise ValueError(f"{mode.value} must not receive a scorer")
    if len(val_images) != len(val_gts) or len(test_images) != len(test_gts):
        raise ValueError("image/gt list lengths differ")
    if not val_images or not test_images:
        raise ValueError("need nonempty val and test splits")

    def finals(images):
        return [compute_final_map(img, reconstructor, scorer, stride=stride)[0].pixels
                for img in images]

    threshold = select_threshold(finals(val_images), val_gts)
    fgs = None
    if restrict_auprc_to_foreground:
        fgs = [img.foreground().astype(bool) for img in test_images]
    return evaluate_maps(finals(test_images), test_gts, threshold, foregrounds=fgs)


def stage_ablate(cfg: ExperimentConfig, run: RunPaths, device: str = "cpu",
                 overwrite: bool = False) -> Path:
    """All three method variants on one dataset, written to ablation.csv."""
    ablation_csv = run.metrics_dir / "ablation.csv"
    _guard_exists(ablation_csv, overwrite)
    size = cfg.siamese_model.patch_size
    _require(run.recon_ckpt, "run train-recon first")
    _require(run.recon_noaug_ckpt, "run train-recon with augmentation disabled first")
    _require(run.scorer_ckpt(size), "run train-scorer first")

    recon = Reconstructor(load_recon_checkpoint(run.recon_ckpt), device=device)
    recon_noaug = Reconstructor(load_recon_checkpoint(run.recon_noaug_ckpt),
                                device=device)
    scorer = SiameseScorer(load_scorer_checkpoint(run.scorer_ckpt(size)),
                           device=device, chunk_size=cfg.inference.score_chunk)

    val = _load_split(run, cfg, "val")
    test = _load_split(run, cfg, "test")
    val_images, val_gts = [i for _, i, _ in val], [g for _, _, g in val]
    test_images, test_gts = [i for _, i, _ in test], [g for _, _, g in test]

    def evaluate(mode, reconstructor, use_scorer):
        return run_ablation(
            val_images, val_gts, test_images, test_gts, reconstructor, mode,
            scorer=scorer if use_scorer else None,
            stride=cfg.inference.stride,
            restrict_auprc_to_foreground=cfg.eval.restrict_auprc_to_foreground)

    rows = [
        _metrics_row("full", size,
                     evaluate(AblationMode.FULL, recon, True)),
        _metrics_row("no_patch_scoring", None,
                     evaluate(AblationMode.NO_PATCH_SCORING, recon, False)),
        _metrics_row("no_patch_scoring_no_aug", None,
                     evaluate(AblationMode.NO_PATCH_SCORING_NO_AUG, recon_noaug,
                              False)),
    ]
    write_metrics_csv(ablation_csv, rows)
    record_artifacts(run, "ablate", [ablation_csv])
    return ablation_csv


def patch_size_sweep(
    val_images: list[Image2D],
    val_gts: list,
    test_images: list[Image2D],
    test_gts: list,
    reconstructor: Reconstructor,
    scorers: dict[int, SiameseScorer],
    restrict_auprc_to_foreground: bool = False,
) -> list[tuple[int, EvalResult]]:
    """FULL-method metrics per patch size; stride follows each size (s // 2)."""
    if not scorers:
        raise ValueError("need at least one scorer")
    results = []
    for size in sorted(scorers):
        scorer = scorers[size]
        if scorer.patch_size != size:
            raise ValueError(f"scorer keyed {size} has patch_size {scorer.patch_size}")
        result = run_ablation(
            val_images, val_gts, test_images, test_gts, reconstructor,
            AblationMode.FULL, scorer=scorer, stride=None,
            restrict_auprc_to_foreground=restrict_auprc_to_foreground)
        results.append((size, result))
    return results


def stage_sweep(cfg: ExperimentConfig, run: RunPaths, device: str = "cpu",
                overwrite: bool = False, progress=None) -> Path:
    """Train any missing per-size scorers, then sweep patch size end to end."""
    _guard_exists(run.sweep_csv, overwrite)
    _require(run.recon_ckpt, "run train-recon first")
    recon = Reconstructor(load_recon_checkpoint(run.recon_ckpt), device=device)

    scorers = {}
    for size in cfg.eval.sweep_sizes:
        ckpt_path = run.scorer_ckpt(size)
        if not ckpt_path.exists():
            stage_train_scorer(cfg, run, patch_size=size, device=device,
                               progress=progress)
        scorers[size] = SiameseScorer(load_scorer_checkpoint(ckpt_path),
                                      device=device,
                                      chunk_size=cfg.inference.score_chunk)

    val = _load_split(run, cfg, "val")
    test = _load_split(run, cfg, "test")
    results = patch_size_sweep(
        [i for _, i, _ in val], [g for _, _, g in val],
        [i for _, i, _ in test], [g for _, _, g in test],
        recon, scorers,
        restrict_auprc_to_foreground=cfg.eval.restrict_auprc_to_foreground)

    rows = [_metrics_row("full", size, result) for size, result in results]
    write_metrics_csv(run.sweep_csv, rows)
    record_artifacts(run, "sweep", [run.sweep_csv])
    return run.sweep_csv
