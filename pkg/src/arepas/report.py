"""Run reports: PR curve, sweep curve, overlay images, markdown summary."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless; must precede pyplot import

import matplotlib.pyplot as plt
import numpy as np
from PIL import Image as PILImage

from .config import ExperimentConfig
from .imaging import MODALITY_RANGE, Image2D
from .metrics import pr_curve
from .pipeline import (
    RunPaths,
    PrereqError,
    _final_maps_from_disk,
    _guard_exists,
    _load_split,
    _require,
    record_artifacts,
)


def save_pr_curve(scores_list, gts_list, out_path) -> dict:
    """Pooled precision-recall plot; returns endpoint facts for the report."""
    prec, rec, _ = pr_curve(scores_list, gts_list)
    pooled_gt = np.concatenate([np.asarray(g).ravel() for g in gts_list])
    prevalence = float(np.count_nonzero(pooled_gt) / pooled_gt.size)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(rec, prec, lw=1.5)
    ax.axhline(prevalence, color="gray", ls="--", lw=0.8, label="prevalence")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return {
        "max_recall": float(rec[-1]),
        "precision_at_max_recall": float(prec[-1]),
        "prevalence": prevalence,
    }


def save_sweep_plot(sizes, dices, stderrs, out_path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(sizes, dices, yerr=stderrs, marker="o", capsize=3)
    ax.set_xlabel("patch size (px)")
    ax.set_ylabel("test dice")
    ax.set_xticks(list(sizes))
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _to_uint8_gray(img: Image2D) -> np.ndarray:
    lo, hi = MODALITY_RANGE[img.modality]
    scaled = (img.pixels - lo) / (hi - lo)
    return np.clip(scaled * 255.0, 0, 255).astype(np.uint8)


def save_overlay(img: Image2D, overlay: np.ndarray, out_path) -> None:
    """Red-tinted map on the grayscale image, same pixel dimensions as input."""
    overlay = np.asarray(overlay, dtype=np.float64)
    if overlay.shape != img.pixels.shape:
        raise ValueError(f"overlay shape {overlay.shape} != image {img.pixels.shape}")
    peak = overlay.max()
    alpha = overlay / peak if peak > 0 else np.zeros_like(overlay)
    base = _to_uint8_gray(img).astype(np.float64)
    rgb = np.stack([base, base, base], axis=-1)
    rgb[..., 0] = (1 - alpha) * base + alpha * 255.0
    rgb[..., 1] *= 1 - alpha
    rgb[..., 2] *= 1 - alpha
    PILImage.fromarray(rgb.astype(np.uint8), mode="RGB").save(out_path)


def _read_csv_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _metrics_table(rows: list[dict]) -> list[str]:
    header = ["mode", "patch_size", "dice", "dice_stderr", "precision",
              "recall", "auprc", "threshold"]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for row in rows:
        lines.append("| " + " | ".join(row.get(k, "") or "-" for k in header) + " |")
    return lines


def stage_report(cfg: ExperimentConfig, run: RunPaths,
                 overwrite: bool = False) -> Path:
    """Assemble report/report.md plus its figures from stored artifacts."""
    report_md = run.report_dir / "report.md"
    _guard_exists(report_md, overwrite)
    run.report_dir.mkdir(parents=True, exist_ok=True)

    metric_sources = [p for p in (run.metrics_csv, run.metrics_dir / "ablation.csv")
                      if p.exists()]
    if not metric_sources:
        raise PrereqError("no metrics found: run evaluate or ablate first")

    val_ids, _, _, _ = _final_maps_from_disk(run, cfg, "val")
    test_ids, test_finals, test_gts, _ = _final_maps_from_disk(run, cfg, "test")

    written = [report_md]
    pr_png = run.report_dir / "pr_curve.png"
    pr_facts = save_pr_curve(test_finals, test_gts, pr_png)
    written.append(pr_png)

    lines = ["# Anomaly segmentation run report", ""]
    lines += [f"- modality: {cfg.modality.value}",
              f"- image size: {cfg.image_size}",
              f"- patch size: {cfg.siamese_model.patch_size}",
              f"- seed: {cfg.seed}", ""]

    for src in metric_sources:
        lines += [f"## Metrics ({src.name})", ""]
        lines += _metrics_table(_read_csv_rows(src))
        lines.append("")

    sweep_rows = []
    if run.sweep_csv.exists():
        sweep_rows = _read_csv_rows(run.sweep_csv)
        sweep_png = run.report_dir / "sweep.png"
        save_sweep_plot([int(r["patch_size"]) for r in sweep_rows],
                        [float(r["dice"]) for r in sweep_rows],
                        [float(r["dice_stderr"]) for r in sweep_rows],
                        sweep_png)
        written.append(sweep_png)
        lines += ["## Patch-size sweep", "", "![sweep](sweep.png)", ""]
        lines += _metrics_table(sweep_rows)
        lines.append("")

    lines += ["## Precision-recall (test, pooled)", "", "![pr](pr_curve.png)", ""]
    lines += [f"- max recall: {pr_facts['max_recall']:.4f}",
              f"- precision at max recall: {pr_facts['precision_at_max_recall']:.6f}",
              f"- anomaly prevalence: {pr_facts['prevalence']:.6f}", ""]

    overlay_ids = test_ids[:cfg.inference.overlay_count]
    if overlay_ids:
        lines += ["## Example overlays", ""]
        by_id = {rec.image_id: img for rec, img, _ in _load_split(run, cfg, "test")}
        for image_id in overlay_ids:
            img = by_id[image_id]
            with np.load(_require(run.map_path(image_id), "run infer first")) as data:
                heat, final = data["heat"], data["final"]
            heat_png = run.report_dir / f"{image_id}_heat.png"
            final_png = run.report_dir / f"{image_id}_final.png"
            save_overlay(img, heat, heat_png)
            save_overlay(img, final, final_png)
            written += [heat_png, final_png]
            lines += [f"- {image_id}: ![heat]({heat_png.name}) "
                      f"![final]({final_png.name})"]
        lines.append("")

    lines += ["## Evaluated images", "",
              f"- val (threshold selection): {', '.join(val_ids)}",
              f"- test (reported metrics): {', '.join(test_ids)}", ""]

    report_md.write_text("\n".join(lines))
    record_artifacts(run, "report", written)
    return report_md
