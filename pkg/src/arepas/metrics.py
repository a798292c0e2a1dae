"""Pixel-pooled segmentation metrics and validation threshold selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

THRESHOLD_GRID_POINTS = 256


@dataclass
class EvalResult:
    dice: float
    precision: float
    recall: float
    auprc: float
    threshold: float
    per_image_dice: list = field(default_factory=list)
    dice_stderr: float = 0.0

    def validate(self) -> None:
        for name in ("dice", "precision", "recall", "auprc"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")


def confusion_counts(pred: np.ndarray, gt: np.ndarray) -> tuple[int, int, int, int]:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    p = pred.astype(bool).ravel()
    g = gt.astype(bool).ravel()
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = p.size - tp - fp - fn
    return tp, fp, fn, tn


def dice_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2.0 * tp / denom


def dice(pred: np.ndarray, gt: np.ndarray) -> float:
    tp, fp, fn, _ = confusion_counts(pred, gt)
    return dice_from_counts(tp, fp, fn)


def precision(pred: np.ndarray, gt: np.ndarray) -> float:
    tp, fp, fn, _ = confusion_counts(pred, gt)
    if tp + fp == 0:
        # nothing predicted: perfect when there was nothing to find
        return 1.0 if fn == 0 else 0.0
    return tp / (tp + fp)


def recall(pred: np.ndarray, gt: np.ndarray) -> float:
    tp, _, fn, _ = confusion_counts(pred, gt)
    if tp + fn == 0:
        return 1.0
    return tp / (tp + fn)


def _pool(scores, gts) -> tuple[np.ndarray, np.ndarray]:
    """Flatten and concatenate a score/gt collection (arrays or lists)."""
    if isinstance(scores, (list, tuple)):
        s = np.concatenate([np.asarray(x, dtype=np.float64).ravel() for x in scores])
        g = np.concatenate([np.asarray(x).ravel() for x in gts])
    else:
        s = np.asarray(scores, dtype=np.float64).ravel()
        g = np.asarray(gts).ravel()
    if s.shape != g.shape:
        raise ValueError("pooled scores/gt sizes differ")
    return s, g.astype(bool)


def pr_curve(scores, gt) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Operating points over descending distinct thresholds with prediction
    ``score >= t``. Returns (precision, recall, thresholds)."""
    s, g = _pool(scores, gt)
    total_pos = int(g.sum())
    if total_pos == 0:
        raise ValueError("ground truth has no positive pixels")
    order = np.argsort(-s, kind="stable")
    s_sorted, g_sorted = s[order], g[order]
    distinct = np.nonzero(np.diff(s_sorted))[0]
    idx = np.r_[distinct, s.size - 1]
    tps = np.cumsum(g_sorted)[idx].astype(np.float64)
    fps = (idx + 1) - tps
    prec = tps / (tps + fps)
    rec = tps / total_pos
    return prec, rec, s_sorted[idx]


def auprc(scores, gt) -> float:
    """Step-wise precision-at-recall summation over the PR curve."""
    prec, rec, _ = pr_curve(scores, gt)
    return float(np.sum(np.diff(np.r_[0.0, rec]) * prec))


def pooled_dice(scores, gts, threshold: float) -> float:
    s, g = _pool(scores, gts)
    pred = s > threshold
    tp = int(np.count_nonzero(pred & g))
    fp = int(np.count_nonzero(pred & ~g))
    fn = int(np.count_nonzero(~pred & g))
    return dice_from_counts(tp, fp, fn)


def threshold_grid(max_score: float) -> np.ndarray:
    return np.linspace(0.0, max_score, THRESHOLD_GRID_POINTS)


def select_threshold(scores, gts) -> float:
    """Pooled-dice argmax over 256 evenly spaced thresholds in
    [0, max score]; ties resolve to the lowest threshold."""
    s, g = _pool(scores, gts)
    if s.size == 0:
        raise ValueError("empty validation set")
    top = float(s.max())
    if top <= 0.0:
        return 0.0
    grid = threshold_grid(top)
    dices = np.array([pooled_dice(s, g, t) for t in grid])
    return float(grid[int(np.argmax(dices))])  # argmax takes the first maximizer


def evaluate_maps(final_maps, gts, threshold: float, foregrounds=None) -> EvalResult:
    """Pooled metrics at a fixed threshold plus per-image dice statistics.

    When per-image foreground masks are supplied, ranking quality (AUPRC) is
    computed over foreground pixels only; thresholded overlap metrics always
    use every pixel, since background scores are zero by construction.
    """
    maps = [np.asarray(m, dtype=np.float64) for m in final_maps]
    masks = [np.asarray(g).astype(bool) for g in gts]
    if len(maps) != len(masks) or not maps:
        raise ValueError("need matching nonempty map/gt lists")

    preds = [m > threshold for m in maps]
    tp = sum(int(np.count_nonzero(p & g)) for p, g in zip(preds, masks))
    fp = sum(int(np.count_nonzero(p & ~g)) for p, g in zip(preds, masks))
    fn = sum(int(np.count_nonzero(~p & g)) for p, g in zip(preds, masks))

    per_image = [dice(p, g) for p, g in zip(preds, masks)]
    n = len(per_image)
    stderr = float(np.std(per_image, ddof=1) / np.sqrt(n)) if n > 1 else 0.0

    if tp + fp == 0:
        prec = 1.0 if fn == 0 else 0.0
    else:
        prec = tp / (tp + fp)
    rec = 1.0 if tp + fn == 0 else tp / (tp + fn)

    if foregrounds is None:
        auprc_value = auprc(maps, masks)
    else:
        fgs = [np.asarray(f).astype(bool) for f in foregrounds]
        if len(fgs) != len(maps):
            raise ValueError("foreground list length mismatch")
        auprc_value = auprc([m[f] for m, f in zip(maps, fgs)],
                            [g[f] for g, f in zip(masks, fgs)])

    result = EvalResult(
        dice=dice_from_counts(tp, fp, fn),
        precision=prec,
        recall=rec,
        auprc=auprc_value,
        threshold=float(threshold),
        per_image_dice=per_image,
        dice_stderr=stderr,
    )
    result.validate()
    return result
