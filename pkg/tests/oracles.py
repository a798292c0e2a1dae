"""Naive reference implementations used to cross-check the package.

Everything here favors obviousness over speed: per-pixel loops, exhaustive
enumeration, direct formula transcription. Kept free of imports from the
package under test.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------- imaging

def conv2d_reference(img, kernel):
    """Per-pixel correlation with symmetric padding, accumulating kernel
    entries in row-major order (same order as the production shift-sum)."""
    img = np.asarray(img, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    kh, kw = kernel.shape
    rh, rw = kh // 2, kw // 2
    h, w = img.shape
    padded = np.pad(img, ((rh, rh), (rw, rw)), mode="symmetric")
    out = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(kh):
                for j in range(kw):
                    acc += kernel[i, j] * padded[y + i, x + j]
            out[y, x] = acc
    return out


def gaussian_kernel_reference(sigma):
    radius = int(4.0 * sigma + 0.5)
    line = [math.exp(-(o * o) / (2.0 * sigma * sigma)) for o in range(-radius, radius + 1)]
    total = sum(line)
    line = np.array([v / total for v in line])
    return np.outer(line, line)


SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])


def canny_reference(unit_img, sigma, low, high):
    """Direct transcription of the edge pipeline with per-pixel loops."""
    smoothed = conv2d_reference(unit_img, gaussian_kernel_reference(sigma)) if sigma > 0 else np.array(unit_img, dtype=np.float64)
    gx = conv2d_reference(smoothed, SOBEL_X)
    gy = conv2d_reference(smoothed, SOBEL_Y)
    h, w = gx.shape
    mag = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            mag[y, x] = math.sqrt(gx[y, x] * gx[y, x] + gy[y, x] * gy[y, x])

    t_low = math.sqrt(2.0) - 1.0
    t_high = math.sqrt(2.0) + 1.0
    nms = np.zeros((h, w))
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            ax, ay = abs(gx[y, x]), abs(gy[y, x])
            if ay <= ax * t_low:
                minus, plus = mag[y, x - 1], mag[y, x + 1]
            elif ay >= ax * t_high:
                minus, plus = mag[y - 1, x], mag[y + 1, x]
            elif gx[y, x] * gy[y, x] > 0:
                minus, plus = mag[y - 1, x - 1], mag[y + 1, x + 1]
            else:
                minus, plus = mag[y - 1, x + 1], mag[y + 1, x - 1]
            if mag[y, x] > minus and mag[y, x] >= plus:
                nms[y, x] = mag[y, x]

    # hysteresis: BFS from strong pixels through weak ones, 8-connected
    strong = [(y, x) for y in range(h) for x in range(w) if nms[y, x] > high]
    weak = nms > low
    out = np.zeros((h, w), dtype=np.uint8)
    stack = list(strong)
    while stack:
        y, x = stack.pop()
        if out[y, x] or not weak[y, x]:
            continue
        out[y, x] = 1
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not out[ny, nx]:
                    stack.append((ny, nx))
    return out


def otsu_reference(values):
    """Exhaustive search over all 256-bin split points."""
    values = np.asarray(values, dtype=np.float64).ravel()
    vmin, vmax = float(values.min()), float(values.max())
    assert vmax > vmin
    hist, edges = np.histogram(values, bins=256, range=(vmin, vmax))
    counts = [float(c) for c in hist]
    centers = [(edges[i] + edges[i + 1]) / 2.0 for i in range(256)]

    w0 = [0.0] * 256
    m0 = [0.0] * 256
    acc_n = acc_m = 0.0
    for i in range(256):
        acc_n += counts[i]
        acc_m += counts[i] * centers[i]
        w0[i], m0[i] = acc_n, acc_m
    total_n, total_m = w0[-1], m0[-1]

    best_k, best_var = 0, -1.0
    for k in range(255):
        n0, n1 = w0[k], total_n - w0[k]
        mu0 = m0[k] / n0 if n0 > 0 else 0.0
        mu1 = (total_m - m0[k]) / n1 if n1 > 0 else 0.0
        d = mu0 - mu1
        var = n0 * n1 * (d * d)
        if var > best_var:
            best_var, best_k = var, k
    return float(edges[best_k + 1])


def percentile_reference(values, q):
    """Sort-based linear-interpolation percentile."""
    vals = sorted(float(v) for v in np.asarray(values).ravel())
    pos = (len(vals) - 1) * q / 100.0
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(vals) - 1)
    frac = pos - lo
    return vals[lo] + (vals[hi] - vals[lo]) * frac


# ---------------------------------------------------------------- metrics

def confusion_reference(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    tp = fp = fn = tn = 0
    for p, g in zip(pred.ravel(), gt.ravel()):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def dice_reference(pred, gt):
    tp, fp, fn, _ = confusion_reference(pred, gt)
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2.0 * tp / denom


def precision_reference(pred, gt):
    tp, fp, fn, _ = confusion_reference(pred, gt)
    if tp + fp == 0:
        return 1.0 if fn == 0 else 0.0
    return tp / (tp + fp)


def recall_reference(pred, gt):
    tp, _, fn, _ = confusion_reference(pred, gt)
    if tp + fn == 0:
        return 1.0
    return tp / (tp + fn)


def auprc_reference(scores, gt):
    """Exhaustive threshold enumeration: one operating point per distinct
    score value, prediction = score >= threshold, precision-at-recall sum."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    gt = np.asarray(gt).ravel().astype(bool)
    total_pos = int(gt.sum())
    assert total_pos > 0
    thresholds = sorted(set(scores.tolist()), reverse=True)
    area = 0.0
    prev_recall = 0.0
    for t in thresholds:
        pred = scores >= t
        tp = int(np.sum(pred & gt))
        fp = int(np.sum(pred & ~gt))
        precision = tp / (tp + fp)
        recall = tp / total_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def pooled_dice_at_threshold(scores, gt, t):
    """Pooled dice with strict > thresholding; loops kept out for use inside
    dense threshold sweeps."""
    pred = np.asarray(scores, dtype=np.float64).ravel() > t
    gt = np.asarray(gt).ravel().astype(bool)
    tp = int(np.sum(pred & gt))
    fp = int(np.sum(pred & ~gt))
    fn = int(np.sum(~pred & gt))
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2.0 * tp / denom


# ---------------------------------------------------------------- inference

def heatmap_reference(shape, patch_size, stride, score_fn):
    """Brute-force accumulation of per-patch dissimilarity.

    score_fn(row, col) -> similarity a at that origin. Uncovered pixels take
    the value of the nearest covered pixel by exhaustive search.
    """
    h, w = shape
    sums = np.zeros((h, w))
    counts = np.zeros((h, w))
    for r in range(0, h - patch_size + 1, stride):
        for c in range(0, w - patch_size + 1, stride):
            a = score_fn(r, c)
            for dr in range(patch_size):
                for dc in range(patch_size):
                    sums[r + dr, c + dc] += 1.0 - a
                    counts[r + dr, c + dc] += 1.0
    out = np.zeros((h, w))
    covered = [(y, x) for y in range(h) for x in range(w) if counts[y, x] > 0]
    for y in range(h):
        for x in range(w):
            if counts[y, x] > 0:
                out[y, x] = sums[y, x] / counts[y, x]
            else:
                best = None
                best_d = None
                for cy, cx in covered:
                    d = (cy - y) ** 2 + (cx - x) ** 2
                    if best_d is None or d < best_d:
                        best_d, best = d, (cy, cx)
                out[y, x] = sums[best] / counts[best]
    return out


def final_map_reference(real, rec, heat):
    real = np.asarray(real, dtype=np.float64)
    rec = np.asarray(rec, dtype=np.float64)
    heat = np.asarray(heat, dtype=np.float64)
    out = np.zeros_like(real)
    for y in range(real.shape[0]):
        for x in range(real.shape[1]):
            out[y, x] = abs(real[y, x] - rec[y, x]) * heat[y, x]
    return out


# ---------------------------------------------------------------- losses

def contrastive_reference(a, y):
    """Direct transcription: mean of (1-y)*a^2 + y*max(0, 1-a)^2."""
    a = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    total = 0.0
    for ak, yk in zip(a, y):
        total += (1.0 - yk) * ak * ak + yk * max(0.0, 1.0 - ak) ** 2
    return total / len(a)


def contrastive_grad_reference(a, y):
    """Analytic d(loss)/d(a_k), valid away from the hinge at a=1."""
    a = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    b = len(a)
    grad = np.zeros(b)
    for k, (ak, yk) in enumerate(zip(a, y)):
        grad[k] = (2.0 * (1.0 - yk) * ak - 2.0 * yk * max(0.0, 1.0 - ak)) / b
    return grad


def bce_with_logits_reference(logits, target):
    """Numerically plain BCE-from-logits mean, elementwise formula."""
    logits = np.asarray(logits, dtype=np.float64).ravel()
    total = 0.0
    for z in logits:
        # -t*log(sigmoid(z)) - (1-t)*log(1-sigmoid(z)), stable form
        total += max(z, 0.0) - z * target + math.log1p(math.exp(-abs(z)))
    return total / len(logits)
