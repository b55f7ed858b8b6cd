"""Training loss and saliency evaluation metrics.

All metrics compare a prediction map P with values in [0, 1] against a strictly
binary ground-truth mask G of the same shape:

* ``bce_loss`` / ``total_loss`` — pixel-mean binary cross entropy, summed over
  supervision levels.
* ``precision_recall`` / ``pr_curve`` — threshold sweep at t = k/(n-1)
  (256 thresholds by default), binarizing with P >= t.  Conventions: precision
  is 1 when nothing is predicted positive, recall is 0 when the mask is empty.
* ``f_measure_max`` — max over thresholds of the weighted harmonic mean with
  beta^2 = 0.3 (0 where the denominator vanishes).
* ``e_measure_max`` — max over thresholds of the enhanced-alignment score: both
  maps are mean-centered, the elementwise alignment quotient
  2*a*b/(a^2 + b^2) (0/0 -> 0) is mapped through (1+x)^2/4 and averaged.  For a
  degenerate mask (all 0 or all 1) the score falls back to 1 - mean|binP - G|.
* ``s_measure`` — alpha-weighted mix (default 0.5) of an object-aware term
  (foreground/background mean-dispersion similarity) and a region-aware term
  (four rectangles split at the mask centroid, each scored by an SSIM-style
  statistic, area-weighted), clamped to [0, 1].
* ``mae`` — mean absolute pixel error.

Dataset-level aggregation averages per-image metrics, and per-image
precision/recall curves pointwise per threshold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .tensor import DTYPE, ShapeError, Tensor

BETA_SQUARED = 0.3
DEFAULT_ALPHA = 0.5
DEFAULT_THRESHOLDS = 256

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    f_max: float
    e_max: float
    s_measure: float
    pr_curve: Tensor  # [n_thresholds, 2] of (recall, precision), threshold ascending


def _check_pair(pred: Tensor, gt: Tensor) -> tuple[Tensor, Tensor]:
    pred = np.asarray(pred, dtype=DTYPE)
    gt = np.asarray(gt, dtype=DTYPE)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} vs mask {tuple(gt.shape)}")
    if not np.isin(gt, (0.0, 1.0)).all():
        raise ValueError("ground truth mask must be strictly binary")
    return pred, gt


def thresholds(n: int = DEFAULT_THRESHOLDS) -> Tensor:
    """The sweep grid t = k/(n-1), k = 0..n-1."""
    return np.arange(n, dtype=DTYPE) / (n - 1)


def bce_loss(pred: Tensor, gt: Tensor, eps: float = 1e-7) -> float:
    """Pixel-mean binary cross entropy; predictions are clipped into
    [eps, 1-eps] before the logs."""
    pred, gt = _check_pair(pred, gt)
    p = np.clip(pred, eps, 1.0 - eps)
    return float(-np.mean(gt * np.log(p) + (1.0 - gt) * np.log(1.0 - p)))


def total_loss(preds: list[Tensor], gt: Tensor) -> float:
    """Unweighted sum of per-level BCE losses."""
    if not preds:
        raise ValueError("total_loss: need at least one prediction level")
    return float(sum(bce_loss(p, gt) for p in preds))


def precision_recall(pred: Tensor, gt: Tensor, threshold: float) -> tuple[float, float]:
    """TP/FP/FN counts at one binarization threshold (P >= t is positive)."""
    pred, gt = _check_pair(pred, gt)
    positive = pred >= threshold
    mask = gt > 0.5
    tp = float(np.count_nonzero(positive & mask))
    fp = float(np.count_nonzero(positive & ~mask))
    fn = float(np.count_nonzero(~positive & mask))
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 0.0 if tp + fn == 0 else tp / (tp + fn)
    return precision, recall


def _pr_sweep(pred: Tensor, gt: Tensor, n_thresholds: int) -> tuple[Tensor, Tensor]:
    """Vectorized precision/recall over the full threshold grid."""
    ts = thresholds(n_thresholds)
    positive = pred[None, :, :] >= ts[:, None, None]
    mask = gt > 0.5
    tp = np.count_nonzero(positive & mask, axis=(1, 2)).astype(DTYPE)
    pp = np.count_nonzero(positive, axis=(1, 2)).astype(DTYPE)
    n_fg = float(np.count_nonzero(mask))
    precision = np.where(pp == 0, 1.0, tp / np.where(pp == 0, 1.0, pp))
    recall = np.zeros_like(tp) if n_fg == 0 else tp / n_fg
    return precision, recall


def pr_curve(pred: Tensor, gt: Tensor, n_thresholds: int = DEFAULT_THRESHOLDS) -> Tensor:
    """(recall, precision) pairs ordered by ascending threshold."""
    pred, gt = _check_pair(pred, gt)
    precision, recall = _pr_sweep(pred, gt, n_thresholds)
    return np.stack([recall, precision], axis=1)


def f_beta(precision: float, recall: float, beta_squared: float = BETA_SQUARED) -> float:
    denom = beta_squared * precision + recall
    if denom == 0:
        return 0.0
    return (1.0 + beta_squared) * precision * recall / denom


def f_measure_max(pred: Tensor, gt: Tensor, n_thresholds: int = DEFAULT_THRESHOLDS) -> float:
    pred, gt = _check_pair(pred, gt)
    precision, recall = _pr_sweep(pred, gt, n_thresholds)
    denom = BETA_SQUARED * precision + recall
    f = np.where(denom == 0, 0.0, (1.0 + BETA_SQUARED) * precision * recall / np.where(denom == 0, 1.0, denom))
    return float(np.max(f))


def enhanced_alignment(binary_pred: Tensor, gt: Tensor) -> float:
    """Alignment score of one binarized prediction against a mask."""
    n_fg = np.count_nonzero(gt)
    if n_fg == 0 or n_fg == gt.size:
        # degenerate mask: plain agreement ratio
        return float(1.0 - np.mean(np.abs(binary_pred - gt)))
    phi_gt = gt - gt.mean()
    phi_fm = binary_pred - binary_pred.mean()
    num = 2.0 * phi_gt * phi_fm
    den = phi_gt * phi_gt + phi_fm * phi_fm
    align = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    return float(np.mean((1.0 + align) ** 2 / 4.0))


def e_measure_max(pred: Tensor, gt: Tensor, n_thresholds: int = DEFAULT_THRESHOLDS) -> float:
    pred, gt = _check_pair(pred, gt)
    best = 0.0
    for t in thresholds(n_thresholds):
        binary = (pred >= t).astype(DTYPE)
        best = max(best, enhanced_alignment(binary, gt))
    return best


def _object_score(values: Tensor) -> float:
    """Similarity of a masked prediction region to an ideal constant-1 region."""
    if values.size == 0:
        return 0.0
    x = float(values.mean())
    sigma = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + _EPS)


def _s_object(pred: Tensor, gt: Tensor) -> float:
    fg = gt > 0.5
    o_fg = _object_score(pred[fg])
    o_bg = _object_score(1.0 - pred[~fg])
    u = float(gt.mean())
    return u * o_fg + (1.0 - u) * o_bg


def _ssim_region(pred: Tensor, gt: Tensor) -> float:
    n = pred.size
    if n == 0:
        return 0.0
    x = float(pred.mean())
    y = float(gt.mean())
    norm = max(n - 1, 1)
    sigma_x = float(np.square(pred - x).sum()) / norm
    sigma_y = float(np.square(gt - y).sum()) / norm
    sigma_xy = float(((pred - x) * (gt - y)).sum()) / norm
    num = 4.0 * x * y * sigma_xy
    den = (x * x + y * y) * (sigma_x + sigma_y)
    if num != 0.0:
        return num / (den + _EPS)
    return 1.0 if den == 0.0 else 0.0


def _round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def _centroid(gt: Tensor) -> tuple[int, int]:
    """1-indexed centroid of the mask (rounded half away from zero); the image
    center if empty."""
    h, w = gt.shape
    total = gt.sum()
    if total == 0:
        return _round_half_up(h / 2), _round_half_up(w / 2)
    rows = np.arange(1, h + 1, dtype=DTYPE)
    cols = np.arange(1, w + 1, dtype=DTYPE)
    cy = _round_half_up(float((gt.sum(axis=1) * rows).sum() / total))
    cx = _round_half_up(float((gt.sum(axis=0) * cols).sum() / total))
    return cy, cx


def _s_region(pred: Tensor, gt: Tensor) -> float:
    h, w = gt.shape
    cy, cx = _centroid(gt)
    area = h * w
    quads = [
        (slice(None, cy), slice(None, cx)),
        (slice(None, cy), slice(cx, None)),
        (slice(cy, None), slice(None, cx)),
        (slice(cy, None), slice(cx, None)),
    ]
    score = 0.0
    for rows, cols in quads:
        g = gt[rows, cols]
        weight = g.size / area
        if weight > 0:
            score += weight * _ssim_region(pred[rows, cols], g)
    return score


def s_measure(pred: Tensor, gt: Tensor, alpha: float = DEFAULT_ALPHA) -> float:
    """Structural similarity of a continuous prediction to the mask, mixing the
    object-aware and region-aware terms by ``alpha``; degenerate masks reduce to
    the mean prediction level."""
    pred, gt = _check_pair(pred, gt)
    u = float(gt.mean())
    if u == 0.0:
        return 1.0 - float(pred.mean())
    if u == 1.0:
        return float(pred.mean())
    value = alpha * _s_object(pred, gt) + (1.0 - alpha) * _s_region(pred, gt)
    return float(np.clip(value, 0.0, 1.0))


def mae(pred: Tensor, gt: Tensor) -> float:
    """Mean absolute pixel error."""
    pred, gt = _check_pair(pred, gt)
    return float(np.mean(np.abs(pred - gt)))


def evaluate(pred: Tensor, gt: Tensor, n_thresholds: int = DEFAULT_THRESHOLDS) -> MetricsReport:
    """All metrics for one prediction/mask pair."""
    return MetricsReport(
        mae=mae(pred, gt),
        f_max=f_measure_max(pred, gt, n_thresholds),
        e_max=e_measure_max(pred, gt, n_thresholds),
        s_measure=s_measure(pred, gt),
        pr_curve=pr_curve(pred, gt, n_thresholds),
    )


def aggregate_reports(reports: list[MetricsReport]) -> MetricsReport:
    """Dataset-level report: scalar metrics averaged over images, PR curves
    averaged pointwise per threshold."""
    if not reports:
        raise ValueError("aggregate_reports: empty report list")
    return MetricsReport(
        mae=float(np.mean([r.mae for r in reports])),
        f_max=float(np.mean([r.f_max for r in reports])),
        e_max=float(np.mean([r.e_max for r in reports])),
        s_measure=float(np.mean([r.s_measure for r in reports])),
        pr_curve=np.mean([r.pr_curve for r in reports], axis=0),
    )


# --- CSV emission -----------------------------------------------------------

METRICS_HEADER = ["image", "mae", "f_max", "e_max", "s_measure"]
PR_HEADER = ["threshold", "precision", "recall"]


def write_metrics_csv(rows: list[tuple[str, MetricsReport]], path) -> None:
    """One row per image plus an aggregate row; full-precision decimals."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for name, rep in rows:
            writer.writerow([name, repr(rep.mae), repr(rep.f_max), repr(rep.e_max), repr(rep.s_measure)])
        agg = aggregate_reports([rep for _, rep in rows])
        writer.writerow(
            ["aggregate", repr(agg.mae), repr(agg.f_max), repr(agg.e_max), repr(agg.s_measure)]
        )


def read_metrics_csv(path) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["image"]] = {k: float(row[k]) for k in METRICS_HEADER[1:]}
    return out


def write_pr_csv(curve: Tensor, path) -> None:
    """One row per threshold: threshold, precision, recall."""
    ts = thresholds(curve.shape[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PR_HEADER)
        for t, (recall, precision) in zip(ts, curve):
            writer.writerow([repr(float(t)), repr(float(precision)), repr(float(recall))])


def read_pr_csv(path) -> Tensor:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append([float(row["recall"]), float(row["precision"])])
    return np.asarray(rows, dtype=DTYPE)
