"""Evaluation protocol: macro top-1 accuracy, fused reports, beta sweeps,
and area under the seen/unseen accuracy curve.

Accuracies are macro averages: measured independently per class, then
averaged over the class set.  All values are fractions in [0, 1]; percent
formatting belongs to callers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .calibration import hmean
from .ensemble import ensemble_score_matrix, weighted_predictions_for_betas


@dataclass(frozen=True)
class GzslReport:
    acc_unseen: float
    acc_seen: float
    hmean: float
    zsl: float
    alpha: float
    beta: float


@dataclass(frozen=True)
class SweepCurve:
    alpha: float
    points: tuple[tuple[float, float, float], ...]  # (beta, acc_seen, acc_unseen)
    ausuc: float

    def __post_init__(self) -> None:
        betas = [p[0] for p in self.points]
        if betas[0] != 0.0 or betas[-1] != 1.0 or (np.diff(betas) <= 0).any():
            raise ValueError("sweep betas must be strictly increasing from 0 to 1")


def per_class_top1(predictions: np.ndarray, labels: np.ndarray, class_set) -> float:
    """Mean over ``class_set`` of the accuracy within each class."""
    predictions = np.asarray(predictions, dtype=np.intp)
    labels = np.asarray(labels, dtype=np.intp)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have the same length")
    accs = []
    for cls in sorted(class_set):
        member = labels == cls
        size = int(member.sum())
        if size == 0:
            raise ValueError(f"class {cls} has zero samples")
        accs.append(float((predictions[member] == cls).sum()) / size)
    return float(np.mean(accs))


def _unseen_mask(n_classes: int, unseen_set) -> np.ndarray:
    mask = np.zeros(n_classes, dtype=bool)
    mask[sorted(unseen_set)] = True
    return mask


def evaluate_gzsl(
    dap_scores: np.ndarray,
    cyg_scores: np.ndarray,
    labels: np.ndarray,
    seen_set,
    unseen_set,
    alpha: float,
    beta: float,
) -> GzslReport:
    """Fuse, weight, predict, and report seen/unseen/H plus the beta=1
    zero-shot accuracy on the unseen classes."""
    fused = ensemble_score_matrix(dap_scores, cyg_scores, alpha)
    mask = _unseen_mask(fused.shape[1], unseen_set)
    labels = np.asarray(labels, dtype=np.intp)

    preds, zsl_preds = weighted_predictions_for_betas(fused, mask, np.array([beta, 1.0]))
    acc_seen = per_class_top1(preds, labels, seen_set)
    acc_unseen = per_class_top1(preds, labels, unseen_set)
    zsl = per_class_top1(zsl_preds, labels, unseen_set)
    return GzslReport(
        acc_unseen=acc_unseen,
        acc_seen=acc_seen,
        hmean=hmean(acc_seen, acc_unseen),
        zsl=zsl,
        alpha=float(alpha),
        beta=float(beta),
    )


def sweep_beta(
    dap_scores: np.ndarray,
    cyg_scores: np.ndarray,
    labels: np.ndarray,
    seen_set,
    unseen_set,
    alpha: float,
    beta_values,
) -> SweepCurve:
    """One (acc_seen, acc_unseen) point per beta at a fixed alpha."""
    betas = np.asarray(beta_values, dtype=float)
    if betas[0] != 0.0 or betas[-1] != 1.0:
        raise ValueError("beta_values must include 0 and 1")
    fused = ensemble_score_matrix(dap_scores, cyg_scores, alpha)
    mask = _unseen_mask(fused.shape[1], unseen_set)
    labels = np.asarray(labels, dtype=np.intp)

    preds = weighted_predictions_for_betas(fused, mask, betas)
    points = []
    for bi, beta in enumerate(betas):
        acc_s = per_class_top1(preds[bi], labels, seen_set)
        acc_u = per_class_top1(preds[bi], labels, unseen_set)
        points.append((float(beta), acc_s, acc_u))
    ausuc = compute_ausuc([(p[1], p[2]) for p in points])
    return SweepCurve(alpha=float(alpha), points=tuple(points), ausuc=ausuc)


def compute_ausuc(points) -> float:
    """Area under the seen/unseen frontier by the trapezoidal rule.

    Points strictly dominated in both coordinates are dropped; the rest are
    sorted by seen accuracy (descending unseen accuracy within ties) and
    integrated over the seen axis.  Strict dominance keeps axis-aligned
    corners such as {(0,1),(1,1),(1,0)}, whose area is exactly 1.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("empty point list")
    pts = pts.reshape(-1, 2)
    if (pts < 0).any() or (pts > 1).any():
        raise ValueError("points must lie in the unit square")

    dominated = (
        (pts[:, None, 0] < pts[None, :, 0]) & (pts[:, None, 1] < pts[None, :, 1])
    ).any(axis=1)
    frontier = pts[~dominated]
    order = np.lexsort((-frontier[:, 1], frontier[:, 0]))
    frontier = frontier[order]

    x, y = frontier[:, 0], frontier[:, 1]
    widths = np.diff(x)
    mids = 0.5 * (y[:-1] + y[1:])
    return float(np.sum(widths * mids))


# ---------------------------------------------------------------------------
# Emitted files
# ---------------------------------------------------------------------------


def write_report_json(report: GzslReport, path: str) -> None:
    obj = {
        "acc_unseen": report.acc_unseen,
        "acc_seen": report.acc_seen,
        "hmean": report.hmean,
        "zsl": report.zsl,
        "alpha": report.alpha,
        "beta": report.beta,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep_csv(curve: SweepCurve, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("beta,acc_seen,acc_unseen\n")
        for beta, acc_s, acc_u in curve.points:
            fh.write(f"{float(beta)!r},{float(acc_s)!r},{float(acc_u)!r}\n")


def write_ausuc_txt(ausuc: float, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{float(ausuc)!r}\n")
