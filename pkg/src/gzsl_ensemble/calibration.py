"""Harmonic-mean calibration of the fusion and weighting parameters.

Given cached per-sample modality scores on a validation set whose classes
are split into pseudo-seen and pseudo-unseen groups, an exhaustive grid
search over (alpha, beta) maximizes the harmonic mean of the two macro
accuracies.  Scores are fused once per alpha and reused across every beta,
so the default 101x101 grid is pure post-processing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ensemble import ensemble_score_matrix, weighted_predictions_for_betas


def hmean(acc_seen: float, acc_unseen: float) -> float:
    """Harmonic mean of two accuracies in [0, 1]; zero when both are zero."""
    if not (0.0 <= acc_seen <= 1.0 and 0.0 <= acc_unseen <= 1.0):
        raise ValueError("accuracies must be in [0, 1]")
    if acc_seen == 0.0 and acc_unseen == 0.0:
        return 0.0
    # operands ordered for exact symmetry; grouped to avoid underflow of the
    # raw product for tiny accuracies
    lo, hi = sorted((acc_seen, acc_unseen))
    return 2.0 * lo * (hi / (lo + hi))


@dataclass(frozen=True)
class GridSpec:
    alpha_values: tuple[float, ...]
    beta_values: tuple[float, ...]

    def __post_init__(self) -> None:
        for name, values in (("alpha_values", self.alpha_values), ("beta_values", self.beta_values)):
            arr = np.asarray(values, dtype=float)
            if arr.size < 2 or (np.diff(arr) <= 0).any():
                raise ValueError(f"{name} must be strictly increasing with >= 2 entries")
            if arr[0] != 0.0 or arr[-1] != 1.0:
                raise ValueError(f"{name} must start at 0 and end at 1")

    @classmethod
    def with_step(cls, step: float = 0.01) -> "GridSpec":
        if not 0 < step <= 0.5:
            raise ValueError("step must be in (0, 0.5]")
        n = round(1.0 / step)
        values = tuple(float(v) for v in np.linspace(0.0, 1.0, n + 1))
        return cls(alpha_values=values, beta_values=values)


@dataclass(frozen=True)
class CalibrationResult:
    alpha_star: float
    beta_star: float
    hmean_grid: np.ndarray  # (|alpha|, |beta|)
    acc_seen_grid: np.ndarray
    acc_unseen_grid: np.ndarray
    grid: GridSpec
    val_hmean: float
    val_split: object = None  # the SplitManifest that produced the validation set


def calibrate_grid(
    val_dap_scores: np.ndarray,
    val_cyg_scores: np.ndarray,
    val_labels: np.ndarray,
    pseudo_seen_set: frozenset[int],
    pseudo_unseen_set: frozenset[int],
    grid: GridSpec,
    val_split=None,
) -> CalibrationResult:
    """Exhaustive (alpha, beta) search maximizing the validation H-mean.

    Ties resolve to the smallest beta, then the smallest alpha, so the
    result is independent of evaluation order.
    """
    dap = np.asarray(val_dap_scores, dtype=float)
    cyg = np.asarray(val_cyg_scores, dtype=float)
    labels = np.asarray(val_labels, dtype=np.intp)
    if dap.shape[0] == 0:
        raise ValueError("empty validation set")
    if not pseudo_seen_set or not pseudo_unseen_set:
        raise ValueError("pseudo class sets must both be nonempty")
    n_classes = dap.shape[1]
    if pseudo_seen_set | pseudo_unseen_set != set(range(n_classes)) or pseudo_seen_set & pseudo_unseen_set:
        raise ValueError("pseudo sets must partition the score columns")

    unseen_mask = np.zeros(n_classes, dtype=bool)
    unseen_mask[sorted(pseudo_unseen_set)] = True
    betas = np.asarray(grid.beta_values, dtype=float)

    seen_onehot, seen_counts = _class_indicator(labels, sorted(pseudo_seen_set))
    unseen_onehot, unseen_counts = _class_indicator(labels, sorted(pseudo_unseen_set))

    n_a, n_b = len(grid.alpha_values), len(grid.beta_values)
    acc_seen_grid = np.empty((n_a, n_b))
    acc_unseen_grid = np.empty((n_a, n_b))
    hmean_grid = np.empty((n_a, n_b))
    for ai, alpha in enumerate(grid.alpha_values):
        fused = ensemble_score_matrix(dap, cyg, alpha)
        preds = weighted_predictions_for_betas(fused, unseen_mask, betas)  # (B, M)
        correct = preds == labels[None, :]
        acc_seen_grid[ai] = _macro_accuracy(correct, seen_onehot, seen_counts)
        acc_unseen_grid[ai] = _macro_accuracy(correct, unseen_onehot, unseen_counts)
        for bi in range(n_b):
            hmean_grid[ai, bi] = hmean(acc_seen_grid[ai, bi], acc_unseen_grid[ai, bi])

    best_ai, best_bi, best_h = 0, 0, -1.0
    for bi in range(n_b):
        for ai in range(n_a):
            if hmean_grid[ai, bi] > best_h:
                best_ai, best_bi, best_h = ai, bi, hmean_grid[ai, bi]

    return CalibrationResult(
        alpha_star=float(grid.alpha_values[best_ai]),
        beta_star=float(grid.beta_values[best_bi]),
        hmean_grid=hmean_grid,
        acc_seen_grid=acc_seen_grid,
        acc_unseen_grid=acc_unseen_grid,
        grid=grid,
        val_hmean=float(best_h),
        val_split=val_split,
    )


def _class_indicator(labels: np.ndarray, class_ids: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """(M, n_cls) one-hot membership matrix and per-class sample counts."""
    onehot = np.stack([labels == cls for cls in class_ids], axis=1).astype(float)
    counts = onehot.sum(axis=0)
    missing = [cls for cls, cnt in zip(class_ids, counts) if cnt == 0]
    if missing:
        raise ValueError(f"class {missing[0]} has zero validation samples")
    return onehot, counts


def _macro_accuracy(correct: np.ndarray, onehot: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Mean over classes of per-class accuracy, one value per beta row.

    Matches metrics.per_class_top1 bit for bit: integer correct counts are
    divided by integer class sizes, then averaged in ascending class order.
    """
    per_class = (correct.astype(float) @ onehot) / counts
    return per_class.mean(axis=1)


# ---------------------------------------------------------------------------
# Emitted files
# ---------------------------------------------------------------------------


def write_calibration_json(result: CalibrationResult, path: str) -> None:
    obj = {
        "alpha_star": result.alpha_star,
        "beta_star": result.beta_star,
        "val_hmean": result.val_hmean,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_calibration_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_hmean_grid_csv(result: CalibrationResult, path: str) -> None:
    """One row per grid point: alpha, beta, acc_seen, acc_unseen, hmean."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("alpha,beta,acc_seen,acc_unseen,hmean\n")
        for ai, alpha in enumerate(result.grid.alpha_values):
            for bi, beta in enumerate(result.grid.beta_values):
                fh.write(
                    f"{float(alpha)!r},{float(beta)!r},"
                    f"{float(result.acc_seen_grid[ai, bi])!r},"
                    f"{float(result.acc_unseen_grid[ai, bi])!r},"
                    f"{float(result.hmean_grid[ai, bi])!r}\n"
                )
