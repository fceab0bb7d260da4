"""Agreement-voting fusion of two modality scores and seen/unseen weighting.

Fusion rule: when both modalities rank the same class first, that class's
fused score is pinned to 1 and every other class takes the alpha-weighted
average; under disagreement all classes take the weighted average.  The
output is a score vector, not renormalized.

Class weighting multiplies unseen-class scores by beta and seen-class
scores by (1-beta); beta=1 restricts predictions to unseen classes (the
zero-shot operating point) and beta=0 to seen classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnsembleParams:
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")


@dataclass(frozen=True)
class ClassWeighting:
    beta: float
    seen_set: frozenset[int]
    unseen_set: frozenset[int]

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        n = len(self.seen_set) + len(self.unseen_set)
        if self.seen_set & self.unseen_set or (self.seen_set | self.unseen_set) != frozenset(range(n)):
            raise ValueError("seen and unseen sets must partition [0, C)")

    def unseen_mask(self) -> np.ndarray:
        n = len(self.seen_set) + len(self.unseen_set)
        mask = np.zeros(n, dtype=bool)
        mask[sorted(self.unseen_set)] = True
        return mask


def ensemble_scores(p_dap: np.ndarray, p_cyg: np.ndarray, alpha: float) -> np.ndarray:
    """Fuse two probability vectors by agreement voting."""
    p_dap = np.asarray(p_dap, dtype=float)
    p_cyg = np.asarray(p_cyg, dtype=float)
    if p_dap.shape != p_cyg.shape:
        raise ValueError(f"length mismatch: {p_dap.shape} vs {p_cyg.shape}")
    fused = alpha * p_cyg + (1.0 - alpha) * p_dap
    top = int(np.argmax(p_dap))
    if top == int(np.argmax(p_cyg)):
        fused = fused.copy()
        fused[top] = 1.0
    return fused


def ensemble_score_matrix(dap: np.ndarray, cyg: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise agreement-voting fusion of two (M, C) score matrices."""
    dap = np.asarray(dap, dtype=float)
    cyg = np.asarray(cyg, dtype=float)
    if dap.shape != cyg.shape:
        raise ValueError(f"shape mismatch: {dap.shape} vs {cyg.shape}")
    fused = alpha * cyg + (1.0 - alpha) * dap
    top_dap = np.argmax(dap, axis=1)
    agree = top_dap == np.argmax(cyg, axis=1)
    fused[agree, top_dap[agree]] = 1.0
    return fused


def apply_class_weighting(scores: np.ndarray, w: ClassWeighting) -> np.ndarray:
    """Scale unseen-class scores by beta and seen-class scores by (1-beta)."""
    scores = np.asarray(scores, dtype=float)
    mask = w.unseen_mask()
    if scores.shape[-1] != mask.size:
        raise ValueError(f"length mismatch: {scores.shape[-1]} scores vs {mask.size} classes")
    if not np.isfinite(scores).all() or (scores < 0).any():
        raise ValueError("scores must be finite and nonnegative")
    return scores * np.where(mask, w.beta, 1.0 - w.beta)


def predict(weighted_scores: np.ndarray) -> int:
    """Argmax class id, ties broken toward the lowest id."""
    weighted_scores = np.asarray(weighted_scores, dtype=float)
    if weighted_scores.size == 0:
        raise ValueError("empty score vector")
    if not np.isfinite(weighted_scores).all():
        raise ValueError("scores must be finite")
    return int(np.argmax(weighted_scores))


def predict_weighted(scores: np.ndarray, w: ClassWeighting) -> int:
    """Weight then predict, restricting to the favored partition at the
    degenerate extremes: beta=1 always predicts an unseen class and beta=0
    a seen class, even when every surviving score is zero."""
    weighted = apply_class_weighting(scores, w)
    if weighted.max() == 0.0 and w.beta in (0.0, 1.0):
        favored = w.unseen_set if w.beta == 1.0 else w.seen_set
        return min(favored)
    return predict(weighted)


def partition_best(scores: np.ndarray, unseen_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per row: (best seen id, best seen score, best unseen id, best unseen score).

    Argmaxes are taken within each partition with ties to the lowest id.
    """
    scores = np.asarray(scores, dtype=float)
    unseen_mask = np.asarray(unseen_mask, dtype=bool)
    if unseen_mask.all() or not unseen_mask.any():
        raise ValueError("both partitions must be nonempty")
    neg_inf = np.float64(-np.inf)
    seen_view = np.where(unseen_mask[None, :], neg_inf, scores)
    unseen_view = np.where(unseen_mask[None, :], scores, neg_inf)
    bs_id = np.argmax(seen_view, axis=1)
    bu_id = np.argmax(unseen_view, axis=1)
    rows = np.arange(scores.shape[0])
    return bs_id, scores[rows, bs_id], bu_id, scores[rows, bu_id]


def weighted_predictions_for_betas(
    fused: np.ndarray, unseen_mask: np.ndarray, betas: np.ndarray
) -> np.ndarray:
    """(B, M) predictions of the weight-then-argmax rule for every beta.

    Equivalent to calling predict_weighted per sample; a sample switches
    from its best seen class to its best unseen class at most once as beta
    grows, and the endpoints are pinned to the favored partition.
    """
    betas = np.asarray(betas, dtype=float)
    bs_id, bs_val, bu_id, bu_val = partition_best(fused, unseen_mask)
    left = betas[:, None] * bu_val[None, :]
    right = (1.0 - betas)[:, None] * bs_val[None, :]
    # exact weighted ties go to the lowest class id overall, matching argmax
    pick_unseen = (left > right) | ((left == right) & (bu_id < bs_id)[None, :])
    pick_unseen[betas == 1.0, :] = True
    pick_unseen[betas == 0.0, :] = False
    return np.where(pick_unseen, bu_id[None, :], bs_id[None, :])
