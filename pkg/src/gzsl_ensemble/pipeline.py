"""End-to-end pipeline: train both modalities, cache scores, calibrate,
evaluate, and export sweeps.

The ``train`` stage runs two phases.  The calibration phase holds out the
pseudo-unseen classes plus a per-class fraction of sub-train samples, fits
both modalities on the rest over the seen-class universe, and caches MC
scores for the validation samples.  The final phase refits both modalities
over all classes (by default on the full training split) and caches MC
scores for the combined test set.  Later stages are pure post-processing of
the cached score matrices, so grid search and sweeps never re-run MC
inference.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .attribute_regressor import TrainConfig, mc_dap_score_matrix, train_dap
from .calibration import (
    GridSpec,
    calibrate_grid,
    read_calibration_json,
    write_calibration_json,
    write_hmean_grid_csv,
)
from .dataset import DatasetError, GzslDataset, load_dataset, make_calibration_split
from .metrics import evaluate_gzsl, sweep_beta, write_ausuc_txt, write_report_json, write_sweep_csv
from .visual_classifier import (
    Hallucinator,
    fit_hallucinator,
    hallucinate_features,
    mc_cyg_score_matrix,
    train_visual_classifier,
)

THREADS_ENV_VAR = "GZSL_ENSEMBLE_THREADS"

# Offsets deriving purpose-specific seeds from the single run seed.
_SEED_RESPLIT = 61
_SEED_HOLDOUT = 11
_SEED_DAP_CALIB = 21
_SEED_VIS_CALIB = 22
_SEED_DAP_FINAL = 31
_SEED_VIS_FINAL = 32
_SEED_GEN_CALIB = 4100
_SEED_GEN_FINAL = 5100


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration for one pipeline run."""

    data_dir: str
    out_dir: str
    seed: int = 0
    dropout_rate: float = 0.2
    t_passes: int = 100
    grid_step: float = 0.01
    holdout_frac: float = 0.2
    pseudo_unseen: int | None = None
    final_retrain: bool = True
    threads: int = 1
    ridge: float = 1e-6
    generated_dir: str | None = None
    dap_train: TrainConfig = field(default_factory=TrainConfig)
    visual_train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.t_passes < 1:
            raise ValueError("t_passes must be >= 1")
        if not 0.0 < self.grid_step <= 0.5:
            raise ValueError("grid_step must be in (0, 0.5]")
        if not 0.0 < self.holdout_frac < 1.0:
            raise ValueError("holdout_frac must be in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_json_dict(self) -> dict:
        obj = asdict(self)
        obj["dap_train"] = asdict(self.dap_train)
        obj["visual_train"] = asdict(self.visual_train)
        return obj


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Run-directory layout
# ---------------------------------------------------------------------------


def _model_path(run_dir: str, name: str) -> str:
    return os.path.join(run_dir, "models", f"{name}.json")


def _score_path(run_dir: str, name: str) -> str:
    return os.path.join(run_dir, "scores", name)


def save_model_json(obj: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_matrix_csv(path: str, matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(f"{float(v)!r}" for v in row) + "\n")


def _write_labels_csv(path: str, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for y in labels:
            fh.write(f"{int(y)}\n")


def _read_matrix_csv(path: str) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _read_labels_csv(path: str) -> np.ndarray:
    return np.loadtxt(path, dtype=np.intp, ndmin=1)


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Train stage
# ---------------------------------------------------------------------------


def calibration_subsplit_indices(
    ds: GzslDataset, holdout_frac: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """(fit_indices, validation_indices) for the calibration phase.

    Validation = all train samples of pseudo-unseen classes plus a held-out
    per-class fraction of the sub-train classes' samples; the rest of the
    sub-train samples are fitted on.
    """
    rng = np.random.default_rng(seed)
    labels = ds.labels
    fit_idx: list[int] = []
    val_idx: list[int] = []
    for cls in sorted(ds.splits.calib_subtrain_classes):
        cls_idx = ds.splits.train[labels[ds.splits.train] == cls]
        perm = rng.permutation(cls_idx)
        n_hold = min(cls_idx.size - 1, max(1, round(holdout_frac * cls_idx.size))) if cls_idx.size > 1 else 0
        val_idx.extend(sorted(perm[:n_hold].tolist()))
        fit_idx.extend(sorted(perm[n_hold:].tolist()))
    for cls in sorted(ds.splits.calib_pseudo_unseen_classes):
        cls_idx = ds.splits.train[labels[ds.splits.train] == cls]
        val_idx.extend(cls_idx.tolist())
    return np.array(sorted(fit_idx), dtype=np.intp), np.array(sorted(val_idx), dtype=np.intp)


def _median_class_count(labels: np.ndarray, classes) -> int:
    counts = [int((labels == cls).sum()) for cls in sorted(classes)]
    return max(1, int(round(float(np.median(counts)))))


def _hallucinate_for_classes(
    h: Hallucinator, attributes: np.ndarray, classes, n_per_class: int, seed_base: int
) -> tuple[np.ndarray, np.ndarray]:
    feats = []
    labels = []
    for cls in sorted(classes):
        feats.append(hallucinate_features(h, attributes[cls], n_per_class, seed_base + cls))
        labels.extend([cls] * n_per_class)
    return np.vstack(feats), np.array(labels, dtype=np.intp)


def _load_generated(generated_dir: str, k: int) -> tuple[np.ndarray, np.ndarray]:
    feats_path = os.path.join(generated_dir, "generated_features.csv")
    labels_path = os.path.join(generated_dir, "generated_labels.csv")
    for p in (feats_path, labels_path):
        if not os.path.isfile(p):
            raise DatasetError(f"missing file: {p}")
    feats = _read_matrix_csv(feats_path)
    labels = _read_labels_csv(labels_path)
    if feats.shape[1] != k:
        raise DatasetError(f"{feats_path}: expected {k} columns, got {feats.shape[1]}")
    if feats.shape[0] != labels.shape[0]:
        raise DatasetError(f"{labels_path}: row count mismatch with generated features")
    return feats, labels


def run_train(cfg: RunConfig) -> GzslDataset:
    """Fit both modalities and cache validation/test score matrices."""
    ds = load_dataset(cfg.data_dir)
    if cfg.pseudo_unseen is not None:
        splits = make_calibration_split(ds, cfg.pseudo_unseen, cfg.seed + _SEED_RESPLIT)
        ds = replace(ds, splits=splits)

    os.makedirs(os.path.join(cfg.out_dir, "models"), exist_ok=True)
    os.makedirs(os.path.join(cfg.out_dir, "scores"), exist_ok=True)
    _write_json(os.path.join(cfg.out_dir, "run_config.json"), cfg.to_json_dict())

    s = ds.n_seen
    feats, labels, attrs = ds.features, ds.labels, ds.attributes

    # --- calibration phase: seen-class universe -------------------------
    fit_idx, val_idx = calibration_subsplit_indices(ds, cfg.holdout_frac, cfg.seed + _SEED_HOLDOUT)
    dap_cal = train_dap(
        feats[fit_idx], labels[fit_idx], attrs,
        cfg.dropout_rate, cfg.t_passes,
        replace(cfg.dap_train, seed=cfg.seed + _SEED_DAP_CALIB),
    )
    hall_cal = fit_hallucinator(feats[fit_idx], labels[fit_idx], attrs, cfg.ridge)
    n_gen_cal = _median_class_count(labels[fit_idx], ds.splits.calib_subtrain_classes)
    gen_x, gen_y = _hallucinate_for_classes(
        hall_cal, attrs, ds.splits.calib_pseudo_unseen_classes, n_gen_cal, cfg.seed + _SEED_GEN_CALIB
    )
    vis_cal = train_visual_classifier(
        feats[fit_idx], labels[fit_idx], gen_x, gen_y,
        cfg.dropout_rate, cfg.t_passes,
        replace(cfg.visual_train, seed=cfg.seed + _SEED_VIS_CALIB),
        n_classes=s,
    )
    val_dap = mc_dap_score_matrix(dap_cal, feats[val_idx], attrs[:s], threads=cfg.threads)
    val_cyg = mc_cyg_score_matrix(vis_cal, feats[val_idx], threads=cfg.threads)

    # --- final phase: full class universe --------------------------------
    if cfg.final_retrain:
        full_idx = ds.splits.train
        dap_final = train_dap(
            feats[full_idx], labels[full_idx], attrs,
            cfg.dropout_rate, cfg.t_passes,
            replace(cfg.dap_train, seed=cfg.seed + _SEED_DAP_FINAL),
        )
        hall_final = fit_hallucinator(feats[full_idx], labels[full_idx], attrs, cfg.ridge)
        unseen_to_generate = ds.unseen_classes
        real_x, real_y = feats[full_idx], labels[full_idx]
    else:
        # Reuse the sub-split regressor and hallucinator; the full-universe
        # softmax head is refit from the same sub-split data because the
        # calibration head only covers seen classes.
        dap_final = dap_cal
        hall_final = hall_cal
        unseen_to_generate = ds.unseen_classes | ds.splits.calib_pseudo_unseen_classes
        real_x, real_y = feats[fit_idx], labels[fit_idx]

    if cfg.generated_dir is not None:
        gen_x, gen_y = _load_generated(cfg.generated_dir, ds.n_features)
        if gen_y.size and not set(int(y) for y in gen_y) <= set(range(ds.n_classes)):
            raise DatasetError("generated_labels.csv: label out of range")
    else:
        n_gen = _median_class_count(real_y, sorted(set(int(y) for y in real_y)))
        gen_x, gen_y = _hallucinate_for_classes(
            hall_final, attrs, unseen_to_generate, n_gen, cfg.seed + _SEED_GEN_FINAL
        )
    vis_final = train_visual_classifier(
        real_x, real_y, gen_x, gen_y,
        cfg.dropout_rate, cfg.t_passes,
        replace(cfg.visual_train, seed=cfg.seed + _SEED_VIS_FINAL),
        n_classes=ds.n_classes,
    )

    test_idx = np.concatenate([ds.splits.test_seen, ds.splits.test_unseen])
    test_dap = mc_dap_score_matrix(dap_final, feats[test_idx], attrs, threads=cfg.threads)
    test_cyg = mc_cyg_score_matrix(vis_final, feats[test_idx], threads=cfg.threads)

    # --- persist ----------------------------------------------------------
    save_model_json(dap_cal.to_json_dict(), _model_path(cfg.out_dir, "dap_calib"))
    save_model_json(vis_cal.to_json_dict(), _model_path(cfg.out_dir, "visual_calib"))
    save_model_json(hall_cal.to_json_dict(), _model_path(cfg.out_dir, "hallucinator_calib"))
    save_model_json(dap_final.to_json_dict(), _model_path(cfg.out_dir, "dap_final"))
    save_model_json(vis_final.to_json_dict(), _model_path(cfg.out_dir, "visual_final"))
    save_model_json(hall_final.to_json_dict(), _model_path(cfg.out_dir, "hallucinator_final"))

    _write_matrix_csv(_score_path(cfg.out_dir, "val_dap.csv"), val_dap)
    _write_matrix_csv(_score_path(cfg.out_dir, "val_cyg.csv"), val_cyg)
    _write_labels_csv(_score_path(cfg.out_dir, "val_labels.csv"), labels[val_idx])
    _write_json(
        _score_path(cfg.out_dir, "val_classes.json"),
        {
            "pseudo_seen": sorted(ds.splits.calib_subtrain_classes),
            "pseudo_unseen": sorted(ds.splits.calib_pseudo_unseen_classes),
        },
    )
    _write_matrix_csv(_score_path(cfg.out_dir, "test_dap.csv"), test_dap)
    _write_matrix_csv(_score_path(cfg.out_dir, "test_cyg.csv"), test_cyg)
    _write_labels_csv(_score_path(cfg.out_dir, "test_labels.csv"), labels[test_idx])
    _write_json(
        _score_path(cfg.out_dir, "test_classes.json"),
        {"seen": sorted(ds.seen_classes), "unseen": sorted(ds.unseen_classes)},
    )
    return ds


# ---------------------------------------------------------------------------
# Post-processing stages
# ---------------------------------------------------------------------------


def _require(path: str) -> str:
    if not os.path.isfile(path):
        raise DatasetError(f"missing file: {path} (run the earlier pipeline stages first)")
    return path


def run_calibrate(run_dir: str, grid_step: float | None = None) -> dict:
    """Grid-search (alpha, beta) on cached validation scores."""
    if grid_step is None:
        cfg = _read_json(_require(os.path.join(run_dir, "run_config.json")))
        grid_step = float(cfg.get("grid_step", 0.01))
    val_dap = _read_matrix_csv(_require(_score_path(run_dir, "val_dap.csv")))
    val_cyg = _read_matrix_csv(_require(_score_path(run_dir, "val_cyg.csv")))
    val_labels = _read_labels_csv(_require(_score_path(run_dir, "val_labels.csv")))
    classes = _read_json(_require(_score_path(run_dir, "val_classes.json")))

    result = calibrate_grid(
        val_dap, val_cyg, val_labels,
        frozenset(classes["pseudo_seen"]), frozenset(classes["pseudo_unseen"]),
        GridSpec.with_step(grid_step),
    )
    write_calibration_json(result, os.path.join(run_dir, "calibration.json"))
    write_hmean_grid_csv(result, os.path.join(run_dir, "hmean_grid.csv"))
    return {"alpha_star": result.alpha_star, "beta_star": result.beta_star, "val_hmean": result.val_hmean}


def _load_test_cache(run_dir: str):
    test_dap = _read_matrix_csv(_require(_score_path(run_dir, "test_dap.csv")))
    test_cyg = _read_matrix_csv(_require(_score_path(run_dir, "test_cyg.csv")))
    test_labels = _read_labels_csv(_require(_score_path(run_dir, "test_labels.csv")))
    classes = _read_json(_require(_score_path(run_dir, "test_classes.json")))
    return test_dap, test_cyg, test_labels, frozenset(classes["seen"]), frozenset(classes["unseen"])


def _calibrated_params(run_dir: str) -> tuple[float, float]:
    path = _require(os.path.join(run_dir, "calibration.json"))
    obj = read_calibration_json(path)
    return float(obj["alpha_star"]), float(obj["beta_star"])


def run_eval(run_dir: str, alpha: float | None = None, beta: float | None = None) -> dict:
    """Evaluate cached test scores at (alpha, beta); defaults come from
    calibration.json."""
    if alpha is None or beta is None:
        cal_alpha, cal_beta = _calibrated_params(run_dir)
        alpha = cal_alpha if alpha is None else alpha
        beta = cal_beta if beta is None else beta
    dap, cyg, labels, seen, unseen = _load_test_cache(run_dir)
    report = evaluate_gzsl(dap, cyg, labels, seen, unseen, alpha, beta)
    write_report_json(report, os.path.join(run_dir, "report.json"))
    return {
        "acc_unseen": report.acc_unseen,
        "acc_seen": report.acc_seen,
        "hmean": report.hmean,
        "zsl": report.zsl,
        "alpha": report.alpha,
        "beta": report.beta,
    }


def run_sweep(run_dir: str, alpha: float | None = None, grid_step: float | None = None) -> dict:
    """Sweep beta at fixed alpha on cached test scores; export the curve."""
    if alpha is None:
        alpha, _ = _calibrated_params(run_dir)
    if grid_step is None:
        cfg = _read_json(_require(os.path.join(run_dir, "run_config.json")))
        grid_step = float(cfg.get("grid_step", 0.01))
    dap, cyg, labels, seen, unseen = _load_test_cache(run_dir)
    betas = GridSpec.with_step(grid_step).beta_values
    curve = sweep_beta(dap, cyg, labels, seen, unseen, alpha, betas)
    write_sweep_csv(curve, os.path.join(run_dir, "sweep.csv"))
    write_ausuc_txt(curve.ausuc, os.path.join(run_dir, "ausuc.txt"))
    return {"alpha": curve.alpha, "ausuc": curve.ausuc, "n_points": len(curve.points)}
