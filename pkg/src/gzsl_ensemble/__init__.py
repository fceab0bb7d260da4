"""Seen/unseen ensemble classification toolkit.

Two linear modalities (a visual-to-attribute regressor with nearest-prototype
classification, and a softmax classifier fed real plus hallucinated
features), each wrapped in MC-dropout inference, fused by agreement voting
and balanced by a seen/unseen class weighting whose (alpha, beta) knobs are
calibrated by harmonic-mean grid search.
"""

from .attribute_regressor import (
    DapRegressor,
    TrainConfig,
    TrainingDivergedError,
    classify_nn_pass,
    mc_dap_score_matrix,
    mc_dap_scores,
    train_dap,
)
from .calibration import CalibrationResult, GridSpec, calibrate_grid, hmean
from .dataset import (
    DatasetError,
    GzslDataset,
    SplitManifest,
    SynthSpec,
    datasets_equal,
    generate_synthetic,
    load_dataset,
    make_calibration_split,
    save_dataset,
    validate_dataset,
)
from .ensemble import (
    ClassWeighting,
    EnsembleParams,
    apply_class_weighting,
    ensemble_score_matrix,
    ensemble_scores,
    predict,
    predict_weighted,
    weighted_predictions_for_betas,
)
from .metrics import (
    GzslReport,
    SweepCurve,
    compute_ausuc,
    evaluate_gzsl,
    per_class_top1,
    sweep_beta,
)
from .pipeline import RunConfig, run_calibrate, run_eval, run_sweep, run_train
from .visual_classifier import (
    Hallucinator,
    VisualClassifier,
    fit_hallucinator,
    hallucinate_features,
    mc_cyg_score_matrix,
    mc_cyg_scores,
    train_visual_classifier,
)

__all__ = [
    "CalibrationResult",
    "ClassWeighting",
    "DapRegressor",
    "DatasetError",
    "EnsembleParams",
    "GridSpec",
    "GzslDataset",
    "GzslReport",
    "Hallucinator",
    "RunConfig",
    "SplitManifest",
    "SweepCurve",
    "SynthSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "VisualClassifier",
    "apply_class_weighting",
    "calibrate_grid",
    "classify_nn_pass",
    "compute_ausuc",
    "datasets_equal",
    "ensemble_score_matrix",
    "ensemble_scores",
    "evaluate_gzsl",
    "fit_hallucinator",
    "generate_synthetic",
    "hallucinate_features",
    "hmean",
    "load_dataset",
    "make_calibration_split",
    "mc_cyg_score_matrix",
    "mc_cyg_scores",
    "mc_dap_score_matrix",
    "mc_dap_scores",
    "per_class_top1",
    "predict",
    "predict_weighted",
    "run_calibrate",
    "run_eval",
    "run_sweep",
    "run_train",
    "save_dataset",
    "sweep_beta",
    "train_dap",
    "train_visual_classifier",
    "validate_dataset",
    "weighted_predictions_for_betas",
]

__version__ = "0.1.0"
