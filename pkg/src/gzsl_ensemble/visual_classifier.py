"""Visual modality: feature hallucinator plus softmax classifier with MC dropout.

The hallucinator is a ridge-fit linear map from class prototypes to class
mean features; it synthesizes training features for classes that have none.
The classifier is a single linear layer + softmax over all classes, trained
on real seen features plus hallucinated unseen features, with inverted input
dropout at training time and across T MC inference passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attribute_regressor import TrainConfig, TrainingDivergedError, _map_passes
from .dropout import VISUAL_STREAM, pass_masks, training_mask


@dataclass(frozen=True)
class Hallucinator:
    """Linear prototype-to-feature generator with isotropic Gaussian noise.

    The ridge fit leaves ``bias`` at zero; the field exists so externally
    constructed generators (e.g. loaded from file) can carry an offset.
    """

    map: np.ndarray  # (L, K)
    bias: np.ndarray  # (K,)
    noise_std: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.map).all() or not np.isfinite(self.bias).all():
            raise ValueError("hallucinator map must be finite")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")

    def to_json_dict(self) -> dict:
        return {
            "kind": "hallucinator",
            "l": int(self.map.shape[0]),
            "k": int(self.map.shape[1]),
            "map": [float(v) for v in self.map.ravel()],
            "bias": [float(v) for v in self.bias],
            "noise_std": float(self.noise_std),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Hallucinator":
        l, k = int(obj["l"]), int(obj["k"])
        return cls(
            map=np.array(obj["map"], dtype=float).reshape(l, k),
            bias=np.array(obj["bias"], dtype=float),
            noise_std=float(obj["noise_std"]),
        )


@dataclass(frozen=True)
class VisualClassifier:
    """Linear softmax classifier plus its MC-dropout inference settings."""

    weights: np.ndarray  # (K, C)
    bias: np.ndarray  # (C,)
    dropout_rate: float
    t_passes: int
    base_seed: int
    epoch_losses: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.t_passes < 1:
            raise ValueError("t_passes must be >= 1")
        if not np.isfinite(self.weights).all() or not np.isfinite(self.bias).all():
            raise ValueError("weights and bias must be finite")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    def to_json_dict(self) -> dict:
        return {
            "kind": "visual_classifier",
            "k": int(self.weights.shape[0]),
            "c": int(self.weights.shape[1]),
            "weights": [float(v) for v in self.weights.ravel()],
            "bias": [float(v) for v in self.bias],
            "dropout_rate": float(self.dropout_rate),
            "t_passes": int(self.t_passes),
            "base_seed": int(self.base_seed),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "VisualClassifier":
        k, c = int(obj["k"]), int(obj["c"])
        return cls(
            weights=np.array(obj["weights"], dtype=float).reshape(k, c),
            bias=np.array(obj["bias"], dtype=float),
            dropout_rate=float(obj["dropout_rate"]),
            t_passes=int(obj["t_passes"]),
            base_seed=int(obj["base_seed"]),
        )


def fit_hallucinator(
    seen_features: np.ndarray,
    seen_labels: np.ndarray,
    attributes: np.ndarray,
    ridge: float = 1e-6,
) -> Hallucinator:
    """Ridge least squares from each seen prototype to its class mean feature.

    ``noise_std`` is the mean within-class per-coordinate feature std of the
    seen classes, so noiseless data yields a noiseless generator.
    """
    seen_features = np.asarray(seen_features, dtype=float)
    seen_labels = np.asarray(seen_labels, dtype=np.intp)
    if seen_features.shape[0] == 0:
        raise ValueError("empty input")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")

    classes = np.unique(seen_labels)
    protos = attributes[classes]
    means = []
    stds = []
    for cls in classes:
        rows = seen_features[seen_labels == cls]
        means.append(rows.mean(axis=0))
        # shift by the first row so identical rows give an exact zero std
        stds.append(float((rows - rows[0]).std(axis=0).mean()))
    means = np.vstack(means)

    l = attributes.shape[1]
    gram = protos.T @ protos + ridge * np.eye(l)
    mapping = np.linalg.solve(gram, protos.T @ means)
    return Hallucinator(map=mapping, bias=np.zeros(seen_features.shape[1]),
                        noise_std=float(np.mean(stds)))


def hallucinate_features(h: Hallucinator, a: np.ndarray, n: int, seed: int) -> np.ndarray:
    """n synthetic feature rows for prototype ``a``: a·map + bias + noise."""
    if n < 0:
        raise ValueError("n must be >= 0")
    center = np.asarray(a, dtype=float) @ h.map + h.bias
    rows = np.tile(center, (n, 1))
    if h.noise_std > 0 and n > 0:
        rng = np.random.default_rng(seed)
        rows = rows + h.noise_std * rng.standard_normal(rows.shape)
    return rows


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent_loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, x: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over the batch and its analytic gradients."""
    m = x.shape[0]
    probs = softmax(x @ weights + bias)
    loss = -float(np.mean(np.log(probs[np.arange(m), labels])))
    probs[np.arange(m), labels] -= 1.0
    probs /= m
    return loss, x.T @ probs, probs.sum(axis=0)


def train_visual_classifier(
    real_features: np.ndarray,
    real_labels: np.ndarray,
    generated_features: np.ndarray,
    generated_labels: np.ndarray,
    dropout_rate: float,
    t_passes: int,
    cfg: TrainConfig,
    n_classes: int | None = None,
    base_seed: int | None = None,
) -> VisualClassifier:
    """Fit the softmax classifier on real + generated features.

    Mini-batch gradient descent with inverted input dropout, zero init,
    fully determined by ``cfg.seed``.  Mean per-epoch losses are recorded
    on the returned model.
    """
    x = np.asarray(real_features, dtype=float)
    y = np.asarray(real_labels, dtype=np.intp)
    gen_x = np.asarray(generated_features, dtype=float)
    if gen_x.size:
        x = np.vstack([x, gen_x.reshape(-1, x.shape[1])])
        y = np.concatenate([y, np.asarray(generated_labels, dtype=np.intp)])
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    if np.unique(y).size < 2:
        raise ValueError("training labels must cover at least 2 classes")
    c = int(y.max()) + 1 if n_classes is None else n_classes
    if y.max() >= c:
        raise ValueError("label outside the class universe")

    k = x.shape[1]
    weights = np.zeros((k, c))
    bias = np.zeros(c)
    rng = np.random.default_rng(cfg.seed)
    losses: list[float] = []

    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = x[idx] * training_mask(rng, (idx.size, k), dropout_rate)
            with np.errstate(over="ignore", invalid="ignore"):
                loss, d_w, d_b = softmax_xent_loss_and_grad(weights, bias, xb, y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            weights -= cfg.learning_rate * d_w
            bias -= cfg.learning_rate * d_b
            epoch_loss += loss * idx.size
        losses.append(epoch_loss / n)

    return VisualClassifier(
        weights=weights,
        bias=bias,
        dropout_rate=dropout_rate,
        t_passes=t_passes,
        base_seed=cfg.seed if base_seed is None else base_seed,
        epoch_losses=tuple(losses),
    )


def mc_cyg_scores(model: VisualClassifier, x: np.ndarray, sample_index: int = 0) -> np.ndarray:
    """Average of T softmax passes under pass-specific dropout masks."""
    return mc_cyg_score_matrix(model, np.asarray(x, dtype=float)[None, :],
                               sample_indices=np.array([sample_index]))[0]


def mc_cyg_score_matrix(
    model: VisualClassifier,
    features: np.ndarray,
    sample_indices: np.ndarray | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Row-per-sample MC softmax averages under the same masks as per-sample
    scoring.

    Per-pass outputs are summed in pass order, so the result is independent
    of the thread schedule.
    """
    features = np.asarray(features, dtype=float)
    m = features.shape[0]
    if sample_indices is None:
        sample_indices = np.arange(m)
    if model.dropout_rate == 0.0:
        # every mask is all ones, so the T-pass average equals one clean pass
        return softmax(features @ model.weights + model.bias)

    def one_pass(t: int) -> np.ndarray:
        masks = pass_masks(model.base_seed, VISUAL_STREAM, t, sample_indices,
                           features.shape[1], model.dropout_rate)
        return softmax((features * masks) @ model.weights + model.bias)

    total = np.zeros((m, model.n_classes))
    for probs in _map_passes(one_pass, model.t_passes, threads):
        total += probs
    return total / model.t_passes
