"""Semantic modality: linear visual-to-attribute regressor with MC dropout.

The regressor maps a K-dim visual feature to an L-dim attribute vector and
classifies by nearest prototype (squared Euclidean distance, ties to the
lowest class id).  MC inference runs T stochastic passes with per-pass
input-dropout masks and averages the resulting one-hot votes, so scores are
vote fractions in {0, 1/T, ..., 1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dropout import ATTRIBUTE_STREAM, pass_masks, training_mask


class TrainingDivergedError(RuntimeError):
    """Raised when a trainer hits a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass(frozen=True)
class DapRegressor:
    """Linear attribute regressor plus its MC-dropout inference settings."""

    weights: np.ndarray  # (K, L)
    bias: np.ndarray  # (L,)
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

    def regress(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias

    def to_json_dict(self) -> dict:
        return {
            "kind": "attribute_regressor",
            "k": int(self.weights.shape[0]),
            "l": int(self.weights.shape[1]),
            "weights": [float(v) for v in self.weights.ravel()],
            "bias": [float(v) for v in self.bias],
            "dropout_rate": float(self.dropout_rate),
            "t_passes": int(self.t_passes),
            "base_seed": int(self.base_seed),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DapRegressor":
        k, l = int(obj["k"]), int(obj["l"])
        return cls(
            weights=np.array(obj["weights"], dtype=float).reshape(k, l),
            bias=np.array(obj["bias"], dtype=float),
            dropout_rate=float(obj["dropout_rate"]),
            t_passes=int(obj["t_passes"]),
            base_seed=int(obj["base_seed"]),
        )


def mse_loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, x: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Half mean-per-sample squared error and its analytic gradients."""
    m = x.shape[0]
    err = x @ weights + bias - targets
    loss = 0.5 * float(np.sum(err * err)) / m
    return loss, x.T @ err / m, err.sum(axis=0) / m


def train_dap(
    train_features: np.ndarray,
    train_labels: np.ndarray,
    attributes: np.ndarray,
    dropout_rate: float,
    t_passes: int,
    cfg: TrainConfig,
    base_seed: int | None = None,
) -> DapRegressor:
    """Fit the regressor by mini-batch gradient descent on attribute MSE.

    Input dropout (inverted) is active during training.  Weights start at
    zero; the run is fully determined by ``cfg.seed``.  Mean per-epoch
    losses are recorded on the returned model.
    """
    train_features = np.asarray(train_features, dtype=float)
    train_labels = np.asarray(train_labels, dtype=np.intp)
    if train_features.shape[0] == 0:
        raise ValueError("empty training set")
    if train_labels.min() < 0 or train_labels.max() >= attributes.shape[0]:
        raise ValueError("training label outside the attribute table")

    targets = attributes[train_labels]
    k, l = train_features.shape[1], attributes.shape[1]
    weights = np.zeros((k, l))
    bias = np.zeros(l)
    rng = np.random.default_rng(cfg.seed)
    losses: list[float] = []

    n = train_features.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = train_features[idx] * training_mask(rng, (idx.size, k), dropout_rate)
            with np.errstate(over="ignore", invalid="ignore"):
                loss, d_w, d_b = mse_loss_and_grad(weights, bias, xb, targets[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            weights -= cfg.learning_rate * d_w
            bias -= cfg.learning_rate * d_b
            epoch_loss += loss * idx.size
        losses.append(epoch_loss / n)

    return DapRegressor(
        weights=weights,
        bias=bias,
        dropout_rate=dropout_rate,
        t_passes=t_passes,
        base_seed=cfg.seed if base_seed is None else base_seed,
        epoch_losses=tuple(losses),
    )


def classify_nn_pass(
    model: DapRegressor,
    x: np.ndarray,
    attributes: np.ndarray,
    pass_index: int,
    sample_index: int = 0,
) -> np.ndarray:
    """One-hot nearest-prototype vote for a single stochastic pass."""
    if not 0 <= pass_index < model.t_passes:
        raise ValueError(f"pass_index must be in [0, {model.t_passes})")
    winners = _pass_winners(model, np.asarray(x, dtype=float)[None, :], attributes,
                            pass_index, np.array([sample_index]))
    out = np.zeros(attributes.shape[0])
    out[winners[0]] = 1.0
    return out


def mc_dap_scores(
    model: DapRegressor,
    x: np.ndarray,
    attributes: np.ndarray,
    sample_index: int = 0,
) -> np.ndarray:
    """Vote fractions over classes from T nearest-prototype passes."""
    return mc_dap_score_matrix(model, np.asarray(x, dtype=float)[None, :], attributes,
                               sample_indices=np.array([sample_index]))[0]


def mc_dap_score_matrix(
    model: DapRegressor,
    features: np.ndarray,
    attributes: np.ndarray,
    sample_indices: np.ndarray | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Row-per-sample MC vote fractions under the same masks as per-sample
    scoring.

    ``sample_indices`` pins each row's mask stream slot (defaults to row
    position).  Votes are integer counts, so any pass schedule or thread
    count yields the same result bit for bit.
    """
    features = np.asarray(features, dtype=float)
    m, c = features.shape[0], attributes.shape[0]
    if sample_indices is None:
        sample_indices = np.arange(m)
    rows = np.arange(m)
    if model.dropout_rate == 0.0:
        # identical masks: every pass votes the same, so one pass suffices
        out = np.zeros((m, c))
        out[rows, _pass_winners(model, features, attributes, 0, sample_indices)] = 1.0
        return out

    counts = np.zeros((m, c), dtype=np.int64)

    def one_pass(t: int) -> np.ndarray:
        return _pass_winners(model, features, attributes, t, sample_indices)

    for winners in _map_passes(one_pass, model.t_passes, threads):
        counts[rows, winners] += 1
    return counts / model.t_passes


def _pass_winners(
    model: DapRegressor,
    features: np.ndarray,
    attributes: np.ndarray,
    pass_index: int,
    sample_indices: np.ndarray,
) -> np.ndarray:
    masks = pass_masks(model.base_seed, ATTRIBUTE_STREAM, pass_index,
                       sample_indices, features.shape[1], model.dropout_rate)
    regressed = (features * masks) @ model.weights + model.bias
    diff = regressed[:, None, :] - attributes[None, :, :]
    dists = np.einsum("mcl,mcl->mc", diff, diff)
    return np.argmin(dists, axis=1)


def _map_passes(fn, t_passes: int, threads: int):
    """Run per-pass computations, optionally on a thread pool, and yield the
    results in pass order so reductions are schedule-independent."""
    if threads <= 1:
        for t in range(t_passes):
            yield fn(t)
        return
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, range(t_passes))
