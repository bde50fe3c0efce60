"""Fully connected feed-forward network trained by backpropagation.

Default topology is 6-8-1: six scaled inputs, one logistic-sigmoid hidden
layer of eight units, one linear output.  Training is full-batch gradient
descent on the mean squared error of min-max scaled targets, with early
stopping on an internal validation slice.  Everything is plain numpy; the
forward pass, the gradients and the finite-difference checker are the point
of the module, not wrappers around a framework.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dataset import (
    DEFAULT_ENCODING,
    Dataset,
    EncodingConfig,
    N_FEATURES,
    encode_dataset,
)
from .errors import DivergenceError, NumericError, ValidationError

_DIVERGENCE_FACTOR = 10.0
_DIVERGENCE_PATIENCE = 10


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class NetworkTopology:
    inputs: int = N_FEATURES
    hidden: tuple[int, ...] = (8,)
    outputs: int = 1

    def __post_init__(self) -> None:
        if self.inputs < 1 or self.outputs != 1:
            raise ValidationError("topology needs inputs >= 1 and exactly one output")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValidationError("hidden layer sizes must all be >= 1")

    def layer_sizes(self) -> tuple[int, ...]:
        return (self.inputs,) + tuple(self.hidden) + (self.outputs,)


@dataclass(frozen=True)
class TargetScaler:
    """Affine map of the response onto [0, 1]; degenerate ranges get span 1."""

    lo: float
    hi: float

    @property
    def span(self) -> float:
        return self.hi - self.lo if self.hi > self.lo else 1.0

    def scale(self, y):
        return (np.asarray(y, dtype=float) - self.lo) / self.span

    def inverse(self, s):
        return self.lo + np.asarray(s, dtype=float) * self.span

    @staticmethod
    def fit(y: np.ndarray) -> "TargetScaler":
        return TargetScaler(lo=float(np.min(y)), hi=float(np.max(y)))


@dataclass(frozen=True)
class Weights:
    """One (matrix, bias) pair per layer, ordered input to output."""

    matrices: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def copy(self) -> "Weights":
        return Weights(
            matrices=tuple(m.copy() for m in self.matrices),
            biases=tuple(b.copy() for b in self.biases),
        )


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.05
    max_epochs: int = 2000
    seed: int = 0
    validation_fraction: float = 0.2
    early_stop_patience: int = 100
    target_scaler: TargetScaler | None = None

    def __post_init__(self) -> None:
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise ValidationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not (0.0 < self.validation_fraction <= 0.5):
            raise ValidationError(
                f"validation_fraction must lie in (0, 0.5], got {self.validation_fraction}"
            )
        if self.early_stop_patience < 1:
            raise ValidationError("early_stop_patience must be >= 1")


@dataclass(frozen=True)
class AnnModel:
    topology: NetworkTopology
    weights: Weights
    scaler: TargetScaler
    train_loss: tuple[float, ...]
    val_loss: tuple[float, ...]
    stopped_epoch: int
    encoding: EncodingConfig = field(default_factory=lambda: DEFAULT_ENCODING)


def init_weights(topology: NetworkTopology, seed: int) -> Weights:
    """Uniform init on [-r, r] with r = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    sizes = topology.layer_sizes()
    matrices = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        r = math.sqrt(6.0 / (fan_in + fan_out))
        matrices.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Weights(matrices=tuple(matrices), biases=tuple(biases))


def _forward_batch(weights: Weights, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Scaled outputs (n,) plus the activation of every layer (input first)."""
    activations = [X]
    a = X
    for w, b in zip(weights.matrices[:-1], weights.biases[:-1]):
        a = sigmoid(a @ w.T + b)
        activations.append(a)
    out = a @ weights.matrices[-1].T + weights.biases[-1]
    activations.append(out)
    return out[:, 0], activations


def forward(weights: Weights, x: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Single-sample pass; returns the scaled output and per-layer activations."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != weights.matrices[0].shape[1]:
        raise ValidationError(
            f"feature vector must have length {weights.matrices[0].shape[1]}"
        )
    out, activations = _forward_batch(weights, x[None, :])
    return float(out[0]), [a[0] for a in activations]


def _gradients(
    weights: Weights, X: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Full-batch MSE and its gradients w.r.t. every matrix and bias."""
    n = X.shape[0]
    out, activations = _forward_batch(weights, X)
    residual = out - targets
    loss = float(residual @ residual) / n

    grad_w: list[np.ndarray] = [np.zeros(0)] * len(weights.matrices)
    grad_b: list[np.ndarray] = [np.zeros(0)] * len(weights.biases)
    delta = (2.0 / n) * residual[:, None]  # d loss / d output
    grad_w[-1] = delta.T @ activations[-2]
    grad_b[-1] = delta.sum(axis=0)
    upstream = delta @ weights.matrices[-1]
    for layer in range(len(weights.matrices) - 2, -1, -1):
        a = activations[layer + 1]
        delta = upstream * a * (1.0 - a)  # sigmoid'(z) = a (1 - a)
        grad_w[layer] = delta.T @ activations[layer]
        grad_b[layer] = delta.sum(axis=0)
        upstream = delta @ weights.matrices[layer]
    return loss, grad_w, grad_b


def _descend(
    weights: Weights,
    X: np.ndarray,
    targets: np.ndarray,
    learning_rate: float,
    max_epochs: int,
    *,
    X_val: np.ndarray | None = None,
    val_targets: np.ndarray | None = None,
    patience: int | None = None,
    checkpoints: Sequence[int] = (),
) -> dict:
    """Gradient-descent engine shared by ``train`` and the overfit scans.

    Losses are recorded after each epoch's update.  Divergence (loss above
    ten times the initial loss for ten straight epochs) and non-finite losses
    raise; early stopping tracks the best validation epoch when a validation
    set and a patience are given.
    """
    matrices = [m.copy() for m in weights.matrices]
    biases = [b.copy() for b in weights.biases]
    current = Weights(tuple(matrices), tuple(biases))

    initial_loss, _, _ = _gradients(current, X, targets)
    train_hist: list[float] = []
    val_hist: list[float] = []
    snapshots: dict[int, Weights] = {}
    wanted = set(checkpoints)

    best_val = math.inf
    best_epoch = 0
    best_weights = current.copy()
    stale = 0
    high_streak = 0

    for epoch in range(1, max_epochs + 1):
        _, grad_w, grad_b = _gradients(current, X, targets)
        matrices = [m - learning_rate * g for m, g in zip(matrices, grad_w)]
        biases = [b - learning_rate * g for b, g in zip(biases, grad_b)]
        current = Weights(tuple(matrices), tuple(biases))

        loss, _, _ = _gradients(current, X, targets)
        if math.isnan(loss):
            raise NumericError(f"training loss became NaN at epoch {epoch}")
        train_hist.append(loss)
        if loss > _DIVERGENCE_FACTOR * max(initial_loss, 1e-300):
            high_streak += 1
            if high_streak >= _DIVERGENCE_PATIENCE:
                raise DivergenceError(
                    f"training diverged at epoch {epoch}: loss {loss:.3e} stayed above "
                    f"{_DIVERGENCE_FACTOR:.0f}x the initial loss {initial_loss:.3e} for "
                    f"{_DIVERGENCE_PATIENCE} epochs; try a lower learning rate"
                )
        else:
            high_streak = 0

        if epoch in wanted:
            snapshots[epoch] = current.copy()

        if X_val is not None:
            vout, _ = _forward_batch(current, X_val)
            vres = vout - val_targets
            vloss = float(vres @ vres) / X_val.shape[0]
            if math.isnan(vloss):
                raise NumericError(f"validation loss became NaN at epoch {epoch}")
            val_hist.append(vloss)
            if patience is not None:
                if vloss < best_val:
                    best_val = vloss
                    best_epoch = epoch
                    best_weights = current.copy()
                    stale = 0
                else:
                    stale += 1
                    if stale >= patience:
                        break

    return {
        "weights": current,
        "train_loss": train_hist,
        "val_loss": val_hist,
        "best_epoch": best_epoch,
        "best_weights": best_weights,
        "snapshots": snapshots,
    }


def train(
    train_data: Dataset,
    config: EncodingConfig = DEFAULT_ENCODING,
    topology: NetworkTopology = NetworkTopology(),
    training: TrainingConfig = TrainingConfig(),
) -> AnnModel:
    """Fit the network; returns the weights of the best validation epoch.

    The validation slice is carved off the given training half with the
    training seed, so identical (data, config, seed) rebuild bit-identical
    models.  Loss histories are truncated at the returned epoch.
    """
    if train_data.n < 10:
        raise ValidationError(f"train needs at least 10 rows, got {train_data.n}")
    X, y = encode_dataset(train_data, config)
    if y is None:
        raise ValidationError("cannot fit on records without expenditure")
    if X.shape[1] != topology.inputs:
        raise ValidationError(
            f"topology expects {topology.inputs} inputs, features have {X.shape[1]}"
        )

    scaler = training.target_scaler or TargetScaler.fit(y)
    targets = scaler.scale(y)

    rng = np.random.default_rng(training.seed)
    perm = rng.permutation(train_data.n)
    n_val = max(1, int(round(training.validation_fraction * train_data.n)))
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    if fit_idx.size < 1:
        raise ValidationError("validation slice leaves no training rows")

    weights = init_weights(topology, training.seed)
    result = _descend(
        weights,
        X[fit_idx],
        targets[fit_idx],
        training.learning_rate,
        training.max_epochs,
        X_val=X[val_idx],
        val_targets=targets[val_idx],
        patience=training.early_stop_patience,
    )
    stopped = result["best_epoch"]
    return AnnModel(
        topology=topology,
        weights=result["best_weights"],
        scaler=scaler,
        train_loss=tuple(result["train_loss"][:stopped]),
        val_loss=tuple(result["val_loss"][:stopped]),
        stopped_epoch=stopped,
        encoding=config,
    )


def train_trajectory(
    train_data: Dataset,
    config: EncodingConfig,
    topology: NetworkTopology,
    training: TrainingConfig,
    checkpoints: Sequence[int],
) -> tuple[TargetScaler, list[tuple[int, Weights]]]:
    """Train on the whole given set (no validation split, no early stop),
    returning weight snapshots at the requested epochs.

    Full-batch descent is deterministic, so the snapshot at epoch e equals a
    separate run stopped at e; the scan ladder needs only one run.
    """
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if not checkpoints or checkpoints[0] < 1:
        raise ValidationError("checkpoints must be positive epochs")
    X, y = encode_dataset(train_data, config)
    if y is None:
        raise ValidationError("cannot fit on records without expenditure")
    scaler = training.target_scaler or TargetScaler.fit(y)
    weights = init_weights(topology, training.seed)
    result = _descend(
        weights,
        X,
        scaler.scale(y),
        training.learning_rate,
        checkpoints[-1],
        checkpoints=checkpoints,
    )
    return scaler, [(e, result["snapshots"][e]) for e in checkpoints]


def predict_ann(model: AnnModel, x: np.ndarray) -> float:
    """Prediction at one encoded feature vector, on the expenditure scale."""
    out, _ = forward(model.weights, x)
    return float(model.scaler.inverse(out))


def gradient_check(
    weights: Weights, sample: tuple[np.ndarray, float], epsilon: float = 1e-6
) -> float:
    """Max relative error between backprop and central finite differences.

    The checked objective is the per-sample squared error of the scaled
    output.  Relative error per parameter is |a - n| / max(|a| + |n|, 1e-8).
    """
    if not (1e-8 <= epsilon <= 1e-4):
        raise ValidationError(f"epsilon must lie in [1e-8, 1e-4], got {epsilon}")
    x, target = sample
    X = np.asarray(x, dtype=float)[None, :]
    t = np.array([float(target)])

    _, grad_w, grad_b = _gradients(weights, X, t)
    analytic = np.concatenate([g.ravel() for g in grad_w] + [g.ravel() for g in grad_b])

    def loss_at(flat: np.ndarray) -> float:
        mats = []
        bs = []
        offset = 0
        for m in weights.matrices:
            mats.append(flat[offset : offset + m.size].reshape(m.shape))
            offset += m.size
        for b in weights.biases:
            bs.append(flat[offset : offset + b.size].reshape(b.shape))
            offset += b.size
        out, _ = _forward_batch(Weights(tuple(mats), tuple(bs)), X)
        return float((out[0] - t[0]) ** 2)

    flat = np.concatenate(
        [m.ravel() for m in weights.matrices] + [b.ravel() for b in weights.biases]
    )
    worst = 0.0
    for k in range(flat.size):
        bumped = flat.copy()
        bumped[k] = flat[k] + epsilon
        up = loss_at(bumped)
        bumped[k] = flat[k] - epsilon
        down = loss_at(bumped)
        numeric = (up - down) / (2.0 * epsilon)
        rel = abs(analytic[k] - numeric) / max(abs(analytic[k]) + abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst


def loss_history_csv(model: AnnModel) -> str:
    """CSV of the recorded loss trajectories: epoch, train_mse, val_mse."""
    lines = ["epoch,train_mse,val_mse"]
    for epoch, (tr, va) in enumerate(zip(model.train_loss, model.val_loss), start=1):
        lines.append(f"{epoch},{tr!r},{va!r}")
    return "\n".join(lines) + "\n"
