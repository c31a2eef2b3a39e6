"""From-scratch MLP surrogate of the simulator.

One ReLU hidden layer (1000 units by default) with either a point head or a
distributional head emitting (mu, sigma), sigma kept positive through
softplus + 1e-6. Training is plain seeded mini-batch gradient descent on
normalized [0, 1] features and targets, with zero-centered input noise,
inverted dropout, a weight-decay penalty on the weight matrices, and early
stopping on validation loss. The distributional loss is the Gaussian
negative log-likelihood minus eta times the Gaussian entropy, which stops
the network from collapsing sigma toward zero.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import SurrogateDataset

MODEL_FORMAT_VERSION = 1
SIGMA_FLOOR = 1e-6

POINT = "point"
DISTRIBUTIONAL = "dist"
HEADS = (POINT, DISTRIBUTIONAL)


# ---------------------------------------------------------------------------
# Loss analytics.
# ---------------------------------------------------------------------------


def nll(xs, mu: float, sigma: float) -> float:
    """(n/2) ln(2 pi sigma^2) + sum (x_i - mu)^2 / (2 sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    xs = np.asarray(xs, dtype=float)
    if xs.size < 1:
        raise ValueError("need at least one observation")
    n = xs.size
    return (n / 2.0) * math.log(2.0 * math.pi * sigma**2) + float(
        np.sum((xs - mu) ** 2)) / (2.0 * sigma**2)


def entropy(mu: float, sigma: float) -> float:
    """Entropy of N(mu, sigma^2): 0.5 ln(2 e pi sigma^2); independent of mu."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    return 0.5 * math.log(2.0 * math.e * math.pi * sigma**2)


def combined_loss(xs, mu: float, sigma: float, eta: float) -> float:
    """nll - eta * entropy."""
    return nll(xs, mu, sigma) - eta * entropy(mu, sigma)


# ---------------------------------------------------------------------------
# Model.
# ---------------------------------------------------------------------------


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str
    rng_seed: int

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])


def init_model(input_dim: int, hidden, head: str, seed: int) -> MlpModel:
    """Seeded uniform init in +/- sqrt(6 / (fan_in + fan_out))."""
    if head not in HEADS:
        raise ValueError(f"head must be one of {HEADS}")
    out_dim = 1 if head == POINT else 2
    sizes = [input_dim, *hidden, out_dim]
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases, head=head, rng_seed=seed)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _forward_batch(model: MlpModel, X: np.ndarray, masks=None):
    """Raw head outputs plus the caches backward needs.

    ``masks`` holds one inverted-dropout mask per hidden layer (or None).
    """
    acts = [X]
    zs = []
    h = X
    n_layers = len(model.weights)
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        if not np.isfinite(z).all():
            raise ValueError(f"non-finite activation in layer {k}")
        zs.append(z)
        if k < n_layers - 1:
            h = np.maximum(z, 0.0)
            if masks is not None and masks[k] is not None:
                h = h * masks[k]
            acts.append(h)
    return zs[-1], acts, zs


def head_outputs(model: MlpModel, raw: np.ndarray):
    if model.head == POINT:
        return raw[:, 0]
    mu = raw[:, 0]
    sigma = _softplus(raw[:, 1]) + SIGMA_FLOOR
    return mu, sigma


def forward(model: MlpModel, x, mode: str = "eval", rng=None,
            noise_std: float = 0.0, dropout_rate: float = 0.0):
    """Evaluate one normalized input vector.

    Eval mode is deterministic. Train mode adds Normal(0, noise_std^2) input
    noise and applies inverted dropout to the hidden layers, both drawn from
    ``rng``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ValueError(f"input must have shape ({model.input_dim},)")
    X = x[None, :]
    masks = None
    if mode == "train":
        if rng is None:
            rng = np.random.Generator(np.random.PCG64(model.rng_seed))
        if noise_std > 0:
            X = X + rng.normal(0.0, noise_std, size=X.shape)
        if dropout_rate > 0:
            masks = [(rng.uniform(size=(1, w.shape[1])) >= dropout_rate)
                     / (1.0 - dropout_rate) for w in model.weights[:-1]]
    elif mode != "eval":
        raise ValueError("mode must be 'train' or 'eval'")
    raw, _, _ = _forward_batch(model, X, masks)
    out = head_outputs(model, raw)
    if model.head == POINT:
        return float(out[0])
    mu, sigma = out
    return float(mu[0]), float(sigma[0])


def batch_loss(model: MlpModel, raw: np.ndarray, y: np.ndarray, eta: float) -> float:
    """Mean data loss of raw head outputs against normalized targets."""
    if model.head == POINT:
        return float(np.mean((raw[:, 0] - y) ** 2))
    mu, sigma = head_outputs(model, raw)
    per = (0.5 * np.log(2.0 * math.pi * sigma**2) + (y - mu) ** 2 / (2.0 * sigma**2)
           - eta * 0.5 * np.log(2.0 * math.e * math.pi * sigma**2))
    return float(np.mean(per))


def backward(model: MlpModel, X: np.ndarray, y: np.ndarray, eta: float = 0.0,
             weight_decay: float = 0.0, _caches=None):
    """Gradients of [mean data loss + (weight_decay/2) sum ||W||^2].

    Returns (grads_w, grads_b, loss). The loss includes the decay penalty.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if _caches is None:
        raw, acts, zs = _forward_batch(model, X)
        masks = None
    else:
        raw, acts, zs, masks = _caches
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty batch")

    data_loss = batch_loss(model, raw, y, eta)
    if model.head == POINT:
        d_raw = np.empty_like(raw)
        d_raw[:, 0] = 2.0 * (raw[:, 0] - y) / n
    else:
        mu, sigma = head_outputs(model, raw)
        d_raw = np.empty_like(raw)
        d_raw[:, 0] = (mu - y) / sigma**2 / n
        d_sigma = (1.0 - eta) / sigma - (y - mu) ** 2 / sigma**3
        d_raw[:, 1] = d_sigma * _sigmoid(raw[:, 1]) / n

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = d_raw
    for k in range(len(model.weights) - 1, -1, -1):
        grads_w[k] = acts[k].T @ delta
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ model.weights[k].T
            if masks is not None and masks[k - 1] is not None:
                delta = delta * masks[k - 1]
            delta = delta * (zs[k - 1] > 0)

    penalty = 0.0
    if weight_decay > 0:
        for k, w in enumerate(model.weights):
            grads_w[k] += weight_decay * w
            penalty += 0.5 * weight_decay * float(np.sum(w * w))
    return grads_w, grads_b, data_loss + penalty


# ---------------------------------------------------------------------------
# Normalization and training.
# ---------------------------------------------------------------------------


@dataclass
class Normalizer:
    """Per-column [0, 1] scaling fitted on the training split only."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    @classmethod
    def fit(cls, features: np.ndarray, targets: np.ndarray) -> "Normalizer":
        fmin = features.min(axis=0)
        fmax = features.max(axis=0)
        for i, (lo, hi) in enumerate(zip(fmin, fmax)):
            if hi <= lo:
                raise ValueError(f"degenerate feature column x{i:02d} (max == min)")
        tmin, tmax = float(targets.min()), float(targets.max())
        if tmax <= tmin:
            raise ValueError("degenerate target column yield (max == min)")
        return cls(fmin, fmax, tmin, tmax)

    def transform_features(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_min) / (self.feature_max - self.feature_min)

    def inverse_features(self, normalized: np.ndarray) -> np.ndarray:
        return self.feature_min + normalized * (self.feature_max - self.feature_min)

    def transform_target(self, targets):
        return (np.asarray(targets, dtype=float) - self.target_min) / self.target_scale

    def inverse_target(self, normalized):
        return self.target_min + np.asarray(normalized, dtype=float) * self.target_scale

    @property
    def target_scale(self) -> float:
        return self.target_max - self.target_min


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    max_epochs: int = 1000
    patience: int = 50
    batch_size: int = 32
    noise_std: float = 0.0824
    eta: float = 0.2359
    weight_decay: float = 1e-4
    dropout_rate: float = 0.1
    split: float = 0.75
    seed: int = 0
    hidden: tuple[int, ...] = (1000,)
    head: str = POINT

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must lie in (0, 1)")
        if self.noise_std < 0 or self.eta < 0:
            raise ValueError("noise_std and eta must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    model: MlpModel
    history: list[EpochStats]
    normalizer: Normalizer
    val_indices: np.ndarray = field(repr=False, default=None)


def train(dataset: SurrogateDataset, config: TrainConfig) -> TrainResult:
    """Seeded split/shuffle/descent; early stopping restores the best weights."""
    n = dataset.features.shape[0]
    if n < 8:
        raise ValueError(f"need at least 8 rows, got {n}")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    order = rng.permutation(n)
    n_train = int(round(config.split * n))
    n_train = min(max(n_train, 1), n - 1)
    train_idx, val_idx = order[:n_train], order[n_train:]

    normalizer = Normalizer.fit(dataset.features[train_idx], dataset.yields[train_idx])
    X_train = normalizer.transform_features(dataset.features[train_idx])
    y_train = normalizer.transform_target(dataset.yields[train_idx])
    X_val = normalizer.transform_features(dataset.features[val_idx])
    y_val = normalizer.transform_target(dataset.yields[val_idx])

    model = init_model(dataset.features.shape[1], config.hidden, config.head,
                       seed=int(rng.integers(2**62)))

    best_val = math.inf
    best_weights = None
    stale = 0
    history: list[EpochStats] = []
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n_train)
        batch_losses = []
        for lo in range(0, n_train, config.batch_size):
            idx = perm[lo:lo + config.batch_size]
            X = X_train[idx]
            if config.noise_std > 0:
                X = X + rng.normal(0.0, config.noise_std, size=X.shape)
            masks = None
            if config.dropout_rate > 0:
                masks = [(rng.uniform(size=(1, w.shape[1])) >= config.dropout_rate)
                         / (1.0 - config.dropout_rate)
                         for w in model.weights[:-1]]
            raw, acts, zs = _forward_batch(model, X, masks)
            grads_w, grads_b, loss = backward(
                model, X, y_train[idx], eta=config.eta,
                weight_decay=config.weight_decay, _caches=(raw, acts, zs, masks))
            batch_losses.append((loss, len(idx)))
            for k in range(len(model.weights)):
                model.weights[k] -= config.learning_rate * grads_w[k]
                model.biases[k] -= config.learning_rate * grads_b[k]

        train_loss = sum(l * m for l, m in batch_losses) / n_train
        raw_val, _, _ = _forward_batch(model, X_val)
        val_loss = batch_loss(model, raw_val, y_val, config.eta)
        history.append(EpochStats(epoch, float(train_loss), float(val_loss)))

        if val_loss < best_val:
            best_val = val_loss
            best_weights = ([w.copy() for w in model.weights],
                            [b.copy() for b in model.biases])
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    if best_weights is not None:
        model.weights, model.biases = best_weights
    return TrainResult(model=model, history=history, normalizer=normalizer,
                       val_indices=val_idx)


def predict_batch(model: MlpModel, normalizer: Normalizer, features: np.ndarray):
    """Eval-mode predictions denormalized to kg/ha.

    Point head: (N,) array. Distributional head: (N, 2) array of (mu, sigma),
    sigma scaled by the target range.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != model.input_dim:
        raise ValueError(f"features must be (N, {model.input_dim})")
    raw, _, _ = _forward_batch(model, normalizer.transform_features(features))
    if model.head == POINT:
        return normalizer.inverse_target(raw[:, 0])
    mu, sigma = head_outputs(model, raw)
    return np.column_stack([normalizer.inverse_target(mu),
                            sigma * normalizer.target_scale])


# ---------------------------------------------------------------------------
# Persistence.
# ---------------------------------------------------------------------------


def model_to_json(model: MlpModel, normalizer: Normalizer,
                  config: TrainConfig) -> str:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "head": model.head,
        "layer_sizes": [model.input_dim, *model.hidden,
                        model.weights[-1].shape[1]],
        "weights": [w.tolist() for w in model.weights],  # row-major
        "biases": [b.tolist() for b in model.biases],
        "normalizer": {
            "feature_min": normalizer.feature_min.tolist(),
            "feature_max": normalizer.feature_max.tolist(),
            "target_min": normalizer.target_min,
            "target_max": normalizer.target_max,
        },
        "config": dataclasses.asdict(config),
        "rng_seed": model.rng_seed,
    }
    return json.dumps(doc, indent=2) + "\n"


def model_from_json(text: str) -> tuple[MlpModel, Normalizer, TrainConfig]:
    doc = json.loads(text)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    model = MlpModel(
        weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
        head=doc["head"],
        rng_seed=int(doc["rng_seed"]),
    )
    norm = doc["normalizer"]
    normalizer = Normalizer(
        feature_min=np.asarray(norm["feature_min"], dtype=float),
        feature_max=np.asarray(norm["feature_max"], dtype=float),
        target_min=float(norm["target_min"]),
        target_max=float(norm["target_max"]),
    )
    cfg = doc["config"]
    cfg["hidden"] = tuple(cfg["hidden"])
    config = TrainConfig(**cfg)
    return model, normalizer, config


def write_history_csv(history: list[EpochStats]) -> str:
    lines = ["epoch,train_loss,val_loss"]
    lines += [f"{h.epoch},{h.train_loss!r},{h.val_loss!r}" for h in history]
    return "\n".join(lines) + "\n"
