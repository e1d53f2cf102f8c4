"""One-hidden-layer MC-dropout classifier written against numpy.

Architecture: x -> affine -> ReLU -> dropout -> affine -> softmax. Dropout is
inverted (kept units scaled by 1 / (1 - rate)) and stays active for
``predict_mc`` so repeated passes sample the approximate posterior predictive.
Labels are 0-based class indices.
"""

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .dirichlet import SampleBatch
from .rng import make_rng


class TrainingError(RuntimeError):
    """Training diverged or received unusable data."""


@dataclass(frozen=True)
class ModelConfig:
    hidden_width: int = 128
    dropout_rate: float = 0.5
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be > 0")
        for name in ("hidden_width", "epochs", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class TrainedModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    config: ModelConfig

    @property
    def input_dim(self):
        return self.W1.shape[0]

    @property
    def class_count(self):
        return self.W2.shape[1]

    def weights(self):
        return (self.W1, self.b1, self.W2, self.b2)


def init_weights(input_dim, hidden, classes, rng):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    l1 = 1.0 / np.sqrt(input_dim)
    l2 = 1.0 / np.sqrt(hidden)
    W1 = rng.uniform(-l1, l1, size=(input_dim, hidden))
    W2 = rng.uniform(-l2, l2, size=(hidden, classes))
    return [W1, np.zeros(hidden), W2, np.zeros(classes)]


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def dropout_mask(rng, shape, rate):
    """Inverted-dropout multiplier: 0 or 1/(1-rate)."""
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def forward(weights, X, mask=None):
    W1, b1, W2, b2 = weights
    z1 = X @ W1 + b1
    a1 = np.maximum(z1, 0.0)
    h = a1 if mask is None else a1 * mask
    logits = h @ W2 + b2
    return logits, (z1, h)


def loss_and_grads(weights, X, y, mask=None):
    """Mean cross-entropy and its gradients with respect to (W1, b1, W2, b2)."""
    W1, b1, W2, b2 = weights
    n = X.shape[0]
    logits, (z1, h) = forward(weights, X, mask)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(n), y].mean()

    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dW2 = h.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dh = dlogits @ W2.T
    if mask is not None:
        dh = dh * mask
    dz1 = dh * (z1 > 0.0)
    dW1 = X.T @ dz1
    db1 = dz1.sum(axis=0)
    return loss, [dW1, db1, dW2, db2]


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("training set is empty")
    if y.shape != (X.shape[0],):
        raise TrainingError(f"{X.shape[0]} feature rows but {y.shape} labels")
    if not np.all(np.isfinite(X)):
        raise TrainingError("features must be finite")
    return X, y


def train(X, y, config=None, class_count=None, history=None):
    """Mini-batch gradient descent on cross-entropy, deterministic given ``config.seed``.

    ``history``, when a list, receives the full-data loss (dropout off) before
    training and after every epoch.
    """
    config = config or ModelConfig()
    X, y = _check_xy(X, y)
    if y.min() < 0:
        raise TrainingError("labels must be non-negative class indices")
    C = int(class_count if class_count is not None else y.max() + 1)
    if y.max() >= C:
        raise TrainingError(f"label {y.max()} out of range for {C} classes")
    rng = make_rng(config.seed, "train")
    weights = init_weights(X.shape[1], config.hidden_width, C, rng)
    n = X.shape[0]
    bs = min(int(config.batch_size), n)
    if history is not None:
        history.append(float(loss_and_grads(weights, X, y)[0]))
    for _ in range(int(config.epochs)):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            mask = dropout_mask(rng, (idx.size, config.hidden_width), config.dropout_rate)
            loss, grads = loss_and_grads(weights, X[idx], y[idx], mask)
            if not np.isfinite(loss):
                raise TrainingError("loss became non-finite")
            for w, g in zip(weights, grads):
                w -= config.learning_rate * g
        if history is not None:
            history.append(float(loss_and_grads(weights, X, y)[0]))
    for w in weights:
        if not np.all(np.isfinite(w)):
            raise TrainingError("weights became non-finite")
        w.setflags(write=False)
    return TrainedModel(*weights, config=config)


def predict_mc_many(model, X, M, seed):
    """(N, M, C) softmax outputs from M dropout passes for every row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.input_dim:
        raise ValueError(f"input has {X.shape[1]} features, model expects {model.input_dim}")
    if int(M) < 1:
        raise ValueError("M must be >= 1")
    rng = make_rng(seed, "mc-dropout")
    W1, b1, W2, b2 = model.weights()
    hidden = np.maximum(X @ W1 + b1, 0.0)
    out = np.empty((X.shape[0], int(M), model.class_count))
    rate = model.config.dropout_rate
    for m in range(int(M)):
        mask = dropout_mask(rng, hidden.shape, rate)
        out[:, m, :] = softmax((hidden * mask) @ W2 + b2)
    return out


def predict_mc(model, x, M, seed):
    """M stochastic forward passes for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_mc takes a single feature vector")
    return SampleBatch(predict_mc_many(model, x, M, seed)[0])


def predict_mean(model, X, M, seed):
    return predict_mc_many(model, X, M, seed).mean(axis=1)


def evaluate(model, X, y, M, seed):
    """Accuracy of argmax of the MC-averaged prediction (ties go to the lower class)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("test set is empty")
    pred = predict_mean(model, X, M, seed).argmax(axis=1)
    return float((pred == y).mean())


# checkpoint layout (all little-endian):
#   8s magic, u32 version, u32 config-json length, config json,
#   u32 tensor count, then per tensor: u32 rows, u32 cols, rows*cols f64 row-major
CHECKPOINT_MAGIC = b"AMIMLP\x00\x01"
CHECKPOINT_VERSION = 1


def save_model(model, path):
    cfg = json.dumps(asdict(model.config), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(cfg)))
        fh.write(cfg)
        tensors = model.weights()
        fh.write(struct.pack("<I", len(tensors)))
        for t in tensors:
            t2 = np.atleast_2d(t)
            fh.write(struct.pack("<II", *t2.shape))
            fh.write(np.ascontiguousarray(t2, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    pos = 8
    version, cfg_len = struct.unpack_from("<II", data, pos)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos += 8
    config = ModelConfig(**json.loads(data[pos:pos + cfg_len].decode("utf-8")))
    pos += cfg_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    tensors = []
    for _ in range(count):
        rows, cols = struct.unpack_from("<II", data, pos)
        pos += 8
        nbytes = rows * cols * 8
        if pos + nbytes > len(data):
            raise ValueError(f"{path}: truncated checkpoint")
        t = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=pos).reshape(rows, cols)
        tensors.append(t.astype(np.float64))
        pos += nbytes
    W1, b1, W2, b2 = tensors
    return TrainedModel(W1, b1.ravel(), W2, b2.ravel(), config=config)
