"""Five-layer fully connected classifier trained with Adam on cross-entropy.

Layer sizes 1152 -> 512 -> 128 -> 32 -> 8 -> 2 with activations
ReLU, PReLU (one shared slope), ReLU, ReLU, identity. Everything is plain
numpy so the gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
import logging
import math
import struct
import zlib
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

LAYER_DIMS = (1152, 512, 128, 32, 8, 2)
ACTIVATIONS = ("relu", "prelu", "relu", "relu", "identity")
PRELU_INIT = 0.25

MAGIC = b"ARMLP1"
FORMAT_VERSION = 1


class DimensionError(ValueError):
    pass


class ModelFileError(ValueError):
    """Base class for unreadable model files."""


class CorruptModelError(ModelFileError):
    pass


class ModelVersionError(ModelFileError):
    pass


@dataclass
class MlpModel:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    prelu_alpha: float = PRELU_INIT
    seed: int = 0

    def __post_init__(self) -> None:
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) != len(ACTIVATIONS) + 1:
            raise DimensionError(f"expected {len(ACTIVATIONS) + 1} layer sizes, got {self.layer_dims}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[i + 1], self.layer_dims[i])
            if w.shape != expected or b.shape != (expected[0],):
                raise DimensionError(f"layer {i + 1}: W{w.shape} b{b.shape}, expected W{expected}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i + 1} has non-finite parameters")
        if not math.isfinite(self.prelu_alpha):
            raise ValueError("prelu_alpha must be finite")
        self.prelu_alpha = float(self.prelu_alpha)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def copy(self) -> MlpModel:
        return MlpModel(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.prelu_alpha,
            self.seed,
        )


@dataclass(frozen=True)
class ModelPrediction:
    label: int
    confidence: float
    probabilities: tuple[float, float]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    learning_rate: float = 0.005
    batch_size: int = 32
    val_fraction: float = 0.1
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)


def _to_float32_grid(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float32).astype(np.float64)


def init_model(seed: int = 0, layer_dims: Sequence[int] = LAYER_DIMS) -> MlpModel:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases, alpha 0.25.

    Parameters are snapped to float32 values so a saved model reloads exactly.
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        w = _to_float32_grid(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        # float32 rounding may step just past the bound; pull those back inside.
        over = np.abs(w) > bound
        if over.any():
            w[over] = np.nextafter(w[over].astype(np.float32), np.float32(0)).astype(np.float64)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return MlpModel(tuple(layer_dims), weights, biases, PRELU_INIT, seed)


def _as_batch(model: MlpModel, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.input_dim:
        raise DimensionError(f"input has dim {arr.shape[-1]}, model expects {model.input_dim}")
    return arr, single


def _forward_trace(model: MlpModel, x: np.ndarray):
    """Return (pre-activations, activations) per layer; activations[0] is the input."""
    pre, act = [], [x]
    h = x
    for w, b, kind in zip(model.weights, model.biases, ACTIVATIONS):
        z = h @ w.T + b
        if kind == "relu":
            h = np.maximum(z, 0.0)
        elif kind == "prelu":
            h = np.where(z >= 0, z, model.prelu_alpha * z)
        else:
            h = z
        pre.append(z)
        act.append(h)
    return pre, act


def forward(model: MlpModel, x) -> np.ndarray:
    """Logits for one vector (shape (2,)) or a batch (shape (n, 2))."""
    batch, single = _as_batch(model, x)
    logits = _forward_trace(model, batch)[1][-1]
    return logits[0] if single else logits


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax of non-finite logits")
    shifted = np.exp(z - z.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def _cross_entropy(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    shift = logits - logits.max(axis=1, keepdims=True)
    log_probs = shift - np.log(np.exp(shift).sum(axis=1, keepdims=True))
    n = len(y)
    loss = -log_probs[np.arange(n), y].mean()
    grad = np.exp(log_probs)
    grad[np.arange(n), y] -= 1.0
    return float(loss), grad / n


def loss_and_gradients(model: MlpModel, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradients.

    Returns ``(loss, dW, db, dalpha)`` with ``dW``/``db`` ordered like the
    model's layers.
    """
    x, _ = _as_batch(model, x)
    y = np.asarray(y, dtype=np.int64)
    pre, act = _forward_trace(model, x)
    loss, delta = _cross_entropy(act[-1], y)

    n_layers = len(model.weights)
    d_w: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    d_b: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    d_alpha = 0.0
    for i in reversed(range(n_layers)):
        kind = ACTIVATIONS[i]
        z = pre[i]
        # delta holds dL/d(activation of layer i); turn it into dL/dz.
        if kind == "relu":
            delta = delta * (z > 0)
        elif kind == "prelu":
            negative = z < 0
            d_alpha = float(np.sum(delta * np.where(negative, z, 0.0)))
            delta = delta * np.where(negative, model.prelu_alpha, 1.0)
        d_w[i] = delta.T @ act[i]
        d_b[i] = delta.sum(axis=0)
        if i:
            delta = delta @ model.weights[i]
    return loss, d_w, d_b, d_alpha


class _Adam:
    def __init__(self, params: list[np.ndarray], config: TrainConfig) -> None:
        self.cfg = config
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        corr1 = 1.0 - c.adam_beta1**self.t
        corr2 = 1.0 - c.adam_beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.adam_beta1
            m += (1.0 - c.adam_beta1) * g
            v *= c.adam_beta2
            v += (1.0 - c.adam_beta2) * g * g
            p -= c.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + c.adam_epsilon)


def train(
    model: MlpModel, x, y, config: TrainConfig | None = None
) -> tuple[MlpModel, TrainHistory]:
    """Minibatch Adam on cross-entropy; the input model is left untouched.

    After one seeded shuffle the last ``val_fraction`` of the examples are
    held out for validation. Training examples are reshuffled every epoch and
    the final partial batch is kept.
    """
    config = config or TrainConfig()
    x, _ = _as_batch(model, x)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise ValueError("no training data")
    if len(y) != len(x):
        raise ValueError(f"{len(x)} vectors but {len(y)} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(x))
    n_val = int(len(x) * config.val_fraction)
    train_idx, val_idx = order[: len(x) - n_val], order[len(x) - n_val :]
    if len(train_idx) == 0:
        raise ValueError("validation split leaves no training data")

    work = model.copy()
    alpha = np.array([work.prelu_alpha])
    params = [*work.weights, *work.biases, alpha]
    adam = _Adam(params, config)
    history = TrainHistory()
    n_layers = len(work.weights)

    for epoch in range(config.epochs):
        shuffled = train_idx[rng.permutation(len(train_idx))]
        total_loss = 0.0
        for start in range(0, len(shuffled), config.batch_size):
            batch = shuffled[start : start + config.batch_size]
            work.prelu_alpha = float(alpha[0])
            loss, d_w, d_b, d_alpha = loss_and_gradients(work, x[batch], y[batch])
            total_loss += loss * len(batch)
            adam.step(params, [*d_w, *d_b, np.array([d_alpha])])
        work.prelu_alpha = float(alpha[0])
        history.train_loss.append(total_loss / len(shuffled))
        if n_val:
            preds = forward(work, x[val_idx]).argmax(axis=1)
            history.val_accuracy.append(float((preds == y[val_idx]).mean()))
        else:
            history.val_accuracy.append(float("nan"))
        logger.info(
            "epoch %d/%d loss=%.4f val_acc=%.4f",
            epoch + 1, config.epochs, history.train_loss[-1], history.val_accuracy[-1],
        )

    final = MlpModel(
        work.layer_dims,
        [_to_float32_grid(w) for w in params[:n_layers]],
        [_to_float32_grid(b) for b in params[n_layers : 2 * n_layers]],
        float(np.float32(alpha[0])),
        model.seed,
    )
    return final, history


def _prediction(probs: np.ndarray) -> ModelPrediction:
    p0, p1 = float(probs[0]), float(probs[1])
    label = 1 if p1 > p0 else 0
    return ModelPrediction(label=label, confidence=max(p0, p1), probabilities=(p0, p1))


def predict(model: MlpModel, x) -> ModelPrediction:
    batch, _ = _as_batch(model, x)
    if len(batch) != 1:
        raise DimensionError("predict takes a single vector; use predict_batch")
    return _prediction(softmax(forward(model, batch))[0])


def predict_batch(model: MlpModel, x) -> list[ModelPrediction]:
    batch, _ = _as_batch(model, x)
    return [_prediction(row) for row in softmax(forward(model, batch))]


def save_model(model: MlpModel, path: str | Path) -> None:
    """Write ``ARMLP1 | u32 header length | JSON header | f32 blob | u32 CRC32``."""
    pieces = []
    for w, b in zip(model.weights, model.biases):
        pieces.extend((w.ravel(), b))
    flat = np.concatenate(pieces)
    blob = flat.astype("<f4").tobytes()
    if not np.array_equal(flat.astype(np.float32).astype(np.float64), flat):
        logger.warning("model parameters are not float32-exact; saved copy loses precision")
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "layer_dims": list(model.layer_dims),
            "activations": list(ACTIVATIONS),
            "prelu_alpha": model.prelu_alpha,
            "seed": model.seed,
        },
        sort_keys=True,
    ).encode("utf-8")
    data = MAGIC + struct.pack("<I", len(header)) + header + blob + struct.pack("<I", zlib.crc32(blob))
    Path(path).write_bytes(data)


def load_model(path: str | Path) -> MlpModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise FileNotFoundError(f"model not found: {path}") from None
    if data[: len(MAGIC)] != MAGIC:
        raise CorruptModelError(f"{path}: bad magic bytes, not a model file")
    offset = len(MAGIC)
    if len(data) < offset + 4:
        raise CorruptModelError(f"{path}: truncated header")
    (header_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    try:
        header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptModelError(f"{path}: unreadable header") from None
    offset += header_len
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelVersionError(
            f"{path}: format version {header.get('format_version')!r}, expected {FORMAT_VERSION}"
        )
    if tuple(header.get("activations", ())) != ACTIVATIONS:
        raise ModelVersionError(f"{path}: unsupported activations {header.get('activations')}")
    dims = [int(d) for d in header["layer_dims"]]
    count = sum(o * i + o for i, o in zip(dims[:-1], dims[1:]))
    blob = data[offset:-4] if len(data) >= offset + 4 else b""
    stored_crc = data[-4:]
    if len(blob) != 4 * count or struct.pack("<I", zlib.crc32(blob)) != stored_crc:
        raise CorruptModelError(f"{path}: checksum mismatch (file truncated or corrupted)")

    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(flat[pos : pos + fan_in * fan_out].reshape(fan_out, fan_in).copy())
        pos += fan_in * fan_out
        biases.append(flat[pos : pos + fan_out].copy())
        pos += fan_out
    return MlpModel(tuple(dims), weights, biases, float(header["prelu_alpha"]), int(header.get("seed", 0)))
