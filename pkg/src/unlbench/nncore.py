"""Small ReLU multilayer perceptron with exact backprop and seeded momentum SGD.

Parameters live in one flat float64 vector in canonical order
(W1, b1, W2, b2, ...), with each W stored row-major as (fan_in, fan_out).
Layer views are reshaped slices of that vector, so optimizer and
unlearning arithmetic is plain vector arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .errors import ConfigError, UndefinedMetricError
from .seedkit import RngStream, check_seed, derive_stream


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_dims: tuple[int, ...]
    n_classes: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ConfigError(f"must be >= 1, got {self.input_dim}", "input_dim")
        if self.n_classes < 2:
            raise ConfigError(f"must be >= 2, got {self.n_classes}", "n_classes")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError("every hidden dim must be >= 1", "hidden_dims")
        if self.activation != "relu":
            raise ConfigError("only relu is supported", "activation")

    @property
    def shapes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.n_classes]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.shapes)

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden_dims": list(self.hidden_dims),
                "n_classes": self.n_classes, "activation": self.activation}


def _offsets(arch: Architecture):
    out, pos = [], 0
    for fan_in, fan_out in arch.shapes:
        w = slice(pos, pos + fan_in * fan_out)
        pos = w.stop
        b = slice(pos, pos + fan_out)
        pos = b.stop
        out.append((w, (fan_in, fan_out), b))
    return out


@dataclass(frozen=True, eq=False)
class ModelParams:
    arch: Architecture
    flat: np.ndarray
    _slices: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        flat = np.array(self.flat, dtype=np.float64)
        if flat.shape != (self.arch.n_params,):
            raise ConfigError(f"expected {self.arch.n_params} parameters, got {flat.shape}")
        if not np.all(np.isfinite(flat)):
            raise ValueError("parameters must be finite")
        flat.setflags(write=False)
        object.__setattr__(self, "flat", flat)
        object.__setattr__(self, "_slices", _offsets(self.arch))

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.flat[w].reshape(shape), self.flat[b]) for w, shape, b in self._slices]

    def weight_mask(self) -> np.ndarray:
        mask = np.zeros(self.arch.n_params, dtype=bool)
        for w, _, _ in self._slices:
            mask[w] = True
        return mask

    def replace(self, flat: np.ndarray) -> "ModelParams":
        return ModelParams(self.arch, flat)

    def identical(self, other: "ModelParams") -> bool:
        """Bitwise equality (distinguishes -0.0 from 0.0)."""
        return self.arch == other.arch and self.flat.tobytes() == other.flat.tobytes()


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 0.1
    momentum: float = 0.9
    l2: float = 5e-4

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"must be >= 0, got {self.epochs}", "epochs")
        if self.batch_size < 1:
            raise ConfigError(f"must be >= 1, got {self.batch_size}", "batch_size")
        if not self.learning_rate > 0:
            raise ConfigError(f"must be > 0, got {self.learning_rate}", "learning_rate")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"must be in [0, 1), got {self.momentum}", "momentum")
        if self.l2 < 0:
            raise ConfigError(f"must be >= 0, got {self.l2}", "l2")


def init_params(arch: Architecture, stream: RngStream) -> ModelParams:
    """He-normal weights, zero biases."""
    flat = np.zeros(arch.n_params)
    for w, (fan_in, fan_out), _ in _offsets(arch):
        flat[w] = np.sqrt(2.0 / fan_in) * stream.gaussian(fan_in * fan_out)
    return ModelParams(arch, flat)


def _check_features(params: ModelParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.arch.input_dim:
        raise ValueError(f"features must have trailing dimension {params.arch.input_dim}, got shape {x.shape}")
    return x


def forward_batch(params: ModelParams, x: np.ndarray):
    """Logits for each row of x, plus the activations backprop needs."""
    x = _check_features(params, x)
    layers = params.layers()
    acts = [x]
    h = x
    for k, (w, b) in enumerate(layers):
        z = h @ w + b
        h = z if k == len(layers) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return h, acts


def forward(params: ModelParams, features) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        return forward_batch(params, features[None, :])[0][0]
    return forward_batch(params, features)[0]


def backward(params: ModelParams, acts: list, dlogits: np.ndarray, want_input: bool = False):
    """Gradient of sum_n <dlogits[n], logits[n]> w.r.t. the flat parameters.

    With want_input the gradient w.r.t. the input rows is returned as well.
    """
    grad = np.empty(params.arch.n_params)
    layers = params.layers()
    delta = dlogits
    dx = None
    for k in range(len(layers) - 1, -1, -1):
        w_sl, shape, b_sl = params._slices[k]
        a_in = acts[k]
        grad[w_sl] = (a_in.T @ delta).ravel()
        grad[b_sl] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ layers[k][0].T) * (a_in > 0)
        elif want_input:
            dx = delta @ layers[0][0].T
    return (grad, dx) if want_input else grad


def mean_sq_example_grad(params: ModelParams, acts: list, dlogits: np.ndarray) -> np.ndarray:
    """Mean over rows of the elementwise-squared per-example gradient.

    dlogits[n] is the gradient of example n's own objective w.r.t. its logits.
    A per-example weight gradient is outer(a_in, delta), so its square is
    outer(a_in**2, delta**2) and the batch mean is a single matrix product.
    """
    n = len(dlogits)
    out = np.empty(params.arch.n_params)
    layers = params.layers()
    delta = dlogits
    for k in range(len(layers) - 1, -1, -1):
        w_sl, _, b_sl = params._slices[k]
        a_in = acts[k]
        out[w_sl] = ((a_in**2).T @ (delta**2)).ravel() / n
        out[b_sl] = (delta**2).sum(axis=0) / n
        if k > 0:
            delta = (delta @ layers[k][0].T) * (a_in > 0)
    return out


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy_grad(params: ModelParams, x: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean softmax cross-entropy plus (l2/2)*||weights||^2, and its gradient."""
    n = len(y)
    if n == 0:
        raise ValueError("empty batch")
    logits, acts = forward_batch(params, x)
    logp = log_softmax(logits)
    loss = -logp[np.arange(n), y].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    grad = backward(params, acts, dlogits / n)
    if l2:
        mask = params.weight_mask()
        w = params.flat[mask]
        loss += 0.5 * l2 * float(w @ w)
        grad[mask] += l2 * w
    return float(loss), grad


def loss_and_grad(params: ModelParams, batch: Dataset, label_mode: str, l2: float = 0.0):
    return cross_entropy_grad(params, batch.x, batch.labels(label_mode), l2)


def sgd(params: ModelParams, n: int, batch_grad, epochs: int, batch_size: int,
        lr: float, momentum: float, order: RngStream, on_epoch=None) -> ModelParams:
    """Momentum SGD over n examples; batch_grad(index_array, params) -> flat grad.

    Each epoch visits examples in a fresh Fisher-Yates order drawn from
    `order`; the trailing partial batch is kept.
    """
    flat = params.flat.copy()
    velocity = np.zeros_like(flat)
    arch = params.arch
    for epoch in range(epochs):
        if on_epoch is not None:
            on_epoch(epoch)
        perm = order.permutation(n)
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            g = batch_grad(idx, ModelParams(arch, flat))
            velocity *= momentum
            velocity += g
            flat -= lr * velocity
    return ModelParams(arch, flat)


def train(arch: Architecture, train_set: Dataset, config: TrainConfig, seed: int,
          label_mode: str = "superclass") -> ModelParams:
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    seed = check_seed(seed)
    params = init_params(arch, derive_stream(seed, "init"))
    x, y = train_set.x, train_set.labels(label_mode)

    def batch_grad(idx, p):
        return cross_entropy_grad(p, x[idx], y[idx], config.l2)[1]

    return sgd(params, len(train_set), batch_grad, config.epochs, config.batch_size,
               config.learning_rate, config.momentum, derive_stream(seed, "order"))


def predict(params: ModelParams, x: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximal index, i.e. ties go to the lowest class id
    return np.argmax(forward_batch(params, x)[0], axis=1)


def accuracy(params: ModelParams, examples: Dataset, label_mode: str = "superclass") -> float:
    if len(examples) == 0:
        raise UndefinedMetricError("accuracy is undefined on an empty set")
    return float(np.mean(predict(params, examples.x) == examples.labels(label_mode)))


def save_checkpoint(params: ModelParams, path) -> None:
    """JSON architecture header line, then raw little-endian float64 parameters."""
    header = json.dumps({"format": "unlbench-ckpt-1", "arch": params.arch.to_dict(),
                         "n_params": params.arch.n_params}, sort_keys=True)
    with open(Path(path), "wb") as fh:
        fh.write(header.encode("ascii") + b"\n")
        fh.write(params.flat.astype("<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(Path(path), "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        body = fh.read()
    if header.get("format") != "unlbench-ckpt-1":
        raise ValueError(f"{path}: not an unlbench checkpoint")
    a = header["arch"]
    arch = Architecture(a["input_dim"], tuple(a["hidden_dims"]), a["n_classes"], a["activation"])
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return ModelParams(arch, flat)
