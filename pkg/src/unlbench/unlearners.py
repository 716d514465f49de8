"""Unlearning methods: Retrain, Random-Labels, UNSIR, Bad-Teacher, SSD, LFSSD.

Each method maps (trained model, forget split, unlearning seed) to a new
model. SSD and LFSSD consume no randomness, so the seed is ignored.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset, ForgetSplit
from .errors import ConfigError, UndefinedMetricError, UnsupportedConfiguration
from .nncore import (
    Architecture,
    ModelParams,
    TrainConfig,
    backward,
    cross_entropy_grad,
    forward_batch,
    init_params,
    log_softmax,
    mean_sq_example_grad,
    sgd,
    train,
)
from .seedkit import check_seed, derive_stream

DEFAULT_HYPER = {
    "retrain": {},
    "random_labels": {"epochs_u": 5, "lr_u": 0.02, "batch": 32},
    "unsir": {"noise_steps": 20, "noise_lr": 0.1, "n_noise": 64,
              "impair_epochs": 1, "repair_epochs": 1, "lr_u": 0.02},
    "bad_teacher": {"epochs_u": 5, "lr_u": 0.02, "batch": 32},
    "ssd": {"alpha": 10.0, "lam": 1.0, "baseline": "full"},
    "lfssd": {"alpha": 10.0, "lam": 1.0, "baseline": "full"},
}
METHOD_KINDS = tuple(DEFAULT_HYPER)
DETERMINISTIC_KINDS = frozenset({"ssd", "lfssd"})
_INT_HYPER = {"epochs_u", "batch", "noise_steps", "n_noise", "impair_epochs", "repair_epochs"}


@dataclass(frozen=True)
class UnlearnMethod:
    kind: str
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DEFAULT_HYPER:
            raise ConfigError(f"unknown unlearning method {self.kind!r}; expected one of {list(METHOD_KINDS)}", "kind")
        defaults = DEFAULT_HYPER[self.kind]
        unknown = sorted(set(self.hyper) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown hyperparameter(s) {unknown} for {self.kind}", "hyper")
        merged = {**defaults, **self.hyper}
        for key, value in merged.items():
            if key == "baseline":
                if value not in ("full", "retain"):
                    raise ConfigError("must be 'full' or 'retain'", f"hyper.{key}")
            elif key in _INT_HYPER:
                if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                    raise ConfigError(f"must be a nonnegative integer, got {value!r}", f"hyper.{key}")
                if key in ("batch", "n_noise") and value < 1:
                    raise ConfigError("must be >= 1", f"hyper.{key}")
            else:
                if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                    raise ConfigError(f"must be a positive number, got {value!r}", f"hyper.{key}")
                merged[key] = float(value)
        object.__setattr__(self, "hyper", merged)

    def __hash__(self):
        return hash((self.kind, self.digest))

    @property
    def deterministic(self) -> bool:
        return self.kind in DETERMINISTIC_KINDS

    @property
    def digest(self) -> str:
        blob = json.dumps({"kind": self.kind, "hyper": self.hyper}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class ImportanceDiagonal:
    values: np.ndarray
    source: str


def _require(data: Dataset, what: str) -> None:
    if len(data) == 0:
        raise UndefinedMetricError(f"{what} is empty")


def retrain(split: ForgetSplit, arch: Architecture, train_config: TrainConfig, seed: int) -> ModelParams:
    _require(split.retain_train, "retain_train")
    return train(arch, split.retain_train, train_config, seed, split.label_mode)


def random_labels(trained: ModelParams, split: ForgetSplit, arch: Architecture, seed: int,
                  hyper: dict, train_config: TrainConfig) -> ModelParams:
    """Fine-tune on retain data plus forget data whose labels are redrawn every epoch."""
    _require(split.forget_train, "forget_train")
    n_classes = arch.n_classes
    if n_classes < 2:
        raise ConfigError("random labels need at least 2 classes")
    data = Dataset.concat(split.forget_train, split.retain_train)
    n_forget = len(split.forget_train)
    true_forget = split.forget_train.labels(split.label_mode)
    y = data.labels(split.label_mode).copy()
    labels = derive_stream(seed, "labels")

    def relabel(_epoch):
        # uniform over the n_classes - 1 wrong labels
        draw = labels.integers_below(np.full(n_forget, n_classes - 1))
        y[:n_forget] = draw + (draw >= true_forget)

    def batch_grad(idx, p):
        return cross_entropy_grad(p, data.x[idx], y[idx], train_config.l2)[1]

    return sgd(trained, len(data), batch_grad, hyper["epochs_u"], hyper["batch"], hyper["lr_u"],
               train_config.momentum, derive_stream(seed, "order"), on_epoch=relabel)


def error_maximizing_noise(trained: ModelParams, forget_label: int, seed: int, n_noise: int,
                           steps: int, lr: float) -> tuple[np.ndarray, np.ndarray]:
    """(initial, learned) noise inputs; learned ascends the trained model's loss on forget_label."""
    d = trained.arch.input_dim
    start = derive_stream(seed, "noise").gaussian(n_noise * d).reshape(n_noise, d)
    noise = start.copy()
    y = np.full(n_noise, forget_label)
    for _ in range(steps):
        logits, acts = forward_batch(trained, noise)
        dlogits = np.exp(log_softmax(logits))
        dlogits[np.arange(n_noise), y] -= 1.0
        _, dx = backward(trained, acts, dlogits, want_input=True)
        noise = noise + lr * dx
    return start, noise


def unsir(trained: ModelParams, split: ForgetSplit, arch: Architecture, seed: int,
          hyper: dict, train_config: TrainConfig) -> ModelParams:
    """Impair on retain data plus error-maximizing noise, then repair on retain data."""
    if split.target.kind != "full_class":
        raise UnsupportedConfiguration("UNSIR is only defined for full_class targets", "target.kind")
    if split.label_mode != "superclass":
        raise UnsupportedConfiguration("UNSIR needs the forgotten class as a label (superclass mode)", "label_mode")
    forget_label = split.target.id
    _, noise = error_maximizing_noise(trained, forget_label, seed, hyper["n_noise"],
                                      hyper["noise_steps"], hyper["noise_lr"])
    retain = split.retain_train
    x = np.concatenate([retain.x, noise])
    y = np.concatenate([retain.labels(split.label_mode), np.full(len(noise), forget_label)])

    def grad_on(xs, ys):
        return lambda idx, p: cross_entropy_grad(p, xs[idx], ys[idx], train_config.l2)[1]

    params = sgd(trained, len(y), grad_on(x, y), hyper["impair_epochs"], train_config.batch_size,
                 hyper["lr_u"], train_config.momentum, derive_stream(seed, "impair"))
    if len(retain) == 0:
        return params
    return sgd(params, len(retain), grad_on(retain.x, retain.labels(split.label_mode)),
               hyper["repair_epochs"], train_config.batch_size, hyper["lr_u"],
               train_config.momentum, derive_stream(seed, "repair"))


def kl_student_teacher_grad(student_logits: np.ndarray, teacher_logp: np.ndarray):
    """Per-row KL(student || teacher) and its gradient w.r.t. the student logits."""
    logs = log_softmax(student_logits)
    s = np.exp(logs)
    kl = (s * (logs - teacher_logp)).sum(axis=1)
    grad = s * ((logs - teacher_logp) - kl[:, None])
    return kl, grad


def bad_teacher(trained: ModelParams, split: ForgetSplit, arch: Architecture, seed: int,
                hyper: dict, train_config: TrainConfig) -> ModelParams:
    """Distil from the trained model on retain data and a random model on forget data."""
    _require(split.forget_train, "forget_train")
    incompetent = init_params(arch, derive_stream(seed, "bad"))
    data = Dataset.concat(split.forget_train, split.retain_train)
    n_forget = len(split.forget_train)
    teacher_logp = np.concatenate([
        log_softmax(forward_batch(incompetent, split.forget_train.x)[0]),
        log_softmax(forward_batch(trained, split.retain_train.x)[0])
        if len(split.retain_train) else np.empty((0, arch.n_classes)),
    ])
    assert len(teacher_logp) == len(data) >= n_forget

    def batch_grad(idx, p):
        logits, acts = forward_batch(p, data.x[idx])
        _, g = kl_student_teacher_grad(logits, teacher_logp[idx])
        return backward(p, acts, g / len(idx))

    return sgd(trained, len(data), batch_grad, hyper["epochs_u"], hyper["batch"], hyper["lr_u"],
               train_config.momentum, derive_stream(seed, "order"))


def importance_diagonal(params: ModelParams, examples: Dataset, label_mode: str,
                        source: str) -> ImportanceDiagonal:
    """Mean squared per-example gradient: of cross-entropy (fisher_loss) or of 0.5*||logits||^2 (output_norm)."""
    if len(examples) == 0:
        raise UndefinedMetricError("importance is undefined on an empty set")
    logits, acts = forward_batch(params, examples.x)
    if source == "fisher_loss":
        y = examples.labels(label_mode)
        dlogits = np.exp(log_softmax(logits))
        dlogits[np.arange(len(y)), y] -= 1.0
    elif source == "output_norm":
        dlogits = logits
    else:
        raise ConfigError(f"unknown importance source {source!r}", "source")
    return ImportanceDiagonal(mean_sq_example_grad(params, acts, dlogits), source)


def dampen(flat: np.ndarray, d_full: np.ndarray, d_forget: np.ndarray, alpha: float, lam: float) -> np.ndarray:
    """Scale entries with d_forget > alpha*d_full by min(lam*d_full/d_forget, 1)."""
    out = np.array(flat, dtype=np.float64, copy=True)
    selected = d_forget > alpha * d_full
    beta = np.minimum(lam * d_full[selected] / d_forget[selected], 1.0)
    out[selected] *= beta
    return out


def _dampening(trained: ModelParams, split: ForgetSplit, hyper: dict, source: str) -> ModelParams:
    _require(split.forget_train, "forget_train")
    base = split.full_train if hyper["baseline"] == "full" else split.retain_train
    d_full = importance_diagonal(trained, base, split.label_mode, source).values
    d_forget = importance_diagonal(trained, split.forget_train, split.label_mode, source).values
    return trained.replace(dampen(trained.flat, d_full, d_forget, hyper["alpha"], hyper["lam"]))


def ssd(trained: ModelParams, split: ForgetSplit, arch: Architecture, hyper: dict) -> ModelParams:
    return _dampening(trained, split, hyper, "fisher_loss")


def lfssd(trained: ModelParams, split: ForgetSplit, arch: Architecture, hyper: dict) -> ModelParams:
    return _dampening(trained, split, hyper, "output_norm")


def unlearn(method: UnlearnMethod, trained: ModelParams, split: ForgetSplit, arch: Architecture,
            train_config: TrainConfig, seed: int) -> ModelParams:
    if not isinstance(method, UnlearnMethod):
        raise ConfigError(f"expected an UnlearnMethod, got {type(method).__name__}")
    if trained.arch != arch:
        raise ConfigError("trained model does not match the architecture")
    seed = check_seed(seed)
    kind, hyper = method.kind, method.hyper
    if kind == "retrain":
        return retrain(split, arch, train_config, seed)
    if kind == "random_labels":
        return random_labels(trained, split, arch, seed, hyper, train_config)
    if kind == "unsir":
        return unsir(trained, split, arch, seed, hyper, train_config)
    if kind == "bad_teacher":
        return bad_teacher(trained, split, arch, seed, hyper, train_config)
    if kind == "ssd":
        return ssd(trained, split, arch, hyper)
    if kind == "lfssd":
        return lfssd(trained, split, arch, hyper)
    raise ConfigError(f"unknown unlearning method {kind!r}")
