"""Synthetic superclass/subclass blobs and retain/forget splitting."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .seedkit import check_seed, derive_stream

LABEL_MODES = ("superclass", "subclass")
TARGET_KINDS = ("full_class", "sub_class")


@dataclass(frozen=True)
class DatasetSpec:
    d: int = 8
    C: int = 4
    M: int = 5
    n_per_subclass_train: int = 40
    n_per_subclass_test: int = 20
    cluster_spread: float = 0.15
    center_scale: float = 1.0

    def validate(self) -> None:
        for name in ("d", "C", "M", "n_per_subclass_train", "n_per_subclass_test"):
            if getattr(self, name) < 1:
                raise ConfigError(f"must be >= 1, got {getattr(self, name)}", name)
        if self.C * self.M < 2:
            raise ConfigError("C*M must be >= 2", "C")
        for name in ("cluster_spread", "center_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"must be > 0, got {getattr(self, name)}", name)

    @property
    def n_subclasses(self) -> int:
        return self.C * self.M


@dataclass(frozen=True, eq=False)
class Dataset:
    """Row i is one labelled example: features x[i], superclass[i], subclass[i]."""

    x: np.ndarray
    superclass: np.ndarray
    subclass: np.ndarray

    def __post_init__(self):
        for arr in (self.x, self.superclass, self.subclass):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.superclass)

    def labels(self, mode: str) -> np.ndarray:
        if mode == "superclass":
            return self.superclass
        if mode == "subclass":
            return self.subclass
        raise ConfigError(f"unknown label mode {mode!r}", "label_mode")

    def take(self, index) -> "Dataset":
        return Dataset(self.x[index], self.superclass[index], self.subclass[index])

    @staticmethod
    def concat(*parts: "Dataset") -> "Dataset":
        return Dataset(
            np.concatenate([p.x for p in parts]),
            np.concatenate([p.superclass for p in parts]),
            np.concatenate([p.subclass for p in parts]),
        )

    def same_as(self, other: "Dataset") -> bool:
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.superclass, other.superclass)
            and np.array_equal(self.subclass, other.subclass)
        )


@dataclass(frozen=True)
class ForgetTarget:
    kind: str
    id: int

    def validate(self, spec: DatasetSpec) -> None:
        if self.kind not in TARGET_KINDS:
            raise ConfigError(f"unknown target kind {self.kind!r}", "kind")
        limit = spec.C if self.kind == "full_class" else spec.n_subclasses
        if not 0 <= self.id < limit:
            raise ConfigError(f"{self.kind} id must be in [0, {limit}), got {self.id}", "id")

    def matches(self, data: Dataset) -> np.ndarray:
        col = data.superclass if self.kind == "full_class" else data.subclass
        return col == self.id

    @property
    def slug(self) -> str:
        return f"{self.kind}-{self.id}"


@dataclass(frozen=True, eq=False)
class ForgetSplit:
    retain_train: Dataset
    forget_train: Dataset
    retain_test: Dataset
    forget_test: Dataset
    label_mode: str
    target: ForgetTarget

    @property
    def full_train(self) -> Dataset:
        return Dataset.concat(self.retain_train, self.forget_train)


def generate(spec: DatasetSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Draw (train, test). Rows are grouped by subclass in ascending id order."""
    spec.validate()
    seed = check_seed(seed)
    k = spec.n_subclasses
    centers = spec.center_scale * derive_stream(seed, "centers").gaussian(k * spec.d)
    centers = centers.reshape(k, spec.d)

    def draw(label: str, per: int) -> Dataset:
        noise = derive_stream(seed, label).gaussian(k * per * spec.d).reshape(k, per, spec.d)
        x = (centers[:, None, :] + spec.cluster_spread * noise).reshape(k * per, spec.d)
        sub = np.repeat(np.arange(k), per)
        return Dataset(x, sub // spec.M, sub)

    return draw("train", spec.n_per_subclass_train), draw("test", spec.n_per_subclass_test)


def split_forget(train: Dataset, test: Dataset, target: ForgetTarget,
                 label_mode: str = "superclass", spec: DatasetSpec | None = None) -> ForgetSplit:
    if label_mode not in LABEL_MODES:
        raise ConfigError(f"unknown label mode {label_mode!r}", "label_mode")
    if spec is not None:
        target.validate(spec)
    else:
        if target.kind not in TARGET_KINDS:
            raise ConfigError(f"unknown target kind {target.kind!r}", "kind")
        col = train.superclass if target.kind == "full_class" else train.subclass
        if not 0 <= target.id <= int(col.max()):
            raise ConfigError(f"target id {target.id} out of range", "id")
    f_tr, f_te = target.matches(train), target.matches(test)
    return ForgetSplit(
        retain_train=train.take(~f_tr),
        forget_train=train.take(f_tr),
        retain_test=test.take(~f_te),
        forget_test=test.take(f_te),
        label_mode=label_mode,
        target=target,
    )


def dump_csv(data: Dataset, path) -> None:
    d = data.x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(d)] + ["superclass", "subclass"])
        for row, sup, sub in zip(data.x.tolist(), data.superclass.tolist(), data.subclass.tolist()):
            w.writerow([repr(v) for v in row] + [sup, sub])


def load_csv(path) -> Dataset:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[-2:] != ["superclass", "subclass"]:
        raise ConfigError("dataset CSV must end with superclass,subclass columns", str(path))
    d = len(header) - 2
    x = np.array([[float(v) for v in r[:d]] for r in body], dtype=np.float64).reshape(len(body), d)
    sup = np.array([int(r[d]) for r in body], dtype=np.int64)
    sub = np.array([int(r[d + 1]) for r in body], dtype=np.int64)
    return Dataset(x, sup, sub)
