"""Strict JSON harness configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, StrictFloat, StrictInt, ValidationError

from .datagen import DatasetSpec, ForgetTarget
from .errors import ConfigError
from .nncore import Architecture, TrainConfig
from .seedkit import SEED_MAX, derive_seed
from .sweep import SweepPlan, plan_common_practice, plan_recommended
from .unlearners import UnlearnMethod

Number = StrictFloat | StrictInt


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetModel(_Strict):
    d: StrictInt = 8
    C: StrictInt = 4
    M: StrictInt = 5
    n_per_subclass_train: StrictInt = 40
    n_per_subclass_test: StrictInt = 20
    cluster_spread: Number = 0.15
    center_scale: Number = 1.0
    seed: StrictInt = Field(0, ge=0, le=SEED_MAX)


class TargetModel(_Strict):
    kind: Literal["full_class", "sub_class"]
    id: StrictInt


class ArchModel(_Strict):
    hidden_dims: list[StrictInt] = [32, 32]


class TrainModel(_Strict):
    epochs: StrictInt = 60
    batch_size: StrictInt = 32
    learning_rate: Number = 0.1
    momentum: Number = 0.9
    l2: Number = 5e-4


class MethodModel(_Strict):
    kind: str
    hyper: dict[str, Number | str] = {}


class CommonPracticeModel(_Strict):
    J: StrictInt


class RecommendedModel(_Strict):
    I: StrictInt
    J: StrictInt


class ProtocolModel(_Strict):
    common_practice: Optional[CommonPracticeModel] = None
    recommended: Optional[RecommendedModel] = None


class HarnessModel(_Strict):
    dataset: DatasetModel = DatasetModel()
    targets: list[TargetModel]
    label_mode: Literal["superclass", "subclass"] = "superclass"
    arch: ArchModel = ArchModel()
    train: TrainModel = TrainModel()
    methods: list[MethodModel]
    protocol: ProtocolModel
    root_seed: StrictInt = Field(0, ge=0, le=SEED_MAX)


@dataclass(frozen=True)
class HarnessConfig:
    dataset_spec: DatasetSpec
    dataset_seed: int
    targets: tuple[ForgetTarget, ...]
    label_mode: str
    arch: Architecture
    train_config: TrainConfig
    methods: tuple[UnlearnMethod, ...]
    common_practice_J: int | None
    recommended_IJ: tuple[int, int] | None
    root_seed: int
    raw: dict

    def plans(self) -> list[SweepPlan]:
        """One plan per (target, protocol). Each protocol draws seeds from its own child root."""
        out = []
        common = dict(methods=self.methods, arch=self.arch, train_config=self.train_config,
                      dataset_spec=self.dataset_spec, dataset_seed=self.dataset_seed,
                      label_mode=self.label_mode)
        for t in self.targets:
            if self.common_practice_J is not None:
                out.append(plan_common_practice(self.common_practice_J,
                                                derive_seed(self.root_seed, "common_practice"),
                                                target=t, **common))
            if self.recommended_IJ is not None:
                I, J = self.recommended_IJ
                out.append(plan_recommended(I, J, derive_seed(self.root_seed, "recommended"),
                                            target=t, **common))
        return out


def _loc(loc) -> str:
    return ".".join(str(p) if not isinstance(p, int) else f"[{p}]" for p in loc).replace(".[", "[")


def _within(prefix: str, fn):
    try:
        return fn()
    except ConfigError as exc:
        path = f"{prefix}.{exc.path}" if exc.path else prefix
        raise ConfigError(exc.message, path) from exc


def parse_config(doc: dict) -> HarnessConfig:
    try:
        m = HarnessModel.model_validate(doc)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], _loc(first["loc"]) or "<root>") from exc

    ds = m.dataset
    spec = DatasetSpec(ds.d, ds.C, ds.M, ds.n_per_subclass_train, ds.n_per_subclass_test,
                       float(ds.cluster_spread), float(ds.center_scale))
    _within("dataset", spec.validate)
    if not m.targets:
        raise ConfigError("at least one target required", "targets")
    targets = tuple(ForgetTarget(t.kind, t.id) for t in m.targets)
    for k, t in enumerate(targets):
        _within(f"targets[{k}]", lambda t=t: t.validate(spec))
    n_classes = spec.C if m.label_mode == "superclass" else spec.n_subclasses
    arch = _within("arch", lambda: Architecture(spec.d, tuple(m.arch.hidden_dims), n_classes))
    tc = m.train
    train_config = _within("train", lambda: TrainConfig(tc.epochs, tc.batch_size, float(tc.learning_rate),
                                                        float(tc.momentum), float(tc.l2)))
    if not m.methods:
        raise ConfigError("at least one method required", "methods")
    methods = tuple(_within(f"methods[{k}]", lambda mm=mm: UnlearnMethod(mm.kind, dict(mm.hyper)))
                    for k, mm in enumerate(m.methods))

    p = m.protocol
    if p.common_practice is None and p.recommended is None:
        raise ConfigError("give common_practice, recommended, or both", "protocol")
    cp_j = rec = None
    if p.common_practice is not None:
        cp_j = p.common_practice.J
        if cp_j < 1:
            raise ConfigError(f"J >= 1 required, got {cp_j}", "protocol.common_practice.J")
    if p.recommended is not None:
        I, J = p.recommended.I, p.recommended.J
        if I < 1:
            raise ConfigError(f"I >= 1 required, got {I}", "protocol.recommended.I")
        if I < 2:
            raise ConfigError(f"the recommended protocol needs I >= 2 training seeds, got {I}",
                              "protocol.recommended.I")
        if J < 1:
            raise ConfigError(f"J >= 1 required, got {J}", "protocol.recommended.J")
        rec = (I, J)
    return HarnessConfig(spec, ds.seed, targets, m.label_mode, arch, train_config, methods,
                         cp_j, rec, m.root_seed, doc)


def load_config(path) -> HarnessConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", str(path))
    return parse_config(doc)
