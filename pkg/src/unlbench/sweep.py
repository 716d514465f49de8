"""Train I models, unlearn each J times per method, and record the metric grid."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datagen import DatasetSpec, ForgetSplit, ForgetTarget, generate, split_forget
from .errors import CellFailure, ConfigError
from .nncore import (
    Architecture,
    ModelParams,
    TrainConfig,
    accuracy,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .seedkit import check_seed, derive_seed
from .unlearners import UnlearnMethod, unlearn

log = logging.getLogger(__name__)

METRICS = ("retain_train_acc", "forget_train_acc", "retain_test_acc", "forget_test_acc")
CSV_COLUMNS = ("method", "train_seed", "unlearn_seed", "target_kind", "target_id",
               *METRICS, "wall_ms", "hyper_digest")
# trailing column so both protocols can share one results file
PROTOCOL_COLUMN = "protocol"
PROTOCOLS = ("common_practice", "recommended")


@dataclass(frozen=True)
class SweepPlan:
    protocol: str
    I: int
    J: int
    root: int
    training_seeds: tuple[int, ...]
    unlearning_seeds: tuple[tuple[int, ...], ...]
    methods: tuple[UnlearnMethod, ...]
    target: ForgetTarget
    arch: Architecture
    train_config: TrainConfig
    dataset_spec: DatasetSpec
    dataset_seed: int
    label_mode: str = "superclass"

    def validate(self) -> None:
        if self.I < 1:
            raise ConfigError(f"I >= 1 required (number of training seeds), got {self.I}", "I")
        if self.J < 1:
            raise ConfigError(f"J >= 1 required (unlearning seeds per training seed), got {self.J}", "J")
        if len(self.training_seeds) != self.I or len(set(self.training_seeds)) != self.I:
            raise ConfigError("need I pairwise distinct training seeds", "training_seeds")
        if len(self.unlearning_seeds) != self.I:
            raise ConfigError("need one row of unlearning seeds per training seed", "unlearning_seeds")
        for i, row in enumerate(self.unlearning_seeds):
            if len(row) != self.J or len(set(row)) != self.J:
                raise ConfigError(f"row {i} needs J pairwise distinct unlearning seeds", "unlearning_seeds")
        if not self.methods:
            raise ConfigError("at least one method required", "methods")
        self.dataset_spec.validate()
        self.target.validate(self.dataset_spec)
        if self.arch.input_dim != self.dataset_spec.d:
            raise ConfigError("arch input_dim must equal dataset d", "arch.input_dim")
        n_labels = self.dataset_spec.C if self.label_mode == "superclass" else self.dataset_spec.n_subclasses
        if self.arch.n_classes != n_labels:
            raise ConfigError(f"arch n_classes must be {n_labels} for label mode {self.label_mode}", "arch.n_classes")

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "I": self.I,
            "J": self.J,
            "root_seed": self.root,
            "training_seeds": list(self.training_seeds),
            "unlearning_seeds": [list(r) for r in self.unlearning_seeds],
            "methods": [{"kind": m.kind, "hyper": m.hyper, "hyper_digest": m.digest} for m in self.methods],
            "target": asdict(self.target),
            "label_mode": self.label_mode,
            "arch": self.arch.to_dict(),
            "train": asdict(self.train_config),
            "dataset": asdict(self.dataset_spec),
            "dataset_seed": self.dataset_seed,
        }


def _derived_plan(protocol, I, J, root, **kw) -> SweepPlan:
    root = check_seed(root)
    plan = SweepPlan(
        protocol=protocol, I=I, J=J, root=root,
        training_seeds=tuple(derive_seed(root, f"train/{i}") for i in range(max(I, 0))),
        unlearning_seeds=tuple(tuple(derive_seed(root, f"unlearn/{i}/{j}") for j in range(max(J, 0)))
                               for i in range(max(I, 0))),
        methods=tuple(kw.pop("methods")),
        **kw,
    )
    plan.validate()
    return plan


def plan_common_practice(J: int, root: int, *, methods, target, arch, train_config,
                         dataset_spec, dataset_seed, label_mode="superclass") -> SweepPlan:
    """One training seed, J unlearning seeds."""
    if J < 1:
        raise ConfigError(f"J >= 1 required, got {J}", "J")
    return _derived_plan("common_practice", 1, J, root, methods=methods, target=target, arch=arch,
                         train_config=train_config, dataset_spec=dataset_spec,
                         dataset_seed=dataset_seed, label_mode=label_mode)


def plan_recommended(I: int, J: int, root: int, *, methods, target, arch, train_config,
                     dataset_spec, dataset_seed, label_mode="superclass") -> SweepPlan:
    """I >= 2 training seeds, J unlearning seeds each."""
    if I < 1:
        raise ConfigError(f"I >= 1 required, got {I}", "I")
    if I < 2:
        raise ConfigError(f"the recommended protocol needs I >= 2 training seeds, got {I}", "I")
    if J < 1:
        raise ConfigError(f"J >= 1 required, got {J}", "J")
    return _derived_plan("recommended", I, J, root, methods=methods, target=target, arch=arch,
                         train_config=train_config, dataset_spec=dataset_spec,
                         dataset_seed=dataset_seed, label_mode=label_mode)


@dataclass(frozen=True)
class MetricRecord:
    protocol: str
    method: str
    hyper_digest: str
    method_index: int
    i: int
    j: int
    train_seed: int
    unlearn_seed: int
    target: ForgetTarget
    retain_train_acc: float
    forget_train_acc: float
    retain_test_acc: float
    forget_test_acc: float
    wall_ms: float

    def __post_init__(self):
        for name in METRICS:
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [0, 1]")

    def csv_row(self) -> list:
        return [self.method, self.train_seed, self.unlearn_seed, self.target.kind, self.target.id,
                *(repr(getattr(self, m)) for m in METRICS), f"{self.wall_ms:.3f}",
                self.hyper_digest, self.protocol]


@dataclass
class SweepGrid:
    plan: SweepPlan
    records: dict = field(default_factory=dict)  # (method_index, i, j) -> MetricRecord
    n_trainings: int = 0
    trained: dict = field(default_factory=dict)  # i -> ModelParams

    def complete(self) -> bool:
        p = self.plan
        return len(self.records) == len(p.methods) * p.I * p.J

    def ordered(self) -> list[MetricRecord]:
        return [self.records[k] for k in sorted(self.records)]


def _method_index(plan: SweepPlan, method) -> int:
    if isinstance(method, int):
        return method
    if isinstance(method, UnlearnMethod):
        return plan.methods.index(method)
    hits = [k for k, m in enumerate(plan.methods) if m.kind == method]
    if len(hits) != 1:
        raise KeyError(f"method {method!r} matches {len(hits)} plan entries")
    return hits[0]


def grid_metric(grid: SweepGrid, method, metric_name: str) -> np.ndarray:
    if metric_name not in METRICS:
        raise KeyError(f"unknown metric {metric_name!r}; expected one of {METRICS}")
    k = _method_index(grid.plan, method)
    p = grid.plan
    return np.array([[getattr(grid.records[(k, i, j)], metric_name) for j in range(p.J)]
                     for i in range(p.I)])


def model_key(plan: SweepPlan, train_seed: int) -> str:
    blob = json.dumps({"dataset": asdict(plan.dataset_spec), "dataset_seed": plan.dataset_seed,
                       "arch": plan.arch.to_dict(), "train": asdict(plan.train_config),
                       "label_mode": plan.label_mode, "seed": train_seed}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _train_job(args):
    arch, data, config, seed, label_mode = args
    return train(arch, data, config, seed, label_mode)


def evaluate(params: ModelParams, split: ForgetSplit) -> dict:
    return {
        "retain_train_acc": accuracy(params, split.retain_train, split.label_mode),
        "forget_train_acc": accuracy(params, split.forget_train, split.label_mode),
        "retain_test_acc": accuracy(params, split.retain_test, split.label_mode),
        "forget_test_acc": accuracy(params, split.forget_test, split.label_mode),
    }


def _cell_job(args):
    key, method, trained, split, arch, config, seed = args
    start = time.perf_counter()
    try:
        unlearned = unlearn(method, trained, split, arch, config, seed)
        metrics = evaluate(unlearned, split)
    except Exception as exc:  # reported with the cell coordinates
        return key, exc, None
    return key, None, (metrics, 1000.0 * (time.perf_counter() - start))


def _map(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return map(fn, jobs)
    pool = ProcessPoolExecutor(max_workers=threads)
    try:
        return list(pool.map(fn, jobs))
    finally:
        pool.shutdown()


def run_sweep(plan: SweepPlan, threads: int = 1, checkpoint_dir=None, partial_csv=None,
              model_cache: dict | None = None) -> SweepGrid:
    """Execute the plan. Each cell is a pure function of its seeds, so scheduling never changes results."""
    plan.validate()
    train_set, test_set = generate(plan.dataset_spec, plan.dataset_seed)
    split = split_forget(train_set, test_set, plan.target, plan.label_mode, plan.dataset_spec)
    grid = SweepGrid(plan)
    cache = model_cache if model_cache is not None else {}
    ckpt = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt is not None:
        ckpt.mkdir(parents=True, exist_ok=True)

    todo = []
    for i, s in enumerate(plan.training_seeds):
        key = model_key(plan, s)
        if key in cache:
            grid.trained[i] = cache[key]
        elif ckpt is not None and (ckpt / f"{key}.ckpt").exists():
            grid.trained[i] = cache[key] = load_checkpoint(ckpt / f"{key}.ckpt")
        else:
            todo.append((i, key))
    jobs = [(plan.arch, train_set, plan.train_config, plan.training_seeds[i], plan.label_mode) for i, _ in todo]
    try:
        models = list(_map(_train_job, jobs, threads))
    except Exception as exc:
        raise CellFailure("train", todo[0][0] if todo else -1, None, exc) from exc
    for (i, key), params in zip(todo, models):
        grid.trained[i] = cache[key] = params
        grid.n_trainings += 1
        if ckpt is not None:
            save_checkpoint(params, ckpt / f"{key}.ckpt")
    log.info("%s/%s: %d models trained, %d reused", plan.protocol, plan.target.slug,
             grid.n_trainings, plan.I - grid.n_trainings)

    cells = [((k, i, j), m, grid.trained[i], split, plan.arch, plan.train_config, plan.unlearning_seeds[i][j])
             for k, m in enumerate(plan.methods) for i in range(plan.I) for j in range(plan.J)]
    failure = None
    for (k, i, j), exc, result in _map(_cell_job, cells, threads):
        if exc is not None:
            failure = CellFailure(plan.methods[k].kind, i, j, exc)
            break
        metrics, wall_ms = result
        m = plan.methods[k]
        grid.records[(k, i, j)] = MetricRecord(
            protocol=plan.protocol, method=m.kind, hyper_digest=m.digest, method_index=k, i=i, j=j,
            train_seed=plan.training_seeds[i], unlearn_seed=plan.unlearning_seeds[i][j],
            target=plan.target, wall_ms=wall_ms, **metrics)
    if failure is not None:
        failure.partial = grid.ordered()
        if partial_csv is not None:
            write_results_csv(grid.ordered(), partial_csv)
        raise failure
    return grid


def write_results_csv(records, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*CSV_COLUMNS, PROTOCOL_COLUMN])
        for rec in records:
            w.writerow(rec.csv_row())


def read_results_csv(path) -> list[dict]:
    """Rows as dicts with typed values; raises ConfigError naming any missing column."""
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise ConfigError(f"results CSV is missing column(s) {missing}", str(path))
        rows = []
        for line, raw in enumerate(reader, start=2):
            try:
                row = {
                    "method": raw["method"],
                    "train_seed": int(raw["train_seed"]),
                    "unlearn_seed": int(raw["unlearn_seed"]),
                    "target_kind": raw["target_kind"],
                    "target_id": int(raw["target_id"]),
                    "wall_ms": float(raw["wall_ms"]) if raw["wall_ms"] else 0.0,
                    "hyper_digest": raw["hyper_digest"],
                    "protocol": raw.get(PROTOCOL_COLUMN) or None,
                }
                for m in METRICS:
                    row[m] = float(raw[m])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"malformed row: {exc}", f"{path}:{line}") from exc
            rows.append(row)
    return rows
