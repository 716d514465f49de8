"""Rebuild metric grids from a results CSV and summarize them per protocol."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .errors import ConfigError
from .stats import summarize, wasserstein2
from .sweep import METRICS, PROTOCOLS

CONVENTIONS = {
    "variance": "population moments (divide by N); v_total = v_between + v_within exactly",
    "quantiles": "linear interpolation between order statistics at position (n-1)*q",
    "metric_scale": "accuracies are fractions in [0, 1], not percentages",
    "w2": "2-Wasserstein distance between the pooled metric samples of the two protocols",
    "sub_class_forget_accuracy": "forget-subclass examples scored against their superclass label",
}


def group_rows(rows: list[dict]) -> "OrderedDict[tuple, dict]":
    """(target_kind, target_id, method, hyper_digest) -> {protocol: rows}, in first-seen order.

    Rows without a protocol tag are assigned by shape: a single training seed
    is the common-practice layout, several training seeds the recommended one.
    """
    groups: OrderedDict = OrderedDict()
    for r in rows:
        key = (r["target_kind"], r["target_id"], r["method"], r["hyper_digest"])
        groups.setdefault(key, OrderedDict()).setdefault(r.get("protocol"), []).append(r)
    for key, by_proto in groups.items():
        untagged = by_proto.pop(None, None)
        if untagged:
            seeds = {r["train_seed"] for r in untagged}
            proto = "common_practice" if len(seeds) == 1 else "recommended"
            by_proto.setdefault(proto, []).extend(untagged)
        for proto in by_proto:
            if proto not in PROTOCOLS:
                raise ConfigError(f"unknown protocol {proto!r}", "protocol")
    return groups


def rows_to_grid(rows: list[dict], metric: str) -> np.ndarray:
    """I x J matrix: one row per training seed (first-seen order), columns in file order."""
    by_seed: OrderedDict = OrderedDict()
    for r in rows:
        by_seed.setdefault(r["train_seed"], []).append(r[metric])
    lengths = {len(v) for v in by_seed.values()}
    if len(lengths) != 1:
        raise ConfigError(f"ragged grid: training seeds have {sorted(lengths)} unlearning runs", metric)
    return np.array(list(by_seed.values()), dtype=np.float64)


def analyze(rows: list[dict]) -> dict:
    if not rows:
        raise ConfigError("no result rows to analyze")
    entries = []
    for (kind, tid, method, digest), by_proto in group_rows(rows).items():
        protos = [p for p in PROTOCOLS if p in by_proto]
        for metric in METRICS:
            grids = {p: rows_to_grid(by_proto[p], metric) for p in protos}
            for p in protos:
                g = grids[p]
                entry = {"target_kind": kind, "target_id": tid, "method": method,
                         "hyper_digest": digest, "protocol": p, "metric": metric,
                         "I": int(g.shape[0]), "J": int(g.shape[1]), **summarize(g)}
                if len(protos) == 2:
                    other = grids[protos[1 - protos.index(p)]]
                    entry["w2_vs_other_protocol"] = wasserstein2(g.ravel(), other.ravel())
                entries.append(entry)
    return {"conventions": CONVENTIONS, "entries": entries}
