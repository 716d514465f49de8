"""Variance decomposition, interpolated quantiles and empirical 2-Wasserstein distance.

All variances are population (divide-by-N) moments, which makes
total = between + within an exact identity on any rectangular grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmpiricalDistribution:
    """Sorted, nonempty sample of one scalar metric."""

    def __init__(self, samples):
        values = np.sort(np.asarray(samples, dtype=np.float64).ravel())
        if values.size == 0:
            raise ValueError("empirical distribution needs at least one sample")
        if not np.all(np.isfinite(values)):
            raise ValueError("samples must be finite")
        values.setflags(write=False)
        self.samples = values

    @property
    def n(self) -> int:
        return self.samples.size

    def __repr__(self):
        return f"EmpiricalDistribution(n={self.n})"


def _as_dist(x) -> EmpiricalDistribution:
    return x if isinstance(x, EmpiricalDistribution) else EmpiricalDistribution(x)


@dataclass(frozen=True)
class VarianceDecomposition:
    total: float
    between: float
    within: float
    row_conditionals: tuple[float, ...]


def _mean(values: np.ndarray) -> float:
    # shifted by the first sample so a constant sample has exactly its own value as mean
    return values[0] + float(np.mean(values - values[0]))


def _pvar(values: np.ndarray) -> float:
    return float(np.mean((values - _mean(values)) ** 2))


def conditional_variance(row) -> float:
    """Spread across unlearning seeds for one fixed training seed."""
    row = np.asarray(row, dtype=np.float64)
    if row.size == 0:
        raise ValueError("empty row")
    return _pvar(row)


def decompose(grid) -> VarianceDecomposition:
    """Split the variance of an I x J grid (rows = training seeds) into between + within."""
    rows = [np.asarray(r, dtype=np.float64) for r in grid]
    if not rows or rows[0].size == 0:
        raise ValueError("grid must have I >= 1 rows and J >= 1 columns")
    if any(r.ndim != 1 or r.size != rows[0].size for r in rows):
        raise ValueError("ragged grid: every row needs the same length")
    m = np.vstack(rows)
    conditionals = tuple(conditional_variance(r) for r in m)
    return VarianceDecomposition(
        total=_pvar(m.ravel()),
        between=_pvar(np.array([_mean(r) for r in m])),
        within=float(np.mean(conditionals)),
        row_conditionals=conditionals,
    )


def quantiles(dist, qs) -> list[float]:
    """Linear interpolation between order statistics at position (n-1)*q."""
    x = _as_dist(dist).samples
    out = []
    for q in qs:
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile level must lie in [0, 1], got {q}")
        pos = (x.size - 1) * q
        lo = int(np.floor(pos))
        hi = min(lo + 1, x.size - 1)
        frac = pos - lo
        out.append(float(x[lo] + frac * (x[hi] - x[lo])) if frac else float(x[lo]))
    return out


def wasserstein2(a, b) -> float:
    """W2 between two empirical distributions via the monotone (quantile) coupling."""
    xa, xb = _as_dist(a).samples, _as_dist(b).samples
    if xa.size == xb.size:
        return float(np.sqrt(np.mean((xa - xb) ** 2)))
    # inverse CDFs are step functions; integrate over the merged breakpoints
    n, m = xa.size, xb.size
    cuts = np.union1d(np.arange(n + 1) / n, np.arange(m + 1) / m)
    widths = np.diff(cuts)
    mids = cuts[:-1] + widths / 2
    ia = np.minimum((mids * n).astype(np.int64), n - 1)
    ib = np.minimum((mids * m).astype(np.int64), m - 1)
    return float(np.sqrt(np.sum(widths * (xa[ia] - xb[ib]) ** 2)))


QUANTILE_KEYS = {"min": 0.0, "q25": 0.25, "q50": 0.5, "q75": 0.75, "max": 1.0}


def summarize(grid) -> dict:
    """Variance summary and box quantiles for one grid of metric values."""
    dec = decompose(grid)
    dist = EmpiricalDistribution(np.concatenate([np.ravel(r) for r in grid]))
    qv = quantiles(dist, QUANTILE_KEYS.values())
    return {
        "n": dist.n,
        "v_total": dec.total,
        "v_between": dec.between,
        "v_within": dec.within,
        "row_conditionals": list(dec.row_conditionals),
        "quantiles": dict(zip(QUANTILE_KEYS, qv)),
    }


def compare_protocols(samples_a, samples_b, grid_a=None, grid_b=None) -> dict:
    """W2 between the two protocols' metric distributions, plus each side's summary.

    grid_a/grid_b give the I x J layout for the variance split; without them
    each sample set is treated as one row per value.
    """
    a, b = EmpiricalDistribution(samples_a), EmpiricalDistribution(samples_b)
    grid_a = grid_a if grid_a is not None else [list(a.samples)]
    grid_b = grid_b if grid_b is not None else [[v] for v in b.samples]
    return {
        "w2": wasserstein2(a, b),
        "common_practice": summarize(grid_a),
        "recommended": summarize(grid_b),
    }
