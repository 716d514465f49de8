"""Deterministic random streams keyed by (root seed, label).

Every stream is a PCG64 generator whose initial state is a hash of the root
seed and an ASCII label, so sibling streams never share state and any run
can be replayed from its declared seed alone.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

SEED_MAX = 2**64 - 1


def check_seed(value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(value).__name__}")
    value = int(value)
    if not 0 <= value <= SEED_MAX:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def _digest(root: int, label: str) -> bytes:
    if not label or not label.isascii():
        raise ValueError(f"stream label must be nonempty ASCII, got {label!r}")
    h = hashlib.blake2b(digest_size=32, person=b"unlbench-rng")
    h.update(check_seed(root).to_bytes(8, "little"))
    h.update(label.encode("ascii"))
    return h.digest()


def derive_seed(root: int, label: str) -> int:
    """A 64-bit child seed; used for per-run training/unlearning seeds."""
    return int.from_bytes(_digest(root, label)[:8], "little")


class RngStream:
    """A labelled, replayable source of uniforms."""

    def __init__(self, root: int, label: str):
        words = np.frombuffer(_digest(root, label), dtype="<u4")
        self.lineage = (check_seed(root), label)
        self._bitgen = np.random.PCG64(np.random.SeedSequence(words.tolist()))
        self._gen = np.random.Generator(self._bitgen)

    def __repr__(self):
        return f"RngStream(root={self.lineage[0]}, label={self.lineage[1]!r})"

    def get_state(self) -> dict:
        return self._bitgen.state

    def set_state(self, state: dict) -> None:
        self._bitgen.state = state

    def uniform(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be nonnegative")
        if n == 0:
            return np.empty(0)
        return self._gen.random(n)

    def gaussian(self, n: int) -> np.ndarray:
        # Box-Muller over consecutive uniform pairs; an odd n drops the last sine.
        if n < 0:
            raise ValueError("n must be nonnegative")
        if n == 0:
            return np.empty(0)
        pairs = math.ceil(n / 2)
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.column_stack((radius * np.cos(theta), radius * np.sin(theta)))
        return z.ravel()[:n]

    def integers_below(self, bounds) -> np.ndarray:
        """One draw in [0, b) for each entry of bounds."""
        bounds = np.asarray(bounds, dtype=np.int64)
        u = self.uniform(bounds.size)
        return np.minimum((u * bounds).astype(np.int64), bounds - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        out = np.arange(n)
        if n < 2:
            return out
        picks = self.integers_below(np.arange(n, 1, -1))
        for i, j in zip(range(n - 1, 0, -1), picks.tolist()):
            out[i], out[j] = out[j], out[i]
        return out

    def shuffle(self, items):
        items = list(items)
        return [items[k] for k in self.permutation(len(items))]


def derive_stream(root: int, label: str) -> RngStream:
    return RngStream(root, label)


def draw_uniform(stream: RngStream, n: int) -> list[float]:
    return stream.uniform(n).tolist()


def draw_gaussian(stream: RngStream, n: int) -> list[float]:
    return stream.gaussian(n).tolist()


def shuffle(stream: RngStream, items: list) -> list:
    return stream.shuffle(items)
