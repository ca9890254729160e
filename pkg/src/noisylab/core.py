"""Simplex arithmetic shared by every other module.

Probability vectors are plain read-only numpy arrays validated by
:func:`prob_vector`. Class labels are 1-based integers throughout.
"""
from __future__ import annotations

import math
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

SUM_TOL = 1e-9


def make_rng(seed: int | np.random.SeedSequence | None) -> np.random.Generator:
    """The one generator type used everywhere (PCG64)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child streams from ``rng``."""
    return list(rng.spawn(n))


def prob_vector(p: Sequence[float] | np.ndarray, tol: float = SUM_TOL) -> np.ndarray:
    """Validate ``p`` as a point on the simplex and return a read-only copy.

    Entries must lie in [0, 1] and sum to one within ``tol``; inputs inside
    the tolerance are renormalized, anything else raises ``ValueError``.
    """
    arr = np.array(p, dtype=np.float64).reshape(-1)
    if arr.size < 2:
        raise ValueError(f"probability vector needs K >= 2 entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite probability vector {arr}")
    if arr.min() < -tol or arr.max() > 1 + tol:
        raise ValueError(f"entries outside [0, 1]: {arr}")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"entries sum to {total!r}, not 1")
    arr = np.clip(arr, 0.0, 1.0)
    arr = arr / arr.sum()
    arr.flags.writeable = False
    return arr


def check_label(y: int, k: int) -> int:
    if not 1 <= int(y) <= k:
        raise ValueError(f"label {y} outside 1..{k}")
    return int(y)


def one_hot(y: int, k: int) -> np.ndarray:
    e = np.zeros(k)
    e[check_label(y, k) - 1] = 1.0
    return e


def uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def entropy(p: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = prob_vector(p)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def entropy_rows(P: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a matrix of probability vectors (no validation)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def argmax_class(p: Sequence[float] | np.ndarray) -> int:
    """Smallest 1-based index attaining the maximum entry."""
    p = np.asarray(p, dtype=np.float64)
    return int(np.argmax(p)) + 1


def _grid_count(step: float) -> int:
    if not 0 < step <= 0.5:
        raise ValueError(f"step must lie in (0, 0.5], got {step}")
    n = round(1.0 / step)
    if abs(n * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1")
    return n


def grid_size(k: int, step: float) -> int:
    n = _grid_count(step)
    return math.comb(n + k - 1, k - 1)


def simplex_grid(k: int, step: float) -> Iterator[np.ndarray]:
    """Yield every lattice point of the simplex with spacing ``step``.

    Points come in lexicographic order of their integer coordinates; the last
    coordinate absorbs rounding so each point sums to one exactly.
    """
    if k < 2:
        raise ValueError("K must be at least 2")
    n = _grid_count(step)
    # stars and bars: bar positions among n + k - 1 slots
    for bars in combinations(range(n + k - 1), k - 1):
        counts = []
        prev = -1
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(n + k - 2 - prev)
        q = np.array(counts[:-1], dtype=np.float64) * step
        yield np.append(q, 1.0 - q.sum())


def simplex_grid_array(k: int, step: float) -> np.ndarray:
    """All lattice points as an ``(m, k)`` array, same order as :func:`simplex_grid`.

    Built with integer recursion instead of the generator so that the
    ~5e5-point K=3, step=1e-3 grid stays cheap.
    """
    if k < 2:
        raise ValueError("K must be at least 2")
    n = _grid_count(step)
    counts = _compositions(n, k)
    q = counts[:, :-1].astype(np.float64) * step
    return np.column_stack([q, 1.0 - q.sum(axis=1)])


def _compositions(n: int, k: int) -> np.ndarray:
    if k == 2:
        first = np.arange(n + 1, dtype=np.int64)
        return np.column_stack([first, n - first])
    blocks = []
    for first in range(n + 1):
        rest = _compositions(n - first, k - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def random_simplex(k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the simplex via normalized exponential spacings."""
    if k < 2:
        raise ValueError("K must be at least 2")
    e = rng.exponential(size=k)
    return prob_vector(e / e.sum())
