"""Simple non-uniform label noise.

A true label is kept with probability ``1 - omega(x)`` and otherwise moved
uniformly to one of the other ``K - 1`` classes. ``omega`` is either one
constant (symmetric noise) or a table keyed by support-point id.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .core import check_label, prob_vector

FEASIBLE_TOL = 1e-12


def omega_bound(k: int) -> float:
    return (k - 1) / k


def check_omega(omega: float, k: int) -> float:
    omega = float(omega)
    if not (0.0 <= omega < omega_bound(k)):
        raise ValueError(f"omega={omega} violates 0 <= omega < (K-1)/K = {omega_bound(k):.6g}")
    return omega


@dataclass(frozen=True)
class NoiseModel:
    """Flip-mass specification; tabular keys are normalized to ``str``."""

    kind: str
    omega: float | Mapping[str, float]
    k: int
    _table: dict[str, float] = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("K must be at least 2")
        if self.kind == "symmetric":
            object.__setattr__(self, "omega", check_omega(self.omega, self.k))
        elif self.kind == "tabular":
            if not isinstance(self.omega, Mapping):
                raise ValueError("tabular noise needs a mapping of support-point id -> omega")
            table = {str(key): check_omega(val, self.k) for key, val in self.omega.items()}
            object.__setattr__(self, "_table", table)
            object.__setattr__(self, "omega", dict(table))
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def symmetric(cls, omega: float, k: int) -> "NoiseModel":
        return cls("symmetric", omega, k)

    @classmethod
    def tabular(cls, omegas: Mapping[Any, float], k: int) -> "NoiseModel":
        return cls("tabular", dict(omegas), k)

    def omega_at(self, x: Any = None) -> float:
        if self.kind == "symmetric":
            return float(self.omega)
        key = str(x)
        if key not in self._table:
            raise KeyError(f"noise table has no entry for support point {x!r}")
        return self._table[key]

    def covers(self, ids: Sequence[Any]) -> bool:
        return self.kind == "symmetric" or all(str(i) in self._table for i in ids)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "omega": self.omega, "k": self.k}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NoiseModel":
        return cls(d["kind"], d["omega"], int(d["k"]))

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        return cls.from_dict(json.loads(text))


def transition_row(model: NoiseModel, x: Any, y: int) -> np.ndarray:
    """P(noisy label = . | Y = y, X = x)."""
    y = check_label(y, model.k)
    omega = check_omega(model.omega_at(x), model.k)
    row = np.full(model.k, omega / (model.k - 1))
    row[y - 1] = 1.0 - omega
    return row


def transition_matrix(model: NoiseModel, x: Any = None) -> np.ndarray:
    """Row ``y-1`` holds :func:`transition_row` for true label ``y``."""
    return np.vstack([transition_row(model, x, y) for y in range(1, model.k + 1)])


def marginalise(g: Sequence[float] | np.ndarray, transition: np.ndarray) -> np.ndarray:
    """sum_k P(noisy | Y=k) g_k for an arbitrary row-stochastic ``transition``."""
    g = prob_vector(g)
    return np.asarray(transition, dtype=np.float64).T @ g


def noisy_conditional(g: Sequence[float] | np.ndarray, omega: float) -> np.ndarray:
    g = prob_vector(g)
    k = g.size
    omega = check_omega(omega, k)
    return prob_vector((1.0 - omega * k / (k - 1)) * g + omega / (k - 1))


def clean_conditional(g_tilde: Sequence[float] | np.ndarray, omega: float) -> np.ndarray:
    """Invert :func:`noisy_conditional`; rejects vectors outside its image."""
    gt = prob_vector(g_tilde)
    k = gt.size
    omega = check_omega(omega, k)
    floor = omega / (k - 1)
    if gt.min() < floor - FEASIBLE_TOL:
        raise ValueError(
            f"{gt} is not reachable at omega={omega}: every entry must be >= {floor:.6g}"
        )
    g = (gt - floor) / (1.0 - omega * k / (k - 1))
    return prob_vector(np.clip(g, 0.0, None))


def flip_labels(
    labels: Sequence[int] | np.ndarray,
    model: NoiseModel,
    rng: np.random.Generator,
    point_ids: Sequence[Any] | None = None,
) -> np.ndarray:
    """Resample every label from its transition row.

    One uniform variate per label partitions [0, 1): first the kept-label
    mass, then the off-labels in ascending class order. ``point_ids`` names the
    support point of each sample (row index by default) for tabular models.
    """
    labels = np.asarray(labels, dtype=np.int64)
    k = model.k
    if labels.size and (labels.min() < 1 or labels.max() > k):
        raise ValueError(f"labels must lie in 1..{k}")
    if model.kind == "symmetric":
        omegas = np.full(labels.shape, float(model.omega))
    else:
        ids = range(labels.size) if point_ids is None else point_ids
        omegas = np.array([model.omega_at(i) for i in ids], dtype=np.float64)
    u = rng.random(labels.shape)
    keep = u < 1.0 - omegas
    with np.errstate(divide="ignore", invalid="ignore"):
        slot = np.floor((u - (1.0 - omegas)) / (omegas / (k - 1)))
    slot = np.clip(np.nan_to_num(slot, nan=0.0), 0, k - 2).astype(np.int64)
    # slot-th class in ascending order skipping the true one (both 0-based)
    moved = slot + (slot >= labels - 1)
    return np.where(keep, labels, moved + 1)


def is_fixed_point(g: Sequence[float] | np.ndarray, omega: float, tol: float = 1e-12) -> bool:
    """True when the noise leaves ``g`` unchanged (zero flip mass or uniform g)."""
    g = prob_vector(g)
    return omega == 0 or bool(np.max(np.abs(g - 1.0 / g.size)) <= tol)
