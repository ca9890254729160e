"""Finite-support joint distributions: the substrate for exact checks."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .core import prob_vector, random_simplex
from .noise import NoiseModel, is_fixed_point, noisy_conditional


@dataclass(frozen=True)
class DiscreteProblem:
    """Support points with marginal ``mu`` and conditional rows ``g``.

    ``g[i]`` is P(Y | X = points[i]); ``points`` are string ids.
    """

    points: tuple[str, ...]
    mu: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        points = tuple(str(p) for p in self.points)
        if not points:
            raise ValueError("empty problem")
        if len(set(points)) != len(points):
            raise ValueError("duplicate support-point ids")
        mu = prob_vector(self.mu) if len(points) > 1 else np.ones(1)
        rows = np.vstack([prob_vector(row) for row in np.atleast_2d(np.asarray(self.g, dtype=float))])
        if rows.shape[0] != len(points) or mu.size != len(points):
            raise ValueError("mu, g and points disagree in length")
        rows.flags.writeable = False
        mu = np.array(mu)
        mu.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "g", rows)

    @classmethod
    def build(cls, mu: Sequence[float], g: Sequence[Sequence[float]], points: Sequence[Any] | None = None):
        ids = [f"x{i + 1}" for i in range(len(g))] if points is None else list(points)
        return cls(tuple(ids), np.asarray(mu, dtype=float), np.asarray(g, dtype=float))

    @property
    def k(self) -> int:
        return self.g.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def noisy_g(self, noise: NoiseModel) -> np.ndarray:
        if noise.k != self.k:
            raise ValueError(f"noise model has K={noise.k}, problem has K={self.k}")
        if not noise.covers(self.points):
            missing = [p for p in self.points if str(p) not in noise.omega]
            raise KeyError(f"noise table misses support points {missing}")
        return np.vstack([noisy_conditional(row, noise.omega_at(x)) for x, row in zip(self.points, self.g)])

    def noise_active(self, noise: NoiseModel) -> bool:
        """False when the noise is effectively non-existent on this problem."""
        return any(
            m > 0 and not is_fixed_point(row, noise.omega_at(x))
            for x, m, row in zip(self.points, self.mu, self.g)
        )

    def with_g(self, g: np.ndarray) -> "DiscreteProblem":
        return DiscreteProblem(self.points, self.mu, np.asarray(g, dtype=float))

    def class_prior(self) -> np.ndarray:
        return self.mu @ self.g

    def to_dict(self) -> dict:
        return {"points": list(self.points), "mu": self.mu.tolist(), "g": self.g.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DiscreteProblem":
        return cls(tuple(d["points"]), np.asarray(d["mu"], dtype=float), np.asarray(d["g"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "DiscreteProblem":
        return cls.from_dict(json.loads(text))


def random_problem(rng: np.random.Generator, k: int, n_points: int) -> DiscreteProblem:
    mu = random_simplex(n_points, rng) if n_points > 1 else np.ones(1)
    g = np.vstack([random_simplex(k, rng) for _ in range(n_points)])
    return DiscreteProblem.build(mu, g)
