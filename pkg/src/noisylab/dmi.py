"""Population analysis of the determinant-based mutual information loss.

Analysis only: the DMI loss depends on the joint over a whole batch, so it
is not offered by the trainer.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .noise import NoiseModel, transition_matrix
from .problem import DiscreteProblem

SINGULAR_TOL = 1e-15


def dmi_population_loss(joint) -> float:
    """-log |det P(Yhat, Y)|; ``inf`` when the joint is singular."""
    J = np.asarray(joint, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"joint must be a square matrix, got shape {J.shape}")
    if J.min() < -1e-12 or abs(J.sum() - 1.0) > 1e-9:
        raise ValueError("joint must be non-negative with total mass 1")
    det = abs(float(np.linalg.det(J)))
    if det <= SINGULAR_TOL:
        return float("inf")
    return -float(np.log(det))


def dmi_joint(problem: DiscreteProblem, f: np.ndarray, noise: NoiseModel | None = None) -> np.ndarray:
    """P(Yhat = i, Y = j) = sum_x mu(x) f_i(x) g_j(x), Yhat ~ f(x) drawn independently.

    With ``noise`` the label column uses the noisy conditionals instead.
    """
    f = np.asarray(f, dtype=np.float64)
    g = problem.g if noise is None else problem.noisy_g(noise)
    return (f * problem.mu[:, None]).T @ g


@dataclass
class DmiMinimizer:
    f: np.ndarray
    prior: float
    degenerate: bool

    def to_dict(self) -> dict:
        return {"f": self.f.tolist(), "prior": self.prior, "degenerate": self.degenerate}


def dmi_population_minimizer(problem: DiscreteProblem) -> DmiMinimizer:
    """f_1(x) = 1{P(Y=1|x) >= P(Y=1)}, the first of the two sign-symmetric minimisers.

    ``degenerate`` flags the case where every support point falls on one side
    (the joint is then singular and the loss infinite).
    """
    if problem.k != 2:
        raise ValueError("closed-form DMI minimiser is binary only")
    prior = float(problem.class_prior()[0])
    f1 = (problem.g[:, 0] >= prior).astype(np.float64)
    f = np.column_stack([f1, 1 - f1])
    support = problem.mu > 0
    degenerate = bool(np.all(f1[support] == 1) or np.all(f1[support] == 0))
    return DmiMinimizer(f, prior, degenerate)


def vertex_search(problem: DiscreteProblem) -> tuple[float, list[np.ndarray]]:
    """Exhaustive search over per-point vertex predictions for the largest |det|.

    Returns the best |det| and every binary table attaining it (within 1e-12).
    Exponential in the number of support points.
    """
    if problem.k != 2:
        raise ValueError("vertex search is binary only")
    tables, dets = [], []
    for bits in product((1.0, 0.0), repeat=len(problem)):
        f1 = np.array(bits)
        f = np.column_stack([f1, 1 - f1])
        tables.append(f)
        dets.append(abs(np.linalg.det(dmi_joint(problem, f))))
    dets = np.array(dets)
    best = float(dets.max())
    return best, [t for t, d in zip(tables, dets) if d >= best - 1e-12]


def noise_offsets(problem: DiscreteProblem, noise: NoiseModel, tables: list[np.ndarray]) -> np.ndarray:
    """Noisy minus clean DMI loss for each candidate prediction table."""
    return np.array(
        [
            dmi_population_loss(dmi_joint(problem, f, noise)) - dmi_population_loss(dmi_joint(problem, f))
            for f in tables
        ]
    )


def symmetric_noise_offset(noise: NoiseModel) -> float:
    """-log |det T| for the instance-independent transition matrix T."""
    if noise.kind != "symmetric":
        raise ValueError("the offset is constant only for instance-independent noise")
    return -float(np.log(abs(np.linalg.det(transition_matrix(noise)))))
