"""Loss zoo, point-wise risk, risk minimisers and verdict engines.

Every loss is stored as a vectorized *table*: given an ``(m, K)`` array of
predictions it returns the ``(m, K)`` matrix of ``loss(q, k)`` for all labels.
Grid searches then reduce to one matrix product per conditional.

The verdict engines are falsification style: they certify on sampled or
gridded instances and report the counterexample they found, if any.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import check_label, prob_vector, random_simplex, simplex_grid_array
from .noise import NoiseModel
from .problem import DiscreteProblem

CCE_FLOOR = 1e-12
RISK_TOL = 1e-9

STRICTLY_PROPER = "strictly_proper"
PROPER_NOT_STRICT = "proper_not_strict"
NOT_PROPER = "not_proper"


@dataclass(frozen=True)
class LossFunction:
    id: str
    table: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    k: int | None = None  # None: any class count

    def __call__(self, q, y: int) -> float:
        return eval_loss(self, q, y)

    def scaled(self, c: float) -> "LossFunction":
        if c <= 0:
            raise ValueError("scale must be positive")
        return LossFunction(f"{c:g}*{self.id}", lambda Q: c * self.table(Q), self.k)


def _cce_table(Q):
    return -np.log(np.maximum(Q, CCE_FLOOR))


def _mae_table(Q):
    # sum_k |e^(y)_k - q_k| for every y, written out literally
    m, k = Q.shape
    eye = np.eye(k)
    return np.abs(eye[None, :, :] - Q[:, None, :]).sum(axis=2)


def _sigmoid_table(Q):
    if Q.shape[1] != 2:
        raise ValueError("the sigmoid loss is binary only")
    s = 1.0 / (1.0 + np.exp(Q[:, 0]))
    return np.column_stack([s, 1.0 - s])


def _constant_table(Q):
    return np.ones_like(Q)


CCE = LossFunction("cce", _cce_table)
MAE = LossFunction("mae", _mae_table)
SIGMOID = LossFunction("sigmoid", _sigmoid_table, k=2)
CONSTANT = LossFunction("constant", _constant_table)

LOSSES = {loss.id: loss for loss in (CCE, MAE, SIGMOID, CONSTANT)}


def get_loss(name: str) -> LossFunction:
    try:
        return LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(LOSSES)}") from None


def custom_loss(name: str, fn: Callable[[np.ndarray, int], float], k: int | None = None) -> LossFunction:
    """Wrap a point-wise ``fn(q, y)`` (1-based ``y``) as a table loss."""

    def table(Q):
        return np.array([[fn(q, y) for y in range(1, Q.shape[1] + 1)] for q in Q], dtype=float)

    return LossFunction(name, table, k)


def loss_table(loss: LossFunction, Q: np.ndarray) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if loss.k is not None and Q.shape[1] != loss.k:
        raise ValueError(f"loss {loss.id} needs K={loss.k}, got K={Q.shape[1]}")
    return loss.table(Q)


def eval_loss(loss: LossFunction, q, y: int) -> float:
    q = prob_vector(q)
    y = check_label(y, q.size)
    return float(loss_table(loss, q)[0, y - 1])


def symmetry_sum(loss: LossFunction, q) -> float:
    return float(loss_table(loss, prob_vector(q))[0].sum())


def is_symmetric(loss: LossFunction, k: int, rng: np.random.Generator, n: int = 1000, tol: float = 1e-9):
    """Sample ``n`` simplex points; returns (symmetric?, min sum, max sum)."""
    Q = np.vstack([random_simplex(k, rng) for _ in range(n)])
    sums = loss_table(loss, Q).sum(axis=1)
    lo, hi = float(sums.min()), float(sums.max())
    return hi - lo <= tol, lo, hi


def pointwise_risk(loss: LossFunction, q, g) -> float:
    q, g = prob_vector(q), prob_vector(g)
    if q.size != g.size:
        raise ValueError("q and g must share K")
    return float(loss_table(loss, q)[0] @ g)


def _argmin_set(risks: np.ndarray, tol: float = RISK_TOL) -> np.ndarray:
    return np.flatnonzero(risks <= risks.min() + tol)


def pointwise_minimizers(loss: LossFunction, g, step: float, grid: np.ndarray | None = None) -> np.ndarray:
    """Every grid point whose point-wise risk is within 1e-9 of the grid minimum.

    Returned as an ``(m, K)`` array in grid order. This is the brute-force
    oracle for the analytic minimisers.
    """
    g = prob_vector(g)
    grid = simplex_grid_array(g.size, step) if grid is None else grid
    risks = loss_table(loss, grid) @ g
    return grid[_argmin_set(risks)]


def analytic_minimizer(loss: LossFunction, g) -> np.ndarray:
    """Closed-form point-wise minimiser for CCE (any K) and binary MAE / sigmoid."""
    g = prob_vector(g)
    if loss.id == "cce":
        return np.array(g)
    if loss.id in ("mae", "sigmoid"):
        if g.size != 2:
            raise ValueError(f"closed form for {loss.id} is binary only")
        return symmetric_minimizer(g, 1.0, 0.0)
    raise ValueError(f"no closed-form minimiser for loss {loss.id!r}")


def symmetric_minimizer(g, gamma: float, gamma_prime: float) -> np.ndarray:
    """Binary symmetric-loss minimiser: gamma where g_1 >= 1/2, else gamma'."""
    g = prob_vector(g)
    f1 = gamma if g[0] >= 0.5 else gamma_prime
    return np.array([f1, 1.0 - f1])


def gamma_pairs(loss: LossFunction, step: float) -> tuple[np.ndarray, np.ndarray]:
    """All grid argmins (gamma) and argmaxes (gamma') of q_1 -> loss(q, 1)."""
    grid = simplex_grid_array(2, step)
    vals = loss_table(loss, grid)[:, 0]
    gammas = grid[_argmin_set(vals), 0]
    gamma_primes = grid[_argmin_set(-vals), 0]
    return gammas, gamma_primes


@dataclass
class MinimizerReport:
    loss: str
    minimizers: dict[str, list[list[float]]]
    clean_risk: float
    noisy_risk: float | None = None

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "minimizers": self.minimizers,
            "clean_risk": self.clean_risk,
            "noisy_risk": self.noisy_risk,
        }


def minimizer_report(loss: LossFunction, problem: DiscreteProblem, step: float, noise: NoiseModel | None = None):
    """Grid minimisers of the clean full risk; ``noisy_risk`` is their worst noisy risk."""
    grid = simplex_grid_array(problem.k, step)
    L = loss_table(loss, grid)
    clean = L @ problem.g.T
    noisy = L @ problem.noisy_g(noise).T if noise is not None else None
    sets, clean_risk, noisy_risk = {}, 0.0, 0.0
    for j, x in enumerate(problem.points):
        idx = _argmin_set(clean[:, j])
        sets[x] = grid[idx].tolist()
        clean_risk += problem.mu[j] * clean[idx[0], j]
        if noisy is not None:
            noisy_risk += problem.mu[j] * noisy[idx, j].max()
    return MinimizerReport(loss.id, sets, float(clean_risk), float(noisy_risk) if noise is not None else None)


@dataclass
class PropernessReport:
    verdict: str
    trials: int
    counterexample: list[float] | None = None
    minimizer_count: int | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def properness_test(
    loss: LossFunction, trials: int, step: float, rng: np.random.Generator, k: int = 2
) -> PropernessReport:
    """Falsify (strict) properness on ``trials`` random conditionals.

    ``g`` counts as a minimiser when some grid minimiser lies within one grid
    step of it (sup norm); uniqueness means every minimiser does.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = simplex_grid_array(k, step)
    L = loss_table(loss, grid)
    tol = step + 1e-12
    unique_always = True
    first_nonunique = None
    for _ in range(trials):
        g = random_simplex(k, rng)
        mins = grid[_argmin_set(L @ g)]
        dist = np.abs(mins - g).max(axis=1)
        if not np.any(dist <= tol):
            return PropernessReport(NOT_PROPER, trials, g.tolist(), len(mins))
        if unique_always and np.any(dist > tol):
            unique_always = False
            first_nonunique = (g.tolist(), len(mins))
    if unique_always:
        return PropernessReport(STRICTLY_PROPER, trials)
    return PropernessReport(PROPER_NOT_STRICT, trials, first_nonunique[0], first_nonunique[1])


@dataclass
class RobustnessReport:
    robust: bool
    clean_min_risk: float
    noisy_risk_of_clean_min: float
    noisy_min_risk: float
    noise_active: bool
    worst_point: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def robustness_test(loss: LossFunction, problem: DiscreteProblem, noise: NoiseModel, step: float) -> RobustnessReport:
    """Do all clean full-risk minimisers also minimise the noisy full risk?

    The model class is unrestricted per support point, so the full risk
    separates and the search runs point by point on the simplex grid.
    ``noisy_risk_of_clean_min`` is the worst case over clean minimisers.
    """
    grid = simplex_grid_array(problem.k, step)
    L = loss_table(loss, grid)
    clean = L @ problem.g.T
    noisy = L @ problem.noisy_g(noise).T
    c_min = n_of_c = n_min = 0.0
    worst, worst_excess = None, 0.0
    for j, x in enumerate(problem.points):
        m = problem.mu[j]
        if m == 0:
            continue
        idx = _argmin_set(clean[:, j])
        worst_n = noisy[idx, j].max()
        best_n = noisy[:, j].min()
        c_min += m * clean[idx[0], j]
        n_of_c += m * worst_n
        n_min += m * best_n
        if worst_n - best_n > worst_excess:
            worst, worst_excess = x, worst_n - best_n
    return RobustnessReport(
        robust=bool(n_of_c - n_min <= RISK_TOL),
        clean_min_risk=float(c_min),
        noisy_risk_of_clean_min=float(n_of_c),
        noisy_min_risk=float(n_min),
        noise_active=problem.noise_active(noise),
        worst_point=worst,
    )


@dataclass
class CspReport:
    """Calibration of a binary symmetric-loss minimiser before and after the alpha shift."""

    gamma: float
    gamma_prime: float
    alpha: float
    shifted: DiscreteProblem
    f_star: np.ndarray
    level_mass: tuple[float, float]
    accuracy: tuple[float | None, float | None]
    shifted_accuracy: tuple[float | None, float | None]
    gaps: tuple[float | None, float | None]
    shifted_gaps: tuple[float | None, float | None]
    original_calibrated: bool
    demonstrates: bool

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k not in ("shifted", "f_star")}
        out["shifted"] = self.shifted.to_dict()
        out["f_star"] = self.f_star.tolist()
        return out


def csp_counterexample(gamma: float, gamma_prime: float, alpha: float, problem: DiscreteProblem) -> CspReport:
    """Shift P(Y=1|x) to (1 - 2 alpha) P(Y=1|x) + alpha and re-audit calibration.

    The upper and lower level sets {g_1 >= 1/2} and {g_1 < 1/2} do not move,
    so the symmetric-loss minimiser f* is unchanged while its conditional
    accuracies are pulled towards 1/2.
    """
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    if not 0.5 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [1/2, 1], got {gamma}")
    if not 0 <= gamma_prime < 0.5:
        raise ValueError(f"gamma' must lie in [0, 1/2), got {gamma_prime}")
    if problem.k != 2:
        raise ValueError("the construction is binary")
    g1 = problem.g[:, 0]
    shifted_g1 = (1 - 2 * alpha) * g1 + alpha
    shifted = problem.with_g(np.column_stack([shifted_g1, 1 - shifted_g1]))
    upper = g1 >= 0.5
    f1 = np.where(upper, gamma, gamma_prime)
    f_star = np.column_stack([f1, 1 - f1])

    def level(mask, p1, target):
        mass = float(problem.mu[mask].sum())
        if mass == 0:
            return mass, None, None
        acc = float(problem.mu[mask] @ p1[mask] / mass)
        return mass, acc, abs(acc - target)

    m_up, a_up, gap_up = level(upper, g1, gamma)
    m_lo, a_lo, gap_lo = level(~upper, g1, gamma_prime)
    _, b_up, sgap_up = level(upper, shifted_g1, gamma)
    _, b_lo, sgap_lo = level(~upper, shifted_g1, gamma_prime)
    calibrated = all(gap is None or gap <= 1e-12 for gap in (gap_up, gap_lo))
    shifted_max = max(gap for gap in (sgap_up, sgap_lo, 0.0) if gap is not None)
    return CspReport(
        gamma=gamma,
        gamma_prime=gamma_prime,
        alpha=alpha,
        shifted=shifted,
        f_star=f_star,
        level_mass=(m_up, m_lo),
        accuracy=(a_up, a_lo),
        shifted_accuracy=(b_up, b_lo),
        gaps=(gap_up, gap_lo),
        shifted_gaps=(sgap_up, sgap_lo),
        original_calibrated=calibrated,
        demonstrates=calibrated and shifted_max > 1e-12,
    )
