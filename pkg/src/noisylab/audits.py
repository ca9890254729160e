"""Randomised audit suites behind ``noisylab check``.

Each suite samples problems, runs the library engines and returns a plain
dict with an overall ``ok`` flag; a False flag is a falsified claim.
"""
from __future__ import annotations

import numpy as np

from .calibration import decision_agreement, expected_entropy_pair, noisy_minimizer_calibration, tie_structure
from .core import random_simplex
from .dmi import dmi_population_minimizer, noise_offsets, symmetric_noise_offset, vertex_search
from .losses import LossFunction, is_symmetric, properness_test, robustness_test
from .noise import NoiseModel, marginalise, noisy_conditional, omega_bound, transition_matrix
from .problem import DiscreteProblem, random_problem

ROBUSTNESS_PROBLEM = DiscreteProblem.build([0.5, 0.5], [[0.8, 0.2], [0.3, 0.7]])


def transform_oracle_gap(trials: int, rng: np.random.Generator, ks=(2, 3, 4, 5)) -> float:
    """Largest sup-norm gap between the closed-form noisy conditional and T^T g."""
    worst = 0.0
    for _ in range(trials):
        k = int(rng.choice(ks))
        g = random_simplex(k, rng)
        omega = rng.uniform(0, omega_bound(k))
        T = transition_matrix(NoiseModel.symmetric(omega, k))
        worst = max(worst, float(np.abs(noisy_conditional(g, omega) - marginalise(g, T)).max()))
    return worst


def sample_active_problem(rng, k: int, omega: float, n_range=(2, 5), tabular: bool = False):
    """Random problem plus noise that is active on at least one non-uniform point."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    problem = random_problem(rng, k, n)
    if tabular:
        # instance-dependent flip mass, with the first point pinned at ``omega``
        omegas = {p: float(rng.uniform(0, omega_bound(k))) for p in problem.points}
        omegas[problem.points[0]] = omega
        noise = NoiseModel.tabular(omegas, k)
    else:
        noise = NoiseModel.symmetric(omega, k)
    return problem, noise


def props_check(k: int, omega: float, trials: int, rng: np.random.Generator) -> dict:
    """Arg-max preservation, entropy increase and miscalibration of the noisy minimiser."""
    if omega <= 0:
        raise ValueError("props_check needs active noise (omega > 0)")
    agree, ties, ent, gaps, excess = [], True, [], [], []
    for t in range(trials):
        problem, noise = sample_active_problem(rng, k, omega, tabular=bool(t % 2))
        agree.append(decision_agreement(problem, noise))
        noisy = problem.noisy_g(noise)
        ties &= all(np.array_equal(tie_structure(a), tie_structure(b)) for a, b in zip(problem.g, noisy))
        clean_h, noisy_h = expected_entropy_pair(problem, noise)
        ent.append(noisy_h - clean_h)
        cmap = noisy_minimizer_calibration(problem, noise)
        gaps.append(cmap.max_gap)
        excess.append(cmap.top_label_excess())
    report = {
        "k": k,
        "omega": omega,
        "trials": trials,
        "decision_agreement": {"min": min(agree), "ties_preserved": bool(ties), "ok": min(agree) == 1.0 and bool(ties)},
        "entropy_increase": {"min": min(ent), "ok": min(ent) > 1e-9},
        "miscalibration": {"min_gap": min(gaps), "min_top_label_excess": min(excess),
                           "ok": min(gaps) > 0 and min(excess) > 0},
    }
    report["ok"] = all(report[key]["ok"] for key in ("decision_agreement", "entropy_increase", "miscalibration"))
    return report


def loss_check(loss: LossFunction, step: float, trials: int, rng: np.random.Generator,
               omega: float = 0.3, problem: DiscreteProblem = ROBUSTNESS_PROBLEM) -> dict:
    """Symmetry, properness verdict and robustness to symmetric noise on a binary problem."""
    sym, lo, hi = is_symmetric(loss, problem.k, rng)
    proper = properness_test(loss, trials, step, rng, k=problem.k)
    robust = robustness_test(loss, problem, NoiseModel.symmetric(omega, problem.k), step)
    return {
        "loss": loss.id,
        "step": step,
        "symmetric": sym,
        "symmetry_sum_range": [lo, hi],
        "properness": proper.verdict,
        "properness_detail": proper.to_dict(),
        "robust_symmetric_noise": robust.robust,
        "robustness_detail": robust.to_dict(),
        "ok": True,
    }


def dmi_check(trials: int, rng: np.random.Generator, omegas=(0.1, 0.3), n_range=(2, 6), tol: float = 1e-9) -> dict:
    """Closed-form DMI minimiser against vertex search, and the symmetric-noise offset."""
    matched, skipped, offset_err = 0, 0, 0.0
    for _ in range(trials):
        problem = random_problem(rng, 2, int(rng.integers(n_range[0], n_range[1] + 1)))
        closed = dmi_population_minimizer(problem)
        if closed.degenerate:
            skipped += 1
            continue
        _, best_tables = vertex_search(problem)
        if any(np.allclose(closed.f, t) or np.allclose(closed.f, t[:, ::-1]) for t in best_tables):
            matched += 1
        for omega in omegas:
            noise = NoiseModel.symmetric(omega, 2)
            tables = [np.column_stack([b, 1 - b]) for b in rng.uniform(size=(10, len(problem)))]
            tables = [t for t in tables if abs(np.linalg.det((t * problem.mu[:, None]).T @ problem.g)) > 1e-12]
            offs = noise_offsets(problem, noise, tables)
            offset_err = max(offset_err, float(np.abs(offs - symmetric_noise_offset(noise)).max(initial=0.0)))
    checked = trials - skipped
    return {
        "trials": trials,
        "degenerate_skipped": skipped,
        "minimizer_matches": matched,
        "minimizer_ok": matched == checked,
        "max_offset_error": offset_err,
        "offset_ok": offset_err <= tol,
        "ok": matched == checked and offset_err <= tol,
    }
