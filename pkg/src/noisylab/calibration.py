"""Exact calibration analysis on discrete problems and binned reliability for samples."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import argmax_class, entropy_rows
from .noise import NoiseModel, marginalise
from .problem import DiscreteProblem

LEVEL_DECIMALS = 12


@dataclass
class Level:
    value: np.ndarray
    mass: float
    conditional: np.ndarray

    @property
    def gap(self) -> float:
        return float(np.max(np.abs(self.conditional - self.value)))


@dataclass
class CalibrationMap:
    levels: list[Level]
    max_gap: float

    def top_label_excess(self) -> float:
        """max over levels of P(Y = M | f = v) - v_M, M the top class of v."""
        excess = []
        for lv in self.levels:
            m = argmax_class(lv.value) - 1
            excess.append(float(lv.conditional[m] - lv.value[m]))
        return max(excess)

    def to_dict(self) -> dict:
        return {
            "levels": [
                {"value": lv.value.tolist(), "mass": lv.mass, "conditional": lv.conditional.tolist(), "gap": lv.gap}
                for lv in self.levels
            ],
            "max_gap": self.max_gap,
        }

    def to_csv(self) -> str:
        rows = [
            (i + 1, lv.mass, _vec(lv.value), _vec(lv.conditional), lv.gap)
            for i, lv in enumerate(self.levels)
        ]
        return _csv(("level", "mass", "predicted", "empirical", "gap"), rows)


def _vec(v) -> str:
    return ";".join(repr(float(x)) for x in v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def exact_calibration_map(problem: DiscreteProblem, f) -> CalibrationMap:
    """Group support points by predicted vector and compare with P(Y | f(X) = v).

    Values are rounded to 12 decimals before grouping; zero-mass points are
    dropped since calibration is an almost-sure statement.
    """
    f = np.atleast_2d(np.asarray(f, dtype=np.float64))
    if f.shape != problem.g.shape:
        raise ValueError(f"prediction table shape {f.shape} does not match problem {problem.g.shape}")
    groups: dict[tuple, list[int]] = {}
    for i, row in enumerate(f):
        if problem.mu[i] > 0:
            groups.setdefault(tuple(np.round(row, LEVEL_DECIMALS)), []).append(i)
    levels = []
    for key in sorted(groups):
        idx = groups[key]
        mass = float(problem.mu[idx].sum())
        cond = problem.mu[idx] @ problem.g[idx] / mass
        levels.append(Level(np.array(key), mass, cond))
    return CalibrationMap(levels, max(lv.gap for lv in levels))


def noisy_minimizer_calibration(problem: DiscreteProblem, noise: NoiseModel) -> CalibrationMap:
    """Calibration of the noisy conditional table against the clean labels."""
    return exact_calibration_map(problem, problem.noisy_g(noise))


def expected_entropy_pair(problem: DiscreteProblem, noise: NoiseModel) -> tuple[float, float]:
    clean = float(problem.mu @ entropy_rows(problem.g))
    noisy = float(problem.mu @ entropy_rows(problem.noisy_g(noise)))
    return clean, noisy


def decision_agreement(problem: DiscreteProblem, noise: NoiseModel) -> float:
    """Mass of support points whose arg-max class survives the noise."""
    noisy = problem.noisy_g(noise)
    differ = np.array([argmax_class(a) != argmax_class(b) for a, b in zip(problem.g, noisy)])
    return 1.0 - float(problem.mu[differ].sum())


def transition_agreement(problem: DiscreteProblem, transition) -> float:
    """Negative control: agreement under an arbitrary row-stochastic transition.

    Not a simple non-uniform noise model; only used to show the arg-max
    preservation depends on that structure.
    """
    T = np.asarray(transition, dtype=np.float64)
    differ = np.array([argmax_class(row) != argmax_class(marginalise(row, T)) for row in problem.g])
    return 1.0 - float(problem.mu[differ].sum())


def tie_structure(p, tol: float = 1e-12) -> np.ndarray:
    """Boolean matrix of (approximately) equal entry pairs."""
    p = np.asarray(p, dtype=np.float64)
    return np.abs(p[:, None] - p[None, :]) <= tol


@dataclass
class Bin:
    lo: float
    hi: float
    count: int
    mean_confidence: float | None
    accuracy: float | None


@dataclass
class ReliabilityTable:
    bins: list[Bin]
    ece: float
    n: int = field(default=0)

    def to_dict(self) -> dict:
        return {"bins": [b.__dict__ for b in self.bins], "ece": self.ece, "n": self.n}

    def to_csv(self) -> str:
        rows = []
        for b in self.bins:
            gap = "" if b.count == 0 else abs(b.accuracy - b.mean_confidence)
            rows.append((f"[{b.lo:.6g},{b.hi:.6g})", b.count,
                         "" if b.mean_confidence is None else b.mean_confidence,
                         "" if b.accuracy is None else b.accuracy, gap))
        return _csv(("bin", "count", "predicted", "empirical", "gap"), rows)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def binned_reliability(probs, labels, n_bins: int = 15) -> ReliabilityTable:
    """Top-label reliability table with equal-width bins on [1/K, 1].

    ``probs`` is ``(n, K)``, ``labels`` 1-based. ECE is the count-weighted
    mean of |accuracy - mean confidence|.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    n, k = probs.shape
    if n == 0 or labels.size != n:
        raise ValueError("need a non-empty sample with one label per prediction")
    conf = probs.max(axis=1)
    correct = (probs.argmax(axis=1) + 1) == labels
    edges = np.linspace(1.0 / k, 1.0, n_bins + 1)
    width = edges[1] - edges[0]
    idx = np.clip(np.floor((conf - edges[0]) / width).astype(np.int64), 0, n_bins - 1)
    bins, ece = [], 0.0
    for b in range(n_bins):
        mask = idx == b
        c = int(mask.sum())
        if c:
            mc, acc = float(conf[mask].mean()), float(correct[mask].mean())
            ece += c / n * abs(acc - mc)
        else:
            mc = acc = None
        bins.append(Bin(float(edges[b]), float(edges[b + 1]), c, mc, acc))
    return ReliabilityTable(bins, float(ece), n)
