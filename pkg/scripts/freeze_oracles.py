"""Compute reference values by independent routes and freeze them to JSON.

Nothing here imports noisylab. Exact rationals (fractions) carry the linear
algebra, and 50-digit decimals the logarithms, so the frozen numbers do not
share code paths with the library they check.

    python scripts/freeze_oracles.py [--out tests/fixtures/oracles.json]
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
from decimal import Decimal, getcontext
from fractions import Fraction as F
from pathlib import Path

getcontext().prec = 50


def ln(x) -> Decimal:
    return Decimal(x.numerator).ln() - Decimal(x.denominator).ln() if isinstance(x, F) else Decimal(x).ln()


def entropy(p) -> Decimal:
    return -sum((Decimal(q.numerator) / Decimal(q.denominator)) * ln(q) for q in p if q != 0)


def transition(omega: F, k: int, y: int) -> list[F]:
    return [1 - omega if j == y else omega / (k - 1) for j in range(1, k + 1)]


def marginalise(g: list[F], omega: F) -> list[F]:
    """Sum over the clean label of P(noisy | clean) P(clean)."""
    k = len(g)
    rows = [transition(omega, k, y) for y in range(1, k + 1)]
    return [sum(g[y] * rows[y][j] for y in range(k)) for j in range(k)]


def group_conditional(mu, g, members):
    mass = sum(mu[i] for i in members)
    return [sum(mu[i] * g[i][j] for i in members) / mass for j in range(len(g[0]))]


def det2(m) -> F:
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]


def fl(x) -> float:
    return float(x)


def build() -> dict:
    out: dict[str, object] = {}
    out["entropy_068_032"] = fl(entropy([F(68, 100), F(32, 100)]))
    out["grid_count_k3_step05"] = math.comb(2 + 3 - 1, 3 - 1)
    out["grid_count_k2_step0001"] = math.comb(1000 + 1, 1)

    out["transition_k2_w02_y1"] = [fl(v) for v in transition(F(1, 5), 2, 1)]
    out["transition_k3_w03_y2"] = [fl(v) for v in transition(F(3, 10), 3, 2)]
    out["noisy_08_02_w02"] = [fl(v) for v in marginalise([F(4, 5), F(1, 5)], F(1, 5))]
    out["noisy_06_03_01_w03"] = [fl(v) for v in marginalise([F(6, 10), F(3, 10), F(1, 10)], F(3, 10))]
    # inverse: solve the 2x2 marginalisation for g given g~ = [0.68, 0.32]
    w = F(1, 5)
    a = (F(68, 100) - w) / (1 - 2 * w)
    out["clean_068_032_w02"] = [fl(a), fl(1 - a)]

    mu = [F(1, 2), F(1, 2)]
    g = [[F(9, 10), F(1, 10)], [F(1, 2), F(1, 2)]]
    cond = group_conditional(mu, g, [0, 1])
    out["calib_pooled_conditional"] = [fl(v) for v in cond]
    out["calib_constant_06_gap"] = fl(max(abs(cond[0] - F(6, 10)), abs(cond[1] - F(4, 10))))

    g_single = [F(4, 5), F(1, 5)]
    gt = marginalise(g_single, F(1, 5))
    out["noisy_minimizer_level"] = [fl(v) for v in gt]
    out["noisy_minimizer_gap"] = fl(max(abs(x - y) for x, y in zip(g_single, gt)))

    g2 = [[F(8, 10), F(2, 10)], [F(3, 10), F(7, 10)]]
    clean = sum(Decimal(1) / 2 * entropy(row) for row in g2)
    noisy = sum(Decimal(1) / 2 * entropy(marginalise(row, F(1, 5))) for row in g2)
    out["entropy_pair"] = [fl(clean), fl(noisy)]

    out["mae_07_03_y1"] = fl(abs(1 - F(7, 10)) + abs(0 - F(3, 10)))
    out["mae_risk_q10_g07"] = fl(F(7, 10) * 0 + F(3, 10) * 2)
    out["cce_symsum_05"] = fl(-(ln(F(1, 2)) + ln(F(1, 2))))
    out["cce_symsum_09"] = fl(-(ln(F(9, 10)) + ln(F(1, 10))))
    out["cce_risk_uniform"] = fl(-ln(F(1, 2)))

    out["dmi_loss_04_01"] = fl(-ln(det2([[F(4, 10), F(1, 10)], [F(1, 10), F(4, 10)]])))
    out["dmi_loss_diag"] = fl(-ln(det2([[F(1, 2), 0], [0, F(1, 2)]])))

    # prior-threshold example: maximise |E[f1(X)(g1(X) - prior)]| over vertex tables
    g1 = [F(3, 4), F(13, 20)]
    prior = sum(m * v for m, v in zip(mu, g1))
    scores = {bits: abs(sum(m * b * (v - prior) for m, b, v in zip(mu, bits, g1)))
              for bits in itertools.product((1, 0), repeat=2)}
    best = max(scores.values())
    out["dmi_prior"] = fl(prior)
    out["dmi_prior_argmax_tables"] = [list(b) for b, s in sorted(scores.items(), reverse=True) if s == best]

    alpha = F(1, 5)
    shifted = [(1 - 2 * alpha) * F(1) + alpha, (1 - 2 * alpha) * F(0) + alpha]
    out["csp_shifted_accuracy"] = [fl(v) for v in shifted]
    out["csp_gaps"] = [fl(abs(shifted[0] - 1)), fl(abs(shifted[1] - 0))]

    out["mlp_param_count_784_500_10"] = 784 * 500 + 500 + 500 * 10 + 10
    out["ece_conf09_acc06"] = fl(abs(F(6, 10) - F(9, 10)))
    return out


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "oracles.json"))
    args = parser.parse_args(argv)
    Path(args.out).write_text(json.dumps(build(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
