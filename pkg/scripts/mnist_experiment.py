"""Desk-scale MNIST overfitting study: CCE, MAE from scratch, and MAE from a CCE checkpoint.

Runs (8,000 train / 2,000 val / 2,000 test, hidden 128, lr 0.005, batch 100):
  a  CCE, omega 0.5, 300 epochs
  b  MAE, omega 0.3, 1,500 epochs, random init
  pre  CCE, omega 0.3, 300 epochs (the checkpoint for run c)
  c  MAE, omega 0.3, 1,500 epochs, initialised from pre

    python scripts/mnist_experiment.py --out results/mnist [--mnist data/mnist] [--seed 0]
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from noisylab.experiments import DEFAULT_MNIST_DIR, mnist_config, run_config
from noisylab.figures import metrics_chart, write_metrics_figures
from noisylab.trainer import read_metrics_csv


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results/mnist")
    parser.add_argument("--mnist", default=str(DEFAULT_MNIST_DIR))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scale", type=float, default=1.0, help="multiply all epoch counts (for quick looks)")
    args = parser.parse_args(argv)
    out = Path(args.out)

    def epochs(n):
        return max(1, int(round(n * args.scale)))

    plan = [
        ("a", mnist_config("cce", 0.5, epochs(300), args.seed, path=args.mnist)),
        ("b", mnist_config("mae", 0.3, epochs(1500), args.seed, path=args.mnist)),
        ("pre", mnist_config("cce", 0.3, epochs(300), args.seed, path=args.mnist)),
        ("c", mnist_config("mae", 0.3, epochs(1500), args.seed, init=str(out / "pre" / "final.ckpt"), path=args.mnist)),
    ]
    timings = {}
    for name, cfg in plan:
        start = time.perf_counter()
        run_config(cfg, out / name)
        timings[name] = time.perf_counter() - start
        write_metrics_figures(out / name / "metrics.csv", out / name / "figures")
        final = read_metrics_csv(out / name / "metrics.csv")[-1]
        print(f"{name}: {timings[name]:.0f}s, final train acc {final['train_acc']:.3f}, "
              f"train loss {final['train_loss']:.4f}, test acc {final['test_acc']:.3f}")

    csvs = {name: str(out / name / "metrics.csv") for name in ("b", "c")}
    (out / "mae_test_accuracy.svg").write_text(metrics_chart(csvs, ["test_acc"], "MAE: random vs CCE init", "test accuracy"))
    (out / "mae_train_loss.svg").write_text(metrics_chart(csvs, ["train_loss"], "MAE: random vs CCE init", "train loss"))

    a, b, c = (read_metrics_csv(out / n / "metrics.csv") for n in ("a", "b", "c"))
    running, shortfall = 0.0, 0.0
    for r in b:
        running = max(running, r["test_acc"])
        if r["epoch"] > 0.75 * b[-1]["epoch"]:
            shortfall = max(shortfall, running - r["test_acc"])
    summary = {
        "timings_s": timings,
        "a_final_train_acc": a[-1]["train_acc"],
        "a_test_drop": max(r["test_acc"] for r in a) - a[-1]["test_acc"],
        "b_final_quartile_shortfall": shortfall,
        "b_final": b[-1],
        "c_final": c[-1],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
