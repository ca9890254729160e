"""Command-line entry point.

Exit codes: 0 success, 1 a verification check failed, 2 usage error, 3 I/O error.
Every command given ``--out DIR`` writes its artifacts plus one
``manifest.json`` into that directory; ``noisylab replay`` reruns a manifest.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .audits import dmi_check, loss_check, props_check
from .calibration import binned_reliability, exact_calibration_map, noisy_minimizer_calibration
from .core import make_rng, prob_vector
from .datasets import IdxError, load_mnist, make_circles, make_noisy_dataset, read_csv, read_idx, to_csv
from .experiments import build_splits, circle_config, mnist_config
from .figures import write_metrics_figures
from .losses import analytic_minimizer, get_loss, minimizer_report, pointwise_minimizers
from .noise import NoiseModel, clean_conditional, flip_labels, noisy_conditional
from .problem import DiscreteProblem
from .trainer import ExperimentConfig, evaluate_model, forward, load_checkpoint, read_metrics_csv, train_run

log = logging.getLogger("noisylab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
MANIFEST = "manifest.json"
TRAIN_OVERRIDES = ("omega", "loss", "hidden", "activation", "epochs", "batch_size", "lr", "seed",
                   "init", "early_stopping", "eval_every", "n_bins")


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("NOISYLAB_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"NOISYLAB_SEED must be an integer, got {raw!r}") from None


def parse_vector(text: str) -> np.ndarray:
    try:
        return prob_vector([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad probability vector {text!r}: {exc}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Run:
    """Collects the artifacts of one command and writes its manifest."""

    def __init__(self, args, argv):
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.argv = list(argv)
        self.seed = getattr(args, "seed", None)
        self.started = datetime.now(timezone.utc).isoformat()
        self.outputs: list[str] = []
        self.inputs: dict = {}
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path | None:
        if self.out is None:
            return None
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.record(path)
        return path

    def record(self, path) -> None:
        rel = str(Path(path).relative_to(self.out))
        if rel not in self.outputs:
            self.outputs.append(rel)

    def emit(self, report: dict, name: str = "report.json") -> None:
        text = dump_json(report)
        if self.write(name, text) is None:
            sys.stdout.write(text)

    def config_hash(self) -> str:
        argv = _strip_out(self.argv)
        blob = json.dumps({"argv": argv, "inputs": self.inputs}, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def finish(self) -> None:
        if self.out is None:
            return
        manifest = {
            "command": self.argv,
            "config_hash": self.config_hash(),
            "seed": self.seed,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": sorted(self.outputs),
            "version": __version__,
        }
        (self.out / MANIFEST).write_text(dump_json(manifest))


def _strip_out(argv: list[str]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        out.append(tok)
    return out


def _input_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# noise ------------------------------------------------------------------

def cmd_noise_transform(args, run: Run) -> int:
    g = parse_vector(args.g)
    out = clean_conditional(g, args.omega) if args.inverse else noisy_conditional(g, args.omega)
    run.emit({"input": g, "omega": args.omega, "direction": "clean" if args.inverse else "noisy", "output": out})
    return EXIT_OK


def cmd_noise_flip(args, run: Run) -> int:
    if args.labels_file:
        run.inputs["labels"] = _input_digest(args.labels_file)
        labels = np.loadtxt(args.labels_file, dtype=np.int64, ndmin=1)
    else:
        labels = np.array([int(v) for v in args.labels.split(",")], dtype=np.int64)
    noisy = flip_labels(labels, NoiseModel.symmetric(args.omega, args.k), make_rng(args.seed))
    if run.out is None:
        sys.stdout.write(",".join(str(v) for v in noisy) + "\n")
    else:
        run.write("labels.csv", "label,clean_label\n" + "".join(f"{a},{b}\n" for a, b in zip(noisy, labels)))
        run.emit({"n": labels.size, "omega": args.omega, "k": args.k, "changed": int((noisy != labels).sum())})
    return EXIT_OK


# checks -----------------------------------------------------------------

def cmd_check_props(args, run: Run) -> int:
    report = props_check(args.k, args.omega, args.trials, make_rng(args.seed))
    run.emit(report)
    return EXIT_OK if report["ok"] else EXIT_FAIL


def cmd_check_loss(args, run: Run) -> int:
    report = loss_check(get_loss(args.loss), args.step, args.trials, make_rng(args.seed), omega=args.omega)
    run.emit(report)
    return EXIT_OK


def cmd_check_dmi(args, run: Run) -> int:
    report = dmi_check(args.trials, make_rng(args.seed))
    run.emit(report)
    return EXIT_OK if report["ok"] else EXIT_FAIL


# analysis on discrete problems -------------------------------------------

def _load_problem(args, run: Run) -> DiscreteProblem:
    if args.problem:
        run.inputs["problem"] = _input_digest(args.problem)
        return DiscreteProblem.from_json(Path(args.problem).read_text())
    if args.g:
        return DiscreteProblem.build([1.0], [parse_vector(args.g)])
    raise UsageError("give --problem FILE or --g VECTOR")


def cmd_minimize(args, run: Run) -> int:
    loss = get_loss(args.loss)
    problem = _load_problem(args, run)
    noise = NoiseModel.symmetric(args.omega, problem.k) if args.omega else None
    report = minimizer_report(loss, problem, args.step, noise).to_dict()
    analytic = {}
    for x, row in zip(problem.points, problem.g):
        try:
            analytic[x] = analytic_minimizer(loss, row)
        except ValueError:
            analytic[x] = None
    report["analytic"] = analytic
    report["grid_counts"] = {x: len(pointwise_minimizers(loss, row, args.step)) for x, row in zip(problem.points, problem.g)}
    run.emit(report)
    return EXIT_OK


def cmd_calibrate(args, run: Run) -> int:
    if args.checkpoint:
        if not args.config:
            raise UsageError("--checkpoint needs --config to rebuild the test split")
        run.inputs["checkpoint"] = _input_digest(args.checkpoint)
        config = _read_config(args.config, run)
        model, _ = load_checkpoint(args.checkpoint)
        test = build_splits(config).test
        table = binned_reliability(forward(model, test.features), test.labels, args.bins)
        run.write("reliability.csv", table.to_csv())
        report = dict(table.to_dict(), metrics=evaluate_model(model, test, args.bins))
        run.emit(report)
        return EXIT_OK
    problem = _load_problem(args, run)
    if args.predictions:
        run.inputs["predictions"] = _input_digest(args.predictions)
        cmap = exact_calibration_map(problem, np.array(json.loads(Path(args.predictions).read_text())))
    else:
        cmap = noisy_minimizer_calibration(problem, NoiseModel.symmetric(args.omega, problem.k))
    run.write("calibration.csv", cmap.to_csv())
    report = dict(cmap.to_dict(), top_label_excess=cmap.top_label_excess())
    run.emit(report)
    return EXIT_OK


# data -------------------------------------------------------------------

def cmd_data_circles(args, run: Run) -> int:
    ds = make_circles(args.n, args.sigma, args.factor, make_rng(args.seed))
    if args.omega:
        ds = make_noisy_dataset(ds, NoiseModel.symmetric(args.omega, 2), make_rng(np.random.SeedSequence([args.seed, 1])), args.seed)
    if run.out is None:
        raise UsageError("data circles needs --out")
    to_csv(ds, run.out / "data.csv")
    run.record(run.out / "data.csv")
    run.emit({"n": len(ds), "flip_fraction": ds.flip_fraction(), "meta": ds.meta}, "summary.json")
    return EXIT_OK


def cmd_data_idx(args, run: Run) -> int:
    run.inputs["idx"] = _input_digest(args.path)
    arr = read_idx(args.path)
    summary = {"path": str(args.path), "shape": list(arr.shape), "dtype": str(arr.dtype),
               "min": arr.min(), "max": arr.max()}
    if arr.ndim == 1:
        summary["counts"] = {int(c): int((arr == c).sum()) for c in np.unique(arr)}
    run.emit(summary, "summary.json")
    return EXIT_OK


def cmd_data_inject(args, run: Run) -> int:
    if run.out is None:
        raise UsageError("data inject needs --out")
    if args.mnist:
        ds = load_mnist(args.mnist, args.part)
    elif args.csv:
        run.inputs["csv"] = _input_digest(args.csv)
        ds = read_csv(args.csv, args.k)
    else:
        raise UsageError("give --csv FILE or --mnist DIR")
    noisy = make_noisy_dataset(ds, NoiseModel.symmetric(args.omega, ds.k), make_rng(args.seed), args.seed)
    if args.labels_only:
        run.write("labels.csv", "label,clean_label\n" + "".join(f"{a},{b}\n" for a, b in zip(noisy.labels, noisy.clean_labels)))
    else:
        to_csv(noisy, run.out / "data.csv")
        run.record(run.out / "data.csv")
    run.emit({"n": len(noisy), "omega": args.omega, "flip_fraction": noisy.flip_fraction()}, "summary.json")
    return EXIT_OK


# training ---------------------------------------------------------------

PRESETS = {"circles": circle_config, "mnist": mnist_config}


def _read_config(path, run: Run) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    run.inputs["config"] = raw
    try:
        return ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _base_config(args, run: Run) -> ExperimentConfig:
    if args.config:
        return _read_config(args.config, run)
    if args.preset:
        return PRESETS[args.preset]()
    raise UsageError("give --config FILE or --preset NAME")


def _apply(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    unknown = set(overrides) - set(config.to_dict())
    if unknown:
        raise UsageError(f"unknown config fields {sorted(unknown)}")
    return ExperimentConfig.from_dict(dict(config.to_dict(), **overrides))


def _flag_overrides(args) -> dict:
    return {name: getattr(args, name) for name in TRAIN_OVERRIDES if getattr(args, name, None) is not None}


def _train_one(config: ExperimentConfig, out: Path) -> dict:
    result = train_run(config, build_splits(config), out)
    (out / "config.json").write_text(dump_json(config.to_dict()))
    final = result.metrics[-1] if result.metrics else None
    return {
        "config_hash": config.config_hash(),
        "epochs_run": final.epoch if final else 0,
        "best_epoch": result.best_epoch,
        "stopped_epoch": result.stopped_epoch,
        "final": final.__dict__ if final else None,
    }


def _collect(run: Run, directory: Path) -> None:
    for path in sorted(directory.rglob("*")):
        if path.is_file() and path.name != MANIFEST:
            run.record(path)


def cmd_train(args, run: Run) -> int:
    if run.out is None:
        raise UsageError("train needs --out")
    base = _apply(_base_config(args, run), _flag_overrides(args))
    if args.seed is None and "seed" not in run.inputs.get("config", {}):
        base = _apply(base, {"seed": default_seed()})
    run.seed = base.seed
    if not args.grid:
        summary = _train_one(base, run.out)
        _collect(run, run.out)
        run.emit(summary, "summary.json")
        return EXIT_OK
    try:
        grid = json.loads(Path(args.grid).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.grid}: invalid JSON ({exc})") from None
    if not isinstance(grid, list) or not all(isinstance(g, dict) for g in grid):
        raise UsageError("--grid must hold a JSON list of override objects")
    run.inputs["grid"] = grid
    # flags still win over grid entries
    configs = [_apply(_apply(base, entry), _flag_overrides(args)) for entry in grid]
    dirs = [run.out / f"run_{i:03d}" for i in range(len(configs))]
    for d in dirs:
        d.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        summaries = list(pool.map(_train_one, configs, dirs))
    for d, cfg in zip(dirs, configs):
        sub = {"command": run.argv, "config_hash": cfg.config_hash(), "seed": cfg.seed, "version": __version__,
               "outputs": sorted(str(p.relative_to(d)) for p in d.rglob("*") if p.is_file())}
        (d / MANIFEST).write_text(dump_json(sub))
    _collect(run, run.out)
    run.emit({"runs": summaries}, "summary.json")
    return EXIT_OK


def cmd_report(args, run: Run) -> int:
    rows = []
    for d in args.runs:
        csv_path = Path(d) / "metrics.csv"
        metrics = read_metrics_csv(csv_path)
        final = metrics[-1] if metrics else {}
        best_acc = max((m["test_acc"] for m in metrics), default=None)
        rows.append({"run": str(d), "evaluations": len(metrics), "final": final, "max_test_acc": best_acc})
    if run.out is not None:
        cols = ("run", "evaluations", "epoch", "train_acc", "train_loss", "test_acc", "max_test_acc", "test_ece", "test_entropy")
        lines = [",".join(cols)]
        for r in rows:
            f = r["final"]
            vals = [r["run"], r["evaluations"], f.get("epoch"), f.get("train_acc"), f.get("train_loss"),
                    f.get("test_acc"), r["max_test_acc"], f.get("test_ece"), f.get("test_entropy")]
            lines.append(",".join("" if v is None else str(v) for v in vals))
        run.write("report.csv", "\n".join(lines) + "\n")
    run.emit({"runs": rows})
    return EXIT_OK


def cmd_figures(args, run: Run) -> int:
    if run.out is None:
        raise UsageError("figures needs --out")
    run.inputs["metrics"] = _input_digest(args.metrics)
    for path in write_metrics_figures(args.metrics, run.out, args.prefix):
        run.record(path)
    return EXIT_OK


def cmd_replay(args, run: Run) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    argv = _strip_out(manifest["command"]) + ["--out", str(args.out)]
    return main(argv)


# parser -----------------------------------------------------------------

def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help="defaults to $NOISYLAB_SEED or 0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisylab", description="Label-noise analysis toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    noise = sub.add_parser("noise", help="noise transforms and label flipping").add_subparsers(dest="action", required=True)
    p = noise.add_parser("transform", help="clean -> noisy conditional (or back with --inverse)")
    p.add_argument("--g", required=True, help="comma-separated probability vector")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_noise_transform)
    p = noise.add_parser("flip", help="flip labels with symmetric noise")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--labels", help="comma-separated 1-based labels")
    src.add_argument("--labels-file", help="one label per line")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--omega", type=float, required=True)
    _add_seed(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_noise_flip)

    check = sub.add_parser("check", help="randomised verification suites").add_subparsers(dest="action", required=True)
    p = check.add_parser("props", help="arg-max, entropy and calibration claims on random problems")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--omega", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=500)
    _add_seed(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_props)
    p = check.add_parser("loss", help="symmetry, properness and robustness verdicts for a loss")
    p.add_argument("--loss", required=True)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--omega", type=float, default=0.3)
    _add_seed(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_loss)
    p = check.add_parser("dmi", help="closed-form DMI minimiser and noise offset")
    p.add_argument("--trials", type=int, default=50)
    _add_seed(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_dmi)

    p = sub.add_parser("minimize", help="grid and analytic point-wise minimisers")
    p.add_argument("--loss", required=True)
    p.add_argument("--g")
    p.add_argument("--problem", help="JSON problem {points, mu, g}")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("calibrate", help="exact calibration map or binned reliability of a checkpoint")
    p.add_argument("--problem")
    p.add_argument("--g")
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--predictions", help="JSON per-point prediction table")
    p.add_argument("--checkpoint")
    p.add_argument("--config")
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    data = sub.add_parser("data", help="dataset generation and ingestion").add_subparsers(dest="action", required=True)
    p = data.add_parser("circles")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--factor", type=float, default=0.5)
    p.add_argument("--omega", type=float, default=0.0)
    _add_seed(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_data_circles)
    p = data.add_parser("idx")
    p.add_argument("--path", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_data_idx)
    p = data.add_parser("inject")
    p.add_argument("--csv")
    p.add_argument("--mnist", help="MNIST directory")
    p.add_argument("--part", default="train", choices=("train", "t10k"))
    p.add_argument("--k", type=int)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--labels-only", action="store_true")
    _add_seed(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_data_inject)

    p = sub.add_parser("train", help="train an MLP from a JSON config; flags override the file")
    p.add_argument("--config")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--grid", help="JSON file holding a list of override objects, one run each")
    p.add_argument("--workers", type=int, default=2)
    p.add_argument("--omega", type=float)
    p.add_argument("--loss", choices=("cce", "mae"))
    p.add_argument("--hidden", type=int)
    p.add_argument("--activation", choices=("relu", "leaky_relu"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--init")
    p.add_argument("--early-stopping", dest="early_stopping", type=float)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--n-bins", dest="n_bins", type=int)
    _add_seed(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="summarise finished run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("figures", help="SVG accuracy/loss/calibration panels from a metrics CSV")
    p.add_argument("--metrics", required=True)
    p.add_argument("--prefix", default="")
    p.add_argument("--out")
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if hasattr(args, "seed") and args.seed is None and args.func is not cmd_train:
            args.seed = default_seed()
        if args.func is cmd_replay:
            return cmd_replay(args, None)
        run = Run(args, argv)
        code = args.func(args, run)
        run.finish()
        return code
    except UsageError as exc:
        print(f"noisylab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, IdxError) as exc:
        print(f"noisylab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"noisylab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
