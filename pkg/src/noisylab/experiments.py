"""Experiment protocols: split construction and the circle and MNIST presets."""
from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

import numpy as np

from .datasets import LabeledDataset, load_mnist, make_circles, make_noisy_dataset, split
from .noise import NoiseModel
from .trainer import DataSplits, ExperimentConfig, TrainResult, seed_streams, train_run

DEFAULT_MNIST_DIR = Path(__file__).resolve().parents[2] / "data" / "mnist"


def circle_dataset_spec(n_train=5000, n_val=1000, n_test=1000, noise_sigma=0.1, factor=0.5) -> dict:
    return {"name": "circles", "n_train": n_train, "n_val": n_val, "n_test": n_test,
            "noise_sigma": noise_sigma, "factor": factor}


def mnist_dataset_spec(path=None, n_train=8000, n_val=2000, n_test=2000) -> dict:
    return {"name": "mnist", "path": str(path or DEFAULT_MNIST_DIR), "n_train": n_train,
            "n_val": n_val, "n_test": n_test}


def circle_config(omega: float = 0.0, seed: int = 0, **overrides) -> ExperimentConfig:
    """Hidden 50, ReLU, learning rate 0.1, batch 100, early stopping at 10%."""
    base = dict(dataset=circle_dataset_spec(), omega=omega, loss="cce", hidden=50, activation="relu",
                epochs=300, batch_size=100, lr=0.1, seed=seed, early_stopping=0.10, eval_every=1)
    base.update(overrides)
    return ExperimentConfig(**base)


def mnist_config(loss: str = "cce", omega: float = 0.0, epochs: int = 300, seed: int = 0,
                 init: str = "random", path=None, **overrides) -> ExperimentConfig:
    """Hidden 128, leaky ReLU, learning rate 0.005, batch 100, no early stopping.

    CCE runs are evaluated every epoch, MAE runs every 10th.
    """
    base = dict(dataset=mnist_dataset_spec(path), omega=omega, loss=loss, hidden=128,
                activation="leaky_relu", epochs=epochs, batch_size=100, lr=0.005, seed=seed,
                init=init, eval_every=1 if loss == "cce" else 10)
    base.update(overrides)
    return ExperimentConfig(**base)


@lru_cache(maxsize=4)
def _mnist_parts(path: str) -> tuple[LabeledDataset, LabeledDataset]:
    return load_mnist(path, "train"), load_mnist(path, "t10k")


def _noisy(ds: LabeledDataset, omega: float, rng) -> LabeledDataset:
    return make_noisy_dataset(ds, NoiseModel.symmetric(omega, ds.k), rng)


def build_splits(config: ExperimentConfig) -> DataSplits:
    """Train/val/test data for a config; train and val labels get symmetric noise, test stays clean."""
    spec = config.dataset
    streams = seed_streams(config.seed)
    data_rng, noise_rng = streams["data"], streams["noise"]
    name = spec.get("name")
    if name == "circles":
        sigma, factor = spec["noise_sigma"], spec["factor"]
        train, val, test = (make_circles(spec[key], sigma, factor, data_rng) for key in ("n_train", "n_val", "n_test"))
    elif name == "mnist":
        full, t10k = _mnist_parts(str(spec["path"]))
        train, val, _ = split(full, (spec["n_train"], spec["n_val"], 0), data_rng)
        (test,) = split(t10k, (spec["n_test"],), data_rng)
    else:
        raise ValueError(f"unknown dataset {name!r}")
    return DataSplits(_noisy(train, config.omega, noise_rng), _noisy(val, config.omega, noise_rng), test)


def run_config(config: ExperimentConfig, out_dir=None, on_record=None) -> TrainResult:
    """Build the splits, train, and (with ``out_dir``) write config.json next to the run artifacts."""
    result = train_run(config, build_splits(config), out_dir, on_record)
    if out_dir is not None:
        Path(out_dir, "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return result


def accuracy_series(result: TrainResult) -> tuple[np.ndarray, np.ndarray]:
    epochs = np.array([r.epoch for r in result.metrics])
    return epochs, np.array([r.test_acc for r in result.metrics])
