"""One-hidden-layer softmax MLP, hand-written backprop, ADAM and the training loop."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .calibration import binned_reliability
from .core import entropy_rows
from .datasets import LabeledDataset

log = logging.getLogger(__name__)

LEAKY_SLOPE = 0.01
CCE_FLOOR = 1e-12
TRAINER_LOSSES = ("cce", "mae")
METRICS_HEADER = ("epoch", "train_acc", "train_loss", "val_loss", "test_acc", "test_loss", "test_ece", "test_entropy")
CKPT_MAGIC = b"NLCKPT01"


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    activation: str = "leaky_relu"
    slope: float = LEAKY_SLOPE

    def __post_init__(self):
        if self.activation not in ("relu", "leaky_relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        d, h = self.W1.shape
        if self.b1.shape != (h,) or self.W2.shape[0] != h or self.b2.shape != (self.W2.shape[1],):
            raise ValueError("inconsistent parameter shapes")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.W1.shape[0], self.W1.shape[1], self.W2.shape[1]

    @property
    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "MlpModel":
        return MlpModel(*(p.copy() for p in self.params), activation=self.activation, slope=self.slope)


def mlp_init(dims, activation: str, rng: np.random.Generator, scale: float = 1.0) -> MlpModel:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) times ``scale``; zero biases."""
    d, h, k = (int(v) for v in dims)
    if min(d, h, k) < 1:
        raise ValueError(f"dims must be positive, got {dims}")
    W1 = rng.uniform(-1, 1, size=(d, h)) * scale / np.sqrt(d)
    W2 = rng.uniform(-1, 1, size=(h, k)) * scale / np.sqrt(h)
    return MlpModel(W1, np.zeros(h), W2, np.zeros(k), activation=activation)


def _activate(model: MlpModel, H: np.ndarray) -> np.ndarray:
    if model.activation == "relu":
        return np.maximum(H, 0.0)
    return np.where(H > 0, H, model.slope * H)


def _activate_grad(model: MlpModel, H: np.ndarray) -> np.ndarray:
    low = 0.0 if model.activation == "relu" else model.slope
    return np.where(H > 0, 1.0, low)


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _forward(model: MlpModel, X: np.ndarray):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.W1.shape[0]:
        raise ValueError(f"expected features of width {model.W1.shape[0]}, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input features")
    H = X @ model.W1 + model.b1
    A = _activate(model, H)
    return X, H, A, softmax(A @ model.W2 + model.b2)


def forward(model: MlpModel, X: np.ndarray) -> np.ndarray:
    return _forward(model, X)[3]


def batch_losses(P: np.ndarray, labels: np.ndarray, loss_id: str) -> np.ndarray:
    rows = np.arange(labels.size)
    if loss_id == "cce":
        return -np.log(np.maximum(P[rows, labels - 1], CCE_FLOOR))
    if loss_id == "mae":
        E = np.zeros_like(P)
        E[rows, labels - 1] = 1.0
        return np.abs(E - P).sum(axis=1)
    raise ValueError(f"trainer supports {TRAINER_LOSSES}, not {loss_id!r}")


def loss_and_grad(model: MlpModel, X: np.ndarray, labels: np.ndarray, loss_id: str):
    """Mean batch loss and its exact gradients [dW1, db1, dW2, db2]."""
    labels = np.asarray(labels, dtype=np.int64)
    X, H, A, P = _forward(model, X)
    n = labels.size
    rows = np.arange(n)
    E = np.zeros_like(P)
    E[rows, labels - 1] = 1.0
    loss = float(batch_losses(P, labels, loss_id).mean())
    if loss_id == "cce":
        dZ = (P - E) / n
    else:
        # d/dP of sum_k |e_k - p_k|, pulled back through the softmax Jacobian
        dP = np.sign(P - E)
        dZ = P * (dP - (P * dP).sum(axis=1, keepdims=True)) / n
    dW2 = A.T @ dZ
    db2 = dZ.sum(axis=0)
    dH = (dZ @ model.W2.T) * _activate_grad(model, H)
    dW1 = X.T @ dH
    db1 = dH.sum(axis=0)
    return loss, [dW1, db1, dW2, db2]


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr: float, **kw) -> "AdamState":
        return cls(lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **kw)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> AdamState:
    """Bias-corrected ADAM update, applied to ``params`` in place."""
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            bad = int(np.size(g) - np.isfinite(g).sum())
            raise NonFiniteGradientError(f"step {state.t + 1}: parameter {i} has {bad} non-finite gradient entries")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


@dataclass
class ExperimentConfig:
    dataset: dict[str, Any]
    omega: float = 0.0
    loss: str = "cce"
    hidden: int = 50
    activation: str = "leaky_relu"
    epochs: int = 10
    batch_size: int = 100
    lr: float = 0.005
    seed: int = 0
    init: str = "random"
    early_stopping: float | None = None
    eval_every: int = 1
    n_bins: int = 15

    def __post_init__(self):
        if self.loss not in TRAINER_LOSSES:
            raise ValueError(f"trainer supports {TRAINER_LOSSES}, not {self.loss!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.eval_every < 1 or self.hidden < 1:
            raise ValueError("epochs >= 0, batch_size >= 1, eval_every >= 1 and hidden >= 1 required")
        if self.early_stopping is not None and self.early_stopping < 0:
            raise ValueError("early-stopping threshold must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class DataSplits:
    train: LabeledDataset
    val: LabeledDataset | None
    test: LabeledDataset


@dataclass
class MetricsRecord:
    epoch: int
    train_acc: float
    train_loss: float
    val_loss: float | None
    test_acc: float
    test_loss: float
    test_ece: float
    test_entropy: float

    def row(self) -> list[str]:
        return ["" if v is None else (str(v) if isinstance(v, int) else repr(float(v)))
                for v in (getattr(self, name) for name in METRICS_HEADER)]


@dataclass
class TrainResult:
    model: MlpModel
    metrics: list[MetricsRecord]
    final_model: MlpModel
    best_epoch: int | None = None
    stopped_epoch: int | None = None
    checkpoints: dict[str, str] = field(default_factory=dict)


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Named independent streams for one run: data, noise, init and shuffle."""
    root = np.random.SeedSequence(int(seed))
    names = ("data", "noise", "init", "shuffle")
    return {name: np.random.Generator(np.random.PCG64(s)) for name, s in zip(names, root.spawn(len(names)))}


def mean_loss(model: MlpModel, data: LabeledDataset, loss_id: str) -> float:
    return float(batch_losses(forward(model, data.features), data.labels, loss_id).mean())


def evaluate_model(model: MlpModel, data: LabeledDataset, n_bins: int = 15) -> dict[str, float]:
    """Accuracy, mean CCE and MAE, top-label ECE and mean predictive entropy."""
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    P = forward(model, data.features)
    return {
        "accuracy": float(np.mean(P.argmax(axis=1) + 1 == data.labels)),
        "loss_cce": float(batch_losses(P, data.labels, "cce").mean()),
        "loss_mae": float(batch_losses(P, data.labels, "mae").mean()),
        "ece": binned_reliability(P, data.labels, n_bins).ece,
        "entropy": float(entropy_rows(P).mean()),
    }


def _record(epoch, model, config, data: DataSplits, val_loss) -> MetricsRecord:
    train_P = forward(model, data.train.features)
    test = evaluate_model(model, data.test, config.n_bins)
    return MetricsRecord(
        epoch=epoch,
        train_acc=float(np.mean(train_P.argmax(axis=1) + 1 == data.train.labels)),
        train_loss=float(batch_losses(train_P, data.train.labels, config.loss).mean()),
        val_loss=val_loss,
        test_acc=test["accuracy"],
        test_loss=test[f"loss_{config.loss}"],
        test_ece=test["ece"],
        test_entropy=test["entropy"],
    )


def initial_model(config: ExperimentConfig, d: int, k: int, rng: np.random.Generator) -> MlpModel:
    if config.init == "random":
        return mlp_init((d, config.hidden, k), config.activation, rng)
    model, _ = load_checkpoint(config.init)
    if model.dims != (d, config.hidden, k):
        raise ValueError(f"checkpoint dims {model.dims} do not match data/config {(d, config.hidden, k)}")
    return model


def train_run(
    config: ExperimentConfig,
    data: DataSplits,
    out_dir=None,
    on_record: Callable[[MetricsRecord], None] | None = None,
) -> TrainResult:
    """Mini-batch ADAM training with optional early stopping.

    With early stopping, training halts the first time the validation loss
    exceeds ``(1 + threshold)`` times its running minimum and the
    lowest-validation-loss snapshot is returned.
    """
    train = data.train
    if config.batch_size > len(train):
        raise ValueError(f"batch size {config.batch_size} exceeds {len(train)} training rows")
    if config.early_stopping is not None and (data.val is None or len(data.val) == 0):
        raise ValueError("early stopping needs a validation split")
    if train.k != data.test.k:
        raise ValueError("train and test class counts differ")
    streams = seed_streams(config.seed)
    model = initial_model(config, train.features.shape[1], train.k, streams["init"])
    shuffle = streams["shuffle"]
    state = AdamState.for_params(model.params, config.lr)
    metrics: list[MetricsRecord] = []
    best, best_val, best_epoch, stopped = None, np.inf, None, None
    n = len(train)

    for epoch in range(1, config.epochs + 1):
        perm = shuffle.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            _, grads = loss_and_grad(model, train.features[idx], train.labels[idx], config.loss)
            adam_step(state, model.params, grads)

        val_loss = None
        stop = False
        if data.val is not None and len(data.val):
            if config.early_stopping is not None or epoch % config.eval_every == 0 or epoch == config.epochs:
                val_loss = mean_loss(model, data.val, config.loss)
        if config.early_stopping is not None:
            if val_loss < best_val:
                best, best_val, best_epoch = model.copy(), val_loss, epoch
            elif val_loss > (1.0 + config.early_stopping) * best_val:
                stop = True
        if epoch % config.eval_every == 0 or epoch == config.epochs or stop:
            rec = _record(epoch, model, config, data, val_loss)
            metrics.append(rec)
            if on_record:
                on_record(rec)
        if stop:
            stopped = epoch
            log.info("early stop at epoch %d (best %d, val %.4f)", epoch, best_epoch, best_val)
            break

    final = model
    chosen = best if best is not None else model
    result = TrainResult(chosen, metrics, final, best_epoch, stopped)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = {"seed": config.seed, "config_hash": config.config_hash()}
        save_checkpoint(out / "final.ckpt", final, header)
        save_checkpoint(out / "best.ckpt", chosen, dict(header, epoch=best_epoch))
        write_metrics_csv(metrics, out / "metrics.csv")
        result.checkpoints = {"final": str(out / "final.ckpt"), "best": str(out / "best.ckpt")}
    return result


def write_metrics_csv(records: list[MetricsRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for rec in records:
            w.writerow(rec.row())


def read_metrics_csv(path) -> list[dict[str, float | None]]:
    with open(path, newline="") as fh:
        return [
            {k: (None if v == "" else (int(v) if k == "epoch" else float(v))) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


def save_checkpoint(path, model: MlpModel, header: dict | None = None) -> None:
    """Write ``NLCKPT01`` | u32 LE header length | JSON header | float64 LE payload.

    The payload is W1 (d x h), b1 (h), W2 (h x K), b2 (K), each row-major.
    """
    d, h, k = model.dims
    head = dict(header or {}, dims=[d, h, k], activation=model.activation, slope=model.slope)
    blob = json.dumps(head, sort_keys=True).encode()
    payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params)
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC + struct.pack("<I", len(blob)) + blob + payload)


def load_checkpoint(path) -> tuple[MlpModel, dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a noisylab checkpoint")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + hlen])
    d, h, k = header["dims"]
    flat = np.frombuffer(raw[12 + hlen:], dtype="<f8").astype(np.float64)
    shapes = [(d, h), (h,), (h, k), (k,)]
    need = sum(int(np.prod(s)) for s in shapes)
    if flat.size != need:
        raise ValueError(f"{path}: payload holds {flat.size} floats, dims need {need}")
    parts, start = [], 0
    for s in shapes:
        size = int(np.prod(s))
        parts.append(flat[start:start + size].reshape(s).copy())
        start += size
    return MlpModel(*parts, activation=header["activation"], slope=header["slope"]), header
