"""Desk-scale MLP training driver.

This exists to make the trainability effect observable on a laptop: at high
sparsity, raising the fixed-point variance q* of the initialisation should
make a deep sparse MLP reach a given training loss in fewer steps.  It is a
plain numpy implementation: cross-entropy, shuffled minibatch SGD and
nothing else, so the initialisation is the only thing under study.

Conventions carried over from the theory side:

* each input vector is normalised to mean zero and variance q*,
* the first layer consumes the raw (unactivated) input, so it uses a
  variance-preserving 1/fan_in weight law with zero biases; every later
  layer consumes activation outputs and uses weights N(0, sw2 / fan_in)
  and biases N(0, sb2),
* the sparsifying activation is applied to every pre-activation except the
  final layer's, which feeds the softmax directly,
* kink subgradients are 0, matching the activation derivative convention.

A non-finite loss raises nothing: training halts, the report carries a
divergence flag and whatever history accumulated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .solver import EocInit

SYNTHETIC_BLOBS = "synthetic-blobs"
SMALL_DIGITS = "small-digits"
DATASETS = (SYNTHETIC_BLOBS, SMALL_DIGITS)


def _rng(seed: int, tag: int) -> np.random.Generator:
    key = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(tag))
    return np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64)))


@dataclass(frozen=True)
class TrainConfig:
    init: EocInit
    depth: int
    width: int
    epochs: int
    lr: float
    batch: int
    seed: int
    dataset: str = SYNTHETIC_BLOBS
    data_csv: str | None = None
    n_samples: int = 2000
    input_dim: int = 64
    n_classes: int = 10

    def __post_init__(self):
        if self.depth < 2:
            raise ValueError("depth must be at least 2 (first affine plus classifier)")
        if self.width < 2 or self.batch < 1 or self.epochs < 1:
            raise ValueError("width, batch and epochs must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.dataset == SMALL_DIGITS and not self.data_csv:
            raise ValueError("small-digits requires data_csv")

    def to_dict(self) -> dict:
        return {
            "init": self.init.to_dict(),
            "depth": self.depth,
            "width": self.width,
            "epochs": self.epochs,
            "lr": self.lr,
            "batch": self.batch,
            "seed": self.seed,
            "dataset": self.dataset,
            "data_csv": self.data_csv,
            "n_samples": self.n_samples,
            "input_dim": self.input_dim,
            "n_classes": self.n_classes,
        }


# --------------------------------------------------------------------------
# datasets
# --------------------------------------------------------------------------

def make_blobs(seed: int, n_samples: int, dim: int, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian mixture with one unit-covariance blob per class.

    Class centres sit at twice the within-class spread, so the task is easy
    in the Bayes sense; any difficulty in fitting it comes from propagating
    signal through the depth of the stack, which is the point of the demo.
    """
    rng = _rng(seed, 1000)
    means = rng.normal(0.0, 2.0, size=(n_classes, dim))
    labels = rng.integers(0, n_classes, size=n_samples)
    x = means[labels] + rng.normal(0.0, 1.0, size=(n_samples, dim))
    return x, labels


def load_digits_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Load the 8x8 grayscale digit CSV.

    Schema: header ``label,pixel_0,...,pixel_63``; labels are integers in
    [0, 9] and pixels floats in [0, 16].
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["label"] + [f"pixel_{i}" for i in range(64)]
        if header != expected:
            raise ValueError("digit CSV header does not match label,pixel_0..pixel_63")
        labels, rows = [], []
        for row in reader:
            labels.append(int(row[0]))
            pixels = [float(v) for v in row[1:]]
            if len(pixels) != 64:
                raise ValueError("digit CSV row does not have 64 pixels")
            rows.append(pixels)
    x = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.size and (x.min() < 0.0 or x.max() > 16.0):
        raise ValueError("digit pixels must lie in [0, 16]")
    if y.size and (y.min() < 0 or y.max() > 9):
        raise ValueError("digit labels must lie in [0, 9]")
    return x, y


def normalize_inputs(x: np.ndarray, q_star: float) -> np.ndarray:
    """Per-sample normalisation to mean zero and variance q*."""
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    std = np.where(std < 1e-8, 1.0, std)
    return (x - mean) / std * math.sqrt(q_star)


def train_val_test_split(x, y, seed):
    """20 percent held out for test, then 10 percent of the rest for validation."""
    rng = _rng(seed, 1001)
    order = rng.permutation(len(x))
    x, y = x[order], y[order]
    n_test = int(round(0.2 * len(x)))
    n_val = int(round(0.1 * (len(x) - n_test)))
    test = (x[:n_test], y[:n_test])
    val = (x[n_test : n_test + n_val], y[n_test : n_test + n_val])
    tr = (x[n_test + n_val :], y[n_test + n_val :])
    return tr, val, test


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

def init_params(config: TrainConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Draw (W, b) per layer exactly per the initialisation record."""
    init = config.init
    sizes = [config.input_dim] + [config.width] * (config.depth - 1) + [config.n_classes]
    params = []
    for layer in range(1, config.depth + 1):
        fan_in, fan_out = sizes[layer - 1], sizes[layer]
        rng = _rng(config.seed, 2000 + layer)
        if layer == 1:
            w = rng.normal(0.0, math.sqrt(1.0 / fan_in), size=(fan_out, fan_in))
            b = np.zeros(fan_out)
        else:
            w = rng.normal(0.0, math.sqrt(init.sw2 / fan_in), size=(fan_out, fan_in))
            b = rng.normal(0.0, math.sqrt(init.sb2), size=fan_out)
        params.append((w, b))
    return params


def forward(params, spec, x):
    """Pre-activations and activations for every layer; logits last.

    The activation applies to every pre-activation except the final one,
    which is the logits layer.
    """
    depth = len(params)
    h_list, a_list = [], []
    a = x
    # a diverging run legitimately produces inf/nan on its way to the
    # divergence flag; keep numpy quiet about it
    with np.errstate(over="ignore", invalid="ignore"):
        for layer, (w, b) in enumerate(params, start=1):
            h = a @ w.T + b
            a = h if layer == depth else spec.evaluate(h)
            h_list.append(h)
            a_list.append(a)
    return h_list, a_list


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, y):
    p = _softmax(logits)
    n = len(y)
    return float(-np.mean(np.log(p[np.arange(n), y] + 1e-300)))


def loss_and_grads(params, spec, x, y):
    """Cross-entropy and its analytic gradients for one minibatch."""
    depth = len(params)
    h_list, a_list = forward(params, spec, x)
    logits = h_list[-1]
    n = len(y)
    with np.errstate(over="ignore", invalid="ignore"):
        p = _softmax(logits)
        loss = float(-np.mean(np.log(p[np.arange(n), y] + 1e-300)))

        delta = p.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n

        grads = [None] * depth
        for layer in range(depth, 0, -1):
            w, _ = params[layer - 1]
            a_prev = x if layer == 1 else a_list[layer - 2]
            grads[layer - 1] = (delta.T @ a_prev, delta.sum(axis=0))
            if layer > 1:
                delta = (delta @ w) * spec.derivative(h_list[layer - 2])
    return loss, grads


def observed_sparsity(params, spec, x) -> float:
    """Mean fraction of exactly-zero activations over the hidden stack."""
    depth = len(params)
    if depth < 2:
        return 0.0
    _, a_list = forward(params, spec, x)
    zeros = [float(np.mean(a == 0.0)) for a in a_list[: depth - 1]]
    return float(np.mean(zeros))


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------

@dataclass
class TrainReport:
    """Everything observable about one training run."""

    train_losses: list[float] = field(default_factory=list)
    val_accuracies: list[float] = field(default_factory=list)
    test_accuracy: float | None = None
    sparsity_at_init: float = 0.0
    sparsity_final: float = 0.0
    diverged: bool = False
    epochs_run: int = 0
    steps_per_epoch: int = 0
    step_log: list[tuple[int, int, float]] = field(default_factory=list)

    def steps_to_loss(self, threshold: float) -> int | None:
        """First cumulative step count at which the epoch-mean training loss
        is at or below the threshold; None if never reached."""
        for epoch, loss in enumerate(self.train_losses, start=1):
            if math.isfinite(loss) and loss <= threshold:
                return epoch * self.steps_per_epoch
        return None

    def to_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_accuracies": self.val_accuracies,
            "test_accuracy": self.test_accuracy,
            "sparsity_at_init": self.sparsity_at_init,
            "sparsity_final": self.sparsity_final,
            "diverged": self.diverged,
            "epochs_run": self.epochs_run,
            "steps_per_epoch": self.steps_per_epoch,
        }


def _accuracy(params, spec, x, y) -> float:
    if len(y) == 0:
        return float("nan")
    h_list, _ = forward(params, spec, x)
    pred = np.argmax(h_list[-1], axis=1)
    return float(np.mean(pred == y))


def load_dataset(config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    if config.dataset == SYNTHETIC_BLOBS:
        return make_blobs(config.seed, config.n_samples, config.input_dim, config.n_classes)
    x, y = load_digits_csv(config.data_csv)
    if x.shape[1] != config.input_dim:
        raise ValueError(f"digit data has dim {x.shape[1]}, config says {config.input_dim}")
    return x, y


def train(config: TrainConfig) -> TrainReport:
    """Shuffled minibatch SGD on cross-entropy; deterministic in the seed."""
    x_raw, y = load_dataset(config)
    x = normalize_inputs(x_raw, config.init.q_star)
    (x_tr, y_tr), (x_val, y_val), (x_te, y_te) = train_val_test_split(x, y, config.seed)

    spec = config.init.spec
    params = init_params(config)
    report = TrainReport()
    report.steps_per_epoch = max(1, math.ceil(len(x_tr) / config.batch))
    report.sparsity_at_init = observed_sparsity(params, spec, x_tr)

    shuffle_rng = _rng(config.seed, 3000)
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(x_tr))
        epoch_losses = []
        for start in range(0, len(x_tr), config.batch):
            idx = order[start : start + config.batch]
            loss, grads = loss_and_grads(params, spec, x_tr[idx], y_tr[idx])
            step += 1
            report.step_log.append((epoch, step, loss))
            if not math.isfinite(loss):
                report.diverged = True
                report.train_losses.append(float("nan"))
                report.epochs_run = epoch
                report.sparsity_final = observed_sparsity(params, spec, x_tr)
                return report
            epoch_losses.append(loss)
            params = [
                (w - config.lr * gw, b - config.lr * gb)
                for (w, b), (gw, gb) in zip(params, grads)
            ]
        report.train_losses.append(float(np.mean(epoch_losses)))
        report.val_accuracies.append(_accuracy(params, spec, x_val, y_val))
        report.epochs_run = epoch

    report.test_accuracy = _accuracy(params, spec, x_te, y_te)
    report.sparsity_final = observed_sparsity(params, spec, x_tr)
    return report


def write_training_log(report: TrainReport, path: str) -> None:
    """CSV log: epoch, step, loss, val_acc, sparsity.

    Validation accuracy and sparsity are epoch-level quantities; rows inside
    an epoch leave those cells empty.
    """
    with open(path, "w", newline="\n") as fh:
        fh.write("epoch,step,loss,val_acc,sparsity\n")
        by_epoch_end = {}
        for epoch, acc in enumerate(report.val_accuracies, start=1):
            by_epoch_end[epoch * report.steps_per_epoch] = acc
        for epoch, step, loss in report.step_log:
            acc = by_epoch_end.get(step)
            acc_cell = repr(acc) if acc is not None else ""
            spars_cell = repr(report.sparsity_final) if step == len(report.step_log) else ""
            fh.write(f"{epoch},{step},{loss!r},{acc_cell},{spars_cell}\n")
