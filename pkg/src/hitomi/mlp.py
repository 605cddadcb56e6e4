"""Tiny dense classifier: 4 inputs, hidden 16 and 8 with ReLU, C logits.

Everything needed to train it from scratch lives here: softmax
cross-entropy, Adam, early stopping on validation loss, luminance
augmentation, category-balanced sampling, a finite-difference gradient
check, and a versioned JSON model file.
"""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DegenerateDataset, DomainError, FormatError, ShapeError
from .formats import LabelTable

INPUT_DIM = 4
HIDDEN_DIMS = (16, 8)

ACT_RELU = "relu"
ACT_ID = "id"

MODEL_SCHEMA_VERSION = 1

# Validation loss must drop by at least this much to count as improvement;
# guards against float jitter endlessly resetting the patience counter.
IMPROVEMENT_EPS = 1e-6


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim), row-major
    bias: np.ndarray  # (out_dim,)
    activation: str

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError("layer weights must be (out, in) with a matching bias")
        if self.activation not in (ACT_RELU, ACT_ID):
            raise ShapeError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ShapeError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class MlpModel:
    layers: list[DenseLayer]
    labels: LabelTable

    def __post_init__(self):
        dims = [INPUT_DIM, *HIDDEN_DIMS]
        if len(self.layers) != 3:
            raise ShapeError("model must have exactly three dense layers")
        for i, layer in enumerate(self.layers):
            if layer.in_dim != dims[i]:
                raise ShapeError(f"layer {i} expects in_dim {dims[i]}, got {layer.in_dim}")
        if self.layers[0].out_dim != HIDDEN_DIMS[0] or self.layers[1].out_dim != HIDDEN_DIMS[1]:
            raise ShapeError(f"hidden sizes must be {HIDDEN_DIMS}")
        if self.layers[0].activation != ACT_RELU or self.layers[1].activation != ACT_RELU:
            raise ShapeError("hidden layers must use relu")
        if self.layers[2].activation != ACT_ID:
            raise ShapeError("output layer must emit raw logits")
        if self.layers[2].out_dim != len(self.labels):
            raise ShapeError("output width must equal the label count")

    @property
    def out_dim(self) -> int:
        return self.layers[2].out_dim


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_epochs: int = 500
    patience: int = 2
    batch_size: int = 256
    val_fraction: float = 0.2
    seed: int = 0
    aug_min: float = 0.68
    aug_max: float = 1.46
    balance_classes: bool = True

    def __post_init__(self):
        if not (0.0 < self.val_fraction < 1.0):
            raise DomainError("val_fraction must be in (0, 1)")
        if self.aug_min > self.aug_max:
            raise DomainError("aug_min must not exceed aug_max")
        if self.learning_rate <= 0:
            raise DomainError("learning_rate must be positive")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise DomainError("max_epochs and batch_size must be >= 1")


@dataclass
class SpectralDataset:
    """Labeled band vectors: spectra (N, 4) float64, labels (N,) int."""

    spectra: np.ndarray
    labels: np.ndarray
    table: LabelTable

    def __post_init__(self):
        self.spectra = np.ascontiguousarray(self.spectra, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.spectra.ndim != 2 or self.spectra.shape[1] != INPUT_DIM:
            raise ShapeError(f"spectra must be (N, {INPUT_DIM})")
        if self.labels.shape != (self.spectra.shape[0],):
            raise ShapeError("one label per spectrum required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.table)):
            raise ShapeError("label index outside the label table")

    def __len__(self) -> int:
        return self.spectra.shape[0]


@dataclass
class TrainLog:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0


def new_model(labels: LabelTable, seed: int) -> MlpModel:
    """He-style uniform init (bound sqrt(6/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    dims = [INPUT_DIM, *HIDDEN_DIMS, len(labels)]
    acts = [ACT_RELU, ACT_RELU, ACT_ID]
    layers = []
    for i in range(3):
        bound = np.sqrt(6.0 / dims[i])
        w = rng.uniform(-bound, bound, size=(dims[i + 1], dims[i]))
        layers.append(DenseLayer(w, np.zeros(dims[i + 1]), acts[i]))
    return MlpModel(layers, labels)


# --------------------------------------------------------------------------
# Inference
# --------------------------------------------------------------------------


def forward_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Logits for a batch of spectra, shape (N, C)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layers[0].in_dim:
        raise ShapeError(f"expected (N, {model.layers[0].in_dim}) input, got {x.shape}")
    l1, l2, l3 = model.layers
    return kernels.forward_logits(x, l1.weights, l1.bias, l2.weights, l2.bias, l3.weights, l3.bias)


def forward(model: MlpModel, x) -> np.ndarray:
    """Logits for one spectrum, shape (C,)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.layers[0].in_dim,):
        raise ShapeError(f"expected a {model.layers[0].in_dim}-vector, got shape {x.shape}")
    return forward_batch(model, x[None, :])[0]


def classify_batch(labels: LabelTable, logits: np.ndarray):
    """(winner index, clothing flag) per row; lowest index wins ties."""
    winners, cat = kernels.argmax_category(
        np.ascontiguousarray(logits, dtype=np.float64), labels.clothing_mask()
    )
    return winners, cat


def classify(model: MlpModel, x) -> tuple[int, bool]:
    logits = forward(model, x)
    winners, cat = classify_batch(model.labels, logits[None, :])
    return int(winners[0]), bool(cat[0])


# --------------------------------------------------------------------------
# Augmentation and sampling
# --------------------------------------------------------------------------


def augment(sample, factor: float, cfg: TrainConfig | None = None) -> np.ndarray:
    """Scale a spectrum by a luminance factor inside the configured range."""
    lo, hi = (cfg.aug_min, cfg.aug_max) if cfg is not None else (0.68, 1.46)
    if factor <= 0 or not (lo <= factor <= hi):
        raise DomainError(f"factor {factor} outside [{lo}, {hi}]")
    return np.asarray(sample, dtype=np.float64) * factor


def balanced_batches(dataset: SpectralDataset, cfg: TrainConfig, epoch_seed):
    """Yield (spectra, labels) batches for one epoch.

    With balancing on, the minority category (clothing vs non-clothing) is
    resampled with replacement up to the majority count, so both categories
    contribute the same number of pixels per epoch.
    """
    clothing = dataset.table.clothing_mask()[dataset.labels]
    idx_pos = np.flatnonzero(clothing)
    idx_neg = np.flatnonzero(~clothing)
    if len(idx_pos) == 0 or len(idx_neg) == 0:
        raise DegenerateDataset("both clothing and non-clothing samples are required")
    rng = np.random.default_rng(epoch_seed)
    if cfg.balance_classes and len(idx_pos) != len(idx_neg):
        target = max(len(idx_pos), len(idx_neg))
        if len(idx_pos) < target:
            idx_pos = np.concatenate([idx_pos, rng.choice(idx_pos, target - len(idx_pos))])
        else:
            idx_neg = np.concatenate([idx_neg, rng.choice(idx_neg, target - len(idx_neg))])
    order = np.concatenate([idx_pos, idx_neg])
    rng.shuffle(order)
    for start in range(0, len(order), cfg.batch_size):
        sel = order[start : start + cfg.batch_size]
        yield dataset.spectra[sel], dataset.labels[sel]


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _xent(logits: np.ndarray, y: np.ndarray) -> float:
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(len(y)), y].mean())


def _forward_cached(model: MlpModel, x: np.ndarray):
    l1, l2, l3 = model.layers
    z1 = x @ l1.weights.T + l1.bias
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ l2.weights.T + l2.bias
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ l3.weights.T + l3.bias
    return z1, a1, z2, a2, logits


def _loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray):
    n = len(y)
    z1, a1, z2, a2, logits = _forward_cached(model, x)
    probs = _softmax(logits)
    loss = _xent(logits, y)
    dz3 = probs.copy()
    dz3[np.arange(n), y] -= 1.0
    dz3 /= n
    l1, l2, l3 = model.layers
    gw3 = dz3.T @ a2
    gb3 = dz3.sum(axis=0)
    da2 = dz3 @ l3.weights
    dz2 = da2 * (z2 > 0)
    gw2 = dz2.T @ a1
    gb2 = dz2.sum(axis=0)
    da1 = dz2 @ l2.weights
    dz1 = da1 * (z1 > 0)
    gw1 = dz1.T @ x
    gb1 = dz1.sum(axis=0)
    return loss, [(gw1, gb1), (gw2, gb2), (gw3, gb3)]


def train(dataset: SpectralDataset, cfg: TrainConfig) -> tuple[MlpModel, TrainLog]:
    """Adam on softmax cross-entropy with early stopping.

    Stops when validation loss has not improved for ``cfg.patience``
    consecutive epochs (or at max_epochs) and returns the parameters of
    the best-validation epoch, not the last one.  Bitwise deterministic
    for a fixed config.
    """
    if len(dataset) == 0:
        raise DegenerateDataset("empty dataset")
    if len(np.unique(dataset.labels)) < 2:
        raise DegenerateDataset("need at least two distinct labels")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(dataset))
    n_val = min(len(dataset) - 1, max(1, round(cfg.val_fraction * len(dataset))))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    train_set = SpectralDataset(dataset.spectra[train_idx], dataset.labels[train_idx], dataset.table)
    x_val = dataset.spectra[val_idx]
    y_val = dataset.labels[val_idx]

    model = new_model(dataset.table, seed=cfg.seed)
    m_state = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers]
    v_state = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers]
    step = 0

    log = TrainLog()
    best_val = np.inf
    best_layers = None
    stale = 0

    for epoch in range(cfg.max_epochs):
        epoch_loss = 0.0
        seen = 0
        for xb, yb in balanced_batches(train_set, cfg, epoch_seed=(cfg.seed, epoch)):
            loss, grads = _loss_and_grads(model, xb, yb)
            epoch_loss += loss * len(yb)
            seen += len(yb)
            step += 1
            b1c = 1.0 - cfg.adam_beta1**step
            b2c = 1.0 - cfg.adam_beta2**step
            for li, (gw, gb) in enumerate(grads):
                layer = model.layers[li]
                for param, grad, m, v in (
                    (layer.weights, gw, m_state[li][0], v_state[li][0]),
                    (layer.bias, gb, m_state[li][1], v_state[li][1]),
                ):
                    m *= cfg.adam_beta1
                    m += (1.0 - cfg.adam_beta1) * grad
                    v *= cfg.adam_beta2
                    v += (1.0 - cfg.adam_beta2) * grad * grad
                    param -= cfg.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + cfg.adam_eps)

        val_loss = _xent(_forward_cached(model, x_val)[4], y_val)
        log.train_loss.append(epoch_loss / max(seen, 1))
        log.val_loss.append(val_loss)
        log.epochs_run = epoch + 1

        if best_val - val_loss >= IMPROVEMENT_EPS:
            best_val = val_loss
            best_layers = [
                DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in model.layers
            ]
            log.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    if best_layers is None:  # never improved on +inf: keep first-epoch weights
        best_layers = model.layers
        log.best_epoch = 0
    return MlpModel(best_layers, dataset.table), log


# --------------------------------------------------------------------------
# Gradient verification
# --------------------------------------------------------------------------


def grad_check(model: MlpModel, batch, h: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    The per-parameter error is |analytic - fd| / max(|analytic|, |fd|, 1e-3);
    the floor keeps finite-difference truncation noise (order h^2) on
    near-zero gradients from registering as disagreement while leaving any
    formula-level bug, which errs at gradient scale, clearly visible.
    """
    x, y = batch
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if len(y) == 0:
        raise DegenerateDataset("gradient check needs a non-empty batch")
    probe = copy.deepcopy(model)
    _, grads = _loss_and_grads(probe, x, y)
    worst = 0.0
    for li, layer in enumerate(probe.layers):
        for param, grad in ((layer.weights, grads[li][0]), (layer.bias, grads[li][1])):
            flat = param.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                hi = _xent(_forward_cached(probe, x)[4], y)
                flat[i] = orig - h
                lo = _xent(_forward_cached(probe, x)[4], y)
                flat[i] = orig
                fd = (hi - lo) / (2.0 * h)
                denom = max(abs(gflat[i]), abs(fd), 1e-3)
                worst = max(worst, abs(gflat[i] - fd) / denom)
    return worst


# --------------------------------------------------------------------------
# Model file (versioned JSON) and dataset directory
# --------------------------------------------------------------------------


def save_model(model: MlpModel, path) -> None:
    payload = {
        "version": MODEL_SCHEMA_VERSION,
        "dims": [INPUT_DIM, *HIDDEN_DIMS, model.out_dim],
        "layers": [
            {
                "w": [float(v) for v in layer.weights.reshape(-1)],
                "b": [float(v) for v in layer.bias],
                "act": layer.activation,
            }
            for layer in model.layers
        ],
        "labels": list(model.labels.names),
        "is_clothing": [bool(v) for v in model.labels.is_clothing],
    }
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_model(path) -> MlpModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise FormatError(f"unreadable model file: {exc}") from exc
    try:
        if obj["version"] != MODEL_SCHEMA_VERSION:
            raise FormatError(f"unsupported model schema version {obj['version']}")
        dims = obj["dims"]
        layers = []
        for i, spec in enumerate(obj["layers"]):
            out_d, in_d = dims[i + 1], dims[i]
            w = np.asarray(spec["w"], dtype=np.float64).reshape(out_d, in_d)
            b = np.asarray(spec["b"], dtype=np.float64)
            act = ACT_RELU if spec["act"] == "relu" else ACT_ID
            layers.append(DenseLayer(w, b, act))
        table = LabelTable(list(obj["labels"]), [bool(v) for v in obj["is_clothing"]])
        return MlpModel(layers, table)
    except FormatError:
        raise
    except (KeyError, IndexError, TypeError, ValueError, ShapeError) as exc:
        raise FormatError(f"malformed model file: {exc}") from exc


def save_dataset(dataset: SpectralDataset, out_dir) -> None:
    """Write a training directory: labels.json plus samples.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "labels.json").write_text(
        json.dumps(
            {"names": dataset.table.names, "is_clothing": [bool(v) for v in dataset.table.is_clothing]}
        )
        + "\n",
        encoding="utf-8",
    )
    with open(out / "samples.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "b0", "b1", "b2", "b3"])
        for lab, row in zip(dataset.labels, dataset.spectra):
            writer.writerow([int(lab), *(repr(float(v)) for v in row)])


def load_dataset(data_dir) -> SpectralDataset:
    root = Path(data_dir)
    try:
        meta = json.loads((root / "labels.json").read_text(encoding="utf-8"))
        table = LabelTable(list(meta["names"]), [bool(v) for v in meta["is_clothing"]])
    except (OSError, KeyError, ValueError) as exc:
        raise FormatError(f"bad labels.json: {exc}") from exc
    labels = []
    rows = []
    with open(root / "samples.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["label", "b0", "b1", "b2", "b3"]:
            raise FormatError("samples.csv header mismatch")
        for lineno, row in enumerate(reader, start=2):
            try:
                labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:5]])
            except (IndexError, ValueError) as exc:
                raise FormatError(f"samples.csv line {lineno}: {exc}") from exc
    spectra = np.asarray(rows, dtype=np.float64).reshape(len(rows), INPUT_DIM)
    return SpectralDataset(spectra, np.asarray(labels, dtype=np.int64), table)


def pad_labels(table: LabelTable, out_dim: int) -> LabelTable:
    """Pad with inert background entries, e.g. 41 classes padded to 49."""
    if out_dim < len(table):
        raise DomainError(f"cannot shrink a {len(table)}-class table to {out_dim}")
    extra = out_dim - len(table)
    names = list(table.names) + [f"unused_{i:02d}" for i in range(extra)]
    return LabelTable(names, list(table.is_clothing) + [False] * extra)
