"""Federated-learning primitives built from scratch on numpy.

Two deterministic learners (softmax regression and a one-hidden-layer tanh
MLP), mini-batch SGD, data-size-weighted averaging, IID / class-skewed data
partitioning, a synthetic Gaussian-mixture corpus, and an IDX binary reader.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .orbital import ConstellationSpec

SOFTMAX_REGRESSION = "softmax_regression"
MLP_ONE_HIDDEN = "mlp_one_hidden"


class IdxFormatError(ValueError):
    """Raised when an IDX file violates the binary format; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class ModelParams:
    """Flat model weights plus the global epoch of the model they derive from."""

    weights: np.ndarray
    derived_from_epoch: int = 0

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "weights", w)
        if not np.all(np.isfinite(w)):
            raise ValueError("model weights must be finite")
        if self.derived_from_epoch < 0:
            raise ValueError("derived_from_epoch must be non-negative")

    @property
    def dim(self) -> int:
        return self.weights.size

    def with_epoch(self, epoch: int) -> "ModelParams":
        return ModelParams(self.weights.copy(), epoch)


@dataclass(frozen=True)
class LearnerSpec:
    """Model architecture and deterministic initialization parameters."""

    kind: str = SOFTMAX_REGRESSION
    input_dim: int = 16
    num_classes: int = 10
    hidden_dim: int = 16
    init_seed: int = 0
    init_scale: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in (SOFTMAX_REGRESSION, MLP_ONE_HIDDEN):
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.input_dim < 1 or self.num_classes < 1:
            raise ValueError("input_dim and num_classes must be >= 1")
        if self.kind == MLP_ONE_HIDDEN and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1 for the MLP")
        if self.init_scale < 0:
            raise ValueError("init_scale must be non-negative")

    @property
    def param_dim(self) -> int:
        if self.kind == SOFTMAX_REGRESSION:
            return self.input_dim * self.num_classes + self.num_classes
        return (self.input_dim * self.hidden_dim + self.hidden_dim
                + self.hidden_dim * self.num_classes + self.num_classes)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature rows with integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if f.ndim != 2:
            raise ValueError("features must be a 2-D array (samples x dims)")
        if y.ndim != 1 or y.size != f.shape[0]:
            raise ValueError("labels must be 1-D with one entry per feature row")
        if y.size and y.min() < 0:
            raise ValueError("labels must be non-negative class indices")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    @property
    def size(self) -> int:
        return int(self.labels.size)

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class TrainConfig:
    local_iters: int = 100
    batch_size: int = 32
    learning_rate: float = 0.01
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.local_iters < 1 or self.batch_size < 1:
            raise ValueError("local_iters and batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


def _unpack(spec: LearnerSpec, w: np.ndarray) -> tuple[np.ndarray, ...]:
    d, c, h = spec.input_dim, spec.num_classes, spec.hidden_dim
    if spec.kind == SOFTMAX_REGRESSION:
        return w[:d * c].reshape(d, c), w[d * c:]
    i = 0
    w1 = w[i:i + d * h].reshape(d, h); i += d * h
    b1 = w[i:i + h]; i += h
    w2 = w[i:i + h * c].reshape(h, c); i += h * c
    b2 = w[i:]
    return w1, b1, w2, b2


def _scores(spec: LearnerSpec, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    if spec.kind == SOFTMAX_REGRESSION:
        wm, b = _unpack(spec, w)
        return x @ wm + b
    w1, b1, w2, b2 = _unpack(spec, w)
    return np.tanh(x @ w1 + b1) @ w2 + b2


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_model(spec: LearnerSpec, model: ModelParams) -> None:
    if model.dim != spec.param_dim:
        raise ValueError(f"model has {model.dim} parameters, "
                         f"learner expects {spec.param_dim}")


def _check_data(spec: LearnerSpec, data: LabeledDataset) -> None:
    if data.size == 0:
        raise ValueError("dataset is empty")
    if data.features.shape[1] != spec.input_dim:
        raise ValueError(f"features have {data.features.shape[1]} dims, "
                         f"learner expects {spec.input_dim}")
    if int(data.labels.max()) >= spec.num_classes:
        raise ValueError("label exceeds num_classes")


def init_model(spec: LearnerSpec) -> ModelParams:
    """Deterministic uniform init in [-init_scale, +init_scale], epoch 0."""
    rng = np.random.default_rng(spec.init_seed)
    w = rng.uniform(-spec.init_scale, spec.init_scale, size=spec.param_dim)
    return ModelParams(w, derived_from_epoch=0)


def local_loss(spec: LearnerSpec, model: ModelParams, data: LabeledDataset) -> float:
    """Mean cross-entropy of the learner's softmax output over `data`."""
    _check_model(spec, model)
    _check_data(spec, data)
    logp = _log_softmax(_scores(spec, model.weights, data.features))
    return float(-logp[np.arange(data.size), data.labels].mean())


def global_objective(spec: LearnerSpec, model: ModelParams,
                     datasets: list[LabeledDataset]) -> float:
    """Data-size-weighted mean of the per-satellite local losses."""
    total = sum(d.size for d in datasets)
    if total == 0:
        raise ValueError("all datasets are empty")
    return float(sum(d.size / total * local_loss(spec, model, d)
                     for d in datasets if d.size))


def _gradient(spec: LearnerSpec, w: np.ndarray, x: np.ndarray,
              y: np.ndarray) -> np.ndarray:
    """Summed (not averaged) cross-entropy gradient over the batch."""
    n = x.shape[0]
    if spec.kind == SOFTMAX_REGRESSION:
        wm, b = _unpack(spec, w)
        p = np.exp(_log_softmax(x @ wm + b))
        p[np.arange(n), y] -= 1.0
        return np.concatenate([(x.T @ p).ravel(), p.sum(axis=0)])
    w1, b1, w2, b2 = _unpack(spec, w)
    hidden = np.tanh(x @ w1 + b1)
    p = np.exp(_log_softmax(hidden @ w2 + b2))
    p[np.arange(n), y] -= 1.0
    d_hidden = (p @ w2.T) * (1.0 - hidden ** 2)
    return np.concatenate([(x.T @ d_hidden).ravel(), d_hidden.sum(axis=0),
                           (hidden.T @ p).ravel(), p.sum(axis=0)])


def local_train(spec: LearnerSpec, model: ModelParams, data: LabeledDataset,
                cfg: TrainConfig) -> ModelParams:
    """Run `local_iters` mini-batch SGD steps, deterministic in `rng_seed`.

    Each step applies w <- w - (lr / b) * sum of per-sample gradients over a
    batch of exactly b samples drawn from a seeded shuffle (b is clamped to
    the dataset size when larger). The epoch tag of the input model is kept.
    """
    _check_model(spec, model)
    _check_data(spec, data)
    b = min(cfg.batch_size, data.size)
    rng = np.random.default_rng(cfg.rng_seed)
    w = model.weights.copy()
    order = rng.permutation(data.size)
    pos = 0
    for _ in range(cfg.local_iters):
        if pos + b > data.size:
            order = rng.permutation(data.size)
            pos = 0
        idx = order[pos:pos + b]
        pos += b
        grad = _gradient(spec, w, data.features[idx], data.labels[idx])
        w -= (cfg.learning_rate / b) * grad
    return ModelParams(w, derived_from_epoch=model.derived_from_epoch)


def weighted_mean_weights(entries: list[tuple[np.ndarray, int]]) -> np.ndarray:
    """Size-weighted mean of weight vectors, invariant to input order.

    Terms are summed in a canonical order (sorted by size, then weight bytes)
    around a canonical reference vector, so any permutation of `entries`
    produces bitwise-identical output and identical inputs average to
    themselves exactly.
    """
    if not entries:
        raise ValueError("need at least one model to average")
    dim = entries[0][0].size
    for w, size in entries:
        if w.size != dim:
            raise ValueError("model dimensions differ")
        if size < 1:
            raise ValueError("data sizes must be >= 1")
    ordered = sorted(entries, key=lambda e: (e[1], e[0].tobytes()))
    ref = ordered[0][0]
    total = sum(size for _, size in ordered)
    acc = np.zeros(dim)
    for w, size in ordered:
        acc += size * (w - ref)
    return ref + acc / total


def fedavg(updates: list[tuple[ModelParams, int]]) -> ModelParams:
    """Synchronous aggregation: data-size-weighted mean of all local models."""
    if not updates:
        raise ValueError("fedavg needs at least one update")
    mean = weighted_mean_weights([(m.weights, size) for m, size in updates])
    epoch = 1 + max(m.derived_from_epoch for m, _ in updates)
    return ModelParams(mean, derived_from_epoch=epoch)


def accuracy(spec: LearnerSpec, model: ModelParams, data: LabeledDataset) -> float:
    """Fraction of samples whose argmax score matches the label.

    Ties resolve to the lowest class index.
    """
    _check_model(spec, model)
    _check_data(spec, data)
    predicted = np.argmax(_scores(spec, model.weights, data.features), axis=1)
    return float((predicted == data.labels).mean())


def noniid_split_sizes(num_orbits: int, num_classes: int) -> tuple[int, int]:
    """(orbits in the first family, classes owned by the first family)."""
    first_orbits = -(-2 * num_orbits // 5)      # ceil(2 O / 5)
    first_classes = -(-4 * num_classes // 10)   # ceil(0.4 C)
    return first_orbits, first_classes


def partition_dataset(data: LabeledDataset, spec: ConstellationSpec,
                      mode: str, seed: int) -> list[LabeledDataset]:
    """Split `data` over all satellites, ordered by (orbit, slot).

    IID shuffles globally and splits evenly. The non-IID mode mirrors the
    orbit-family class skew: the first ceil(2O/5) orbits hold only the first
    ceil(0.4 C) classes, the remaining orbits hold the other classes, with an
    even split inside each family.
    """
    if mode not in ("iid", "noniid"):
        raise ValueError(f"partition mode must be iid or noniid, got {mode!r}")
    rng = np.random.default_rng(seed)
    sats = spec.satellites()
    if mode == "iid":
        if data.size < len(sats):
            raise ValueError(f"{data.size} samples cannot cover {len(sats)} satellites")
        order = rng.permutation(data.size)
        return [data.subset(np.sort(chunk))
                for chunk in np.array_split(order, len(sats))]

    num_classes = int(data.labels.max()) + 1
    first_orbits, first_classes = noniid_split_sizes(spec.num_orbits, num_classes)
    if first_orbits >= spec.num_orbits and num_classes > first_classes:
        raise ValueError("non-IID partition needs orbits in both class families")
    family_sats = [
        [s for s in sats if s.orbit_index < first_orbits],
        [s for s in sats if s.orbit_index >= first_orbits],
    ]
    family_idx = [
        np.flatnonzero(data.labels < first_classes),
        np.flatnonzero(data.labels >= first_classes),
    ]
    parts: dict[object, LabeledDataset] = {}
    for members, idx in zip(family_sats, family_idx):
        if not members:
            continue
        if idx.size < len(members):
            raise ValueError("not enough samples in one class family "
                             f"({idx.size} for {len(members)} satellites)")
        order = idx[rng.permutation(idx.size)]
        for sat, chunk in zip(members, np.array_split(order, len(members))):
            parts[sat] = data.subset(np.sort(chunk))
    return [parts[s] for s in sats]


def make_synthetic_dataset(num_samples: int, input_dim: int, num_classes: int,
                           seed: int, class_sep: float = 3.0,
                           noise: float = 1.0) -> LabeledDataset:
    """Gaussian mixture with one seeded mean per class; labels cycle 0..C-1."""
    if num_samples < num_classes:
        raise ValueError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, class_sep, size=(num_classes, input_dim))
    labels = np.arange(num_samples) % num_classes
    labels = labels[rng.permutation(num_samples)]
    features = means[labels] + rng.normal(0.0, noise, size=(num_samples, input_dim))
    return LabeledDataset(features, labels)


def train_test_split(data: LabeledDataset, test_fraction: float,
                     seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded shuffle split into (train, held-out test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.size)
    n_test = max(1, int(round(test_fraction * data.size)))
    return data.subset(np.sort(order[n_test:])), data.subset(np.sort(order[:n_test]))


_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _read_idx(path: str, magic: int, rank: int) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    header = 4 + 4 * rank
    if len(raw) < header:
        raise IdxFormatError(f"truncated IDX header in {path}", len(raw))
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise IdxFormatError(f"bad IDX magic 0x{got:08x} in {path}, "
                             f"expected 0x{magic:08x}", 0)
    dims = struct.unpack(f">{rank}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise IdxFormatError(f"IDX payload shorter than declared dims {dims}",
                             len(raw))
    return np.frombuffer(raw, dtype=np.uint8, count=count,
                         offset=header).reshape(dims)


def load_idx_dataset(images_path: str, labels_path: str,
                     limit: int | None = None) -> LabeledDataset:
    """Read an IDX image/label file pair, scaling pixels to [0, 1]."""
    images = _read_idx(images_path, _IDX_IMAGES_MAGIC, rank=3)
    labels = _read_idx(labels_path, _IDX_LABELS_MAGIC, rank=1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image count {images.shape[0]} != label count {labels.shape[0]}", 0)
    n = images.shape[0] if limit is None else min(limit, images.shape[0])
    pixels = images.shape[1] * images.shape[2]
    features = images[:n].reshape(n, pixels).astype(float) / 255.0
    return LabeledDataset(features, labels[:n].astype(int))
