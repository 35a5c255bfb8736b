"""Pluggable learners spanning the assumption spectrum.

Three learners share one ``fit``/``predict`` interface:

* ``oracle`` — predicts the data distribution's maximum-posterior label,
  independently flipped to a uniformly chosen other class with probability
  ``oracle_epsilon``. Its fit ignores the training labels entirely, so it
  satisfies the noise-separation property by construction (small error on
  correctly labeled data, near-chance agreement with randomized labels) and
  serves as a clean control: theorems can be tested on it without
  optimization noise.
* ``nearest_centroid`` — per-class feature means under the given (possibly
  noisy) labels.
* ``logistic`` — multinomial logistic regression by full-batch gradient
  descent on softmax cross-entropy with an L2 penalty, from zero
  initialization (so the seed never affects training, only data).

Predictions are deterministic; argmax/argmin ties break toward the lowest
class index. Models are immutable after fit and can be saved to and loaded
from a plain-text format so long runs are resumable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Union

import numpy as np

from .datagen import DataDistribution, Dataset, Provenance, _map_labels

__all__ = [
    "TrainingError",
    "LearnerConfig",
    "Model",
    "OracleModel",
    "CentroidModel",
    "LogisticModel",
    "fit",
    "predict",
    "oracle_model",
    "empirical_error",
    "save_model",
    "load_model",
]

LEARNER_KINDS = ("oracle", "nearest_centroid", "logistic")


class TrainingError(RuntimeError):
    """Raised when a training run cannot produce a valid model."""


@dataclass(frozen=True)
class LearnerConfig:
    """Which learner to fit and with what settings.

    ``seed`` feeds the oracle learner's flip pattern; the other learners are
    seed-free (nearest centroid is closed-form, logistic starts from zero).
    """

    kind: str = "oracle"
    oracle_epsilon: float = 0.0
    gd_steps: int = 500
    gd_learning_rate: float = 0.1
    gd_l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}; expected one of {LEARNER_KINDS}")
        if not 0.0 <= self.oracle_epsilon < 1.0:
            raise ValueError("oracle_epsilon must lie in [0, 1)")
        if self.gd_steps < 1 or self.gd_learning_rate <= 0.0 or self.gd_l2 < 0.0:
            raise ValueError("gradient-descent settings must be positive (l2 may be 0)")


# --- deterministic per-point hash for the oracle's flip pattern -------------
#
# splitmix64-style avalanche over the bit patterns of the feature vector,
# keyed by the model seed. A fixed function of the point means the flip mark
# is i.i.d. Bernoulli(epsilon) across fresh draws yet exactly reproducible.

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # wraparound is the point
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _point_hash(X: np.ndarray, seed: int) -> np.ndarray:
    bits = np.ascontiguousarray(X, dtype=np.float64).view(np.uint64)
    h = np.full(X.shape[0], np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _GOLD, dtype=np.uint64)
    for j in range(X.shape[1]):
        key = np.uint64(((j + 1) * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF)
        h = _mix64(h ^ bits[:, j] ^ key)
    return h


def _as_batch(features: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(features, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"features must have dimensionality {dim}; got shape {np.shape(features)}")
    return X, single


@dataclass(frozen=True)
class OracleModel:
    """True-labeling rule of a mixture plus a seeded per-point flip."""

    class_centers: np.ndarray
    class_spread: np.ndarray
    class_priors: np.ndarray
    epsilon: float
    flip_seed: int

    @property
    def k(self) -> int:
        return self.class_centers.shape[0]

    @property
    def dim(self) -> int:
        return self.class_centers.shape[1]

    def predict(self, features: np.ndarray):
        X, single = _as_batch(features, self.dim)
        labels = _map_labels(X, self.class_centers, self.class_spread, self.class_priors)
        if self.epsilon > 0.0:
            h = _point_hash(X, self.flip_seed)
            u = (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)
            flip = u < self.epsilon
            if self.k > 1:
                offsets = 1 + (_mix64(h ^ _MIX2) % np.uint64(self.k - 1)).astype(np.int64)
                labels = np.where(flip, (labels + offsets) % self.k, labels)
        return int(labels[0]) if single else labels


@dataclass(frozen=True)
class CentroidModel:
    """Per-class centroids; prediction is the nearest centroid."""

    centroids: np.ndarray  # (k, dim); rows may be NaN for classes absent at fit

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def predict(self, features: np.ndarray):
        X, single = _as_batch(features, self.dim)
        diffs = X[:, None, :] - self.centroids[None, :, :]
        dist2 = (diffs ** 2).sum(axis=-1)
        dist2[:, np.isnan(self.centroids).any(axis=1)] = np.inf
        labels = np.argmin(dist2, axis=1).astype(np.int64)
        return int(labels[0]) if single else labels


@dataclass(frozen=True)
class LogisticModel:
    """Multinomial logistic weights; prediction is the argmax logit."""

    weights: np.ndarray  # (k, dim)
    bias: np.ndarray     # (k,)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def predict(self, features: np.ndarray):
        X, single = _as_batch(features, self.dim)
        logits = X @ self.weights.T + self.bias
        labels = np.argmax(logits, axis=1).astype(np.int64)
        return int(labels[0]) if single else labels


Model = Union[OracleModel, CentroidModel, LogisticModel]


def oracle_model(dist: DataDistribution, epsilon: float, seed: int) -> OracleModel:
    """Oracle model at a chosen flip probability, detached from any training set."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    flip_seed = int(np.random.SeedSequence(seed).generate_state(1, dtype=np.uint64)[0])
    return OracleModel(
        class_centers=dist.class_centers,
        class_spread=dist.class_spread,
        class_priors=dist.class_priors,
        epsilon=float(epsilon),
        flip_seed=flip_seed,
    )


def _fit_centroid(train: Dataset) -> CentroidModel:
    centroids = np.full((train.k, train.dim), np.nan)
    for c in range(train.k):
        mask = train.labels == c
        if mask.any():
            centroids[c] = train.features[mask].mean(axis=0)
    return CentroidModel(centroids=centroids)


def _fit_logistic(config: LearnerConfig, train: Dataset) -> LogisticModel:
    X = train.features
    n, dim = X.shape
    k = train.k
    Y = np.zeros((n, k))
    Y[np.arange(n), train.labels] = 1.0
    W = np.zeros((k, dim))
    b = np.zeros(k)
    lr, l2 = config.gd_learning_rate, config.gd_l2
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is caught on the loss
        for step in range(config.gd_steps):
            logits = X @ W.T + b
            logits -= logits.max(axis=1, keepdims=True)
            expl = np.exp(logits)
            P = expl / expl.sum(axis=1, keepdims=True)
            loss = -np.mean(np.log(P[np.arange(n), train.labels] + 1e-300)) \
                + 0.5 * l2 * float((W ** 2).sum())
            if not np.isfinite(loss):
                raise TrainingError(f"logistic training diverged at step {step}: loss={loss}")
            G = P - Y
            W -= lr * (G.T @ X / n + l2 * W)
            b -= lr * G.mean(axis=0)
    return LogisticModel(weights=W, bias=b)


def fit(config: LearnerConfig, train: Dataset) -> Model:
    """Train the configured learner on ``train``; deterministic per (config, data)."""
    if len(train) == 0:
        raise ValueError("training set must be nonempty")
    if config.kind == "oracle":
        if train.distribution is None:
            raise ValueError(
                "the oracle learner needs the dataset's source distribution; "
                "fit it on data produced by datagen.sample (or rebuild the handle)"
            )
        return oracle_model(train.distribution, config.oracle_epsilon, config.seed)
    if config.kind == "nearest_centroid":
        return _fit_centroid(train)
    return _fit_logistic(config, train)


def predict(model: Model, features: np.ndarray):
    """Deterministic class prediction; lowest class index wins ties."""
    return model.predict(features)


ProvenanceFilter = Union[None, Provenance, Iterable[Provenance], Callable[[Provenance], bool]]


def empirical_error(model: Model, data: Dataset, where: ProvenanceFilter = None) -> float:
    """0-1 error of the model against the ASSIGNED labels of a provenance subset.

    ``where`` may be None (all examples), a Provenance, an iterable of them,
    or a predicate over Provenance. Raises ValueError on an empty subset.
    """
    if where is None:
        mask = np.ones(len(data), dtype=bool)
    elif isinstance(where, Provenance):
        mask = data.provenance_mask(where)
    elif callable(where):
        keep = [p for p in Provenance if where(p)]
        mask = data.provenance_mask(keep) if keep else np.zeros(len(data), dtype=bool)
    else:
        mask = data.provenance_mask(where)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("empirical_error over an empty subset is undefined")
    preds = model.predict(data.features[mask])
    return float(np.mean(preds != data.labels[mask]))


# --- plain-text model format -------------------------------------------------
#
# Line 1: pseudocert-model v1 <kind>
# Then "name value..." lines; matrices are written row per line after a
# "name rows cols" header. Floats use round-trip precision.

def _write_matrix(fh, name: str, arr: np.ndarray) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    fh.write(f"{name} {arr.shape[0]} {arr.shape[1]}\n")
    for row in arr:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def _read_matrix(lines, expect: str) -> np.ndarray:
    header = next(lines).split()
    if header[0] != expect:
        raise ValueError(f"expected matrix {expect!r}, found {header[0]!r}")
    rows, cols = int(header[1]), int(header[2])
    return np.array([[float(v) for v in next(lines).split()] for _ in range(rows)],
                    dtype=float).reshape(rows, cols)


def save_model(model: Model, path) -> None:
    """Write a model in the documented plain-text format."""
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(model, OracleModel):
            fh.write("pseudocert-model v1 oracle\n")
            fh.write(f"epsilon {model.epsilon!r}\n")
            fh.write(f"flip_seed {model.flip_seed}\n")
            _write_matrix(fh, "class_centers", model.class_centers)
            _write_matrix(fh, "class_spread", model.class_spread)
            _write_matrix(fh, "class_priors", model.class_priors)
        elif isinstance(model, CentroidModel):
            fh.write("pseudocert-model v1 nearest_centroid\n")
            _write_matrix(fh, "centroids", model.centroids)
        elif isinstance(model, LogisticModel):
            fh.write("pseudocert-model v1 logistic\n")
            _write_matrix(fh, "weights", model.weights)
            _write_matrix(fh, "bias", model.bias)
        else:
            raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def load_model(path) -> Model:
    """Read a model written by :func:`save_model`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = iter(fh.read().splitlines())
    header = next(lines).split()
    if header[:2] != ["pseudocert-model", "v1"]:
        raise ValueError(f"{path} is not a pseudocert model file")
    kind = header[2]
    if kind == "oracle":
        epsilon = float(next(lines).split()[1])
        flip_seed = int(next(lines).split()[1])
        centers = _read_matrix(lines, "class_centers")
        spread = _read_matrix(lines, "class_spread").ravel()
        priors = _read_matrix(lines, "class_priors").ravel()
        return OracleModel(class_centers=centers, class_spread=spread,
                           class_priors=priors, epsilon=epsilon, flip_seed=flip_seed)
    if kind == "nearest_centroid":
        return CentroidModel(centroids=_read_matrix(lines, "centroids"))
    if kind == "logistic":
        W = _read_matrix(lines, "weights")
        b = _read_matrix(lines, "bias").ravel()
        return LogisticModel(weights=W, bias=b)
    raise ValueError(f"unknown model kind {kind!r}")
