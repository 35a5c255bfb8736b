"""Synthetic classification data and the label-corruption mechanisms.

Data comes from isotropic Gaussian mixtures (chosen because the optimal
classifier and its risk are computable, giving a calibration oracle for
experiments). Three distinct corruptions are provided and must not be
confused:

* randomized labels: drawn uniformly over all k classes, so roughly 1/k of
  them coincide with the truth;
* mislabels: drawn uniformly over the k-1 classes excluding the truth, so
  none coincide;
* pseudo-labels: a model's predictions, tagged correct or wrong against the
  retained ground truth.

Every example keeps its true label and a provenance tag so corrupted-subset
error rates can be audited exactly. Datasets are immutable: corruption
operations return new datasets, never mutate, and all randomness is a pure
function of the supplied seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Provenance",
    "DataDistribution",
    "simplex_mixture",
    "LabeledExample",
    "Dataset",
    "BayesRiskEstimate",
    "sample",
    "randomize_labels",
    "randomize_labels_at",
    "mislabel",
    "apply_pseudo_labels",
    "bayes_labels",
    "estimate_bayes_risk",
    "save_dataset",
    "load_dataset",
]


class Provenance(IntEnum):
    """How an example's current label came to be."""

    CLEAN = 0
    PSEUDO_CORRECT = 1
    PSEUDO_WRONG = 2
    RANDOMIZED = 3
    MISLABELED = 4

    @property
    def tag(self) -> str:
        return self.name.lower()

    @classmethod
    def from_tag(cls, tag: str) -> "Provenance":
        return cls[tag.upper()]


@dataclass(frozen=True)
class DataDistribution:
    """Isotropic Gaussian mixture over k classes.

    class_centers   (k, dim) array of component means, pairwise distinct
    class_spread    per-class isotropic standard deviation (scalar or length k)
    class_priors    class probabilities, summing to 1
    """

    k: int
    dim: int
    class_centers: np.ndarray
    class_spread: np.ndarray
    class_priors: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.class_centers, dtype=float)
        spread = np.broadcast_to(np.asarray(self.class_spread, dtype=float), (self.k,)).copy()
        priors = np.asarray(self.class_priors, dtype=float)
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if centers.shape != (self.k, self.dim):
            raise ValueError(f"class_centers must have shape ({self.k}, {self.dim})")
        if priors.shape != (self.k,):
            raise ValueError(f"class_priors must have shape ({self.k},)")
        if not np.all(spread > 0.0):
            raise ValueError("class_spread must be positive")
        if abs(priors.sum() - 1.0) > 1e-12 or np.any(priors < 0.0):
            raise ValueError("class_priors must be nonnegative and sum to 1 within 1e-12")
        for arr in (centers, spread, priors):
            arr.flags.writeable = False
        object.__setattr__(self, "class_centers", centers)
        object.__setattr__(self, "class_spread", spread)
        object.__setattr__(self, "class_priors", priors)
        diffs = centers[:, None, :] - centers[None, :, :]
        dist2 = (diffs ** 2).sum(axis=-1)
        np.fill_diagonal(dist2, np.inf)
        if np.any(dist2 == 0.0):
            raise ValueError("class_centers must be pairwise distinct")

    @property
    def distribution_id(self) -> str:
        """Stable short identifier of the generator parameters."""
        h = hashlib.blake2b(digest_size=6)
        for arr in (self.class_centers, self.class_spread, self.class_priors):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        return f"gaussmix(k={self.k},dim={self.dim})#{h.hexdigest()}"


def simplex_mixture(
    k: int,
    dim: int,
    separation: float = 10.0,
    spread: float = 1.0,
    priors: Sequence[float] | None = None,
) -> DataDistribution:
    """Mixture with centers at ``separation`` times the first k basis vectors.

    The centers form a regular simplex with pairwise distance
    separation * sqrt(2). Requires dim >= k. Uniform priors by default.
    """
    if dim < k:
        raise ValueError(f"simplex_mixture needs dim >= k; got dim={dim}, k={k}")
    centers = np.zeros((k, dim))
    centers[np.arange(k), np.arange(k)] = separation
    p = np.full(k, 1.0 / k) if priors is None else np.asarray(priors, dtype=float)
    return DataDistribution(k=k, dim=dim, class_centers=centers,
                            class_spread=np.full(k, float(spread)), class_priors=p)


@dataclass(frozen=True)
class LabeledExample:
    """One example: feature vector, assigned label, true label, provenance."""

    features: np.ndarray
    label: int
    true_label: int
    provenance: Provenance


@dataclass(frozen=True)
class Dataset:
    """Immutable column-oriented collection of labeled examples.

    The arrays are read-only; label-changing operations return a new
    Dataset. ``distribution`` is a runtime convenience handle to the
    generator (kept by corruption operations, dropped by serialization;
    ``distribution_id`` is the durable provenance record).
    """

    features: np.ndarray
    labels: np.ndarray
    true_labels: np.ndarray
    provenance: np.ndarray
    k: int
    origin_seed: int | None = None
    distribution_id: str = ""
    distribution: DataDistribution | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        true = np.asarray(self.true_labels, dtype=np.int64)
        prov = np.asarray(self.provenance, dtype=np.uint8)
        n = feats.shape[0]
        if feats.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if labels.shape != (n,) or true.shape != (n,) or prov.shape != (n,):
            raise ValueError("labels, true_labels and provenance must match features in length")
        if n and (labels.min() < 0 or labels.max() >= self.k
                  or true.min() < 0 or true.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")
        agree = labels == true
        must_agree = np.isin(prov, (Provenance.CLEAN, Provenance.PSEUDO_CORRECT))
        must_differ = np.isin(prov, (Provenance.PSEUDO_WRONG, Provenance.MISLABELED))
        if np.any(must_agree & ~agree) or np.any(must_differ & agree):
            raise ValueError("provenance tags are inconsistent with label/true_label")
        for arr in (feats, labels, true, prov):
            arr.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "true_labels", true)
        object.__setattr__(self, "provenance", prov)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __getitem__(self, index: int) -> LabeledExample:
        return LabeledExample(
            features=self.features[index],
            label=int(self.labels[index]),
            true_label=int(self.true_labels[index]),
            provenance=Provenance(int(self.provenance[index])),
        )

    def __iter__(self) -> Iterator[LabeledExample]:
        return (self[i] for i in range(len(self)))

    @property
    def examples(self) -> tuple[LabeledExample, ...]:
        return tuple(self)

    def provenance_counts(self) -> dict[str, int]:
        """Exact example counts per provenance tag."""
        return {p.tag: int(np.count_nonzero(self.provenance == p)) for p in Provenance}

    def provenance_mask(self, kinds: Provenance | Iterable[Provenance]) -> np.ndarray:
        if isinstance(kinds, Provenance):
            kinds = (kinds,)
        return np.isin(self.provenance, tuple(int(p) for p in kinds))


def sample(dist: DataDistribution, count: int, seed) -> Dataset:
    """Draw ``count`` i.i.d. clean-labeled examples; deterministic per seed."""
    if not count >= 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    classes = rng.choice(dist.k, size=count, p=dist.class_priors)
    noise = rng.standard_normal((count, dist.dim))
    features = dist.class_centers[classes] + noise * dist.class_spread[classes, None]
    return Dataset(
        features=features,
        labels=classes,
        true_labels=classes.copy(),
        provenance=np.full(count, Provenance.CLEAN, dtype=np.uint8),
        k=dist.k,
        origin_seed=seed if isinstance(seed, int) else None,
        distribution_id=dist.distribution_id,
        distribution=dist,
    )


def _check_k(data: Dataset, k: int) -> None:
    if k != data.k:
        raise ValueError(f"k={k} does not match the dataset's class count {data.k}")


def randomize_labels_at(data: Dataset, indices: np.ndarray, k: int, seed) -> Dataset:
    """Assign uniform labels over all k classes at the given positions.

    The drawn label may coincide with the truth; provenance becomes
    ``randomized``. ``seed`` may be an int, SeedSequence or Generator.
    """
    _check_k(data, k)
    idx = np.asarray(indices, dtype=np.int64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    labels = data.labels.copy()
    prov = data.provenance.copy()
    labels[idx] = rng.integers(0, k, size=idx.shape[0])
    prov[idx] = Provenance.RANDOMIZED
    return replace(data, labels=labels, provenance=prov)


def randomize_labels(data: Dataset, count: int, k: int, seed) -> Dataset:
    """Uniformly pick ``count`` examples without replacement and randomize their labels."""
    if count > len(data):
        raise ValueError(f"count={count} exceeds the dataset size {len(data)}")
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(data))[:count]
    return randomize_labels_at(data, idx, k, rng)


def mislabel(data: Dataset, count: int, k: int, seed) -> Dataset:
    """Uniformly pick ``count`` examples and give each a wrong label.

    New labels are uniform over the k-1 classes excluding the truth, so no
    mislabeled example keeps its true label; provenance becomes ``mislabeled``.
    """
    _check_k(data, k)
    if count > len(data):
        raise ValueError(f"count={count} exceeds the dataset size {len(data)}")
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(data))[:count]
    labels = data.labels.copy()
    prov = data.provenance.copy()
    offsets = rng.integers(1, k, size=count)
    labels[idx] = (data.true_labels[idx] + offsets) % k
    prov[idx] = Provenance.MISLABELED
    return replace(data, labels=labels, provenance=prov)


def apply_pseudo_labels(data: Dataset, model) -> Dataset:
    """Relabel every example with the model's prediction and tag correctness.

    Provenance becomes ``pseudo_correct`` where the prediction matches the
    retained truth and ``pseudo_wrong`` elsewhere; the wrong fraction is the
    empirical risk of the model on this sample.
    """
    preds = np.asarray(model.predict(data.features), dtype=np.int64)
    prov = np.where(preds == data.true_labels,
                    np.uint8(Provenance.PSEUDO_CORRECT),
                    np.uint8(Provenance.PSEUDO_WRONG))
    return replace(data, labels=preds, provenance=prov)


def bayes_labels(dist: DataDistribution, X: np.ndarray) -> np.ndarray:
    """Maximum-posterior labels under the mixture; ties go to the lowest class index."""
    return _map_labels(np.atleast_2d(np.asarray(X, dtype=float)),
                       dist.class_centers, dist.class_spread, dist.class_priors)


def _map_labels(X: np.ndarray, centers: np.ndarray, spreads: np.ndarray,
                priors: np.ndarray) -> np.ndarray:
    # log posterior up to a shared constant; argmax with first-occurrence ties
    diffs = X[:, None, :] - centers[None, :, :]
    dist2 = (diffs ** 2).sum(axis=-1)
    dim = X.shape[1]
    with np.errstate(divide="ignore"):
        log_post = np.log(priors)[None, :] - dim * np.log(spreads)[None, :] \
            - dist2 / (2.0 * spreads[None, :] ** 2)
    return np.argmax(log_post, axis=1).astype(np.int64)


@dataclass(frozen=True)
class BayesRiskEstimate:
    """Monte-Carlo estimate of the optimal classifier's risk."""

    value: float
    std_error: float
    samples: int


def estimate_bayes_risk(dist: DataDistribution, samples: int, seed) -> BayesRiskEstimate:
    """Estimate the risk of the maximum-posterior classifier under ``dist``.

    Requires at least 10^4 samples so the reported binomial standard error
    is meaningful.
    """
    if samples < 10_000:
        raise ValueError("need at least 10^4 samples for a calibrated estimate")
    data = sample(dist, samples, seed)
    wrong = bayes_labels(dist, data.features) != data.true_labels
    p = float(wrong.mean())
    return BayesRiskEstimate(value=p, std_error=float(np.sqrt(p * (1.0 - p) / samples)),
                             samples=samples)


# --- columnar text serialization -------------------------------------------
#
# Line 1:  # pseudocert-dataset v1 k=<k> dim=<dim> seed=<seed|none> distribution=<id>
# Line 2:  feature_0,...,feature_{dim-1},label,true_label,provenance
# Then one comma-separated row per example, floats in round-trip precision,
# provenance as its lowercase tag.

def save_dataset(data: Dataset, path) -> None:
    """Write the dataset in the documented columnar text format."""
    with open(path, "w", encoding="utf-8") as fh:
        seed = "none" if data.origin_seed is None else str(data.origin_seed)
        fh.write(f"# pseudocert-dataset v1 k={data.k} dim={data.dim} "
                 f"seed={seed} distribution={data.distribution_id}\n")
        cols = [f"feature_{j}" for j in range(data.dim)] + ["label", "true_label", "provenance"]
        fh.write(",".join(cols) + "\n")
        for i in range(len(data)):
            feats = ",".join(repr(float(v)) for v in data.features[i])
            fh.write(f"{feats},{data.labels[i]},{data.true_labels[i]},"
                     f"{Provenance(int(data.provenance[i])).tag}\n")


def load_dataset(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`."""
    with open(path, "r", encoding="utf-8") as fh:
        meta = fh.readline().strip()
        if not meta.startswith("# pseudocert-dataset v1 "):
            raise ValueError(f"{path} is not a pseudocert dataset file")
        fields = dict(part.split("=", 1) for part in meta.split()[3:])
        k = int(fields["k"])
        dim = int(fields["dim"])
        seed = None if fields["seed"] == "none" else int(fields["seed"])
        fh.readline()  # column header
        feats, labels, true, prov = [], [], [], []
        for line in fh:
            parts = line.strip().split(",")
            feats.append([float(v) for v in parts[:dim]])
            labels.append(int(parts[dim]))
            true.append(int(parts[dim + 1]))
            prov.append(int(Provenance.from_tag(parts[dim + 2])))
    return Dataset(
        features=np.asarray(feats, dtype=float).reshape(len(labels), dim),
        labels=np.asarray(labels), true_labels=np.asarray(true),
        provenance=np.asarray(prov, dtype=np.uint8), k=k,
        origin_seed=seed, distribution_id=fields.get("distribution", ""),
    )
