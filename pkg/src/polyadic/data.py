"""
Datasets: CSV ingestion, stratified splitting, balanced subsampling and the
synthetic generators (Gaussian XOR and a four-cluster 2-D problem).

CSV files have a header row and a class column named ``label``. Generator
parameters travel in ``Dataset.metadata`` and are written as a JSON sidecar
next to saved CSVs.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

XOR_BAYES_ACCURACY = 0.9667
SYNTHETIC_SEED = 35


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple
    feature_names: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.class_names = tuple(self.class_names)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if len(self.features) != len(self.labels):
            raise ValueError(f"{len(self.features)} feature rows but {len(self.labels)} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("labels must index into class_names")
        if not self.feature_names:
            self.feature_names = tuple(f"x{i}" for i in range(self.features.shape[1]))

    def __len__(self):
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> dict:
        counts = np.bincount(self.labels, minlength=self.n_classes)
        return dict(zip(self.class_names, counts.tolist()))

    def subset(self, index) -> "Dataset":
        return Dataset(self.features[index], self.labels[index], self.class_names,
                       self.feature_names, dict(self.metadata))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def load_csv(path, feature_columns=None, label_column: str = "label", delimiter: str = ",") -> Dataset:
    """Read a headed CSV; class labels get dense indices in order of first appearance."""
    with open(path, newline="") as f:
        reader = csv.reader(f, delimiter=delimiter)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: no label column {label_column!r} in header {header}")
        if feature_columns is None:
            feature_columns = [h for h in header if h != label_column]
        unknown = [c for c in feature_columns if c not in header]
        if unknown:
            raise ValueError(f"{path}: unknown columns {unknown}")
        fcols = [header.index(c) for c in feature_columns]
        lcol = header.index(label_column)
        rows, labels, names = [], [], {}
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(row[i]) for i in fcols])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric feature value") from None
            labels.append(names.setdefault(row[lcol].strip(), len(names)))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    meta = {}
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    return Dataset(np.array(rows), np.array(labels), tuple(names), tuple(feature_columns), meta)


def save_csv(ds: Dataset, path) -> None:
    """Write ``ds`` as CSV (plus a ``.json`` metadata sidecar when there is metadata)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([*ds.feature_names, "label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([*map(repr, x.tolist()), ds.class_names[y]])
    os.replace(tmp, path)
    if ds.metadata:
        side = Path(str(path) + ".json")
        tmp = side.with_name(side.name + ".tmp")
        tmp.write_text(json.dumps(ds.metadata, indent=2))
        os.replace(tmp, side)


def load_iris() -> Dataset:
    """The bundled Iris table (150 rows, 4 features, 50 per species)."""
    with resources.as_file(resources.files("polyadic") / "datasets" / "iris.csv") as p:
        return load_csv(p)


# ---------------------------------------------------------------------------
# Splitting and subsampling
# ---------------------------------------------------------------------------

def stratified_split(ds: Dataset, test_fraction: float, seed=None) -> tuple[Dataset, Dataset]:
    """Split each class separately so both parts keep the class ratios."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for k in range(ds.n_classes):
        members = rng.permutation(np.flatnonzero(ds.labels == k))
        if members.size == 0:
            continue
        n_test = int(round(members.size * test_fraction))
        if n_test < 1 or n_test >= members.size:
            raise ValueError(f"class {ds.class_names[k]!r} ({members.size} samples) "
                             f"cannot be split at test fraction {test_fraction}")
        test_idx.append(members[:n_test])
        train_idx.append(members[n_test:])
    return ds.subset(np.concatenate(train_idx)), ds.subset(np.concatenate(test_idx))


def subsample_balanced(ds: Dataset, n: int, seed=None) -> Dataset:
    """Uniform random subsample with exactly n / K rows per class."""
    k = ds.n_classes
    if n % k:
        raise ValueError(f"{n} rows cannot be split evenly over {k} classes")
    per = n // k
    rng = np.random.default_rng(seed)
    picks = []
    for c in range(k):
        members = np.flatnonzero(ds.labels == c)
        if members.size < per:
            raise ValueError(f"class {ds.class_names[c]!r} has {members.size} rows, need {per}")
        picks.append(rng.choice(members, per, replace=False))
    return ds.subset(np.concatenate(picks))


# ---------------------------------------------------------------------------
# Gaussian XOR
# ---------------------------------------------------------------------------

def xor_centers(a: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Centers and labels: (+-a, 0) are class 0, (0, +-a) class 1."""
    centers = np.array([[a, 0.0], [-a, 0.0], [0.0, a], [0.0, -a]])
    return centers, np.array([0, 0, 1, 1])


def xor_bayes_accuracy(sigma: float, a: float = 1.0) -> float:
    """Closed-form accuracy of the nearest-center rule.

    In coordinates rotated by 45 degrees the two projections are independent
    N(a/sqrt2, sigma^2) and the rule is right iff they share a sign, so the
    error is 2 p (1 - p) with p = Phi(-a / (sqrt2 sigma)).
    """
    p = ndtr(-a / (math.sqrt(2) * sigma))
    return float(1 - 2 * p * (1 - p))


def calibrate_xor_sigma(accuracy: float = XOR_BAYES_ACCURACY, a: float = 1.0) -> float:
    """Noise level at which the Bayes classifier reaches ``accuracy``."""
    if not 0.5 < accuracy < 1:
        raise ValueError(f"Bayes accuracy must lie in (0.5, 1), got {accuracy}")
    return brentq(lambda s: xor_bayes_accuracy(s, a) - accuracy, 1e-6 * a, 100 * a, xtol=1e-14)


def gen_gaussian_xor(per_center: int = 20, sigma: float | None = None, a: float = 1.0,
                     seed=None) -> Dataset:
    """Isotropic Gaussian blobs around the four XOR centers, ``per_center`` points each."""
    sigma = calibrate_xor_sigma(a=a) if sigma is None else sigma
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    rng = np.random.default_rng(seed)
    centers, labels = xor_centers(a)
    x = np.repeat(centers, per_center, axis=0) + sigma * rng.standard_normal((4 * per_center, 2))
    meta = {"generator": "gaussian_xor", "per_center": per_center, "sigma": sigma, "a": a, "seed": seed}
    return Dataset(x, np.repeat(labels, per_center), ("0", "1"), ("x0", "x1"), meta)


def bayes_xor(x, a: float = 1.0):
    """Nearest-center class, i.e. class 0 iff |x0| >= |x1| (ties go to class 0)."""
    x = np.asarray(x, dtype=float)
    out = (np.abs(x[..., 1]) > np.abs(x[..., 0])).astype(int)
    return int(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Four-class synthetic problem
# ---------------------------------------------------------------------------

def gen_synthetic4(n: int = 5000, seed=SYNTHETIC_SEED, flip: float = 0.01) -> Dataset:
    """Four anisotropic 2-D Gaussian clusters, one per class.

    Means are uniform in [-2, 2]^2, each covariance is a random rotation of
    axis scales drawn from [0.3, 1.0], and a ``flip`` fraction of labels is
    reassigned: n * flip / 4 points of each class k move to class k + 1
    (mod 4). Every random choice flows from ``seed`` and the drawn means and
    covariances are recorded in the metadata.
    """
    if n < 4:
        raise ValueError(f"need at least 4 samples, got {n}")
    rng = np.random.default_rng(seed)
    means = rng.uniform(-2, 2, (4, 2))
    covs = []
    for _ in range(4):
        angle = rng.uniform(0, np.pi)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        scales = rng.uniform(0.3, 1.0, 2)
        covs.append(rot @ np.diag(scales ** 2) @ rot.T)
    sizes = [n // 4 + (k < n % 4) for k in range(4)]
    xs, ys = [], []
    for k in range(4):
        xs.append(rng.multivariate_normal(means[k], covs[k], sizes[k]))
        ys.append(np.full(sizes[k], k))
    x, y = np.concatenate(xs), np.concatenate(ys)
    # the same number of points leaves every class for the next one, so the
    # class sizes stay exact while each flipped label really changes
    per_class = int(round(flip * n / 4))
    if per_class > min(sizes):
        raise ValueError(f"flip fraction {flip} is too large for {n} samples")
    chosen = [rng.choice(np.flatnonzero(y == k), per_class, replace=False) for k in range(4)]
    for k, idx in enumerate(chosen):
        y[idx] = (k + 1) % 4
    flipped = np.concatenate(chosen)
    meta = {"generator": "synthetic4", "n": n, "seed": seed, "flip": flip,
            "means": means.tolist(), "covariances": [c.tolist() for c in covs],
            "flipped": int(flipped.size)}
    return Dataset(x, y, ("0", "1", "2", "3"), ("x0", "x1"), meta)


def linear_ovr_accuracy(train: Dataset, test: Dataset | None = None) -> float:
    """Accuracy of a least-squares one-vs-rest linear classifier (a linear-separability probe)."""
    test = test or train
    a = np.column_stack([train.features, np.ones(len(train))])
    targets = np.eye(train.n_classes)[train.labels]
    w, *_ = np.linalg.lstsq(a, targets, rcond=None)
    scores = np.column_stack([test.features, np.ones(len(test))]) @ w
    return float(np.mean(scores.argmax(axis=1) == test.labels))
