"""Datasets and non-IID client partitions."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from .. import rng as rngmod


class TooFewSamples(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class DatasetPartition:
    dataset: Dataset
    client_indices: List[np.ndarray]
    gamma: float

    @property
    def K(self) -> int:
        return len(self.client_indices)

    def client(self, k: int):
        idx = self.client_indices[k]
        return self.dataset.X[idx], self.dataset.y[idx]

    def class_histogram(self, k: int) -> np.ndarray:
        return np.bincount(self.dataset.y[self.client_indices[k]], minlength=self.dataset.n_classes)


def synthetic_gaussian_mixture(n_train: int = 10_000, n_test: int = 2_000, n_features: int = 32,
                               n_classes: int = 10, separation: float = 1.0, seed: int = 0):
    """Isotropic Gaussian classes with means drawn once per seed.

    Returns ``(train, test)``.  ``separation`` scales the spread of the class
    means relative to the unit within-class noise.
    """
    gen = rngmod.stream(seed, rngmod.DATA)
    means = gen.standard_normal((n_classes, n_features)) * separation

    def draw(n):
        y = gen.integers(0, n_classes, size=n)
        X = means[y] + gen.standard_normal((n, n_features))
        return Dataset(X, y, n_classes)

    return draw(n_train), draw(n_test)


def load_csv(path, n_classes: int | None = None) -> Dataset:
    """Rows of ``label, feature_1, ..., feature_F``; a header line is skipped."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    raw = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    y = raw[:, 0].astype(int)
    if np.any(y < 0):
        raise ValueError(f"{path}: labels must be nonnegative integers")
    X = raw[:, 1:].astype(float)
    return Dataset(X, y, n_classes or int(y.max()) + 1)


def dirichlet_partition(dataset: Dataset, K: int, gamma: float, seed: int = 0) -> DatasetPartition:
    """Label-skewed split with equal client sizes.

    For every class, proportions over the ``K`` clients are drawn from
    ``Dirichlet(gamma * 1_K)``.  Clients holding more than ``N // K`` samples
    then hand their overflow (in bucket order) to under-full clients, filling
    one client at a time in index order, which keeps overflow blocks
    class-homogeneous.  Samples beyond ``K * (N // K)`` are dropped.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    n_per = len(dataset) // K
    if n_per == 0:
        raise TooFewSamples(f"{len(dataset)} samples cannot fill {K} clients")
    gen = rngmod.stream(seed, rngmod.PARTITION)
    order = gen.permutation(len(dataset))[: n_per * K]
    labels = dataset.y[order]

    buckets: List[list] = [[] for _ in range(K)]
    for c in range(dataset.n_classes):
        idx = order[labels == c]
        props = gen.dirichlet(np.full(K, float(gamma)))
        cuts = np.floor(np.cumsum(props)[:-1] * len(idx)).astype(int)
        for k, part in enumerate(np.split(idx, cuts)):
            buckets[k].extend(part.tolist())

    overflow = []
    for k in range(K):
        if len(buckets[k]) > n_per:
            overflow.extend(buckets[k][n_per:])
            del buckets[k][n_per:]
    pos = 0
    for k in range(K):
        need = n_per - len(buckets[k])
        if need > 0:
            buckets[k].extend(overflow[pos:pos + need])
            pos += need
    assert pos == len(overflow)

    return DatasetPartition(dataset, [np.array(b, dtype=int) for b in buckets], float(gamma))
