"""Per-class dictionary training and minimum-reconstruction-error
classification, plus the test-set corruption utilities used in the
robustness experiments.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dict_learning import LearnReport, learn
from .sparse_coding import omp_batch


@dataclass
class ClassDictionaryModel:
    """One dictionary per class; ``q`` is the cardinality used at test time."""

    labels: np.ndarray          # distinct class labels, sorted
    dictionaries: list[np.ndarray]  # d x m_i, aligned with labels
    q: int

    @property
    def space_dim(self) -> int:
        return self.dictionaries[0].shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.dictionaries)


def train_per_class(
    F_train: np.ndarray,
    labels: np.ndarray,
    m_per_class: int,
    q: int,
    iterations: int,
    method: str = "ksvd",
    seed: int = 0,
) -> ClassDictionaryModel:
    """Learn an independent dictionary on each class partition."""
    F_train = np.atleast_2d(np.asarray(F_train, dtype=np.float64))
    labels = np.ravel(np.asarray(labels))
    if labels.shape[0] != F_train.shape[1]:
        raise ValueError("label count does not match sample count")
    classes = np.unique(labels)
    dictionaries = []
    for i, lab in enumerate(classes):
        cols = labels == lab
        n_i = int(np.count_nonzero(cols))
        if n_i == 0:
            raise ValueError(f"class {lab} has no training samples")
        if m_per_class > n_i:
            warnings.warn(
                f"class {lab}: m_per_class={m_per_class} exceeds "
                f"class size {n_i}"
            )
        D, _, _ = learn(
            F_train[:, cols], m_per_class, q, iterations,
            method=method, seed=seed + i,
        )
        dictionaries.append(D)
    return ClassDictionaryModel(labels=classes, dictionaries=dictionaries, q=q)


def class_residuals(model: ClassDictionaryModel, F: np.ndarray) -> np.ndarray:
    """Squared reconstruction errors; shape (n_classes, n_samples)."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    if F.shape[0] != model.space_dim:
        raise ValueError(
            f"sample dimension {F.shape[0]} does not match model "
            f"({model.space_dim})"
        )
    res = np.empty((model.n_classes, F.shape[1]))
    for i, D in enumerate(model.dictionaries):
        Gamma = omp_batch(D, F, model.q)
        R = F - D @ Gamma
        res[i] = np.sum(R * R, axis=0)
    return res


def classify(model: ClassDictionaryModel, f: np.ndarray):
    """Classify one sample; returns (label, residuals). Ties break to the
    lowest label."""
    res = class_residuals(model, np.reshape(f, (-1, 1)))[:, 0]
    return model.labels[int(np.argmin(res))], res


def classify_batch(model: ClassDictionaryModel, F: np.ndarray) -> np.ndarray:
    """Predicted labels for each column of F."""
    res = class_residuals(model, F)
    return model.labels[np.argmin(res, axis=0)]


def corrupt_gaussian(
    X: np.ndarray,
    sigma_noise: float,
    seed: int = 0,
    renormalize: bool = True,
) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise; by default columns are then
    re-normalized to unit l2 norm, matching the dataset pipeline."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if sigma_noise < 0:
        raise ValueError("noise standard deviation must be nonnegative")
    if sigma_noise == 0:
        return X.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    Y = X + sigma_noise * rng.standard_normal(X.shape)
    if renormalize:
        norms = np.linalg.norm(Y, axis=0)
        Y = Y / np.where(norms > 0, norms, 1.0)
    return Y


def corrupt_missing(X: np.ndarray, fraction: float, seed: int = 0) -> np.ndarray:
    """Zero a uniformly chosen fraction of entries per column
    (floor(fraction * p) entries), re-normalizing surviving columns."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("missing fraction must lie in [0, 1]")
    if fraction == 0:
        return X.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    p, n = X.shape
    n_zero = int(np.floor(fraction * p))
    Y = X.copy()
    for i in range(n):
        idx = rng.choice(p, size=n_zero, replace=False)
        Y[idx, i] = 0.0
    norms = np.linalg.norm(Y, axis=0)
    if np.any(norms == 0):
        warnings.warn("corruption produced all-zero columns; left unnormalized")
    Y = Y / np.where(norms > 0, norms, 1.0)
    return Y
