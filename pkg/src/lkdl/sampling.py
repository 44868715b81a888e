"""Landmark selection strategies for the low-rank kernel approximation.

Five schemes: uniform, diagonal-weighted, column-norm-weighted, k-means
centers and coreset (representation-error) weighting. All are deterministic
given the seed; the RNG is pinned to numpy's PCG64.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec, kernel_diagonal, kernel_matrix

SAMPLER_METHODS = ("uniform", "diagonal", "column_norm", "kmeans", "coreset")


@dataclass(frozen=True)
class SamplerSpec:
    method: str = "uniform"
    c: int = 1
    seed: int = 0
    max_iters: int = 100  # k-means only

    def __post_init__(self):
        if self.method not in SAMPLER_METHODS:
            raise ValueError(f"unknown sampling method: {self.method!r}")
        if self.c < 1:
            raise ValueError("number of landmarks c must be >= 1")


@dataclass
class LandmarkSet:
    """Selected landmark columns X_R; source_indices is None for k-means,
    whose landmarks are synthesized cluster centers."""

    X_R: np.ndarray
    source_indices: np.ndarray | None = None

    @property
    def c(self) -> int:
        return self.X_R.shape[1]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _check_c(c: int, n: int) -> None:
    if c > n:
        raise ValueError(f"cannot select c={c} landmarks from N={n} samples")


def _weighted_without_replacement(
    weights: np.ndarray, c: int, rng: np.random.Generator
) -> np.ndarray:
    """Sequential draw-and-renormalize; exact, O(cN)."""
    p = weights.astype(np.float64).copy()
    if np.any(p < 0):
        raise ValueError("negative sampling weight")
    total = p.sum()
    if total <= 0:
        raise ValueError("all sampling weights are zero")
    chosen = np.empty(c, dtype=np.int64)
    for t in range(c):
        p_norm = p / p.sum()
        idx = rng.choice(p.size, p=p_norm)
        chosen[t] = idx
        p[idx] = 0.0
    return chosen


def sample_uniform(X: np.ndarray, c: int, seed: int) -> LandmarkSet:
    """Uniform sampling of c columns without replacement."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_c(c, X.shape[1])
    idx = _rng(seed).choice(X.shape[1], size=c, replace=False)
    return LandmarkSet(X[:, idx].copy(), idx)


def sample_diagonal(
    kernel: KernelSpec, X: np.ndarray, c: int, seed: int
) -> LandmarkSet:
    """Columns drawn with weight K_ii^2 / sum_j K_jj^2, using only the
    diagonal (O(N) space)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_c(c, X.shape[1])
    d = kernel_diagonal(kernel, X)
    w = d * d
    if w.sum() <= 0:
        raise ValueError("kernel diagonal is identically zero")
    idx = _weighted_without_replacement(w, c, _rng(seed))
    return LandmarkSet(X[:, idx].copy(), idx)


def sample_column_norm(
    kernel: KernelSpec,
    X: np.ndarray,
    c: int,
    seed: int,
    memory_budget: int = 2 << 30,
) -> LandmarkSet:
    """Columns drawn with weight ||k^i||^2 / ||K||_F^2.

    Materializes the full N x N kernel matrix; errors out above the memory
    budget, advising a cheaper sampler.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[1]
    _check_c(c, n)
    if 8 * n * n > memory_budget:
        raise MemoryError(
            "column-norm sampling needs the full kernel matrix "
            f"({n}x{n} exceeds the memory budget); use diagonal, uniform, "
            "kmeans or coreset sampling instead"
        )
    K = kernel_matrix(kernel, X, X)
    w = np.sum(K * K, axis=0)
    if w.sum() <= 0:
        raise ValueError("kernel matrix is identically zero")
    idx = _weighted_without_replacement(w, c, _rng(seed))
    return LandmarkSet(X[:, idx].copy(), idx)


def column_norm_weights(kernel: KernelSpec, X: np.ndarray) -> np.ndarray:
    """Normalized column-norm sampling weights ||k^i||^2 / ||K||_F^2."""
    K = kernel_matrix(kernel, np.atleast_2d(X), np.atleast_2d(X))
    w = np.sum(K * K, axis=0)
    return w / w.sum()


def coreset_weights(X: np.ndarray) -> np.ndarray:
    """Per-sample representation errors against the dataset mean.

    err_i = ||x_i - mu * g_i||^2 with g_i the least-squares scalar
    (mu.x_i)/(mu.mu). Returned unnormalized.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    mu = X.mean(axis=1)
    mtm = float(mu @ mu)
    if mtm <= 0:
        raise ValueError("dataset mean is zero; coreset weights undefined")
    g = (mu @ X) / mtm
    resid = X - np.outer(mu, g)
    return np.sum(resid * resid, axis=0)


def sample_coreset(X: np.ndarray, c: int, seed: int) -> LandmarkSet:
    """Columns drawn with probability proportional to their representation
    error against the dataset mean; falls back to uniform when every sample
    is collinear with the mean."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[1]
    _check_c(c, n)
    err = coreset_weights(X)
    if err.sum() <= 1e-300 or err.max() <= 1e-12 * max(1.0, np.abs(X).max() ** 2):
        warnings.warn(
            "all samples are collinear with the mean; "
            "coreset sampling falls back to uniform"
        )
        return sample_uniform(X, c, seed)
    idx = _weighted_without_replacement(err, c, _rng(seed))
    return LandmarkSet(X[:, idx].copy(), idx)


def kmeans(
    X: np.ndarray,
    c: int,
    seed: int,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding on the columns of X.

    Deterministic given the seed: assignment ties go to the lowest-index
    center, and empty clusters are re-seeded from the point farthest from
    its assigned center. Returns a p x c matrix of centers.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    p, n = X.shape
    _check_c(c, n)
    if c == n:
        return X.copy()
    rng = _rng(seed)

    # k-means++ initialization
    centers = np.empty((p, c))
    centers[:, 0] = X[:, rng.integers(n)]
    d2 = np.sum((X - centers[:, [0]]) ** 2, axis=0)
    for j in range(1, c):
        total = d2.sum()
        if total <= 0:
            centers[:, j] = X[:, rng.integers(n)]
            continue
        centers[:, j] = X[:, rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[:, [j]]) ** 2, axis=0))

    sq_x = np.sum(X * X, axis=0)
    for _ in range(max_iters):
        # squared distances to each center; argmin breaks ties low-index
        sq_c = np.sum(centers * centers, axis=0)
        dist = sq_c[None, :] - 2.0 * (X.T @ centers)
        assign = np.argmin(dist, axis=1)
        new_centers = centers.copy()
        for j in range(c):
            members = assign == j
            if np.any(members):
                new_centers[:, j] = X[:, members].mean(axis=1)
        # re-seed empty clusters from the worst-represented point
        full_dist = dist + sq_x[:, None]
        for j in range(c):
            if not np.any(assign == j):
                worst = int(np.argmax(full_dist[np.arange(n), assign]))
                new_centers[:, j] = X[:, worst]
                assign[worst] = j
        shift = np.sqrt(np.sum((new_centers - centers) ** 2, axis=0)).max()
        centers = new_centers
        if shift <= tol:
            break
    return centers


def sample_kmeans(
    X: np.ndarray, c: int, seed: int, max_iters: int = 100
) -> LandmarkSet:
    """Landmarks are the c k-means cluster centers of the columns of X."""
    centers = kmeans(X, c, seed, max_iters=max_iters)
    return LandmarkSet(centers, None)


def select_landmarks(
    X: np.ndarray, spec: SamplerSpec, kernel: KernelSpec
) -> LandmarkSet:
    """Dispatch on SamplerSpec.method."""
    if spec.method == "uniform":
        return sample_uniform(X, spec.c, spec.seed)
    if spec.method == "diagonal":
        return sample_diagonal(kernel, X, spec.c, spec.seed)
    if spec.method == "column_norm":
        return sample_column_norm(kernel, X, spec.c, spec.seed)
    if spec.method == "kmeans":
        return sample_kmeans(X, spec.c, spec.seed, max_iters=spec.max_iters)
    return sample_coreset(X, spec.c, spec.seed)
