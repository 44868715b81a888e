"""Greedy pursuit: orthogonal matching pursuit (OMP) and its kernelized
form (KOMP) that operates entirely through kernel values and a coefficient
dictionary A (feature-space atoms Phi(X) a_j).

Both share the same greedy structure: pick the atom with the largest
absolute correlation to the residual (lowest index on ties), re-solve least
squares on the support, repeat until the cardinality budget q is exhausted
or the residual norm drops below eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


@dataclass
class SparseCode:
    """Result of a single pursuit: ordered support, matching coefficients,
    final residual l2 norm and a degeneracy flag (singular support Gram)."""

    support: np.ndarray
    values: np.ndarray
    residual_norm: float
    degenerate: bool = False

    def to_dense(self, m: int) -> np.ndarray:
        g = np.zeros(m)
        g[self.support] = self.values
        return g


def _solve_support(M: np.ndarray, b: np.ndarray):
    """Least-squares coefficients on the support via Cholesky of the support
    Gram; falls back to lstsq on breakdown. Returns (gamma, degenerate)."""
    try:
        c, low = scipy.linalg.cho_factor(M, check_finite=False)
        return scipy.linalg.cho_solve((c, low), b, check_finite=False), False
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        gamma, *_ = np.linalg.lstsq(M, b, rcond=None)
        return gamma, True


def _greedy_pursuit(
    corr0: np.ndarray,
    G: np.ndarray,
    norm2: float,
    q: int,
    eps: float,
) -> SparseCode:
    """Shared greedy loop. ``corr0`` are the initial correlations <x, d_j>
    (in whatever inner product applies), ``G`` the m x m atom Gram in the
    same inner product, ``norm2`` the squared norm of the signal."""
    m = corr0.shape[0]
    support: list[int] = []
    gamma = np.zeros(0)
    rnorm2 = max(norm2, 0.0)
    degenerate = False
    mask = np.zeros(m, dtype=bool)
    while len(support) < min(q, m) and rnorm2 > eps * eps:
        if support:
            corr = corr0 - G[:, support] @ gamma
        else:
            corr = corr0.copy()
        corr[mask] = 0.0
        j = int(np.argmax(np.abs(corr)))
        if support and abs(corr[j]) == 0.0:
            break
        support.append(j)
        mask[j] = True
        sub = np.ix_(support, support)
        gamma_new, bad = _solve_support(G[sub], corr0[support])
        if bad:
            # singular support Gram: drop the offending atom, keep the last
            # consistent code and stop
            support.pop()
            degenerate = True
            break
        gamma = gamma_new
        rnorm2 = max(norm2 - float(corr0[support] @ gamma), 0.0)
    return SparseCode(
        support=np.asarray(support, dtype=np.int64),
        values=np.asarray(gamma, dtype=np.float64),
        residual_norm=float(np.sqrt(max(rnorm2, 0.0))),
        degenerate=degenerate,
    )


def _single_atom_codes(
    C: np.ndarray, gdiag: np.ndarray, norms2: np.ndarray
) -> np.ndarray:
    """Vectorized pursuit for the q=1, eps=0 case: one argmax per column.

    Matches the generic loop exactly: columns with zero norm stay empty,
    ties go to the lowest index, and a non-positive atom self-product (the
    1x1 support Gram) counts as degenerate and leaves the column empty.
    ``C`` holds the m x n initial correlations.
    """
    m, n = C.shape
    Gamma = np.zeros((m, n))
    j = np.argmax(np.abs(C), axis=0)
    ok = (norms2 > 0.0) & (gdiag[j] > 0.0)
    cols = np.nonzero(ok)[0]
    Gamma[j[cols], cols] = C[j[cols], cols] / gdiag[j[cols]]
    return Gamma


def omp(
    D: np.ndarray,
    x: np.ndarray,
    q: int,
    eps: float = 0.0,
    *,
    Dtx: np.ndarray | None = None,
    G: np.ndarray | None = None,
) -> SparseCode:
    """Orthogonal matching pursuit of x over the unit-norm dictionary D.

    ``Dtx`` and ``G`` allow reuse of precomputed D^T x and D^T D (batch
    acceleration); results are identical to computing them here.
    """
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    x = np.ravel(np.asarray(x, dtype=np.float64))
    if q < 1:
        raise ValueError("cardinality q must be >= 1")
    if D.shape[0] != x.shape[0]:
        raise ValueError("signal dimension does not match dictionary")
    if Dtx is None:
        Dtx = D.T @ x
    if G is None:
        G = D.T @ D
    return _greedy_pursuit(Dtx, G, float(x @ x), q, eps)


def omp_batch(
    D: np.ndarray, X: np.ndarray, q: int, eps: float = 0.0
) -> np.ndarray:
    """Column-wise OMP with the Gram matrix and D^T X precomputed once.

    Returns the dense m x N coefficient matrix.
    """
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    m, n = D.shape[1], X.shape[1]
    Gamma = np.zeros((m, n))
    if n == 0:
        return Gamma
    G = D.T @ D
    DtX = D.T @ X
    norms2 = np.sum(X * X, axis=0)
    if q == 1 and eps == 0.0:
        return _single_atom_codes(DtX, np.diag(G), norms2)
    for i in range(n):
        code = _greedy_pursuit(DtX[:, i], G, float(norms2[i]), q, eps)
        Gamma[code.support, i] = code.values
    return Gamma


def normalize_coefficient_dictionary(
    A: np.ndarray, K_XX: np.ndarray, tol: float = 1e-12
) -> np.ndarray:
    """Scale the columns of A so each feature-space atom has unit norm,
    a_j^T K a_j = 1. Zero-norm atoms are left untouched."""
    A = np.asarray(A, dtype=np.float64)
    norms = np.sqrt(np.maximum(np.einsum("ij,ij->j", A, K_XX @ A), 0.0))
    scale = np.where(norms > tol, norms, 1.0)
    return A / scale


def komp(
    K_XX: np.ndarray,
    K_zX: np.ndarray,
    kzz: float,
    A: np.ndarray,
    q: int,
    eps: float = 0.0,
    *,
    b: np.ndarray | None = None,
    M: np.ndarray | None = None,
) -> SparseCode:
    """Kernel OMP of a signal z over the coefficient dictionary A.

    Correlations are K(z,X) a_j - gamma_S^T A_S^T K(X,X) a_j and the support
    solve is [A_S^T K A_S]^{-1} (K(z,X) A_S)^T; the residual norm is tracked
    through kzz and the same quantities, so the feature space is never
    touched. ``b`` (= K_zX @ A) and ``M`` (= A^T K A) may be precomputed.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    K_zX = np.ravel(np.asarray(K_zX, dtype=np.float64))
    if q < 1:
        raise ValueError("cardinality q must be >= 1")
    if K_zX.shape[0] != A.shape[0]:
        raise ValueError("K(z,X) length does not match coefficient dictionary")
    if b is None:
        b = K_zX @ A
    if M is None:
        KA = np.asarray(K_XX, dtype=np.float64) @ A
        M = A.T @ KA
    return _greedy_pursuit(b, M, float(kzz), q, eps)


def komp_batch(
    K_XX: np.ndarray,
    K_ZX: np.ndarray,
    kzz: np.ndarray,
    A: np.ndarray,
    q: int,
    eps: float = 0.0,
) -> np.ndarray:
    """KOMP over many signals; rows of K_ZX are K(z_i, X). Returns the dense
    m x n_z coefficient matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    K_ZX = np.atleast_2d(np.asarray(K_ZX, dtype=np.float64))
    kzz = np.ravel(np.asarray(kzz, dtype=np.float64))
    m = A.shape[1]
    n = K_ZX.shape[0]
    KA = np.asarray(K_XX, dtype=np.float64) @ A
    M = A.T @ KA
    B = K_ZX @ A
    if q == 1 and eps == 0.0:
        return _single_atom_codes(B.T, np.diag(M), kzz)
    Gamma = np.zeros((m, n))
    for i in range(n):
        code = _greedy_pursuit(B[i], M, float(kzz[i]), q, eps)
        Gamma[code.support, i] = code.values
    return Gamma
