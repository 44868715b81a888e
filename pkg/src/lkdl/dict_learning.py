"""Dictionary learning by alternating sparse coding and dictionary updates.

Two linear updates are provided: the batch least-squares update
D = X Gamma^+ (method of optimal directions) and the atom-by-atom rank-1
update (K-SVD). The kernelized learner replaces the dictionary with a
coefficient dictionary A and updates it as A = Gamma^+, coding with KOMP;
this is the learning scheme used as the exact-kernel baseline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .sparse_coding import (
    komp_batch,
    normalize_coefficient_dictionary,
    omp_batch,
)

PINV_RTOL = 1e-10


@dataclass
class LearnReport:
    """Observability of a learning run: per-iteration objective values
    (entry 0 is the initial coding objective), iteration count and the
    number of dead-atom replacements."""

    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    replaced_atoms: int = 0


def reconstruction_objective(X, D, Gamma) -> float:
    R = X - D @ Gamma
    return float(np.sum(R * R))


def init_dictionary_from_columns(
    X: np.ndarray, m: int, rng: np.random.Generator
) -> np.ndarray:
    """Initial dictionary: a random subset of m columns of X, unit-normalized.
    When m > N the extra atoms are random unit vectors."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    p, n = X.shape
    if m <= n:
        idx = rng.choice(n, size=m, replace=False)
        D = X[:, idx].astype(np.float64).copy()
    else:
        warnings.warn(f"m={m} exceeds N={n}; padding with random atoms")
        idx = rng.permutation(n)
        D = np.concatenate([X[:, idx], rng.standard_normal((p, m - n))], axis=1)
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms == 0):
        raise ValueError("cannot initialize atoms from zero columns")
    return D / norms


def _pinv_cutoff(G: np.ndarray):
    """Moore-Penrose pseudo-inverse with the PINV_RTOL singular-value
    cutoff, computed through the smaller Gram factor (eigh on an m x m
    matrix instead of a full SVD of the m x N one). Returns
    (pinv, degenerate) where ``degenerate`` reports that the cutoff
    discarded at least one direction."""
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    m, n = G.shape
    if m > n:
        P, degenerate = _pinv_cutoff(G.T)
        return P.T, degenerate
    nz = np.any(G != 0.0, axis=1)
    Gs = G[nz]
    r = Gs.shape[0]
    full = np.zeros((n, m))
    if r == 0:
        return full, True
    w, U = np.linalg.eigh(Gs @ Gs.T)
    s = np.sqrt(np.maximum(w, 0.0))
    smax = float(s[-1])
    # eigh resolves eigenvalues only to ~eps * smax^2, so singular values
    # below ~sqrt(eps) * smax cannot be compared against the much smaller
    # cutoff; defer those rare cases to the SVD-based pseudo-inverse
    floor = 8.0 * np.sqrt(np.finfo(float).eps) * smax
    if smax == 0.0 or float(s[0]) <= floor:
        sv = np.linalg.svd(G, compute_uv=False)
        degenerate = bool(sv.min() <= PINV_RTOL * sv.max())
        return np.linalg.pinv(G, rcond=PINV_RTOL), degenerate
    core = (U / w) @ U.T
    full[:, nz] = Gs.T @ core
    return full, bool(r < min(m, n))


def mod_update(X: np.ndarray, Gamma: np.ndarray):
    """Least-squares-optimal dictionary D = X Gamma^+ for fixed codes.

    Atoms are renormalized and the matching rows of Gamma rescaled so the
    product D Gamma is preserved. Returns (D, Gamma, degenerate) where
    ``degenerate`` reports a rank-deficient Gamma (pseudo-inverse cutoff
    applied).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=np.float64))
    Gamma_pinv, degenerate = _pinv_cutoff(Gamma)
    D = X @ Gamma_pinv
    norms = np.linalg.norm(D, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    return D / scale, Gamma * scale[:, None], degenerate


def _top_singular_triplet(E: np.ndarray, tol: float = 1e-10, max_iters: int = 1000):
    """Dominant singular triplet of E by alternating power iteration."""
    start = int(np.argmax(np.sum(E * E, axis=0)))
    u = E[:, start]
    nu = np.linalg.norm(u)
    if nu == 0:
        return None
    u = u / nu
    s = 0.0
    for _ in range(max_iters):
        w = E.T @ u
        v = E @ w
        s_new = np.linalg.norm(v)
        if s_new == 0:
            break
        u_new = v / s_new
        if np.linalg.norm(u_new - u) < tol:
            u = u_new
            break
        u = u_new
    v = E.T @ u
    s = np.linalg.norm(v)
    if s == 0:
        return None
    return u, s, v / s


def ksvd_update(X: np.ndarray, D: np.ndarray, Gamma: np.ndarray):
    """Sequential atom-by-atom update: each atom and its coefficient row are
    replaced by the rank-1 factorization of the residual restricted to the
    signals that use the atom. Supports are unchanged. Atoms used by no
    signal are replaced by the currently worst-represented signal.

    Returns (D, Gamma, replaced) with ``replaced`` the dead-atom count.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    D = np.array(D, dtype=np.float64)
    Gamma = np.array(Gamma, dtype=np.float64)
    m = D.shape[1]
    replaced = 0
    for j in range(m):
        users = np.flatnonzero(Gamma[j, :] != 0)
        if users.size == 0:
            R = X - D @ Gamma
            worst = int(np.argmax(np.sum(R * R, axis=0)))
            col = X[:, worst]
            norm = np.linalg.norm(col)
            if norm > 0:
                D[:, j] = col / norm
                replaced += 1
            continue
        E = (
            X[:, users]
            - D @ Gamma[:, users]
            + np.outer(D[:, j], Gamma[j, users])
        )
        triplet = _top_singular_triplet(E)
        if triplet is None:
            continue
        u, s, v = triplet
        D[:, j] = u
        Gamma[j, users] = s * v
    return D, Gamma, replaced


def clear_dictionary(
    X: np.ndarray,
    D: np.ndarray,
    Gamma: np.ndarray,
    mu_thresh: float = 0.99,
    use_thresh: int = 4,
) -> tuple[np.ndarray, int]:
    """Replace degenerate atoms: near-duplicates (coherence above
    ``mu_thresh``) and atoms used by fewer than ``use_thresh`` signals are
    swapped for the currently worst-represented signals, normalized."""
    D = np.array(D, dtype=np.float64)
    R = X - D @ Gamma
    err = np.sum(R * R, axis=0)
    order = np.argsort(err)[::-1]
    next_worst = 0
    replaced = 0
    usage = np.sum(np.abs(Gamma) > 1e-7, axis=1)
    for j in range(D.shape[1]):
        G_j = np.abs(D.T @ D[:, j])
        G_j[j] = 0.0
        if G_j.max() > mu_thresh or usage[j] < use_thresh:
            while next_worst < order.size:
                col = X[:, order[next_worst]]
                next_worst += 1
                norm = np.linalg.norm(col)
                if norm > 0:
                    D[:, j] = col / norm
                    replaced += 1
                    break
    return D, replaced


def learn(
    X: np.ndarray,
    m: int,
    q: int,
    iterations: int,
    method: str = "ksvd",
    init: np.ndarray | None = None,
    seed: int = 0,
    eps: float = 0.0,
):
    """Alternate batch OMP coding and the chosen dictionary update.

    ``init`` may be a provided p x m dictionary; otherwise atoms start from
    a random subset of data columns. Returns (D, Gamma, LearnReport).
    """
    if method not in ("mod", "ksvd"):
        raise ValueError(f"unknown dictionary update method: {method!r}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if init is None:
        D = init_dictionary_from_columns(
            X, m, np.random.Generator(np.random.PCG64(seed))
        )
    else:
        D = np.array(init, dtype=np.float64)
        if D.shape != (X.shape[0], m):
            raise ValueError("provided initial dictionary has wrong shape")
    report = LearnReport(iterations=iterations)
    Gamma = omp_batch(D, X, q, eps)
    obj = reconstruction_objective(X, D, Gamma)
    report.objective_trace.append(obj)

    def step(D_cur, Gamma_prev):
        """One coding + update pass. Coding keeps the previous code of any
        column it would make worse, so the pass cannot increase the
        objective when D_cur is the dictionary Gamma_prev refers to."""
        G = omp_batch(D_cur, X, q, eps)
        if Gamma_prev is not None:
            old = np.sum((X - D_cur @ Gamma_prev) ** 2, axis=0)
            new = np.sum((X - D_cur @ G) ** 2, axis=0)
            worse = new > old
            if np.any(worse):
                G[:, worse] = Gamma_prev[:, worse]
        if method == "mod":
            D_out, G, _ = mod_update(X, G)
            rep = 0
        else:
            D_out, G, rep = ksvd_update(X, D_cur, G)
        return D_out, G, rep, reconstruction_objective(X, D_out, G)

    for t in range(iterations):
        if t == 0:
            # first pass reuses the initial coding
            if method == "mod":
                D_new, G_new, _ = mod_update(X, Gamma)
                rep = 0
            else:
                D_new, G_new, rep = ksvd_update(X, D, Gamma)
            obj_new = reconstruction_objective(X, D_new, G_new)
        else:
            # try escaping degenerate atoms first; fall back to the plain
            # (provably non-increasing) pass if that raised the objective
            D_cleared, cleared = clear_dictionary(X, D, Gamma)
            D_new, G_new, rep, obj_new = step(
                D_cleared, Gamma if cleared == 0 else None
            )
            rep += cleared
            if obj_new > obj * (1 + 1e-12) and cleared > 0:
                D_new, G_new, rep, obj_new = step(D, Gamma)
        if not np.isfinite(obj_new):
            raise FloatingPointError("non-finite learning objective")
        D, Gamma, obj = D_new, G_new, obj_new
        report.replaced_atoms += rep
        report.objective_trace.append(obj)
    return D, Gamma, report


def kernel_objective(K: np.ndarray, A: np.ndarray, Gamma: np.ndarray) -> float:
    """Feature-space reconstruction objective expanded through kernel values:
    tr(K) - 2 tr(K A Gamma) + tr(Gamma^T A^T K A Gamma)."""
    KA = K @ A
    return float(
        np.trace(K)
        - 2.0 * np.sum(KA * Gamma.T)
        + np.sum((A.T @ KA) @ Gamma * Gamma)
    )


def _kernel_column_errors(K, kdiag, A, Gamma) -> np.ndarray:
    """Per-column feature-space squared residuals through kernel values."""
    KA = K @ A
    M = A.T @ KA
    cross = np.sum(KA.T * Gamma, axis=0)
    quad = np.sum(Gamma * (M @ Gamma), axis=0)
    return kdiag - 2.0 * cross + quad


def clear_coefficient_dictionary(
    K: np.ndarray,
    kdiag: np.ndarray,
    A: np.ndarray,
    Gamma: np.ndarray,
    mu_thresh: float = 0.99,
    use_thresh: int = 4,
) -> tuple[np.ndarray, int]:
    """Kernel-domain mirror of clear_dictionary: degenerate feature-space
    atoms are replaced by the worst-represented mapped signals."""
    A = np.array(A, dtype=np.float64)
    err = _kernel_column_errors(K, kdiag, A, Gamma)
    order = np.argsort(err)[::-1]
    next_worst = 0
    replaced = 0
    usage = np.sum(np.abs(Gamma) > 1e-7, axis=1)
    KA = K @ A
    M = A.T @ KA
    for j in range(A.shape[1]):
        G_j = np.abs(M[:, j])
        G_j[j] = 0.0
        if G_j.max() > mu_thresh or usage[j] < use_thresh:
            while next_worst < order.size:
                w = int(order[next_worst])
                next_worst += 1
                norm = np.sqrt(max(kdiag[w], 0.0))
                if norm > 0:
                    A[:, j] = 0.0
                    A[w, j] = 1.0 / norm
                    # replacing one column only touches row/column j of
                    # M = A^T K A; the new atom is e_w / norm, so the new
                    # row is K[w] A / norm -- an O(n + m) update instead of
                    # recomputing the full product
                    KA[:, j] = K[:, w] / norm
                    row = KA[w, :] / norm
                    M[j, :] = row
                    M[:, j] = row
                    replaced += 1
                    break
    return A, replaced


def kernel_mod_learn(
    K_XX: np.ndarray,
    m: int,
    q: int,
    iterations: int,
    seed: int = 0,
    eps: float = 0.0,
):
    """Kernel dictionary learning with KOMP coding and the batch update
    A = Gamma^+; atoms are renormalized to unit feature-space norm after
    each update (matching row rescale preserves A Gamma).

    ``K_XX`` is the train-set kernel matrix. The coefficient dictionary is
    initialized from m random identity columns (atoms are mapped training
    samples). The iteration structure (guarded coding, degenerate-atom
    clearing with fallback) mirrors ``learn``, so with a linear kernel the
    two produce the same objective sequence. Returns (A, Gamma, LearnReport).
    """
    K = np.asarray(K_XX, dtype=np.float64)
    n = K.shape[0]
    if K.shape[0] != K.shape[1]:
        raise ValueError("kernel matrix must be square")
    rng = np.random.Generator(np.random.PCG64(seed))
    if m > n:
        raise ValueError(f"m={m} atoms exceed N={n} training samples")
    idx = rng.choice(n, size=m, replace=False)
    A = np.zeros((n, m))
    A[idx, np.arange(m)] = 1.0
    A = normalize_coefficient_dictionary(A, K)
    kdiag = np.diag(K).copy()
    report = LearnReport(iterations=iterations)
    Gamma = komp_batch(K, K, kdiag, A, q, eps)
    obj = kernel_objective(K, A, Gamma)
    report.objective_trace.append(obj)

    def update(G):
        A_new, _ = _pinv_cutoff(G)
        norms = np.sqrt(np.maximum(np.einsum("ij,ij->j", A_new, K @ A_new), 0.0))
        scale = np.where(norms > 0, norms, 1.0)
        return A_new / scale, G * scale[:, None]

    def step(A_cur, Gamma_prev):
        G = komp_batch(K, K, kdiag, A_cur, q, eps)
        if Gamma_prev is not None:
            old = _kernel_column_errors(K, kdiag, A_cur, Gamma_prev)
            new = _kernel_column_errors(K, kdiag, A_cur, G)
            worse = new > old
            if np.any(worse):
                G[:, worse] = Gamma_prev[:, worse]
        A_new, G = update(G)
        return A_new, G, kernel_objective(K, A_new, G)

    for t in range(iterations):
        if t == 0:
            A_new, G_new = update(Gamma)
            obj_new = kernel_objective(K, A_new, G_new)
            rep = 0
        else:
            A_cleared, cleared = clear_coefficient_dictionary(
                K, kdiag, A, Gamma
            )
            A_new, G_new, obj_new = step(
                A_cleared, Gamma if cleared == 0 else None
            )
            rep = cleared
            if obj_new > obj * (1 + 1e-12) and cleared > 0:
                A_new, G_new, obj_new = step(A, Gamma)
                rep = 0
        if not np.isfinite(obj_new):
            raise FloatingPointError("non-finite kernel learning objective")
        A, Gamma, obj = A_new, G_new, obj_new
        report.replaced_atoms += rep
        report.objective_trace.append(obj)
    return A, Gamma, report
