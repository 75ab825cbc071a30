"""Dense linear-algebra kernels: least squares, reduced-rank regression,
principal angles and spectral checks.

All routines are deterministic.  Rank decisions treat singular values at or
below ``max(shape) * eps * s_max`` as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = np.finfo(float).eps


def rank_cutoff(s: np.ndarray, shape: tuple[int, ...]) -> float:
    """Threshold below which a singular value counts as zero."""
    if s.size == 0:
        return 0.0
    return max(shape) * EPS * float(np.max(s))


@dataclass(frozen=True, eq=False)
class LstSqSolution:
    coefficients: np.ndarray
    effective_rank: int
    residual_norm: float


def least_squares(inputs: np.ndarray, targets: np.ndarray) -> LstSqSolution:
    """Minimum-norm least-squares solution of ``inputs @ coef ~ targets``.

    Backed by LAPACK's SVD-based solver; 1-D targets give 1-D coefficients.
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if inputs.ndim != 2:
        raise ValueError("inputs must be a 2-D array")
    if inputs.shape[0] < 1:
        raise ValueError("need at least one row")
    if targets.shape[0] != inputs.shape[0]:
        raise ValueError("inputs and targets have different row counts")
    coef, _, rank, _ = np.linalg.lstsq(inputs, targets, rcond=None)
    residual = targets - inputs @ coef
    return LstSqSolution(coef, int(rank), float(np.linalg.norm(residual)))


def _inverse_sqrt(S: np.ndarray) -> np.ndarray:
    eig, vec = np.linalg.eigh(S)
    cutoff = S.shape[0] * EPS * max(float(eig[-1]), 0.0)
    if eig[0] <= cutoff:
        raise np.linalg.LinAlgError("inputs are rank deficient")
    return (vec / np.sqrt(eig)) @ vec.T


def reduced_rank_regression(inputs: np.ndarray, targets: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """Best rank-``rank`` linear map from inputs to targets in squared error.

    Returns ``(A_hat, B_hat)`` with shapes ``(q, rank)`` and ``(rank, p)`` so
    that ``targets ~ inputs @ B_hat.T @ A_hat.T``.  The inputs are whitened by
    the inverse square root of their empirical second moment; in whitened
    coordinates the problem is a truncated SVD of the full least-squares map.
    Rows of ``B_hat`` are orthonormal in the whitened metric and their signs
    are fixed so that the largest-magnitude entry of each column of ``A_hat``
    is positive.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, p = X.shape
    q = Y.shape[1]
    if not 1 <= rank <= min(p, q):
        raise ValueError(f"rank must be in [1, {min(p, q)}], got {rank}")
    if n < p:
        raise np.linalg.LinAlgError("inputs are rank deficient (fewer rows than columns)")
    S_inv_half = _inverse_sqrt(X.T @ X / n)
    # full least-squares map in whitened coordinates, p x q
    M = S_inv_half @ (X.T @ Y) / n
    left, s, right_t = np.linalg.svd(M, full_matrices=False)
    left, s, right = left[:, :rank], s[:rank], right_t[:rank].T
    A_hat = right * s
    signs = np.sign(A_hat[np.argmax(np.abs(A_hat), axis=0), np.arange(rank)])
    signs[signs == 0] = 1.0
    A_hat = A_hat * signs
    B_hat = (left * signs).T @ S_inv_half
    return A_hat, B_hat


def _row_basis(rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    k = rows.shape[0]
    left, s, _ = np.linalg.svd(rows.T, full_matrices=False)
    if np.sum(s > rank_cutoff(s, rows.shape)) < k:
        raise np.linalg.LinAlgError("matrix is rank deficient")
    return left[:, :k]


def principal_angles(rows_a: np.ndarray, rows_b: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between two rowspaces.

    Small angles come from the sines (the component of one basis outside the
    other) since ``arccos`` loses all precision near 1.
    """
    Qa = _row_basis(rows_a)
    Qb = _row_basis(rows_b)
    if Qa.shape != Qb.shape:
        raise ValueError("both matrices must have the same shape")
    cos = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    cos = np.clip(cos, 0.0, 1.0)
    # singular values of the residual are the sines, largest first
    sin = np.linalg.svd(Qb - Qa @ (Qa.T @ Qb), compute_uv=False)
    sin = np.clip(np.sort(sin), 0.0, 1.0)
    angles = np.where(cos**2 >= 0.5, np.arcsin(sin), np.arccos(cos))
    return np.sort(angles)


def min_eigenvalue_sym(M: np.ndarray, atol: float = 1e-10) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.shape[0] != M.shape[1] or np.max(np.abs(M - M.T)) > atol * scale:
        raise ValueError("matrix is not symmetric")
    return float(np.linalg.eigvalsh((M + M.T) / 2)[0])


def min_singular_value(M: np.ndarray) -> float:
    """k-th largest singular value of an n x k matrix (n >= k)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n, k = M.shape
    if n < k:
        raise ValueError(f"need at least as many rows as columns, got {M.shape}")
    return float(np.linalg.svd(M, compute_uv=False)[k - 1])
