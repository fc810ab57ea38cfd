"""Seeded sampling and the small dense linear-algebra kernel.

Random streams come from numpy's PCG64 bit generator. PCG64 output and the
derived normal draws are fixed for a given numpy release on every platform,
which is all the benchmark needs for bit-exact replay.

Child seeds are derived with ``numpy.random.SeedSequence``: the base seed is
the entropy and a tuple of small integers (sigma index, model index, purpose
tag) is the spawn key, so adding a new grid cell never disturbs an old one.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg

# purpose tags for derived streams
PURPOSE_DATASET = 0
PURPOSE_TRAIN = 1
PURPOSE_MIXING = 2
PURPOSE_SIGNAL = 3
PURPOSE_DISTRACTOR = 4
PURPOSE_OBS_NOISE = 5


class ShapeError(ValueError):
    pass


class SingularityError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    pass


class NumericError(FloatingPointError):
    pass


def derive_seed(base_seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed for ``(base_seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class Rng:
    """Single-owner random stream.

    Do not share one instance between sampling streams; derive a new seed
    with :func:`derive_seed` instead.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def child(self, *key: int) -> "Rng":
        return Rng(derive_seed(self.seed, *key))


def gauss_sample(rng: Rng, n, stddev: float) -> np.ndarray:
    """Draw ``n`` i.i.d. values from Normal(0, stddev**2); ``n`` may be a shape."""
    if stddev < 0 or not np.isfinite(stddev):
        raise ValueError(f"stddev must be a finite non-negative number, got {stddev}")
    draws = rng.normal(n)
    if stddev == 0:
        return np.zeros_like(draws)
    return stddev * draws


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def solve_ols(Z, S, with_intercept: bool = False, ridge_fallback: bool = True) -> np.ndarray:
    """Least-squares map ``W`` (m x k, or m x (k+1)) minimising sum_t ||s_t - W z_t||^2.

    With ``with_intercept`` the last column of ``W`` is the bias. The normal
    equations are solved by Cholesky; if a pivot falls below 1e-12 of the mean
    diagonal a ridge of 1e-10 * trace/k is added, or ``SingularityError`` is
    raised when ``ridge_fallback`` is off.
    """
    Z = _as_matrix(Z, "Z")
    S = _as_matrix(S, "S")
    if Z.shape[0] != S.shape[0]:
        raise ShapeError(f"row mismatch: Z has {Z.shape[0]} rows, S has {S.shape[0]}")
    if with_intercept:
        Z = np.hstack([Z, np.ones((Z.shape[0], 1))])
    T, k = Z.shape
    if T < k:
        raise SingularityError(f"need at least {k} rows, got {T}")
    G = Z.T @ Z
    rhs = Z.T @ S
    scale = np.trace(G) / k
    if scale <= 0:
        raise SingularityError(f"design matrix is all zeros (rank 0 of {k})")
    try:
        L = np.linalg.cholesky(G)
        ok = np.min(np.diag(L)) ** 2 >= 1e-12 * scale
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        if not ridge_fallback:
            rank = np.linalg.matrix_rank(Z)
            raise SingularityError(f"design matrix is rank deficient (rank {rank} of {k})")
        G = G + 1e-10 * scale * np.eye(k)
    W = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G, lower=True), rhs)
    return W.T


def eig_sym(M, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues in descending order and eigenvectors as columns. Each
    eigenvector is signed so its largest-magnitude entry is positive.
    """
    M = _as_matrix(M, "M")
    n = M.shape[0]
    if M.shape[1] != n:
        raise ShapeError(f"eig_sym needs a square matrix, got {M.shape}")
    A = 0.5 * (M + M.T)
    V = np.eye(n)
    norm = np.linalg.norm(A)
    if n > 1 and norm > 0:
        for sweep in range(max_sweeps):
            off = np.linalg.norm(A - np.diag(np.diag(A)))
            if off < tol * norm:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if abs(apq) < 1e-300:
                        continue
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) if theta != 0 else 1.0
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    Ap, Aq = A[:, p].copy(), A[:, q].copy()
                    A[:, p] = c * Ap - s * Aq
                    A[:, q] = s * Ap + c * Aq
                    Ap, Aq = A[p, :].copy(), A[q, :].copy()
                    A[p, :] = c * Ap - s * Aq
                    A[q, :] = s * Ap + c * Aq
                    Vp, Vq = V[:, p].copy(), V[:, q].copy()
                    V[:, p] = c * Vp - s * Vq
                    V[:, q] = s * Vp + c * Vq
        else:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    vals, V = vals[order], V[:, order]
    pivots = np.argmax(np.abs(V), axis=0)
    V = V * np.where(V[pivots, np.arange(n)] < 0, -1.0, 1.0)
    return vals, V


def finite_diff_grad(f: Callable[[np.ndarray], float], theta: Sequence[float], h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    if h <= 0:
        raise ValueError("h must be positive")
    theta = np.array(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        old = theta.flat[i]
        theta.flat[i] = old + h
        fp = f(theta)
        theta.flat[i] = old - h
        fm = f(theta)
        theta.flat[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value at coordinate {i}")
        grad.flat[i] = (fp - fm) / (2.0 * h)
    return grad
