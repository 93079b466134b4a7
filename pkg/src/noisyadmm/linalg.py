"""Dense linear-algebra primitives shared by every other module.

Vectors are 1-D ``numpy.ndarray`` of float64, matrices 2-D.  Everything here
is a pure function on immutable inputs; all arithmetic is 64-bit floating
point (desk-scale instances, n <= 128).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NotSPD",
    "OutOfRange",
    "as_vector",
    "as_matrix",
    "operator_norm",
    "solve_spd",
    "pseudo_solve",
]

_PIVOT_TOL = 1e-12


class NotSPD(Exception):
    """A pivot <= 1e-12 was encountered while factorizing a matrix that was
    claimed symmetric positive definite."""


class OutOfRange(Exception):
    """The right-hand side has a component outside the range of a singular
    PSD matrix; downstream this signals an infinite divergence."""


def as_vector(v) -> np.ndarray:
    """Coerces to a finite float64 1-D array, rejecting NaN/Inf."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector entries must be finite")
    return arr


def as_matrix(m) -> np.ndarray:
    """Coerces to a finite float64 2-D array, rejecting NaN/Inf."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


def operator_norm(m) -> float:
    """Largest singular value of ``m`` to 1e-8 relative accuracy.

    Power iteration on M^T M (deterministic start, tolerance 1e-12, capped at
    100000 iterations) with an eigen-decomposition fallback for the rare
    non-converged case (e.g. tied leading singular values).
    """
    mat = as_matrix(m)
    if mat.size == 0:
        raise ValueError("operator_norm requires a nonempty matrix")
    gram = mat.T @ mat
    scale = np.abs(gram).max()
    if scale == 0.0:
        return 0.0
    # Deterministic start with a mild perturbation so the iterate is never
    # orthogonal to the leading eigenvector in exact arithmetic.
    v = np.ones(gram.shape[0]) + 1e-3 * np.arange(gram.shape[0])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(100000):
        w = gram @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # v landed exactly in the null space; restart is pointless here
            # because gram is nonzero, so fall through to the eigen fallback.
            break
        v = w / norm_w
        est = float(v @ (gram @ v))
        # Relative stopping rule so accuracy is invariant under scaling m.
        if abs(est - prev) <= 1e-12 * max(est, np.finfo(float).tiny):
            return float(np.sqrt(max(est, 0.0)))
        prev = est
    return float(np.sqrt(max(np.linalg.eigvalsh(gram)[-1], 0.0)))


def solve_spd(s, rhs) -> np.ndarray:
    """Solves S v = rhs for symmetric positive definite S via Cholesky.

    Raises :class:`NotSPD` if any pivot drops to <= 1e-12 during the
    factorization.  Residual guarantee: ||S v - rhs|| <= 1e-9 (1 + ||rhs||).
    """
    chol = cholesky_spd(s)
    b = as_vector(rhs)
    z = np.linalg.solve(chol, b)  # triangular in exact arithmetic
    return np.linalg.solve(chol.T, z)


def cholesky_spd(s) -> np.ndarray:
    """Lower-triangular Cholesky factor of an SPD matrix, with the explicit
    pivot check demanded of :func:`solve_spd` (pivot <= 1e-12 -> NotSPD)."""
    mat = as_matrix(s)
    n, n2 = mat.shape
    if n != n2:
        raise ValueError("solve_spd requires a square matrix")
    if not np.allclose(mat, mat.T, atol=1e-10 * max(1.0, np.abs(mat).max())):
        raise NotSPD("matrix is not symmetric")
    low = np.zeros_like(mat)
    for j in range(n):
        pivot = mat[j, j] - low[j, :j] @ low[j, :j]
        if pivot <= _PIVOT_TOL:
            raise NotSPD(f"pivot {pivot:.3e} <= {_PIVOT_TOL} at column {j}")
        low[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            low[j + 1 :, j] = (
                mat[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]
            ) / low[j, j]
    return low


def pseudo_solve(s, rhs, tol: float = 1e-10) -> np.ndarray:
    """Minimum-norm solution of S v = rhs for symmetric PSD S.

    Eigenvalues <= tol * max_eig are treated as zero.  If ``rhs`` has a
    null-space component of magnitude > tol * ||rhs||, raises
    :class:`OutOfRange` (infinite divergence downstream).
    """
    mat = as_matrix(s)
    b = as_vector(rhs)
    eigvals, eigvecs = np.linalg.eigh(mat)
    max_eig = max(float(eigvals[-1]), 0.0)
    cutoff = tol * max_eig
    keep = eigvals > cutoff
    coeffs = eigvecs.T @ b
    null_mass = np.linalg.norm(coeffs[~keep])
    if null_mass > tol * max(np.linalg.norm(b), 1e-300):
        raise OutOfRange(
            f"rhs has null-space component {null_mass:.3e} beyond tolerance"
        )
    inv = np.where(keep, 1.0 / np.where(keep, eigvals, 1.0), 0.0)
    return eigvecs @ (inv * coeffs)
