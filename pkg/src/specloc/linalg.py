"""Shared dense/iterative linear-algebra kernels.

All solvers are deterministic: iterative routines use a fixed Philox-seeded
start vector, so repeated runs give bit-identical results.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Below these sizes a dense factorization is faster and exact; above them the
# iterative/LDL routes keep memory and runtime in check.
DENSE_SVD_LIMIT = 512
DENSE_EIG_LIMIT = 2048

_START_VECTOR_KEY = 0x5EED


class SolverError(RuntimeError):
    """An iterative eigenvalue/singular-value solve failed to converge."""


def _start_vector(n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=_START_VECTOR_KEY))
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _as_linear_operator(a):
    if sp.issparse(a) or isinstance(a, np.ndarray):
        return spla.aslinearoperator(a)
    return a


def operator_norm(a, tol: float = 1e-8) -> float:
    """Operator 2-norm (largest singular value) of a general matrix.

    Dense SVD below ``DENSE_SVD_LIMIT``; otherwise a Lanczos solve of the
    largest eigenvalue of ``A^* A`` from a deterministic start vector, to
    relative tolerance `tol`.
    """
    n, m = a.shape
    if sp.issparse(a):
        if a.nnz == 0 or np.abs(a.data).max() == 0.0:
            return 0.0
    elif np.abs(a).max() == 0.0:
        return 0.0
    if max(n, m) < DENSE_SVD_LIMIT:
        dense = a.toarray() if sp.issparse(a) else np.asarray(a)
        return float(np.linalg.norm(dense, 2))
    op = _as_linear_operator(a)
    gram = spla.LinearOperator(
        (m, m),
        matvec=lambda v: op.rmatvec(op.matvec(v)),
        dtype=complex,
    )
    try:
        w = spla.eigsh(
            gram, k=1, which="LA", v0=_start_vector(m), tol=tol, maxiter=5000,
            return_eigenvectors=False,
        )
    except spla.ArpackNoConvergence as err:
        raise SolverError(f"operator norm did not converge: {err}") from err
    return float(np.sqrt(max(w[0], 0.0)))


def _hermitian_dense(a) -> np.ndarray:
    return a.toarray() if sp.issparse(a) else np.asarray(a)


def smallest_eigenvalue(a, tol: float = 0.0) -> float:
    """Smallest algebraic eigenvalue of a Hermitian positive-semidefinite matrix.

    Used for the restricted squares ``(H - E)^2`` whose lowest eigenvalue is
    the squared local gap.  Dense below ``DENSE_EIG_LIMIT``; above that a
    shift-invert Lanczos solve with a negative shift (safe for PSD input).
    """
    n = a.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if n < DENSE_EIG_LIMIT:
        w = scipy.linalg.eigh(
            _hermitian_dense(a), eigvals_only=True, subset_by_index=(0, 0)
        )
        return float(w[0])
    scale = spla.norm(a, np.inf) if sp.issparse(a) else np.linalg.norm(a, np.inf)
    sigma = -1e-3 * max(scale, 1.0)
    try:
        w = spla.eigsh(
            a, k=1, sigma=sigma, which="LM", v0=_start_vector(n), tol=tol,
            return_eigenvectors=False,
        )
    except spla.ArpackNoConvergence as err:
        raise SolverError(f"smallest-eigenvalue solve did not converge: {err}") from err
    return float(w[0])


def eigvals_near_zero(a, k: int = 6, tol: float = 0.0):
    """`k` eigenpairs of a Hermitian matrix nearest zero (shift-invert).

    Sparse matrices above a few hundred rows go straight to shift-invert
    Lanczos; a sparse factorization plus a handful of iterations is far
    cheaper than a dense eigendecomposition when only the low-lying
    spectrum is needed (the hot loop of eigenvalue tracking).
    """
    n = a.shape[0]
    k = min(k, n - 1) if n > 1 else 1
    use_dense = n < DENSE_EIG_LIMIT and not (sp.issparse(a) and n >= 400)
    if use_dense:
        w, v = np.linalg.eigh(_hermitian_dense(a))
        order = np.argsort(np.abs(w))[:k]
        order = order[np.argsort(w[order])]
        return w[order], v[:, order]
    for sigma in (0.0, 1e-10, 1e-8):
        try:
            w, v = spla.eigsh(a, k=k, sigma=sigma, which="LM",
                              v0=_start_vector(n), tol=tol)
            order = np.argsort(w)
            return w[order], v[:, order]
        except (RuntimeError, spla.ArpackError):
            continue
    raise SolverError("shift-invert solve near zero failed")


def min_abs_eigenvalue(a) -> float:
    """Smallest |eigenvalue| of a Hermitian matrix (= smallest singular value)."""
    w, _ = eigvals_near_zero(a, k=1)
    return float(np.min(np.abs(w)))


def _ldl_block_eigenvalues(d: np.ndarray) -> np.ndarray:
    n = d.shape[0]
    vals = []
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0:
            vals.extend(np.linalg.eigvalsh(d[i : i + 2, i : i + 2]))
            i += 2
        else:
            vals.append(d[i, i].real)
            i += 1
    return np.asarray(vals)


def inertia(a, zero_tol: float) -> tuple[int, int, int]:
    """Sylvester inertia ``(n_plus, n_minus, n_zero)`` of a Hermitian matrix.

    Eigenvalues with ``|w| < zero_tol`` count as zero.  Below
    ``DENSE_EIG_LIMIT`` the counts come from a full eigendecomposition;
    above it from the block-diagonal factor of an LDL^* factorization,
    whose congruence preserves the signs.
    """
    n = a.shape[0]
    dense = _hermitian_dense(a)
    if n < DENSE_EIG_LIMIT:
        w = np.linalg.eigvalsh(dense)
    else:
        _, d, _ = scipy.linalg.ldl(dense, hermitian=True)
        w = _ldl_block_eigenvalues(d)
    n_zero = int(np.sum(np.abs(w) < zero_tol))
    n_plus = int(np.sum(w >= zero_tol))
    n_minus = int(np.sum(w <= -zero_tol))
    return n_plus, n_minus, n_zero
