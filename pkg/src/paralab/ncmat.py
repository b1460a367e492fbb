"""Dense complex matrix numerics for the m x m matrix algebra.

Matrices are plain numpy complex arrays.  The eigensolver is a cyclic
Jacobi iteration on Hermitian matrices, vectorized over leading batch
dimensions so that per-atom spectral quantities of step functions come
out of a single call.  Norms follow the trace-power convention
``(trace |x|^p)^(1/p)`` with the standard (unnormalized) matrix trace.
"""

from __future__ import annotations

import numpy as np

HERM_ATOL = 1e-10
_OFF_DIAG_FACTOR = 1e-13
_MAX_SWEEPS = 100


def _as_complex_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim < 2 or x.shape[-1] != x.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("matrix entries must be finite")
    return x


def _check_hermitian(H: np.ndarray) -> np.ndarray:
    """Validate Hermiticity up to a scaled tolerance and symmetrize."""
    H = _as_complex_matrix(H)
    scale = max(1.0, float(np.max(np.abs(H))) if H.size else 0.0)
    dev = float(np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2))))) if H.size else 0.0
    if dev > HERM_ATOL * scale:
        raise ValueError(f"matrix is not Hermitian: max deviation {dev:.3e}")
    return 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))


def _jacobi_rotate(A, V, p, q, vectors):
    """One batched cyclic-Jacobi rotation zeroing the (p, q) entries."""
    app = A[..., p, p].real
    aqq = A[..., q, q].real
    apq = A[..., p, q]
    absg = np.abs(apq)

    active = absg > 0.0
    safe = np.where(active, absg, 1.0)
    phase = np.where(active, apq / safe, 1.0)
    tau = (aqq - app) / (2.0 * safe)
    sgn = np.where(tau >= 0.0, 1.0, -1.0)
    t = -sgn / (np.abs(tau) + np.hypot(1.0, tau))  # hypot avoids tau^2 overflow
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = (t * c) * np.conj(phase)
    c = np.where(active, c, 1.0)
    s = np.where(active, s, 0.0)

    col_p = A[..., :, p].copy()
    col_q = A[..., :, q].copy()
    A[..., :, p] = c[..., None] * col_p + s[..., None] * col_q
    A[..., :, q] = -np.conj(s)[..., None] * col_p + c[..., None] * col_q
    row_p = A[..., p, :].copy()
    row_q = A[..., q, :].copy()
    A[..., p, :] = c[..., None] * row_p + np.conj(s)[..., None] * row_q
    A[..., q, :] = -s[..., None] * row_p + c[..., None] * row_q
    # restore exact Hermitian structure at the pivot
    A[..., p, q] = np.where(active, 0.0, A[..., p, q])
    A[..., q, p] = np.conj(A[..., p, q])

    if vectors:
        vcol_p = V[..., :, p].copy()
        vcol_q = V[..., :, q].copy()
        V[..., :, p] = c[..., None] * vcol_p + s[..., None] * vcol_q
        V[..., :, q] = -np.conj(s)[..., None] * vcol_p + c[..., None] * vcol_q


def _off_diag_mass(A: np.ndarray) -> np.ndarray:
    m = A.shape[-1]
    mask = ~np.eye(m, dtype=bool)
    return np.sqrt(np.sum(np.abs(A[..., mask]) ** 2, axis=-1))


def herm_eig_batch(H: np.ndarray, vectors: bool = True):
    """Eigendecomposition of a batch of Hermitian matrices.

    Returns (eigenvalues, U) with eigenvalues sorted descending along the
    last axis and U unitary with matching columns, or (eigenvalues, None)
    when ``vectors`` is false.  Cyclic Jacobi sweeps run until the
    off-diagonal Frobenius mass of every matrix drops below
    1e-13 times its Frobenius norm, capped at 100 sweeps.
    """
    A = _check_hermitian(H).copy()
    m = A.shape[-1]
    V = None
    if vectors:
        V = np.zeros_like(A)
        V[...] = np.eye(m)
    if m > 1:
        fro = np.sqrt(np.sum(np.abs(A) ** 2, axis=(-2, -1)))
        tol = _OFF_DIAG_FACTOR * np.maximum(fro, np.finfo(float).tiny)
        for _ in range(_MAX_SWEEPS):
            if np.all(_off_diag_mass(A) <= tol):
                break
            for p in range(m - 1):
                for q in range(p + 1, m):
                    _jacobi_rotate(A, V, p, q, vectors)

    eigvals = np.diagonal(A, axis1=-2, axis2=-1).real.copy()
    order = np.argsort(-eigvals, axis=-1, kind="stable")
    eigvals = np.take_along_axis(eigvals, order, axis=-1)
    if vectors:
        V = np.take_along_axis(V, order[..., None, :], axis=-1)
    return eigvals, V


def herm_eig(H: np.ndarray):
    """Eigenvalues (descending) and unitary eigenvectors of a Hermitian matrix."""
    H = np.asarray(H)
    if H.ndim != 2:
        raise ValueError("herm_eig expects a single matrix; use herm_eig_batch")
    return herm_eig_batch(H)


def singular_values(x: np.ndarray) -> np.ndarray:
    """Singular values (descending) of general complex matrices, batched."""
    x = _as_complex_matrix(x)
    gram = np.conj(np.swapaxes(x, -1, -2)) @ x
    eigvals, _ = herm_eig_batch(gram, vectors=False)
    return np.sqrt(np.clip(eigvals, 0.0, None))


def matrix_abs_power(x: np.ndarray, p: float) -> np.ndarray:
    """(x* x)^(p/2): the p-th power of the matrix absolute value.

    Negative eigenvalues of x* x (roundoff) are clamped to zero before the
    fractional power, so the result is Hermitian PSD.
    """
    if p < 0:
        raise ValueError(f"power must be nonnegative, got {p}")
    x = _as_complex_matrix(x)
    gram = np.conj(np.swapaxes(x, -1, -2)) @ x
    eigvals, U = herm_eig_batch(gram)
    powered = np.clip(eigvals, 0.0, None) ** (p / 2.0)
    out = (U * powered[..., None, :]) @ np.conj(np.swapaxes(U, -1, -2))
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def schatten_norm(x: np.ndarray, p: float) -> float:
    """Schatten p-norm (trace |x|^p)^(1/p); p = inf gives the spectral norm."""
    if not (p >= 1.0):
        raise ValueError(f"Schatten norm requires p >= 1, got {p}")
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("schatten_norm expects a single matrix")
    sv = singular_values(x)
    if np.isinf(p):
        return float(sv[0]) if sv.size else 0.0
    return float(np.sum(sv**p) ** (1.0 / p))


def psd_min_eig(H: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetrized Hermitian matrix."""
    H = np.asarray(H)
    if H.ndim != 2:
        raise ValueError("psd_min_eig expects a single matrix")
    eigvals, _ = herm_eig_batch(H, vectors=False)
    return float(eigvals[-1])


def psd_power_batch(H: np.ndarray, power: float) -> np.ndarray:
    """Fractional power of Hermitian PSD matrices, eigenvalues clamped at 0."""
    eigvals, U = herm_eig_batch(H)
    powered = np.clip(eigvals, 0.0, None) ** power
    out = (U * powered[..., None, :]) @ np.conj(np.swapaxes(U, -1, -2))
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def spectral_norm_batch(x: np.ndarray) -> np.ndarray:
    """Largest singular value per matrix in a batch."""
    sv = singular_values(x)
    return sv[..., 0]


def trace_norm_batch(x: np.ndarray) -> np.ndarray:
    """Sum of singular values per matrix in a batch."""
    sv = singular_values(x)
    return np.sum(sv, axis=-1)
