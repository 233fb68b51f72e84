"""Small dense linear-algebra helpers shared by the analysis modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .exceptions import SolverError, ValidationError


def as_pair(A, C, M=None):
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    m = A.shape[0]
    if A.shape != (m, m):
        raise ValidationError(f"A must be square, got {A.shape}")
    if C.shape[1] != m:
        raise ValidationError(f"C must have {m} columns, got {C.shape}")
    M = np.eye(m, dtype=complex) if M is None else np.asarray(M, dtype=complex)
    if M.shape != (m, m):
        raise ValidationError(f"M must be {m} x {m}, got {M.shape}")
    return A, C, M


def standard_coords(A, C, M=None):
    """Transform to coordinates in which the M inner product is Euclidean.

    With ``M = R* R`` (Cholesky), returns ``(R A R^{-1}, C R^{-1}, R)``.
    """
    A, C, M = as_pair(A, C, M)
    try:
        R = sla.cholesky(0.5 * (M + M.conj().T), lower=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError("mass matrix is not positive definite") from exc
    Ab = sla.solve_triangular(R, (R @ A).T, trans="T", lower=False).T
    Cb = sla.solve_triangular(R, C.T, trans="T", lower=False).T
    return Ab, Cb, R


def spectral_abscissa(A) -> float:
    ev = np.linalg.eigvals(np.asarray(A))
    return float(np.max(ev.real))


def hermitian(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)
