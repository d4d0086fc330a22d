"""Validated complex vectors and Hermitian matrices, eigendecomposition, quadratic forms.

Vectors and matrices are plain ``numpy`` arrays (``complex128``). The helpers
here validate and normalise them; everything downstream assumes their output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "InputError",
    "NumericalError",
    "UnsupportedRegimeError",
    "EigenSystem",
    "as_vector",
    "as_hermitian",
    "hermitian_eig",
    "reconstruct",
    "quad_form",
    "sqrt_factor",
]

CArray = NDArray[np.complex128]
FArray = NDArray[np.float64]

HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10


class InputError(ValueError):
    """Invalid argument: wrong shape, non-finite, not Hermitian, not PSD, ..."""


class NumericalError(ArithmeticError):
    """A computation failed or produced a value outside its valid range."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


class UnsupportedRegimeError(InputError):
    """The requested dimension/sample configuration is outside the estimator's domain."""


def as_vector(x: ArrayLike, dim: int | None = None) -> CArray:
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim == 2 and 1 in v.shape:
        v = v.reshape(-1)
    if v.ndim != 1 or v.size == 0:
        raise InputError(f"expected a non-empty 1-d vector, got shape {np.shape(x)}")
    if not np.all(np.isfinite(v)):
        raise InputError("vector has non-finite entries")
    if dim is not None and v.size != dim:
        raise InputError(f"vector has dimension {v.size}, expected {dim}")
    return v


def as_hermitian(
    A: ArrayLike,
    *,
    covariance: bool = False,
    rtol: float = HERMITIAN_RTOL,
) -> CArray:
    """Validate a square complex matrix and return its symmetrized copy.

    Asymmetry beyond ``rtol * max|A|`` is rejected. With ``covariance=True``
    the matrix must also be positive semidefinite up to round-off
    (smallest eigenvalue >= -1e-10 * ||A||).
    """
    M = np.asarray(A, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InputError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    scale = float(np.max(np.abs(M)))
    asym = np.abs(M - M.conj().T)
    if scale > 0 and asym.max() > rtol * scale:
        i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
        raise InputError(
            f"matrix is not Hermitian: |A[{i},{j}] - conj(A[{j},{i}])| = {asym[i, j]:.3g}"
        )
    M = 0.5 * (M + M.conj().T)
    if covariance:
        w = np.linalg.eigvalsh(M)
        norm = max(abs(w[0]), abs(w[-1]))
        if w[0] < -PSD_RTOL * norm:
            raise InputError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3g})")
    return M


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues and the matching unitary eigenvector matrix.

    Column ``i`` of ``eigenvectors`` belongs to ``eigenvalues[i]``.
    """

    eigenvalues: FArray
    eigenvectors: CArray

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def matrix(self) -> CArray:
        return reconstruct(self.eigenvectors, self.eigenvalues, check=False)


def hermitian_eig(A: ArrayLike) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    LAPACK ``heevd`` already returns ascending eigenvalues; a stable argsort
    is applied anyway so equal values keep solver order.
    """
    M = as_hermitian(A)
    try:
        w, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(w, kind="stable")
    w, U = w[order], U[:, order]
    scale = max(float(np.linalg.norm(M)), np.finfo(float).tiny)
    residual = float(np.linalg.norm(M @ U - U * w)) / scale
    if not np.isfinite(residual) or residual > 1e-8:
        raise NumericalError("eigendecomposition residual too large", residual=residual)
    w.setflags(write=False)
    U.setflags(write=False)
    return EigenSystem(w, U)


def reconstruct(U: ArrayLike, d: ArrayLike, *, check: bool = True) -> CArray:
    """Return ``U diag(d) U'`` symmetrized. ``d`` must be strictly positive."""
    U = np.asarray(U, dtype=np.complex128)
    d = np.asarray(d, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != U.shape[1] or d.shape != (U.shape[1],):
        raise InputError(f"shape mismatch: U {U.shape}, d {d.shape}")
    if check:
        if not np.all(d > 0):
            raise InputError("reconstruct requires strictly positive eigenvalues")
        gram_err = np.linalg.norm(U.conj().T @ U - np.eye(U.shape[1]))
        if gram_err > 1e-8:
            raise InputError(f"U is not unitary (||U'U - I||_F = {gram_err:.3g})")
    M = (U * d) @ U.conj().T
    return 0.5 * (M + M.conj().T)


def quad_form(s: ArrayLike, A: ArrayLike) -> float:
    """Real part of ``s' A s`` for Hermitian ``A``."""
    A = np.asarray(A, dtype=np.complex128)
    v = as_vector(s)
    if A.shape != (v.size, v.size):
        raise InputError(f"dimension mismatch: s has {v.size}, A has shape {A.shape}")
    return float(np.real(np.vdot(v, A @ v)))


def sqrt_factor(R: ArrayLike) -> CArray:
    """Hermitian square root ``F`` with ``F F' = R``."""
    M = as_hermitian(R, rtol=1e-8)
    w, U = np.linalg.eigh(M)
    norm = max(abs(w[0]), abs(w[-1]))
    if w[0] < -1e-8 * norm:
        raise InputError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3g})")
    F = (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T
    return 0.5 * (F + F.conj().T)
