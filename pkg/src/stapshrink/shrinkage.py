"""Covariance estimators that share the sample covariance eigenbasis.

Every estimator returns a :class:`ShrinkageResult` holding the sample
eigenvectors and a positive vector of replacement eigenvalues. For LWD the
eigenvalues come from a kernel estimate of the sample spectral density and
its Hilbert transform, clipped to ``[noise_floor, lambda_max]`` and then made
monotone by isotonic regression.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from .core import (
    CArray,
    EigenSystem,
    FArray,
    InputError,
    NumericalError,
    UnsupportedRegimeError,
    hermitian_eig,
    reconstruct,
)

__all__ = [
    "EstimatorTag",
    "ShrinkageResult",
    "KernelState",
    "LWDComponents",
    "scm",
    "oracle_shrinker",
    "fml",
    "anderson",
    "lw_linear",
    "kernel_a",
    "kernel_b",
    "lwd_components",
    "lwd_shrink",
    "pav",
]

Kernel = Literal["semicircle", "unnormalized"]

ZERO_EIG_RTOL = 1e-10
BANDWIDTH_EXPONENT = -0.35


class EstimatorTag(str, Enum):
    SCM = "SCM"
    ORACLE = "Oracle"
    FML = "FML"
    ANDERSON = "AndersonR"
    LW_LINEAR = "LWLinear"
    LWD = "LWD"


@dataclass(frozen=True)
class ShrinkageResult:
    """``U diag(d) U'`` with ``U`` the sample eigenvectors."""

    basis: CArray = field(repr=False)
    shrunk_eigs: FArray
    estimator_tag: EstimatorTag
    noise_floor: float | None = None

    def __post_init__(self):
        d = np.asarray(self.shrunk_eigs, dtype=np.float64)
        if d.shape != (self.basis.shape[1],):
            raise InputError(f"{d.size} eigenvalues for a {self.basis.shape} basis")
        if not np.all(np.isfinite(d)) or not np.all(d > 0):
            raise NumericalError(
                f"{self.estimator_tag.value}: shrunken eigenvalues must be finite and positive",
                min_eig=float(np.min(d)),
            )
        object.__setattr__(self, "shrunk_eigs", d)

    @property
    def dim(self) -> int:
        return self.shrunk_eigs.size

    @cached_property
    def matrix(self) -> CArray:
        return reconstruct(self.basis, self.shrunk_eigs, check=False)

    def solve(self, v: ArrayLike) -> CArray:
        """Apply the inverse to a vector (or to each column of a matrix)."""
        v = np.asarray(v, dtype=np.complex128)
        coef = self.basis.conj().T @ v
        coef = coef / (self.shrunk_eigs if coef.ndim == 1 else self.shrunk_eigs[:, None])
        return self.basis @ coef


def scm(X: ArrayLike) -> CArray:
    """Sample covariance ``X X' / n`` of the columns of ``X``."""
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 2 or X.size == 0:
        raise InputError(f"training matrix must be a non-empty p x n array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("training matrix has non-finite entries")
    S = X @ X.conj().T / X.shape[1]
    return 0.5 * (S + S.conj().T)


def scm_estimator(S_eig: EigenSystem) -> ShrinkageResult:
    return ShrinkageResult(S_eig.eigenvectors, np.array(S_eig.eigenvalues), EstimatorTag.SCM)


def oracle_shrinker(S_eig: EigenSystem, R: ArrayLike) -> ShrinkageResult:
    """Eigenvalues ``u_i' R u_i``: the best a shrinkage estimator can do given ``R``."""
    R = np.asarray(R, dtype=np.complex128)
    U = S_eig.eigenvectors
    if R.shape != U.shape:
        raise InputError(f"dimension mismatch: R {R.shape}, basis {U.shape}")
    d = np.real(np.einsum("ij,ij->j", U.conj(), R @ U))
    return ShrinkageResult(U, d, EstimatorTag.ORACLE)


def fml(S_eig: EigenSystem, noise_floor: float = 1.0) -> ShrinkageResult:
    """Sample eigenvalues thresholded from below at a known noise power."""
    if not noise_floor > 0:
        raise InputError(f"noise floor must be positive, got {noise_floor}")
    d = np.maximum(S_eig.eigenvalues, noise_floor)
    return ShrinkageResult(S_eig.eigenvectors, d, EstimatorTag.FML, noise_floor)


def anderson(S_eig: EigenSystem, rank: int) -> ShrinkageResult:
    """Threshold at the mean of the ``p - rank`` smallest sample eigenvalues."""
    p = S_eig.dim
    if not 0 <= rank < p:
        raise InputError(f"rank must satisfy 0 <= r < p = {p}, got {rank}")
    lam = S_eig.eigenvalues
    floor = float(np.mean(lam[: p - rank]))
    if not floor > 0:
        raise NumericalError(
            "noise power estimate is not positive; too few samples for this rank",
            rank=rank,
            estimate=floor,
        )
    return ShrinkageResult(S_eig.eigenvectors, np.maximum(lam, floor), EstimatorTag.ANDERSON, floor)


def lw_linear(X: ArrayLike, S_eig: EigenSystem | None = None) -> ShrinkageResult:
    """Ledoit-Wolf (2004) convex combination of the sample covariance and a scaled identity.

    With ``m = tr(S)/p``, ``d2 = ||S - mI||_F^2 / p`` and
    ``b2 = min(d2, sum_k ||x_k x_k' - S||_F^2 / (p n^2))`` the eigenvalues are
    ``(b2/d2) m + (1 - b2/d2) lambda``.
    """
    X = np.asarray(X, dtype=np.complex128)
    p, n = X.shape
    if n < 2:
        raise InputError("lw_linear needs at least 2 samples")
    if not np.any(X):
        raise InputError("training matrix is identically zero")
    S = scm(X)
    if S_eig is None:
        S_eig = hermitian_eig(S)
    lam = S_eig.eigenvalues
    m = float(np.real(np.trace(S))) / p
    d2 = float(np.sum(np.abs(S - m * np.eye(p)) ** 2)) / p
    if d2 <= 1e-15 * m * m:
        return ShrinkageResult(S_eig.eigenvectors, np.full(p, m), EstimatorTag.LW_LINEAR)
    # ||x x' - S||_F^2 = ||x||^4 - 2 x'Sx + ||S||_F^2
    norms2 = np.sum(np.abs(X) ** 2, axis=0)
    xSx = np.real(np.einsum("ik,ik->k", X.conj(), S @ X))
    s_fro2 = float(np.sum(np.abs(S) ** 2))
    bbar2 = float(np.sum(norms2**2 - 2.0 * xSx + s_fro2)) / (p * n * n)
    b2 = min(max(bbar2, 0.0), d2)
    w = b2 / d2
    return ShrinkageResult(S_eig.eigenvectors, w * m + (1.0 - w) * lam, EstimatorTag.LW_LINEAR)


# --- LWD --------------------------------------------------------------------


@dataclass(frozen=True)
class KernelState:
    """Sample eigenvalues (ascending) with the bandwidth ``h = n**-0.35``.

    Only the ``min(p, n)`` largest eigenvalues enter the kernel sums; when
    ``p > n`` the remaining ``p - n`` are structurally zero.
    """

    lambdas: FArray
    p: int
    n: int

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        if lam.shape != (self.p,):
            raise InputError(f"expected {self.p} eigenvalues, got {lam.shape}")
        if np.any(np.diff(lam) < 0):
            raise InputError("eigenvalues must be ascending")
        object.__setattr__(self, "lambdas", lam)

    @property
    def h(self) -> float:
        return self.n**BANDWIDTH_EXPONENT

    @property
    def active(self) -> FArray:
        return self.lambdas[max(self.p - self.n, 0) :]


def _kernel_terms(lam, state: KernelState):
    lam = np.asarray(lam, dtype=np.float64)
    lj = state.active
    if np.any(lj <= 0):
        raise NumericalError(
            "zero eigenvalue inside the kernel index range", min_active=float(lj.min())
        )
    diff = lam[..., None] - lj
    width2 = 4.0 * lj**2 * state.h**2
    denom = 2.0 * lj**2 * state.h**2
    return diff, width2, denom


def kernel_a(lam, state: KernelState, *, kernel: Kernel = "semicircle"):
    """Kernel estimate of the Hilbert transform of the sample spectral density.

    ``sum_j [sgn(l - l_j) sqrt([(l - l_j)^2 - 4 l_j^2 h^2]^+) - l + l_j] / (2 c l_j^2 h^2)``
    over the nonzero sample eigenvalues, with ``c = pi`` for ``kernel="semicircle"``
    and ``c = 1`` for ``"unnormalized"``.
    """
    diff, width2, denom = _kernel_terms(lam, state)
    if kernel == "semicircle":
        denom = np.pi * denom
    elif kernel != "unnormalized":
        raise InputError(f"unknown kernel {kernel!r}")
    num = np.sign(diff) * np.sqrt(np.maximum(diff**2 - width2, 0.0)) - diff
    return np.sum(num / denom, axis=-1)


def kernel_b(lam, state: KernelState, *, kernel: Kernel = "semicircle"):
    """Kernel estimate of the sample spectral density (semicircle kernel, width ``2 l_j h``).

    ``"semicircle"``: ``sum_j sqrt([4 l_j^2 h^2 - (l - l_j)^2]^+) / (2 pi l_j^2 h^2)``.
    ``"unnormalized"``: ``sum_j [sqrt([4 l_j^2 h^2 - (l - l_j)^2]^+) - l + l_j] / (2 l_j^2 h^2)``,
    i.e. no ``1/pi`` and an extra linear term.
    """
    diff, width2, denom = _kernel_terms(lam, state)
    root = np.sqrt(np.maximum(width2 - diff**2, 0.0))
    if kernel == "semicircle":
        return np.sum(root / (np.pi * denom), axis=-1)
    if kernel == "unnormalized":
        return np.sum((root - diff) / denom, axis=-1)
    raise InputError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True)
class LWDComponents:
    d_tilde: FArray
    d_check: FArray
    d_hat: FArray
    n_zero: int


def lwd_components(
    lambdas: ArrayLike,
    n: int,
    noise_floor: float = 1.0,
    *,
    kernel: Kernel = "semicircle",
    allow_square: bool = False,
) -> LWDComponents:
    """Raw, clipped and isotonic LWD eigenvalues from ascending sample eigenvalues."""
    lam = np.asarray(lambdas, dtype=np.float64)
    p = lam.size
    if n < 2 or p < 2:
        raise InputError(f"LWD needs p >= 2 and n >= 2, got p={p}, n={n}")
    if not noise_floor > 0:
        raise InputError(f"noise floor must be positive, got {noise_floor}")
    if p == n and not allow_square:
        raise UnsupportedRegimeError(f"LWD is not supported at p = n = {p}")
    if abs(p / n - 1.0) < 0.05:
        warnings.warn(f"p/n = {p / n:.3f} is close to 1; LWD may be unreliable", stacklevel=2)

    lam_max = float(lam[-1])
    zero = lam <= ZERO_EIG_RTOL * lam_max
    n_zero = int(np.count_nonzero(zero))
    if n_zero != max(p - n, 0) or np.any(zero[n_zero:]):
        raise NumericalError(
            f"expected {max(p - n, 0)} zero sample eigenvalues, found {n_zero}",
            n_zero=n_zero,
        )
    lam = np.where(zero, 0.0, lam)
    state = KernelState(lam, p, n)
    gamma = p / n

    d_tilde = np.empty(p)
    lp = lam[n_zero:]
    a = kernel_a(lp, state, kernel=kernel)
    b = kernel_b(lp, state, kernel=kernel)
    z = np.pi / min(n, p) * (a + 1j * b)
    d_tilde[n_zero:] = lp / np.abs(1.0 - gamma - gamma * lp * z) ** 2
    if n_zero:
        a0 = float(kernel_a(0.0, state, kernel=kernel))
        null_value = 1.0 / (np.pi * (gamma - 1.0) * a0 / n)
        if not (np.isfinite(null_value) and null_value > 0):
            raise NumericalError("null-eigenvalue shrinkage is not positive", a_at_zero=a0)
        d_tilde[:n_zero] = null_value

    d_check = np.where(d_tilde > lam_max, lam_max, np.where(d_tilde < noise_floor, noise_floor, d_tilde))
    return LWDComponents(d_tilde, d_check, pav(d_check), n_zero)


def lwd_shrink(
    X: ArrayLike,
    noise_floor: float = 1.0,
    *,
    kernel: Kernel = "semicircle",
    isotonic: bool = True,
    allow_square: bool = False,
    S_eig: EigenSystem | None = None,
) -> ShrinkageResult:
    """Ledoit-Wolf direct nonlinear shrinkage, clipped and made monotone.

    ``isotonic=False`` keeps the clipped but unsorted eigenvalues.
    ``allow_square=True`` permits ``p == n`` (no null eigenvalues arise there,
    but consistency is not guaranteed at aspect ratio 1).
    """
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 2:
        raise InputError(f"training matrix must be 2-d, got shape {X.shape}")
    if S_eig is None:
        S_eig = hermitian_eig(scm(X))
    parts = lwd_components(
        S_eig.eigenvalues, X.shape[1], noise_floor, kernel=kernel, allow_square=allow_square
    )
    d = parts.d_hat if isotonic else parts.d_check
    return ShrinkageResult(S_eig.eigenvectors, d, EstimatorTag.LWD, noise_floor)


def pav(x: ArrayLike) -> FArray:
    """Least-squares nondecreasing fit (pool adjacent violators)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError("pav expects a 1-d vector")
    if not np.all(np.isfinite(x)):
        raise InputError("pav input must be finite")
    means: list[float] = []
    sizes: list[int] = []
    for value in x:
        m, w = float(value), 1
        while means and means[-1] > m:
            pm, pw = means.pop(), sizes.pop()
            m = (pm * pw + m * w) / (pw + w)
            w += pw
        means.append(m)
        sizes.append(w)
    return np.repeat(np.array(means), sizes)
