"""Adaptive matched filter statistic, SINR measures and conditional performance.

Covariance estimates may be passed either as a dense Hermitian positive
definite array or as a :class:`~stapshrink.shrinkage.ShrinkageResult`; the
latter is inverted through its eigendecomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Union

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike
from scipy import special

from .core import CArray, InputError, NumericalError, as_vector
from .shrinkage import ShrinkageResult

__all__ = [
    "SinrMetrics",
    "DetectionReport",
    "HermitianSolver",
    "amf_statistic",
    "effective_sinr",
    "nsinr",
    "eta_tilde",
    "xi",
    "nu_hat",
    "sinr_metrics",
    "q_function",
    "pfa_conditional",
    "pd_conditional",
    "pd_interval",
    "rmb_loss_db",
    "detect",
]

MAX_CONDITION = 1e14
Q_TAIL_TOL = 1e-13

Covariance = Union[ArrayLike, ShrinkageResult, "HermitianSolver"]


class HermitianSolver:
    """Cholesky-backed ``A^{-1} v`` for a Hermitian positive definite ``A``."""

    def __init__(self, A: ArrayLike):
        A = np.asarray(A, dtype=np.complex128)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError(f"expected a square matrix, got shape {A.shape}")
        A = 0.5 * (A + A.conj().T)
        try:
            self._cho = scipy.linalg.cho_factor(A, lower=False, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"matrix is not positive definite: {exc}") from exc
        anorm = float(np.max(np.sum(np.abs(A), axis=0)))
        rcond, info = scipy.linalg.lapack.zpocon(self._cho[0], anorm)
        if info != 0 or not rcond * MAX_CONDITION > 1.0:
            raise NumericalError("matrix is numerically singular", condition=1.0 / max(rcond, 1e-300))
        self.matrix = A
        self.dim = A.shape[0]

    def solve(self, v: ArrayLike) -> CArray:
        return scipy.linalg.cho_solve(self._cho, np.asarray(v, dtype=np.complex128))

    def inverse(self) -> CArray:
        return self.solve(np.eye(self.dim, dtype=np.complex128))

    @cached_property
    def trace_inverse(self) -> float:
        return float(np.real(np.trace(self.inverse())))


def _solver(A: Covariance):
    if isinstance(A, HermitianSolver):
        return A
    if isinstance(A, ShrinkageResult):
        cond = A.shrunk_eigs.max() / A.shrunk_eigs.min()
        if cond > MAX_CONDITION:
            raise NumericalError("covariance estimate is numerically singular", condition=cond)
        return A
    return HermitianSolver(A)


def _dense(A: Covariance) -> CArray:
    if isinstance(A, ShrinkageResult):
        return A.matrix
    if isinstance(A, HermitianSolver):
        return A.matrix
    return np.asarray(A, dtype=np.complex128)


def _filter(s, R_hat: Covariance):
    solver = _solver(R_hat)
    s = as_vector(s, solver.dim)
    w = solver.solve(s)
    return s, w, float(np.real(np.vdot(s, w)))


def amf_statistic(s: ArrayLike, R_hat: Covariance, x: ArrayLike) -> float:
    """``|s' R_hat^{-1} x|^2 / (s' R_hat^{-1} s)``."""
    s, w, gain = _filter(s, R_hat)
    x = as_vector(x, s.size)
    return float(abs(np.vdot(w, x)) ** 2 / gain)


def nu_hat(s: ArrayLike, R_hat: Covariance, x: ArrayLike) -> float:
    """Estimated effective-SINR amplitude, the square root of the AMF statistic."""
    return math.sqrt(amf_statistic(s, R_hat, x))


def _quad_terms(s, R_hat: Covariance, R):
    s, w, gain = _filter(s, R_hat)
    R = _dense(R)
    if R.shape != (s.size, s.size):
        raise InputError(f"dimension mismatch: s has {s.size}, R has shape {R.shape}")
    out_power = float(np.real(np.vdot(w, R @ w)))
    if not (gain > 0 and out_power > 0):
        raise NumericalError("filter quadratic forms are not positive", gain=gain, power=out_power)
    return s, gain, out_power


def effective_sinr(s: ArrayLike, R_hat: Covariance, R: Covariance, a: complex = 1.0) -> float:
    """``|a|^2 (s'R_hat^{-1}s)^2 / (s'R_hat^{-1} R R_hat^{-1}s)``."""
    _, gain, power = _quad_terms(s, R_hat, R)
    return float(abs(a) ** 2 * gain**2 / power)


def xi(s: ArrayLike, R_hat: Covariance, R: Covariance) -> float:
    """Scale of the conditional chi-square law of the AMF statistic under H0."""
    _, gain, power = _quad_terms(s, R_hat, R)
    return power / gain


def nsinr(s: ArrayLike, R_hat: Covariance, R: Covariance) -> float:
    """Normalized SINR: effective SINR over the clairvoyant ``|a|^2 s'R^{-1}s``."""
    s, gain, power = _quad_terms(s, R_hat, R)
    opt = float(np.real(np.vdot(s, _solver(R).solve(s))))
    return gain**2 / (opt * power)


def eta_tilde(R_hat: Covariance, R: Covariance) -> float:
    """Trace proxy ``tr(R_hat^-1)^2 / (tr(R^-1) tr(R_hat^-2 R))``."""
    R_solver = R if isinstance(R, HermitianSolver) else HermitianSolver(_dense(R))
    R_dense = R_solver.matrix
    tr_r_inv = R_solver.trace_inverse
    if isinstance(R_hat, ShrinkageResult):
        U, d = R_hat.basis, R_hat.shrunk_eigs
        c = np.real(np.einsum("ij,ij->j", U.conj(), R_dense @ U))
        tr_inv = float(np.sum(1.0 / d))
        tr_inv2_r = float(np.sum(c / d**2))
    else:
        inv = _solver(R_hat).solve(np.eye(R_dense.shape[0]))
        tr_inv = float(np.real(np.trace(inv)))
        tr_inv2_r = float(np.real(np.trace(inv @ inv @ R_dense)))
    return tr_inv**2 / (tr_r_inv * tr_inv2_r)


def rmb_loss_db(eta: float) -> float:
    if not eta > 0:
        raise InputError(f"NSINR must be positive, got {eta}")
    return abs(10.0 * math.log10(eta))


@dataclass(frozen=True)
class SinrMetrics:
    eta: float
    eta_tilde: float
    nu_sq: float
    xi: float

    @property
    def rmb_loss_db(self) -> float:
        return rmb_loss_db(self.eta)


def sinr_metrics(s: ArrayLike, R_hat: Covariance, R: Covariance, a: complex = 1.0) -> SinrMetrics:
    """All SINR quantities for one filter, sharing the linear solves."""
    s, gain, power = _quad_terms(s, R_hat, R)
    opt = float(np.real(np.vdot(s, _solver(R).solve(s))))
    return SinrMetrics(
        eta=gain**2 / (opt * power),
        eta_tilde=eta_tilde(R_hat, R),
        nu_sq=float(abs(a) ** 2 * gain**2 / power),
        xi=power / gain,
    )


# --- performance ------------------------------------------------------------


def _poisson_cutoff(beta: float) -> int:
    k = int(beta + 10.0 * math.sqrt(beta) + 20)
    while special.pdtrc(k, beta) > Q_TAIL_TOL:
        k += int(5 * math.sqrt(beta)) + 10
    return k


def q_function(alpha: float, beta: float) -> float:
    """``Q(alpha, beta) = int_alpha^inf exp(-z - beta) I0(2 sqrt(beta z)) dz``.

    Evaluated as the Poisson(beta) mixture of regularized upper incomplete
    gamma functions ``sum_k e^-beta beta^k / k! * Gamma(k + 1, alpha) / k!``;
    the series is cut where the Poisson tail drops below 1e-13.
    """
    alpha, beta = float(alpha), float(beta)
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise InputError("Q arguments must be finite")
    if alpha < 0 or beta < 0:
        raise InputError(f"Q arguments must be nonnegative, got ({alpha}, {beta})")
    if alpha == 0.0:
        return 1.0
    if beta == 0.0:
        return math.exp(-alpha)
    k = np.arange(_poisson_cutoff(beta) + 1, dtype=float)
    weights = np.exp(k * math.log(beta) - beta - special.gammaln(k + 1.0))
    value = float(np.sum(weights * special.gammaincc(k + 1.0, alpha)))
    return min(max(value, 0.0), 1.0)


def pfa_conditional(tau: float, xi_value: float) -> float:
    """False-alarm rate ``exp(-tau / xi)`` given the training data."""
    if not xi_value > 0:
        raise InputError(f"xi must be positive, got {xi_value}")
    if tau < 0:
        raise InputError(f"threshold must be nonnegative, got {tau}")
    return math.exp(-tau / xi_value)


def pd_conditional(tau: float, xi_value: float, nu_sq: float) -> float:
    if not xi_value > 0:
        raise InputError(f"xi must be positive, got {xi_value}")
    if tau < 0:
        raise InputError(f"threshold must be nonnegative, got {tau}")
    return q_function(tau / xi_value, nu_sq)


def pd_interval(tau: float, nu_hat_value: float, q: float) -> tuple[float, float]:
    """Detection-rate interval with asymptotic confidence at least ``q``."""
    if not 0.0 <= q < 1.0:
        raise InputError(f"confidence must lie in [0, 1), got {q}")
    if nu_hat_value < 0:
        raise InputError(f"nu_hat must be nonnegative, got {nu_hat_value}")
    if tau < 0:
        raise InputError(f"threshold must be nonnegative, got {tau}")
    t = math.sqrt(math.log(1.0 / (1.0 - q)))
    lo = max(0.0, nu_hat_value - t)
    hi = max(0.0, nu_hat_value + t)
    return q_function(tau, lo * lo), q_function(tau, hi * hi)


@dataclass(frozen=True)
class DetectionReport:
    statistic: float
    threshold: float
    decision: Literal["H0", "H1"]
    xi: float
    nu_hat: float
    pfa_predicted: float
    pd_interval: tuple[float, float]
    confidence: float

    def as_row(self) -> dict:
        return {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "decision": self.decision,
            "xi": self.xi,
            "nu_hat": self.nu_hat,
            "pfa_predicted": self.pfa_predicted,
            "pd_lower": self.pd_interval[0],
            "pd_upper": self.pd_interval[1],
            "confidence": self.confidence,
        }


def detect(
    s: ArrayLike,
    R_hat: Covariance,
    x: ArrayLike,
    tau: float = 3.0,
    q: float = 0.9,
    R: Covariance | None = None,
) -> DetectionReport:
    """Run the AMF on ``x`` and attach performance predictions.

    Without the population covariance ``R`` the scale ``xi`` is taken at its
    limiting value 1.
    """
    solver = _solver(R_hat)
    T = amf_statistic(s, solver, x)
    scale = 1.0 if R is None else xi(s, solver, R)
    nh = math.sqrt(T)
    return DetectionReport(
        statistic=T,
        threshold=float(tau),
        decision="H1" if T > tau else "H0",
        xi=scale,
        nu_hat=nh,
        pfa_predicted=pfa_conditional(tau, scale),
        pd_interval=pd_interval(tau, nh, q),
        confidence=float(q),
    )
