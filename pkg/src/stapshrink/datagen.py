"""Synthetic covariances, steering vectors and training/test samples.

All randomness flows through :func:`derive_rng`, which maps a master seed and
a key (label plus integer indices) to an independent Philox stream. A given
key always yields the same numbers no matter which process draws them.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from .core import CArray, InputError, as_hermitian, as_vector, sqrt_factor

__all__ = [
    "SpikedSpectrum",
    "Scenario",
    "derive_rng",
    "spiked_covariance",
    "sample_steering",
    "sample_training",
    "sample_test_vector",
    "load_covariance",
    "save_covariance",
    "load_vector",
    "save_vector",
    "load_matrix",
    "save_matrix",
]

Distribution = Literal["gaussian", "laplace"]


def derive_rng(master_seed: int, label: str, *indices: int) -> np.random.Generator:
    """Independent generator for ``(master_seed, label, *indices)``."""
    if not 0 <= int(master_seed) < 2**64:
        raise InputError(f"seed must be an unsigned 64-bit integer, got {master_seed}")
    key = (zlib.crc32(label.encode("utf-8")), *(int(i) for i in indices))
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class SpikedSpectrum:
    """Identity covariance with ``r`` spikes above 1."""

    dim: int
    spikes: tuple[float, ...] = ()

    def __post_init__(self):
        spikes = tuple(sorted((float(v) for v in self.spikes), reverse=True))
        object.__setattr__(self, "spikes", spikes)
        if self.dim < 1:
            raise InputError("dim must be positive")
        if len(spikes) >= self.dim:
            raise InputError(f"need fewer spikes than dimensions ({len(spikes)} >= {self.dim})")
        bad = [v for v in spikes if not v > 1.0]
        if bad:
            raise InputError(f"every spike must exceed 1, got {bad}")

    @property
    def rank(self) -> int:
        return len(self.spikes)

    def eigenvalues(self) -> np.ndarray:
        tail = np.array(self.spikes[::-1], dtype=float)
        return np.concatenate([np.ones(self.dim - self.rank), tail])


@dataclass(frozen=True)
class Scenario:
    p: int
    n: int
    covariance: SpikedSpectrum | np.ndarray = field(repr=False)
    amplitude: complex = 1.0
    distribution: Distribution = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise InputError("p and n must be positive")
        if self.distribution not in ("gaussian", "laplace"):
            raise InputError(f"unknown distribution {self.distribution!r}")
        if self.p == self.n:
            warnings.warn(
                f"p = n = {self.p}: dimension/sample ratio of exactly 1 "
                "is outside the proportional-growth regime",
                stacklevel=2,
            )

    @property
    def gamma(self) -> float:
        return self.p / self.n

    def population(self) -> CArray:
        if isinstance(self.covariance, SpikedSpectrum):
            return spiked_covariance(self.covariance)
        return as_hermitian(self.covariance, covariance=True)


def spiked_covariance(spec: SpikedSpectrum) -> CArray:
    return np.diag(spec.eigenvalues()).astype(np.complex128)


def _complex_normal(rng: np.random.Generator, size) -> CArray:
    # circularly symmetric, E|z|^2 = 1
    z = rng.standard_normal(size=(*np.atleast_1d(size), 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def sample_steering(p: int, rng: np.random.Generator) -> CArray:
    """Steering vector uniform on the unit sphere of C^p."""
    if p < 1:
        raise InputError("p must be positive")
    g = _complex_normal(rng, p)
    return g / np.linalg.norm(g)


def _white(rng: np.random.Generator, shape, distribution: Distribution) -> CArray:
    z = _complex_normal(rng, shape)
    if distribution == "gaussian":
        return z
    if distribution == "laplace":
        # Gaussian scale mixture with unit-mean exponential mixing variance
        return z * np.sqrt(rng.standard_exponential(size=shape))
    raise InputError(f"unknown distribution {distribution!r}")


def sample_training(
    R: ArrayLike,
    n: int,
    distribution: Distribution,
    rng: np.random.Generator,
    *,
    factor: CArray | None = None,
) -> CArray:
    """``p x n`` matrix whose columns are iid, zero mean, covariance ``R``.

    ``factor`` may carry a precomputed :func:`sqrt_factor` of ``R``.
    """
    if n < 1:
        raise InputError("n must be positive")
    F = sqrt_factor(R) if factor is None else factor
    return F @ _white(rng, (F.shape[0], n), distribution)


def sample_test_vector(
    R: ArrayLike,
    s: ArrayLike,
    a: complex,
    hypothesis: Literal["H0", "H1"],
    rng: np.random.Generator,
    *,
    size: int | None = None,
    factor: CArray | None = None,
) -> CArray:
    """Gaussian return ``x ~ CN(0, R)`` under H0 or ``CN(a s, R)`` under H1.

    With ``size`` given, returns a ``p x size`` matrix of independent draws.
    """
    F = sqrt_factor(R) if factor is None else factor
    s = as_vector(s, F.shape[0])
    if hypothesis not in ("H0", "H1"):
        raise InputError(f"hypothesis must be 'H0' or 'H1', got {hypothesis!r}")
    if hypothesis == "H1" and a == 0:
        raise InputError("H1 requires a nonzero amplitude")
    m = 1 if size is None else int(size)
    x = F @ _complex_normal(rng, (F.shape[0], m))
    if hypothesis == "H1":
        x = x + a * s[:, None]
    return x[:, 0] if size is None else x


# --- file formats -----------------------------------------------------------
# Covariance:  line 1 "p", then p rows of 2p fields (re,im interleaved).
# Vector:      line 1 "p", then p rows "re,im".
# Matrix:      line 1 "p,n", then p rows of 2n fields.


def _fmt(z: complex) -> str:
    return f"{z.real:.17g},{z.imag:.17g}"


def _write_rows(path, header: str, M: np.ndarray) -> None:
    lines = [header]
    lines += [",".join(_fmt(z) for z in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_rows(path, kind: Literal["covariance", "vector", "matrix"]) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError(f"{path}: empty file")
    expected = 2 if kind == "matrix" else 1
    try:
        header = [int(tok) for tok in lines[0].split(",")]
    except ValueError as exc:
        raise InputError(f"{path}: line 1: bad dimension header {lines[0]!r}") from exc
    if len(header) != expected or min(header) < 1:
        want = "'p,n'" if kind == "matrix" else "a single positive integer p"
        raise InputError(f"{path}: line 1: {kind} header must be {want}, got {lines[0]!r}")
    rows = header[0]
    width = {"covariance": rows, "vector": 1, "matrix": header[-1]}[kind]
    body = lines[1:]
    if len(body) != rows:
        raise InputError(f"{path}: expected {rows} data rows, found {len(body)}")
    out = np.empty((rows, width), dtype=np.complex128)
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != 2 * width:
            raise InputError(
                f"{path}: row {i} (line {i + 2}): expected {2 * width} fields, got {len(fields)}"
            )
        try:
            vals = np.array([float(f) for f in fields])
        except ValueError as exc:
            raise InputError(f"{path}: row {i} (line {i + 2}): {exc}") from exc
        out[i] = vals[0::2] + 1j * vals[1::2]
    if not np.all(np.isfinite(out)):
        r, c = np.argwhere(~np.isfinite(out))[0]
        raise InputError(f"{path}: non-finite entry at row {r}, column {c}")
    return out


def save_covariance(path, R: ArrayLike) -> None:
    R = np.asarray(R, dtype=np.complex128)
    _write_rows(path, str(R.shape[0]), R)


def load_covariance(path) -> CArray:
    """Read a covariance file and validate it as Hermitian PSD (tolerance 1e-8)."""
    M = _read_rows(path, "covariance")
    p = M.shape[0]
    scale = float(np.max(np.abs(M))) or 1.0
    asym = np.abs(M - M.conj().T)
    if asym.max() > 1e-8 * scale:
        i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
        raise InputError(
            f"{path}: not Hermitian at row {i}, column {j} "
            f"(|R[{i},{j}] - conj(R[{j},{i}])| = {asym[i, j]:.3g})"
        )
    M = 0.5 * (M + M.conj().T)
    w = np.linalg.eigvalsh(M)
    if w[0] < -1e-10 * max(abs(w[0]), abs(w[-1])):
        raise InputError(f"{path}: {p}x{p} matrix is not positive semidefinite (min eigenvalue {w[0]:.3g})")
    return M


def save_vector(path, v: ArrayLike) -> None:
    v = as_vector(v)
    _write_rows(path, str(v.size), v[:, None])


def load_vector(path) -> CArray:
    return _read_rows(path, "vector")[:, 0]


def save_matrix(path, X: ArrayLike) -> None:
    X = np.asarray(X, dtype=np.complex128)
    _write_rows(path, f"{X.shape[0]},{X.shape[1]}", X)


def load_matrix(path) -> CArray:
    return _read_rows(path, "matrix")

