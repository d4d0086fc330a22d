import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pd
from oracles import kernel_sums, lwd_transcription, pav_bruteforce
from stapshrink.core import InputError, NumericalError, UnsupportedRegimeError, hermitian_eig
from stapshrink.datagen import SpikedSpectrum, derive_rng, sample_training, spiked_covariance
from stapshrink.shrinkage import (
    EstimatorTag,
    KernelState,
    ShrinkageResult,
    anderson,
    fml,
    kernel_a,
    kernel_b,
    lw_linear,
    lwd_components,
    lwd_shrink,
    oracle_shrinker,
    pav,
    scm,
    scm_estimator,
)

VARIANTS = {"unnormalized": "printed", "semicircle": "semicircle"}


def eig_of(lam):
    lam = np.asarray(lam, dtype=float)
    return hermitian_eig(np.diag(lam))


def white(p, n, seed, label="white"):
    return sample_training(np.eye(p), n, "gaussian", derive_rng(seed, label, p, n))


# --- SCM and simple estimators ---------------------------------------------------


def test_scm_examples():
    np.testing.assert_array_equal(scm(np.array([[1.0], [0.0]])), [[1, 0], [0, 0]])
    np.testing.assert_array_equal(scm(np.eye(2)), np.eye(2) / 2)


def test_scm_rejects_empty():
    with pytest.raises(InputError):
        scm(np.zeros((3, 0)))


def test_scm_consistency():
    R = np.diag([2.0, 1.0])
    S = scm(sample_training(R, 100_000, "gaussian", derive_rng(1, "scm")))
    assert np.linalg.norm(S - R) / np.linalg.norm(R) < 0.05


def test_oracle_examples(rng):
    es = hermitian_eig(random_pd(rng, 5))
    np.testing.assert_allclose(oracle_shrinker(es, np.eye(5)).shrunk_eigs, 1.0, atol=1e-14)
    d = oracle_shrinker(eig_of([1.0, 3.0]), np.diag([1.0, 7.0])).shrunk_eigs
    np.testing.assert_allclose(d, [1, 7])


def test_oracle_trace_identity_p6(rng):
    R = random_pd(rng, 6)
    est = oracle_shrinker(hermitian_eig(random_pd(rng, 6)), R)
    inv = np.linalg.inv(est.matrix)
    lhs = np.real(np.trace(inv @ inv @ R))
    rhs = np.real(np.trace(inv))
    assert abs(lhs - rhs) <= 1e-9 * rhs


def test_oracle_dimension_mismatch():
    with pytest.raises(InputError):
        oracle_shrinker(eig_of([1, 2]), np.eye(3))


@pytest.mark.parametrize(
    "lam, floor, expected",
    [([0.5, 2], 1, [1, 2]), ([1.5, 2, 3], 1, [1.5, 2, 3]), ([0, 0, 3], 1, [1, 1, 3])],
)
def test_fml_examples(lam, floor, expected):
    r = fml(eig_of(lam), floor)
    np.testing.assert_array_equal(r.shrunk_eigs, expected)
    assert r.estimator_tag is EstimatorTag.FML


@pytest.mark.parametrize("floor", [0.0, -1.0])
def test_fml_rejects_floor(floor):
    with pytest.raises(InputError):
        fml(eig_of([1, 2]), floor)


@pytest.mark.parametrize(
    "lam, r, floor, expected",
    [
        ([1, 1, 5], 1, 1.0, [1, 1, 5]),
        ([0.5, 1.5, 9], 1, 1.0, [1, 1.5, 9]),
        ([1, 2, 6], 0, 3.0, [3, 3, 6]),
    ],
)
def test_anderson_examples(lam, r, floor, expected):
    res = anderson(eig_of(lam), r)
    assert res.noise_floor == pytest.approx(floor)
    np.testing.assert_allclose(res.shrunk_eigs, expected)


def test_anderson_rejects_rank():
    with pytest.raises(InputError):
        anderson(eig_of([1, 2, 3]), 3)


def test_anderson_zero_noise_estimate():
    with pytest.raises(NumericalError):
        anderson(eig_of([0.0, 0.0, 4.0]), 1)


def lw_reference(X):
    p, n = X.shape
    S = X @ X.conj().T / n
    m = np.trace(S).real / p
    d2 = np.linalg.norm(S - m * np.eye(p)) ** 2 / p
    acc = 0.0
    for k in range(n):
        x = X[:, k : k + 1]
        acc += np.linalg.norm(x @ x.conj().T - S) ** 2 / p
    b2 = min(d2, acc / n**2)
    return (b2 / d2) * m * np.eye(p) + (1 - b2 / d2) * S


def test_lw_linear_matches_reference():
    X = white(6, 9, 2) * np.sqrt(np.arange(1, 7))[:, None]
    np.testing.assert_allclose(lw_linear(X).matrix, lw_reference(X), atol=1e-12)


def test_lw_linear_scaled_identity():
    X = np.sqrt(2.0) * np.sqrt(3.0) * np.eye(2)
    r = lw_linear(X)
    np.testing.assert_allclose(r.matrix, 3.0 * np.eye(2), atol=1e-14)


def test_lw_linear_large_n():
    R = np.diag(np.arange(1.0, 11.0))
    X = sample_training(R, 20_000, "gaussian", derive_rng(3, "lwbig"))
    S = scm(X)
    assert np.linalg.norm(lw_linear(X).matrix - S) / np.linalg.norm(S) < 0.05


def test_lw_linear_improves_on_scm():
    wins = 0
    for t in range(100):
        X = white(100, 50, t, "lwimp")
        S = scm(X)
        es = hermitian_eig(S)
        wins += np.linalg.norm(lw_linear(X, es).matrix - np.eye(100)) < np.linalg.norm(S - np.eye(100))
    assert wins >= 95


def test_lw_linear_rejects_zero():
    with pytest.raises(InputError):
        lw_linear(np.zeros((3, 4)))


def test_shrinkage_result_rejects_nonpositive():
    with pytest.raises(NumericalError):
        ShrinkageResult(np.eye(2), np.array([1.0, 0.0]), EstimatorTag.SCM)


def test_scm_estimator_singular_flagged():
    with pytest.raises(NumericalError):
        scm_estimator(hermitian_eig(scm(white(6, 3, 4))))


def test_solve_matches_dense(rng):
    es = hermitian_eig(random_pd(rng, 5))
    r = fml(es, 2.0)
    v = rng.standard_normal(5) + 0j
    np.testing.assert_allclose(r.solve(v), np.linalg.solve(r.matrix, v), atol=1e-12)


# --- kernels ---------------------------------------------------------------------


@pytest.mark.parametrize("kernel", ["unnormalized", "semicircle"])
def test_kernel_tiny_input_matches_reference(kernel):
    lam = np.array([1.0, 2.0, 3.0, 4.0])
    state = KernelState(lam, 4, 4)
    assert state.h == 4**-0.35
    a_ref, b_ref = kernel_sums(2.5, list(lam), 4, VARIANTS[kernel])
    assert abs(kernel_a(2.5, state, kernel=kernel) - a_ref) < 1e-12
    assert abs(kernel_b(2.5, state, kernel=kernel) - b_ref) < 1e-12


@pytest.mark.parametrize("kernel, c", [("unnormalized", 1.0), ("semicircle", math.pi)])
def test_kernel_a_far_field(kernel, c):
    lam = np.array([1.0, 1.5, 2.0])
    state = KernelState(lam, 3, 10**9)
    assert state.h <= 1e-3
    x = 50.0
    target = -np.sum(1.0 / (x - lam)) / c
    assert abs(kernel_a(x, state, kernel=kernel) / target - 1) < 0.05


@pytest.mark.parametrize("kernel", ["unnormalized", "semicircle"])
def test_kernel_a_single_atom_zero(kernel):
    state = KernelState(np.array([2.0]), 1, 4)
    assert kernel_a(2.0, state, kernel=kernel) == 0.0


def test_kernel_b_outside_windows():
    lam = np.array([1.0, 2.0])
    state = KernelState(lam, 2, 400)
    x = 5.0
    h = state.h
    expected = np.sum((lam - x) / (2 * lam**2 * h**2))
    assert kernel_b(x, state, kernel="unnormalized") == pytest.approx(expected, rel=1e-13)
    assert kernel_b(x, state, kernel="semicircle") == 0.0


@pytest.mark.parametrize("kernel, c", [("unnormalized", 1.0), ("semicircle", math.pi)])
def test_kernel_b_single_atom(kernel, c):
    state = KernelState(np.array([3.0]), 1, 50)
    assert kernel_b(3.0, state, kernel=kernel) == pytest.approx(1 / (c * 3.0 * state.h), rel=1e-13)


def test_kernel_semicircle_b_over_count_is_a_density():
    from scipy import integrate

    lam = np.array([1.0, 2.0, 3.5])
    state = KernelState(lam, 3, 100)
    edges = np.sort(np.concatenate([lam * (1 - 2 * state.h), lam * (1 + 2 * state.h)]))
    total = sum(
        integrate.quad(lambda x: kernel_b(x, state), lo, hi, epsabs=1e-12)[0]
        for lo, hi in zip(edges, edges[1:])
    )
    assert total == pytest.approx(3.0, rel=1e-8)


def test_kernel_zero_in_active_range():
    state = KernelState(np.array([0.0, 1.0, 2.0]), 3, 5)
    with pytest.raises(NumericalError):
        kernel_a(1.0, state)


def test_kernel_state_requires_ascending():
    with pytest.raises(InputError):
        KernelState(np.array([2.0, 1.0]), 2, 4)


def test_kernel_unknown_name():
    state = KernelState(np.array([1.0, 2.0]), 2, 4)
    with pytest.raises(InputError):
        kernel_a(1.0, state, kernel="gauss")


# --- LWD -------------------------------------------------------------------------


@pytest.mark.parametrize("kernel", ["unnormalized", "semicircle"])
@pytest.mark.parametrize("p, n", [(4, 8), (6, 4), (5, 12)])
def test_lwd_matches_transcription(kernel, p, n):
    R = spiked_covariance(SpikedSpectrum(p, (4.0,)))
    X = sample_training(R, n, "gaussian", derive_rng(99, "transcribe", p, n))
    lam = hermitian_eig(scm(X)).eigenvalues
    parts = lwd_components(lam, n, kernel=kernel)
    ref = lwd_transcription(list(lam), n, VARIANTS[kernel])
    for got, want in zip((parts.d_tilde, parts.d_check, parts.d_hat), ref):
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    assert parts.n_zero == max(p - n, 0)


def test_lwd_identity_printed_kernel():
    dev = [
        np.max(np.abs(lwd_shrink(white(100, 200, t, "lwdid"), kernel="unnormalized").shrunk_eigs - 1))
        for t in range(50)
    ]
    assert np.median(dev) < 0.15


@pytest.mark.xfail(
    strict=True,
    reason="top-edge kernel overshoot: the largest few eigenvalues land near 1.25 at n=200",
)
def test_lwd_identity_default_kernel():
    dev = [np.max(np.abs(lwd_shrink(white(100, 200, t, "lwdid")).shrunk_eigs - 1)) for t in range(50)]
    assert np.median(dev) < 0.15


def test_lwd_identity_default_kernel_bulk():
    dev = [np.mean(np.abs(lwd_shrink(white(100, 200, t, "lwdid")).shrunk_eigs - 1)) for t in range(50)]
    assert np.median(dev) < 0.05


@settings(max_examples=25, deadline=None)
@given(
    p=st.integers(2, 30),
    n=st.integers(2, 60),
    seed=st.integers(0, 2**32 - 1),
    isotonic=st.booleans(),
)
def test_lwd_bounds_and_monotone(p, n, seed, isotonic):
    if p == n:
        return
    X = sample_training(
        spiked_covariance(SpikedSpectrum(p, (6.0,))), n, "laplace", np.random.default_rng(seed)
    )
    lam_max = hermitian_eig(scm(X)).eigenvalues[-1]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = lwd_shrink(X, isotonic=isotonic).shrunk_eigs
    assert np.all(d >= 1.0)
    assert np.all(d <= lam_max * (1 + 1e-12))
    if isotonic:
        assert np.all(np.diff(d) >= 0)


def test_lwd_rejects_square():
    with pytest.raises(UnsupportedRegimeError):
        lwd_shrink(white(10, 10, 1))


def test_lwd_square_allowed():
    with pytest.warns(UserWarning, match="close to 1"):
        r = lwd_shrink(white(10, 10, 1), allow_square=True)
    assert np.all(r.shrunk_eigs >= 1)


def test_lwd_warns_near_square():
    with pytest.warns(UserWarning, match="close to 1"):
        lwd_shrink(white(41, 40, 2))


def test_lwd_zero_count_mismatch():
    with pytest.raises(NumericalError, match="zero sample eigenvalues"):
        lwd_components([0.0, 0.0, 1.0, 2.0], 3)


def test_lwd_custom_floor():
    X = white(20, 40, 5) * 3.0
    r = lwd_shrink(X, noise_floor=9.0)
    assert r.noise_floor == 9.0
    assert r.shrunk_eigs.min() >= 9.0


def test_lwd_rejects_bad_floor():
    with pytest.raises(InputError):
        lwd_shrink(white(4, 8, 1), noise_floor=0.0)


def test_lwd_isotonic_false_keeps_check():
    X = white(30, 60, 6)
    lam = hermitian_eig(scm(X)).eigenvalues
    np.testing.assert_array_equal(
        lwd_shrink(X, isotonic=False).shrunk_eigs, lwd_components(lam, 60).d_check
    )


def test_estimators_commute_with_scm():
    R = spiked_covariance(SpikedSpectrum(24, (16, 4)))
    X = sample_training(R, 40, "gaussian", derive_rng(7, "commute"))
    S = scm(X)
    es = hermitian_eig(S)
    for est in (
        scm_estimator(es),
        oracle_shrinker(es, R),
        fml(es),
        anderson(es, 2),
        lw_linear(X, es),
        lwd_shrink(X, S_eig=es),
    ):
        M = est.matrix
        bound = 1e-8 * np.linalg.norm(S) * np.linalg.norm(M)
        assert np.linalg.norm(M @ S - S @ M) < bound, est.estimator_tag
        np.testing.assert_allclose(np.linalg.eigvalsh(M), np.sort(est.shrunk_eigs), rtol=1e-9, atol=1e-9)


def test_floors_are_exact():
    es = hermitian_eig(scm(white(30, 20, 8)))
    assert fml(es, 1.0).shrunk_eigs.min() >= 1.0
    r = anderson(es, 3)
    assert r.shrunk_eigs.min() >= r.noise_floor


# --- PAV -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "x, expected", [([1, 2, 3], [1, 2, 3]), ([2, 1], [1.5, 1.5]), ([3, 1, 2], [2, 2, 2])]
)
def test_pav_examples(x, expected):
    np.testing.assert_allclose(pav(x), expected)
    np.testing.assert_allclose(pav_bruteforce(x), expected)


def test_pav_rejects_nonfinite():
    with pytest.raises(InputError):
        pav([1.0, np.nan])


def test_pav_small_grid_exhaustive():
    grid = (-1.0, 0.0, 2.0)
    for k in range(1, 5):
        for x in itertools.product(grid, repeat=k):
            assert np.max(np.abs(pav(x) - pav_bruteforce(x))) < 1e-12


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=40))
def test_pav_properties(x):
    y = pav(x)
    scale = 1e-9 * max(1.0, np.max(np.abs(x)))
    assert np.all(np.diff(y) >= -scale)
    assert abs(np.sum(y) - np.sum(x)) <= scale * len(x)
    np.testing.assert_allclose(pav(y), y, atol=scale)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=7))
def test_pav_matches_bruteforce(x):
    np.testing.assert_allclose(pav(x), pav_bruteforce(x), atol=1e-9)
