import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import digamma

from conftest import su11
from qftrace.errors import CutoffTooLarge, FiniteRank, NonHermitian, ValidationError
from qftrace.mobius import MobiusElement, diag, rotation
from qftrace.quantized import (
    cesaro_trace,
    commutator_matrix,
    commutator_singular_values,
    commutator_svd,
    default_n_grid,
    dixmier_estimate,
    f_commutation_residual,
    fit_decay_exponent,
    fourier_coeffs,
    localized_trace,
    localized_weights,
    mobius_covariance_check,
    numerical_rank,
    singular_values,
    spectral_report,
    truncation_stability,
    unitarity_residual,
    weighted_composition_matrix,
    zeta_floor,
    zeta_trace,
)

N = 1024
TT = 2 * np.pi * np.arange(N) / N
Z_UNIT = np.exp(1j * TT)
K = np.arange(20000)


def _rough_curve(n=N, seed=0):
    """A Jordan curve whose commutator has slowly decaying singular values."""
    rng = np.random.default_rng(seed)
    t = 2 * np.pi * np.arange(n) / n
    z = np.exp(1j * t)
    for j in range(2, n // 8):
        z += 0.25 * j**-1.0 * np.exp(2j * np.pi * rng.uniform()) * np.exp(-1j * j * t)
    return z


@pytest.fixture(scope="module")
def rough():
    return fourier_coeffs(_rough_curve())


# --- Fourier data ------------------------------------------------------------


def test_fourier_single_mode():
    fd = fourier_coeffs(Z_UNIT)
    assert fd.coef(1) == pytest.approx(1.0, abs=1e-12)
    others = np.delete(np.abs(fd.coeffs), 1)
    assert others.max() <= 1e-12


def test_fourier_constant():
    fd = fourier_coeffs(np.full(256, 2.5 - 1j))
    assert fd.coef(0) == pytest.approx(2.5 - 1j)
    assert np.abs(fd.coeffs[1:]).max() == 0


@given(st.integers(0, 2**32 - 1))
def test_parseval(seed):
    a, b = np.random.default_rng(seed).normal(size=(2, 256))
    x = a + 1j * b
    fd = fourier_coeffs(x)
    assert np.sum(np.abs(fd.coeffs) ** 2) == pytest.approx(np.mean(np.abs(x) ** 2), rel=1e-10)


def test_fourier_rejects_bad_length():
    with pytest.raises(ValidationError):
        fourier_coeffs(np.ones(100))


# --- commutator ----------------------------------------------------------------


def test_commutator_of_z():
    M = 8
    C = commutator_matrix(fourier_coeffs(Z_UNIT), M)
    nz = np.argwhere(np.abs(C) > 1e-12)
    assert [tuple(x - M) for x in nz] == [(0, -1)]
    assert C[M, M - 1] == pytest.approx(-2)
    mu = commutator_singular_values(fourier_coeffs(Z_UNIT), M)
    assert mu[0] == pytest.approx(2) and numerical_rank(mu) == 1


def test_commutator_of_constant():
    assert np.abs(commutator_matrix(fourier_coeffs(np.ones(N)), 8)).max() == 0


def test_commutator_of_cosine():
    M = 8
    C = commutator_matrix(fourier_coeffs(2 * np.cos(TT)), M)
    nz = {tuple(x - M): C[tuple(x)] for x in np.argwhere(np.abs(C) > 1e-12)}
    assert set(nz) == {(0, -1), (-1, 0)}
    assert nz[(0, -1)] == pytest.approx(-2) and nz[(-1, 0)] == pytest.approx(2)
    assert np.allclose(singular_values(C)[:3], [2, 2, 0], atol=1e-12)


def test_block_svd_matches_dense(rough):
    M = 64
    dense = singular_values(commutator_matrix(rough, M))
    assert np.allclose(commutator_singular_values(rough, M), dense, atol=1e-12)
    mu, V = commutator_svd(rough, M)
    C = commutator_matrix(rough, M)
    A = V @ np.diag(mu) @ V.conj().T
    assert np.allclose(A @ A, C.conj().T @ C, atol=1e-10)


def test_cutoff_too_large():
    with pytest.raises(CutoffTooLarge):
        commutator_singular_values(fourier_coeffs(Z_UNIT), N // 2)


def test_singular_values_examples(rng):
    assert np.array_equal(singular_values(np.diag([3.0, 1.0, 2.0])), [3, 2, 1])
    u, v = rng.normal(size=5), rng.normal(size=4)
    s = singular_values(np.outer(u, v))
    assert s[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))
    assert np.all(s[1:] < 1e-12)


@given(st.integers(0, 2**32 - 1))
def test_singular_values_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    U, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    V, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    assert np.allclose(singular_values(U @ A @ V), singular_values(A), atol=1e-10)


# --- decay fit -------------------------------------------------------------------


def test_fit_exact_power_law():
    fit = fit_decay_exponent((K[:2049] + 1.0) ** -0.5, 1024)
    assert fit.p_hat == pytest.approx(2.0, abs=0.01)


def test_fit_log_periodic_perturbation():
    mu = (K[:2049] + 1.0) ** -1.0 * (1 + 0.1 * np.sin(np.log(K[:2049] + 1.0)))
    assert fit_decay_exponent(mu, 1024).p_hat == pytest.approx(1.0, abs=0.05)


def test_fit_refuses_finite_rank():
    conj = (0.3 + Z_UNIT * 1.0) / (0.2 * Z_UNIT + 1.5)
    mu = commutator_singular_values(fourier_coeffs(conj), 256)
    assert np.all(mu[numerical_rank(mu) :] < 1e-8)
    with pytest.raises(FiniteRank):
        fit_decay_exponent(mu, 256)
    rep = spectral_report(fourier_coeffs(conj), 256)
    assert rep.finite_rank == 1 and rep.fit is None


# --- Dixmier estimators -------------------------------------------------------------


def test_cesaro_harmonic():
    assert cesaro_trace(1 / (K + 1.0)).value == pytest.approx(1.0, abs=0.02)


def test_cesaro_trace_class():
    assert cesaro_trace(2.0 ** -K[:2000]).value == pytest.approx(0.0, abs=1e-2)


def test_cesaro_alternating():
    a = (1 + (-1.0) ** K) / (K + 1.0)
    # closed form: sum_{j<=m} 2/(2j+1) = digamma(m + 3/2) - digamma(1/2); limit of S(n)/log n
    S = lambda m: digamma(m + 1.5) - digamma(0.5)
    m1, m2 = 1e12, 1e15
    oracle = (S(m2) - S(m1)) / (np.log(2 * m2) - np.log(2 * m1))
    est = cesaro_trace(a).value
    assert 0.9 * oracle <= est <= 1.1 * oracle


def test_zeta_harmonic_family():
    for p in (1.0, 1.5, 2.0):
        mu = (K + 1.0) ** (-1 / p)
        assert zeta_trace(mu, p).value == pytest.approx(1.0, abs=0.02)


def test_zeta_trace_class():
    assert zeta_trace(2.0 ** -K[:200], 1.0).value == pytest.approx(0.0, abs=1e-2)


def test_zeta_and_cesaro_agree():
    mu = (K + 1.0) ** -1.0 * (1 + 0.2 / (K + 2.0))
    z = zeta_trace(mu, 1.0).value
    c = cesaro_trace(mu).value
    assert abs(z - c) <= 0.05 * abs(c)


def test_zeta_floor_harmonic_stays_positive():
    floor, top, s, vals = zeta_floor((K + 1.0) ** -1.0, 1.0)
    assert floor >= 0.1 * top
    assert np.all(s <= 0.5)


def test_zeta_rejects_bad_grid():
    with pytest.raises(ValidationError):
        zeta_trace(1 / (K + 1.0), 1.0, [0.6, 0.1])


# --- localized traces ------------------------------------------------------------------


def test_localized_constant_is_plain_trace(rough):
    M, p = 128, 1.0
    base = dixmier_estimate(rough, p, M).value
    for method in ("eigen", "compress"):
        assert localized_trace(rough, np.ones(N), p, M, method=method).value == pytest.approx(base, rel=1e-10)


@given(st.floats(0.0, 2 * np.pi), st.floats(0.1, 2.0))
def test_localized_positivity(phase, amp):
    fd = fourier_coeffs(_rough_curve(256, 1))
    f = 1 + np.cos(2 * np.pi * np.arange(256) / 256 + phase)
    est = localized_trace(fd, amp * f, 1.0, 32).value
    assert est >= -1e-10


def test_localized_compress_is_linear(rough):
    M, p = 128, 1.0
    f = 1 + np.cos(TT)
    g = np.sin(2 * TT) ** 2
    tr = lambda w: localized_trace(rough, w, p, M, method="compress").value
    assert tr(f + g) == pytest.approx(tr(f) + tr(g), rel=1e-6)


def test_localized_eigen_splits_signed_weights(rough):
    est = localized_trace(rough, np.cos(TT), 1.0, 64)
    assert est.meta["split"]
    assert est.value == pytest.approx(est.meta["positive"] - est.meta["negative"])


def test_localized_rejects_complex_weight(rough):
    with pytest.raises(ValidationError):
        localized_weights(rough, Z_UNIT, 1.0, 16)


def test_localized_eigen_terms_sum_to_trace(rough):
    M, p = 64, 1.0
    f = 1 + 0.5 * np.cos(TT)
    e = localized_weights(rough, f, p, M, "eigen")
    c = localized_weights(rough, f, p, M, "compress")
    assert np.sum(e) == pytest.approx(np.sum(c), rel=1e-10)


# --- covariance ------------------------------------------------------------------------


def test_composition_identity():
    U = weighted_composition_matrix(MobiusElement.identity(), 16)
    assert np.allclose(U, np.eye(33), atol=1e-14)


@given(su11().filter(lambda h: abs(h.g12) <= 0.1))
def test_composition_unitary_and_commutes(h):
    U = weighted_composition_matrix(h, 64)
    assert unitarity_residual(U) <= 1e-6
    assert f_commutation_residual(U) <= 1e-6


def test_composition_rejects_non_su11():
    with pytest.raises(ValidationError):
        weighted_composition_matrix(diag(2.0), 8)


def test_covariance_identity(rough):
    assert mobius_covariance_check(rough, MobiusElement.identity(), 1.0, 128) == 0.0


@pytest.mark.parametrize("g", [rotation(0.9), diag(1.3), diag(0.7 * np.exp(0.4j))])
def test_covariance_scaling(rough, g):
    assert mobius_covariance_check(rough, g, 1.0, 128) <= 1e-8


def test_covariance_default_grid():
    g = default_n_grid(2049)
    assert g.min() >= 8 and g.max() < 2049 and np.all(np.diff(g) > 0)


def test_truncation_stability_small(rough):
    assert truncation_stability(rough, 64) < 0.05
