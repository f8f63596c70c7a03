import numpy as np
import pytest
from hypothesis import given, strategies as st

from qftrace.doi import (
    commutator_smallness_diag,
    g_func,
    h_func,
    make_quadrature,
    mpow,
    random_positive,
    spectral,
    synthetic_pair,
    t_of_s,
    t_zero,
    verify_power_difference,
    verify_second_formula,
)
from qftrace.errors import ValidationError

P_VALUES = (1.2, 1.5, 2.0, 2.5, 3.0)


@pytest.mark.parametrize("p", P_VALUES)
def test_g_at_zero(p):
    assert g_func(p, 0.0) == pytest.approx(1 - p / 2, abs=1e-14)


def test_g_vanishes_for_p2():
    t = np.linspace(-30, 30, 601)
    assert np.abs(g_func(2.0, t)).max() < 1e-14


def test_g_tail_for_p_below_two():
    # relative correction is about e^{-t/2}
    for t in (20.0, 40.0):
        assert g_func(1.5, t) * np.exp(0.5 * t) == pytest.approx(1.0, rel=3 * np.exp(-t / 2))


@given(st.floats(1.05, 4.0), st.floats(1e-4, 30.0))
def test_g_closed_form(p, t):
    direct = 1 - np.sinh(p * t / 2) / (2 * np.sinh(t / 2) * np.cosh((p - 1) * t / 2))
    assert g_func(p, t) == pytest.approx(direct, abs=1e-9)
    assert g_func(p, -t) == g_func(p, t)


def test_g_rejects_p_le_one():
    with pytest.raises(ValidationError):
        g_func(1.0, 0.5)


@pytest.mark.parametrize("p", (1.2, 1.5, 2.5, 3.0))
def test_h_even_and_integral(p):
    s = np.linspace(0.1, 30, 50)
    assert np.abs(h_func(p, s) - h_func(p, -s)).max() <= 1e-10
    q = make_quadrature(p)
    assert np.sum(q.wh) == pytest.approx(1 - p / 2, abs=1e-6)


def test_h_vanishes_for_p2():
    assert np.all(h_func(2.0, np.linspace(-5, 5, 11)) == 0)


@pytest.mark.parametrize("p", P_VALUES)
def test_quadrature_reconstructs_g(p):
    assert make_quadrature(p).reconstruction_error() <= 1e-8


def test_spectral_zero_power_convention():
    P = np.diag([1.0, 0.0])
    assert np.allclose(spectral(P).power(0.7j), np.diag([1.0, 0.0]))
    assert np.allclose(mpow(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]))


def test_spectral_rejects_indefinite():
    with pytest.raises(ValidationError):
        spectral(np.diag([1.0, -1.0]))


def test_power_difference_equal_matrices(rng):
    X = random_positive(5, rng)
    assert verify_power_difference(X, X, 1.5) < 1e-12


def test_power_difference_scalar_case():
    assert verify_power_difference(np.array([[2.0]]), np.array([[1.0]]), 1.5) <= 1e-8


@pytest.mark.parametrize("p", (1.2, 1.5, 3.0))
def test_power_difference_random(rng, p):
    X, Y = random_positive(6, rng), random_positive(6, rng)
    assert verify_power_difference(X, Y, p) <= 1e-6


def test_power_difference_size_limit():
    with pytest.raises(ValidationError):
        verify_power_difference(np.eye(9), np.eye(9), 1.5)


def test_second_formula_commuting():
    A = np.diag([1.0, 2.0, 0.5])
    B = np.diag([0.3, 1.0, 2.0])
    assert verify_second_formula(A, B, 1.5) <= 1e-10


def test_second_formula_projector(rng):
    A = random_positive(6, rng)
    v = np.linalg.qr(rng.standard_normal((6, 3)))[0]
    B = v @ v.T
    assert verify_second_formula(A, B, 1.5) <= 1e-6


def test_second_formula_random(rng):
    A, B = random_positive(6, rng), random_positive(6, rng)
    assert verify_second_formula(A, B, 2.5) <= 1e-6


def test_t_zero_closed_form(rng):
    A, B, p = random_positive(4, rng), random_positive(4, rng), 1.7
    Ah = mpow(A, 0.5)
    Y = Ah @ B @ Ah
    expect = mpow(B, p) @ mpow(A, p) - mpow(B, p - 1) @ mpow(A, p - 1) @ Y + B @ A @ mpow(Y, p - 1) - mpow(Y, p)
    assert np.allclose(t_zero(A, B, p), expect, atol=1e-10)
    assert np.allclose(t_of_s(A, B, p, [0.0])[0], t_zero(A, B, p), atol=1e-10)


def test_smallness_commuting():
    A = np.diag([1.0, 2.0, 3.0])
    B = np.diag([0.5, 0.25, 1.0])
    assert commutator_smallness_diag(A, B, 1.5).mu.max() <= 1e-12


def test_smallness_synthetic_and_linear():
    a = commutator_smallness_diag(*synthetic_pair(256, 1.5, 1e-3), 1.5)
    b = commutator_smallness_diag(*synthetic_pair(256, 1.5, 5e-4), 1.5)
    assert a.max_ratio <= 10 * 1e-3
    assert b.max_ratio / a.max_ratio == pytest.approx(0.5, rel=0.2)


@pytest.mark.parametrize("check", [verify_power_difference, verify_second_formula])
def test_node_doubling_convergence(rng, check):
    X, Y = random_positive(6, rng), random_positive(6, rng)
    res = [check(X, Y, 1.5, make_quadrature(1.5, n, check=False), doubling=False) for n in (64, 128, 256, 512, 1024)]
    for a, b in zip(res, res[1:]):
        assert b <= 1e-8 or b <= a / 4
    assert res[-1] <= 1e-8
