"""Finite-matrix checks of the double-operator-integral power formulas.

g(t) = 1 - sinh(pt/2) / (2 sinh(t/2) cosh((p-1)t/2)) is even and Schwartz,
h is its Fourier transform normalized so that g(t) = int h(s) e^{ist} ds,
and imaginary powers follow the convention 0^{is} = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import QuadratureUnconverged, ValidationError

ZERO_TOL = 1e-12
RECON_TOL = 1e-8
FLOOR = 1e-8


def g_func(p: float, t):
    """g(t) in the overflow-free form (e^{(1-p)|t|} - e^{-|t|}) / ((1 - e^{-|t|})(1 + e^{(1-p)|t|}))."""
    if p <= 1:
        raise ValidationError("p must exceed 1")
    t = np.abs(np.asarray(t, dtype=float))
    small = t < 1e-3
    ts = np.where(small, 1.0, t)
    num = np.exp(-ts) * np.expm1((2 - p) * ts)
    den = -np.expm1(-ts) * (1 + np.exp((1 - p) * ts))
    taylor = (1 - p / 2) + (p**3 - 3 * p**2 + 2 * p) * t**2 / 24
    out = np.where(small, taylor, num / den)
    return out if out.ndim else float(out)


def _t_grid(p: float, dt: float = 0.02, tail: float = 45.0):
    # |g(t)| <= 2 e^{-min(p-1, 1) t}; the cut leaves a tail below e^{-tail}
    rate = min(p - 1, 1.0)
    T = tail / rate
    n = int(math.ceil(T / dt)) + 1
    t = np.linspace(0.0, (n - 1) * dt, n)
    return t, dt


def h_func(p: float, s_nodes, chunk: int = 256):
    """h(s) = (1/pi) int_0^inf g(t) cos(st) dt by the trapezoid rule on a long t-grid."""
    s = np.asarray(s_nodes, dtype=float)
    if p == 2:
        return np.zeros_like(s)
    t, dt = _t_grid(p)
    gt = g_func(p, t)
    wt = np.full(len(t), dt)
    wt[0] = dt / 2
    gw = gt * wt
    flat = s.ravel()
    out = np.empty(len(flat))
    for i in range(0, len(flat), chunk):
        out[i : i + chunk] = np.cos(np.outer(flat[i : i + chunk], t)) @ gw
    return (out / math.pi).reshape(s.shape)


@dataclass(frozen=True)
class QuadratureScheme:
    p: float
    nodes: np.ndarray
    weights: np.ndarray
    S: float
    h: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def wh(self) -> np.ndarray:
        return self.weights * self.h

    def reconstruct(self, t):
        """int h(s) e^{ist} ds by the scheme; should reproduce g(t)."""
        t = np.asarray(t, dtype=float)
        return np.real(np.exp(1j * np.multiply.outer(t, self.nodes)) @ self.wh)

    def reconstruction_error(self, t_max: float = 10.0, n: int = 201) -> float:
        t = np.linspace(-t_max, t_max, n)
        return float(np.max(np.abs(self.reconstruct(t) - g_func(self.p, t))))

    def doubled(self) -> "QuadratureScheme":
        return make_quadrature(self.p, 2 * self.n_nodes, self.S, check=False)


@lru_cache(maxsize=32)
def _build(p: float, n_nodes: int, S: float) -> QuadratureScheme:
    s = np.linspace(-S, S, n_nodes)
    w = np.full(n_nodes, s[1] - s[0])
    w[0] = w[-1] = w[0] / 2
    h = h_func(p, s)
    for a in (s, w, h):
        a.setflags(write=False)
    return QuadratureScheme(p, s, w, S, h)


def make_quadrature(p: float, n_nodes: int = 2048, S: float = 40.0, check: bool = True) -> QuadratureScheme:
    """Trapezoid rule on [-S, S]; ``check`` enforces the reconstruction tolerance."""
    if n_nodes < 8:
        raise ValidationError("need at least 8 nodes")
    q = _build(float(p), int(n_nodes), float(S))
    if check:
        err = q.reconstruction_error()
        if err > RECON_TOL:
            raise QuadratureUnconverged(f"reconstruction error {err:.3g} > {RECON_TOL}")
    return q


# -- spectral calculus with 0^z = 0 -----------------------------------------


@dataclass(frozen=True)
class Spectral:
    vals: np.ndarray
    vecs: np.ndarray

    def power(self, z):
        """X^z for complex z with Re z >= 0; zero eigenvalues give 0 (also for z = 0)."""
        pos = self.vals > 0
        lam = np.zeros(len(self.vals), dtype=complex)
        lam[pos] = np.exp(z * np.log(self.vals[pos]))
        return (self.vecs * lam) @ self.vecs.conj().T

    def powers(self, z):
        """Stack of X^{z_j} for an array of exponents."""
        z = np.asarray(z, dtype=complex)
        pos = self.vals > 0
        lam = np.zeros((len(z), len(self.vals)), dtype=complex)
        lam[:, pos] = np.exp(np.multiply.outer(z, np.log(self.vals[pos])))
        return np.einsum("ik,jk,lk->jil", self.vecs, lam, self.vecs.conj())


def spectral(X, tol: float = ZERO_TOL) -> Spectral:
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValidationError("need a square matrix")
    if np.max(np.abs(X - X.conj().T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(X))):
        raise ValidationError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh(0.5 * (X + X.conj().T))
    cut = tol * max(1.0, float(np.max(np.abs(vals))))
    if vals.min() < -1e3 * cut:
        raise ValidationError(f"matrix is not positive semidefinite (min eigenvalue {vals.min():.3g})")
    vals = np.where(vals > cut, vals, 0.0)
    return Spectral(vals, vecs)


def mpow(X, z):
    return spectral(X).power(z)


def _op_norm(A) -> float:
    return float(np.linalg.norm(A, 2))


# -- first formula ----------------------------------------------------------


def _first_residual(X, Y, p, quad: QuadratureScheme) -> float:
    sx, sy = spectral(X), spectral(Y)
    Xp, Yp = sx.power(p), sy.power(p)
    D = np.asarray(X, complex) - np.asarray(Y, complex)
    V = sx.power(p - 1) @ D + D @ sy.power(p - 1)
    # sum_j wh_j X^{is_j} V Y^{-is_j} in the eigenbases: a Schur product with
    # K_ab = sum_j wh_j x_a^{is_j} y_b^{-is_j}, zero where x_a or y_b vanishes
    lx = np.log(np.where(sx.vals > 0, sx.vals, 1.0))
    ly = np.log(np.where(sy.vals > 0, sy.vals, 1.0))
    t = lx[:, None] - ly[None, :]
    K = np.exp(1j * np.multiply.outer(t, quad.nodes)) @ quad.wh
    K *= np.outer(sx.vals > 0, sy.vals > 0)
    Vt = sx.vecs.conj().T @ V @ sy.vecs
    integral = sx.vecs @ (K * Vt) @ sy.vecs.conj().T
    return _op_norm(Xp - Yp - V + integral)


def _with_doubling(fn, quad: QuadratureScheme, doubling: bool) -> float:
    r = fn(quad)
    if doubling:
        r2 = fn(quad.doubled())
        if r2 > FLOOR and r2 > r:
            raise QuadratureUnconverged(f"residual {r:.3g} -> {r2:.3g} under node doubling")
    return r


def verify_power_difference(X, Y, p: float, quad: QuadratureScheme | None = None, doubling: bool = True) -> float:
    """Operator norm of X^p - Y^p - V + sum_j w_j h(s_j) X^{is_j} V Y^{-is_j}."""
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    if X.shape != Y.shape or X.shape[0] > 8:
        raise ValidationError("X and Y must be square of the same size n <= 8")
    quad = make_quadrature(p) if quad is None else quad
    return _with_doubling(lambda q: _first_residual(X, Y, p, q), quad, doubling)


# -- second formula ---------------------------------------------------------


def t_zero(A, B, p: float):
    """The 's = 0' term B^{p-1}[B,A^p] + B^{p-1}A^{p-1/2}[A^{1/2},B] + [B,A]Y^{p-1} + A^{1/2}[A^{1/2},B]Y^{p-1}."""
    A, B = np.asarray(A, complex), np.asarray(B, complex)
    sa, sb = spectral(A), spectral(B)
    Ah = sa.power(0.5)
    Y = Ah @ B @ Ah
    Yp1 = spectral(Y).power(p - 1)
    Bp1 = sb.power(p - 1)
    Ap = sa.power(p)
    C = Ah @ B - B @ Ah
    return (
        Bp1 @ (B @ Ap - Ap @ B)
        + Bp1 @ sa.power(p - 0.5) @ C
        + (B @ A - A @ B) @ Yp1
        + Ah @ C @ Yp1
    )


def t_of_s(A, B, p: float, s):
    """Stack of T(s_j) for the nodes ``s``."""
    A, B = np.asarray(A, complex), np.asarray(B, complex)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    sa, sb = spectral(A), spectral(B)
    Ah = sa.power(0.5)
    sy = spectral(Ah @ B @ Ah)
    C = Ah @ B - B @ Ah
    i = 1j * s
    B1 = sb.powers(p - 1 + i)
    B0 = sb.powers(i)
    Ap = sa.powers(p + i)
    A1 = sa.powers(1 + i)
    Aph = sa.powers(p - 0.5 + i)
    Ahh = sa.powers(0.5 + i)
    Ym = sy.powers(-i)
    Ymp = sy.powers(p - 1 - i)

    def comm_b(X):
        return B[None] @ X - X @ B[None]

    return (
        B1 @ comm_b(Ap) @ Ym
        + B1 @ Aph @ C[None] @ Ym
        + B0 @ comm_b(A1) @ Ymp
        + B0 @ Ahh @ C[None] @ Ymp
    )


def _second_residual(A, B, p, quad: QuadratureScheme, chunk: int = 512) -> float:
    A, B = np.asarray(A, complex), np.asarray(B, complex)
    sa, sb = spectral(A), spectral(B)
    Ah = sa.power(0.5)
    Y = Ah @ B @ Ah
    lhs = sb.power(p) @ sa.power(p) - spectral(Y).power(p)
    integral = np.zeros_like(A)
    for k in range(0, quad.n_nodes, chunk):
        T = t_of_s(A, B, p, quad.nodes[k : k + chunk])
        integral += np.einsum("j,jab->ab", quad.wh[k : k + chunk], T)
    return _op_norm(lhs - t_zero(A, B, p) + integral)


def verify_second_formula(A, B, p: float, quad: QuadratureScheme | None = None, doubling: bool = True) -> float:
    """Operator norm of B^pA^p - Y^p - T0 + sum_j w_j h(s_j) T(s_j), Y = A^{1/2} B A^{1/2}."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    if A.shape != B.shape or A.shape[0] > 8:
        raise ValidationError("A and B must be square of the same size n <= 8")
    quad = make_quadrature(p) if quad is None else quad
    return _with_doubling(lambda q: _second_residual(A, B, p, q), quad, doubling)


# -- commutator smallness -----------------------------------------------------


@dataclass(frozen=True)
class SmallnessProfile:
    mu: np.ndarray
    ratio: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(self.ratio.max(initial=0.0))


def commutator_smallness_diag(A, B, p: float) -> SmallnessProfile:
    """Singular values of B^pA^p - (A^{1/2}BA^{1/2})^p and mu(k)(k+1)."""
    A, B = np.asarray(A, complex), np.asarray(B, complex)
    Ah = mpow(A, 0.5)
    D = mpow(B, p) @ mpow(A, p) - mpow(Ah @ B @ Ah, p)
    mu = np.linalg.svd(D, compute_uv=False)
    return SmallnessProfile(mu, mu * np.arange(1, len(mu) + 1))


def synthetic_pair(n: int, p: float, eps: float):
    """B = diag((k+1)^{-1/p}) and A = I + eps * (ones on the first off-diagonals)."""
    B = np.diag(np.arange(1, n + 1, dtype=float) ** (-1.0 / p))
    A = np.eye(n) + eps * (np.eye(n, k=1) + np.eye(n, k=-1))
    return A, B


def random_positive(n: int, rng, rank: int | None = None):
    G = rng.standard_normal((n, rank or n)) + 1j * rng.standard_normal((n, rank or n))
    return G @ G.conj().T / n
