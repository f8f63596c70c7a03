"""Quantized differentials on the truncated Fourier basis.

Basis vectors e_n(z) = z^n are indexed by n in [-M, M]; row/column ``i`` of
every matrix here corresponds to n = i - M.  F is diagonal with eps(n) = +1
for n >= 0 and -1 for n < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import zeta as hurwitz_zeta

from .errors import CutoffTooLarge, FiniteRank, InsufficientData, NonHermitian, PoleOnCurve, ValidationError
from .mobius import MobiusElement

FINITE_RANK_TOL = 1e-8


@dataclass(frozen=True)
class FourierData:
    """DFT coefficients; ``coeffs[n % N]`` is fhat(n)."""

    coeffs: np.ndarray
    N: int

    def coef(self, n):
        n = np.asarray(n)
        return self.coeffs[np.mod(n, self.N)]

    def frequencies(self) -> np.ndarray:
        return np.fft.fftfreq(self.N, 1.0 / self.N).astype(int)

    def negative_mass(self) -> float:
        """sum_{n<0} |fhat(n)|^2, the part of f outside the Hardy space."""
        return float(np.sum(np.abs(self.coeffs[self.N // 2 :]) ** 2))

    def samples(self) -> np.ndarray:
        return np.fft.ifft(self.coeffs) * self.N


def fourier_coeffs(samples) -> FourierData:
    x = np.asarray(samples, dtype=complex).ravel()
    N = len(x)
    if N < 64 or N & (N - 1):
        raise ValidationError("sample count must be a power of two >= 64")
    return FourierData(np.fft.fft(x) / N, N)


def _eps(n):
    return np.where(np.asarray(n) >= 0, 1.0, -1.0)


def _check_cutoff(fd: FourierData, M: int):
    if M < 1:
        raise ValidationError("cutoff M must be >= 1")
    if M > fd.N // 4:
        raise CutoffTooLarge(f"M = {M} exceeds N/4 = {fd.N // 4}")


def multiplication_matrix(fd: FourierData, M: int) -> np.ndarray:
    """(M_f)_{mn} = fhat(m - n) on |m|, |n| <= M."""
    _check_cutoff(fd, M)
    k = np.arange(0, 2 * M + 1)
    col = fd.coef(k)  # fhat(m - n) for n = -M, m = -M + k
    row = fd.coef(-k)
    return toeplitz(col, row)


def commutator_matrix(fd: FourierData, M: int) -> np.ndarray:
    """[F, M_f]_{mn} = fhat(m - n) (eps(n) - eps(m))."""
    idx = np.arange(-M, M + 1)
    T = multiplication_matrix(fd, M)
    return T * (_eps(idx)[None, :] - _eps(idx)[:, None])


def hankel_blocks(fd: FourierData, M: int):
    """The two nonzero blocks of the commutator.

    ``upper`` maps span{e_n : -M <= n < 0} to span{e_m : 0 <= m <= M};
    ``lower`` maps span{e_n : 0 <= n <= M} to span{e_m : -M <= m < 0}.
    """
    _check_cutoff(fd, M)
    m = np.arange(0, M + 1)[:, None]
    n = np.arange(-M, 0)[None, :]
    upper = -2.0 * fd.coef(m - n)
    lower = 2.0 * fd.coef(n.T - m.T)
    return upper, lower


def singular_values(matrix) -> np.ndarray:
    return np.linalg.svd(np.asarray(matrix), compute_uv=False)


def commutator_singular_values(fd: FourierData, M: int) -> np.ndarray:
    """Singular values of [F, M_f] from its two blocks (same values, cheaper SVD)."""
    up, lo = hankel_blocks(fd, M)
    s = np.concatenate([singular_values(up), singular_values(lo), [0.0]])
    return np.sort(s)[::-1]


def commutator_svd(fd: FourierData, M: int):
    """(mu, V) with |[F, M_f]| = V diag(mu) V*, assembled from the block SVDs."""
    up, lo = hankel_blocks(fd, M)
    _, su, vhu = np.linalg.svd(up, full_matrices=False)
    _, sl, vhl = np.linalg.svd(lo, full_matrices=False)
    dim = 2 * M + 1
    V = np.zeros((dim, len(su) + len(sl)), dtype=complex)
    V[:M, : len(su)] = vhu.conj().T  # right vectors of `upper` live on n < 0
    V[M:, len(su) :] = vhl.conj().T
    mu = np.concatenate([su, sl])
    order = np.argsort(-mu, kind="stable")
    return mu[order], V[:, order]


def numerical_rank(mu, tol: float = FINITE_RANK_TOL) -> int:
    return int(np.sum(np.asarray(mu) >= tol))


@dataclass(frozen=True)
class DecayFit:
    p_hat: float
    stderr: float
    window: tuple
    slope: float


def fit_decay_exponent(mu, M: int | None = None, min_count: int = 200, tol: float = FINITE_RANK_TOL) -> DecayFit:
    """Fit log mu(k) ~ slope log(k+1) on k in [M^0.2, M^0.8]; p_hat = -1/slope."""
    mu = np.sort(np.asarray(mu, dtype=float))[::-1]
    r = numerical_rank(mu, tol)
    if r < min_count:
        if len(mu) >= min_count and r < len(mu):
            raise FiniteRank(r, f"mu(k) < {tol:g} for k >= {r}: finite-rank spectrum, no decay exponent")
        raise InsufficientData(f"need >= {min_count} nonzero singular values, got {r}")
    if M is None:
        M = len(mu) // 2
    lo, hi = int(math.ceil(M**0.2)), int(math.floor(M**0.8))
    hi = min(hi, r - 1)
    k = np.arange(lo, hi + 1)
    if len(k) < 5:
        raise InsufficientData("fit window too small")
    x, y = np.log(k + 1.0), np.log(mu[k])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    s2 = float(resid @ resid) / max(len(x) - 2, 1)
    se_slope = math.sqrt(s2 * np.linalg.inv(A.T @ A)[0, 0])
    slope = float(coef[0])
    if slope >= 0:
        raise InsufficientData("singular values do not decay in the fit window")
    return DecayFit(-1.0 / slope, se_slope / slope**2, (lo, hi), slope)


def weak_norm(mu, p: float) -> float:
    mu = np.asarray(mu, dtype=float)
    k = np.arange(1, len(mu) + 1, dtype=float)
    return float(np.max(k ** (1.0 / p) * mu)) if len(mu) else 0.0


@dataclass(frozen=True)
class SpectralReport:
    mu: np.ndarray
    M: int
    fit: DecayFit | None
    weak_norm: float | None
    finite_rank: int | None = None


def spectral_report(fd: FourierData, M: int) -> SpectralReport:
    mu = commutator_singular_values(fd, M)
    try:
        fit = fit_decay_exponent(mu, M)
    except FiniteRank as exc:
        return SpectralReport(mu, M, None, None, exc.rank)
    return SpectralReport(mu, M, fit, weak_norm(mu, fit.p_hat))


# ---------------------------------------------------------------------------
# Dixmier-trace estimators


@dataclass(frozen=True)
class DixmierEstimate:
    value: float
    method: str
    params: np.ndarray
    partials: np.ndarray
    meta: dict = field(default_factory=dict)


def default_n_grid(n: int, count: int = 16, lo_frac: float = 0.02, hi_frac: float = 0.25) -> np.ndarray:
    lo = max(8, int(lo_frac * n))
    hi = max(lo + count, int(hi_frac * n))
    return np.unique(np.geomspace(lo, min(hi, n - 1), count).astype(int))


def cesaro_trace(values, n_grid=None) -> DixmierEstimate:
    """Log-Cesaro means (1/log(1+n)) sum_{k<=n} a_k, extrapolated linearly in 1/log(1+n).

    ``values`` are the terms a_k in their natural (descending singular value)
    order; pass mu**p for the trace of |T|^p.
    """
    a = np.asarray(values, dtype=float)
    if n_grid is None:
        n_grid = default_n_grid(len(a), hi_frac=1.0)
    n_grid = np.asarray(n_grid, dtype=int)
    if n_grid.max() >= len(a):
        raise ValidationError("n_grid exceeds the number of terms")
    csum = np.cumsum(a)
    partial = csum[n_grid] / np.log1p(n_grid)
    x = 1.0 / np.log1p(n_grid)
    if len(n_grid) >= 2:
        slope, intercept = np.polyfit(x, partial, 1)
    else:
        slope, intercept = 0.0, float(partial[0])
    return DixmierEstimate(float(intercept), "Cesaro", n_grid, partial, {"slope": float(slope)})


def _tail_fit(terms, frac=(0.1, 0.5)):
    """Fit terms ~ C (k+1)^-alpha on a middle band; returns (C, alpha)."""
    n = len(terms)
    lo, hi = int(frac[0] * n), int(frac[1] * n)
    k = np.arange(lo, hi)
    ok = terms[k] > 0
    if ok.sum() < 5:
        return 0.0, 2.0
    x, y = np.log(k[ok] + 1.0), np.log(terms[k][ok])
    slope, icpt = np.polyfit(x, y, 1)
    return float(math.exp(icpt)), float(-slope)


def zeta_trace(mu, p: float, s_grid=None, tail: bool = True, n_terms: int | None = None) -> DixmierEstimate:
    """s * sum_k mu(k)^{p(1+s)} along s -> 0, extrapolated by a quadratic in s.

    With ``tail`` the finite sum is completed by a fitted power law
    C (k+1)^-alpha for k >= len(mu), summed exactly with the Hurwitz zeta.
    """
    mu = np.asarray(mu, dtype=float)
    if n_terms is not None:
        mu = mu[:n_terms]
    mu = mu[mu > 0]
    if s_grid is None:
        s_grid = np.linspace(0.5, 0.05, 10)
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0) or np.any(s_grid > 0.5):
        raise ValidationError("s_grid must lie in (0, 0.5]")
    C, alpha = _tail_fit(mu**p) if tail else (0.0, 2.0)
    n = len(mu)
    vals = []
    for s in s_grid:
        head = float(np.sum(mu ** (p * (1 + s))))
        expo = alpha * (1 + s)
        rest = C ** (1 + s) * float(hurwitz_zeta(expo, n + 1)) if tail and expo > 1 else 0.0
        vals.append(s * (head + rest))
    vals = np.array(vals)
    deg = min(2, len(s_grid) - 1)
    coef = np.polyfit(s_grid, vals, deg)
    return DixmierEstimate(
        float(coef[-1]), "Zeta", s_grid, vals, {"tail_C": C, "tail_alpha": alpha, "slope": float(coef[-2])}
    )


def zeta_floor(mu, p: float, s_grid=None):
    """Raw s * sum mu^{p(1+s)} (no tail) on a grid above the finite-size scale 1/log n.

    Returns ``(floor, value_at_largest_s, s_grid, values)``.
    """
    mu = np.asarray(mu, dtype=float)
    mu = mu[mu > 0]
    if s_grid is None:
        s_lo = min(0.5, 1.0 / math.log(len(mu)))
        s_grid = np.geomspace(0.5, s_lo, 12)
    s_grid = np.asarray(s_grid, dtype=float)
    vals = np.array([s * np.sum(mu ** (p * (1 + s))) for s in s_grid])
    top = float(vals[np.argmax(s_grid)])
    return float(vals.min()), top, s_grid, vals


# ---------------------------------------------------------------------------
# localized traces


def localized_weights(fd_Z: FourierData, f_on_curve, p: float, M: int, method: str = "eigen", svd=None):
    """Terms whose Cesaro mean estimates the trace of |T|^{p/2} M_f |T|^{p/2}.

    ``compress``: mu_k^p (V* M_f V)_kk, exactly linear in f.
    ``eigen``: eigenvalues of the self-adjoint A_f, descending.
    ``svd`` may carry a precomputed ``commutator_svd(fd_Z, M)``.
    """
    f = np.asarray(f_on_curve)
    if np.iscomplexobj(f) and np.max(np.abs(f.imag)) > 0:
        raise ValidationError("f must be real-valued; split complex f into real and imaginary parts")
    fd_f = fourier_coeffs(np.real(f))
    mu, V = commutator_svd(fd_Z, M) if svd is None else svd
    Mf = multiplication_matrix(fd_f, M)
    W = Mf @ V
    if method == "compress":
        d = np.einsum("ik,ik->k", V.conj(), W)
        if np.max(np.abs(d.imag)) > 1e-8 * max(1.0, np.max(np.abs(d))):
            raise NonHermitian("compressed multiplication operator is not self-adjoint")
        return mu**p * d.real
    if method == "eigen":
        B = V.conj().T @ W
        herm = np.max(np.abs(B - B.conj().T))
        if herm > 1e-8 * max(1.0, np.max(np.abs(B))):
            raise NonHermitian(f"symmetry residual {herm:.3g}")
        D = mu ** (p / 2)
        A = D[:, None] * B * D[None, :]
        A = 0.5 * (A + A.conj().T)
        ev = np.linalg.eigvalsh(A)
        return ev[np.argsort(-np.abs(ev))]
    raise ValidationError(f"unknown method {method!r}")


def localized_trace(
    fd_Z: FourierData, f_on_curve, p: float, M: int, n_grid=None, method: str = "eigen", svd=None
):
    """Cesaro estimate for |T|^{p/2} M_f |T|^{p/2}, T = [F, M_Z].

    With ``eigen`` a sign-changing f is split as f+ - f- and each part is
    estimated on its own, so positive and negative eigenvalues never share
    one descending sequence.
    """
    f = np.real(np.asarray(f_on_curve))
    if np.iscomplexobj(f_on_curve) and np.max(np.abs(np.imag(f_on_curve))) > 0:
        raise ValidationError("f must be real-valued; split complex f into real and imaginary parts")
    if np.all(f == f.flat[0]):
        # A_c = c |T|^p exactly
        terms = f.flat[0] * commutator_singular_values(fd_Z, M) ** p
        if n_grid is None:
            n_grid = default_n_grid(len(terms))
        est = cesaro_trace(terms, n_grid)
        return DixmierEstimate(est.value, "Cesaro", est.params, est.partials, {**est.meta, "localization": "constant"})
    if svd is None:
        svd = commutator_svd(fd_Z, M)
    if method == "eigen" and np.min(f) < 0 < np.max(f):
        pos = localized_trace(fd_Z, np.maximum(f, 0.0), p, M, n_grid, method, svd)
        neg = localized_trace(fd_Z, np.maximum(-f, 0.0), p, M, n_grid, method, svd)
        meta = {"localization": method, "split": True, "positive": pos.value, "negative": neg.value}
        return DixmierEstimate(pos.value - neg.value, "Cesaro", pos.params, pos.partials - neg.partials, meta)
    terms = localized_weights(fd_Z, f, p, M, method, svd)
    if n_grid is None:
        n_grid = default_n_grid(len(terms))
    est = cesaro_trace(terms, n_grid)
    return DixmierEstimate(est.value, "Cesaro", est.params, est.partials, {**est.meta, "localization": method})


def dixmier_estimate(fd: FourierData, p: float, M: int, n_grid=None) -> DixmierEstimate:
    """Cesaro estimate for |[F, M_f]|^p."""
    mu = commutator_singular_values(fd, M)
    if n_grid is None:
        n_grid = default_n_grid(len(mu))
    return cesaro_trace(mu**p, n_grid)


# ---------------------------------------------------------------------------
# covariance


def su11_parts(h: MobiusElement):
    """(alpha, beta) for h = [[alpha, beta], [conj beta, conj alpha]]."""
    alpha, beta = h.g11, h.g12
    if abs(h.g21 - np.conj(beta)) > 1e-8 or abs(h.g22 - np.conj(alpha)) > 1e-8:
        # allow the PSL sign
        if abs(h.g21 + np.conj(beta)) < 1e-8 and abs(h.g22 + np.conj(alpha)) < 1e-8:
            return -alpha, -beta
        raise ValidationError("h is not in SU(1,1)")
    return alpha, beta


def weighted_composition_matrix(h: MobiusElement, M: int, N: int | None = None) -> np.ndarray:
    """Matrix of (U_h xi)(z) = xi(h z) / (conj(beta) z + conj(alpha)) on |n| <= M."""
    alpha, beta = su11_parts(h)
    if N is None:
        N = 1 << max(6, int(math.ceil(math.log2(32 * M + 1))))
    z = np.exp(2j * np.pi * np.arange(N) / N)
    hz = (alpha * z + beta) / (np.conj(beta) * z + np.conj(alpha))
    w = 1.0 / (np.conj(beta) * z + np.conj(alpha))
    n = np.arange(-M, M + 1)
    cols = hz[:, None] ** n[None, :] * w[:, None]
    coef = np.fft.fft(cols, axis=0) / N
    return coef[np.mod(n, N), :]


def central_block(n_total: int, frac: float = 0.5) -> slice:
    M = (n_total - 1) // 2
    c = int(M * frac)
    return slice(M - c, M + c + 1)


def unitarity_residual(U: np.ndarray, frac: float = 0.5) -> float:
    sl = central_block(U.shape[0], frac)
    G = U[:, sl].conj().T @ U[:, sl]
    return float(np.linalg.norm(G - np.eye(G.shape[0]), 2))


def f_commutation_residual(U: np.ndarray, frac: float = 0.5) -> float:
    M = (U.shape[0] - 1) // 2
    eps = _eps(np.arange(-M, M + 1))
    C = eps[:, None] * U - U * eps[None, :]
    sl = central_block(U.shape[0], frac)
    return float(np.linalg.norm(C[:, sl], 2))


def mobius_covariance_check(
    fd_Z: FourierData,
    g: MobiusElement,
    p: float,
    M: int,
    n_grid=None,
    pole_tol: float = 1e-6,
    method: str = "eigen",
) -> float:
    """|tr(|[F, g o Z]|^p) / tr(|[F, Z]|^p |g' o Z|^p) - 1| with Cesaro estimates."""
    Zs = fd_Z.samples()
    den = g.g21 * Zs + g.g22
    if np.min(np.abs(den)) < pole_tol:
        raise PoleOnCurve(f"|g21 Z + g22| = {np.min(np.abs(den)):.3g} on the curve")
    gZ = (g.g11 * Zs + g.g12) / den
    left = dixmier_estimate(fourier_coeffs(gZ), p, M, n_grid).value
    weight = np.abs(den) ** (-2.0 * p)
    # both sides from the same sample vector, so g = I compares identical data
    right = localized_trace(fourier_coeffs(Zs), weight, p, M, n_grid, method).value
    return abs(left / right - 1.0)


def truncation_stability(fd: FourierData, M: int, frac: float = 0.125):
    """Max relative change of mu(k), k <= frac*M, when M is doubled."""
    a = commutator_singular_values(fd, M)
    b = commutator_singular_values(fd, 2 * M)
    k = int(frac * M) + 1
    ref = np.maximum(np.abs(a[:k]), 1e-300)
    return float(np.max(np.abs(b[:k] - a[:k]) / ref))
