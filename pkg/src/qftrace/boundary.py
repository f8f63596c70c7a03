"""Limit-set sampling through matched attracting fixed points, curve ordering
and box-counting dimension."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientScales, TooFew
from .groups import GroupPresentation, Orbit
from .mobius import apply_many, attracting_fixed_points

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class BoundarySample:
    t: float
    w: complex
    word: tuple = ()


@dataclass
class BoundarySamples:
    """Column storage for many samples; ``index`` points back into the orbit."""

    t: np.ndarray
    w: np.ndarray
    index: np.ndarray
    length: np.ndarray
    orbit: Orbit | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> BoundarySample:
        word = self.orbit.word(int(self.index[i])) if self.orbit is not None else ()
        return BoundarySample(float(self.t[i]), complex(self.w[i]), word)

    def take(self, sel) -> "BoundarySamples":
        return BoundarySamples(
            self.t[sel], self.w[sel], self.index[sel], self.length[sel], self.orbit, dict(self.meta)
        )


@dataclass
class CurvePolyline:
    points: np.ndarray
    t: np.ndarray
    closed: bool = True

    def __len__(self):
        return len(self.points)

    def subsample(self, n: int) -> "CurvePolyline":
        """Pick about ``n`` vertices spread uniformly in the circle parameter."""
        if n >= len(self):
            return self
        targets = np.linspace(0, TWO_PI, n, endpoint=False) + self.t[0]
        idx = np.searchsorted(self.t, targets)
        idx = np.unique(np.clip(idx, 0, len(self) - 1))
        return CurvePolyline(self.points[idx], self.t[idx], self.closed)


def fixed_point_pairs(
    base: GroupPresentation,
    deformed: GroupPresentation,
    orbit: Orbit,
    on_circle_tol: float = 1e-8,
) -> BoundarySamples:
    """Pair the attracting fixed point of each word in ``base`` and in ``deformed``.

    Words whose base or deformed element is not strictly loxodromic are
    skipped; ``meta['skipped']`` counts them.
    """
    nonid = np.nonzero(orbit.length > 0)[0]
    mb = orbit.evaluate_in(base)[nonid]
    md = orbit.evaluate_in(deformed)[nonid]
    wb, _ = attracting_fixed_points(mb)
    wd, _ = attracting_fixed_points(md)
    ok = np.isfinite(wb) & np.isfinite(wd)
    off_circle = ok & (np.abs(np.abs(wb) - 1) > on_circle_tol)
    ok &= ~off_circle
    t = np.mod(np.angle(wb[ok]), TWO_PI)
    out = BoundarySamples(
        t,
        wd[ok],
        nonid[ok],
        orbit.length[nonid[ok]],
        orbit,
        {"skipped": int((~ok).sum()), "off_circle": int(off_circle.sum())},
    )
    return out


def order_curve(samples: BoundarySamples, dup_tol: float = 1e-12, min_samples: int = 16) -> CurvePolyline:
    if len(samples) < min_samples:
        raise TooFew(f"need at least {min_samples} samples, got {len(samples)}")
    # stable sort keeps the first occurrence of a repeated parameter first
    order = np.argsort(samples.t, kind="stable")
    t = samples.t[order]
    w = samples.w[order]
    keep = np.ones(len(t), bool)
    keep[1:] = np.diff(t) > dup_tol
    if len(t) > 1 and t[-1] - t[0] > TWO_PI - dup_tol and keep.sum() > 1:
        keep[-1] = False
    return CurvePolyline(w[keep], t[keep], closed=True)


def max_gap(curve: CurvePolyline) -> float:
    """Largest gap in the circle parameter, including the wrap-around gap."""
    d = np.diff(np.append(curve.t, curve.t[0] + TWO_PI))
    return float(d.max())


def order_violations(curve: CurvePolyline, center: complex | None = None, angle_tol: float = 1e-8) -> int:
    """Count steps where the argument about ``center`` runs backwards by more than ``angle_tol``.

    A fractal curve can turn back by tiny angles at fine scales without
    losing its cyclic order, hence the tolerance; ``crossing_count`` is the
    exact Jordan check.
    """
    c = np.mean(curve.points) if center is None else center
    a = np.angle(curve.points - c)
    d = np.angle(np.exp(1j * np.diff(np.append(a, a[0]))))
    return int(np.sum(d < -angle_tol))


def _cross(o, a, b):
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def crossing_count(curve: CurvePolyline, chunk: int = 2_000_000) -> int:
    """Number of pairs of non-adjacent polyline segments that properly intersect.

    Segments are swept in order of their left end, so only x-overlapping pairs
    are ever tested.
    """
    p = curve.points
    q = np.roll(p, -1) if curve.closed else p[1:]
    p = p if curve.closed else p[:-1]
    n = len(p)
    xlo = np.minimum(p.real, q.real)
    xhi = np.maximum(p.real, q.real)
    ylo = np.minimum(p.imag, q.imag)
    yhi = np.maximum(p.imag, q.imag)
    order = np.argsort(xlo)
    xs = xlo[order]
    stop = np.searchsorted(xs, xhi[order], side="right")
    cnt = stop - np.arange(n) - 1
    cnt = np.maximum(cnt, 0)
    total = 0
    starts = np.cumsum(cnt) - cnt
    i0 = 0
    while i0 < n:
        # grow the block until it holds about `chunk` candidate pairs
        i1 = int(np.searchsorted(starts, starts[i0] + chunk, side="right"))
        i1 = max(i1, i0 + 1)
        c = cnt[i0:i1]
        a = np.repeat(np.arange(i0, i1), c)
        offs = np.arange(c.sum()) - np.repeat(np.cumsum(c) - c, c)
        b = a + 1 + offs
        ia, ib = order[a], order[b]
        sel = (ylo[ia] <= yhi[ib]) & (ylo[ib] <= yhi[ia])
        adj = np.abs(ia - ib)
        sel &= (adj != 1) & (adj != n - 1 if curve.closed else True)
        ia, ib = ia[sel], ib[sel]
        d1 = _cross(p[ia], q[ia], p[ib])
        d2 = _cross(p[ia], q[ia], q[ib])
        d3 = _cross(p[ib], q[ib], p[ia])
        d4 = _cross(p[ib], q[ib], q[ia])
        total += int(np.sum((d1 * d2 < 0) & (d3 * d4 < 0)))
        i0 = i1
    return total


def densify(curve: CurvePolyline, spacing: float) -> np.ndarray:
    """Vertices plus evenly spaced points on each chord, at most ``spacing`` apart."""
    p = curve.points
    q = np.roll(p, -1) if curve.closed else p[1:]
    p = p if curve.closed else p[:-1]
    k = np.maximum(np.ceil(np.abs(q - p) / spacing).astype(np.int64), 1)
    seg = np.repeat(np.arange(len(p)), k)
    frac = (np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)) / np.repeat(k, k)
    return p[seg] + frac * (q[seg] - p[seg])


@dataclass(frozen=True)
class BoxFit:
    dimension: float
    stderr: float
    scales: tuple
    counts: tuple
    intercept: float


def default_scales(points, n: int = 9, lo_factor: float = 4.0) -> np.ndarray:
    """Log-spaced scales from a quarter of the diameter down to a resolution floor."""
    z = np.asarray(points)
    diam = max(np.ptp(z.real), np.ptp(z.imag))
    hi = diam / 4
    lo = max(hi / 10 ** 2.5, lo_factor * diam / math.sqrt(len(z)) / 10)
    lo = min(lo, hi / 100)
    return np.logspace(math.log10(hi), math.log10(lo), n)


def box_dimension(points, scales=None, offsets: int = 4, min_points: int = 1000) -> BoxFit:
    """Slope of log(occupied boxes) against log(1/scale), averaged over grid shifts."""
    z = np.asarray(points, dtype=complex).ravel()
    if len(z) < min_points:
        raise InsufficientScales(f"need at least {min_points} points, got {len(z)}")
    scales = default_scales(z) if scales is None else np.asarray(scales, dtype=float)
    if len(scales) < 5 or np.log10(scales.max() / scales.min()) < 2 - 1e-9:
        raise InsufficientScales("need >= 5 scales spanning >= 2 decades")
    x0, y0 = z.real.min(), z.imag.min()
    counts = []
    for eps in scales:
        c = []
        for j in range(offsets):
            shift = eps * j / offsets
            ix = np.floor((z.real - x0 + shift) / eps).astype(np.int64)
            iy = np.floor((z.imag - y0 + shift) / eps).astype(np.int64)
            c.append(len(np.unique(ix * 4_000_003 + iy)))
        counts.append(float(np.mean(c)))
    counts = np.array(counts)
    x = np.log(1 / scales)
    y = np.log(counts)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    s2 = float(resid @ resid) / max(len(x) - 2, 1)
    err = math.sqrt(s2 * np.linalg.inv(A.T @ A)[0, 0])
    return BoxFit(float(coef[0]), err, tuple(map(float, scales)), tuple(map(float, counts)), float(coef[1]))


def curve_box_dimension(curve: CurvePolyline, scales=None, offsets: int = 4) -> BoxFit:
    """Box dimension of an ordered curve; chords are filled in below the smallest scale."""
    if scales is None:
        gaps = np.abs(np.diff(np.append(curve.points, curve.points[0])))
        diam = max(np.ptp(curve.points.real), np.ptp(curve.points.imag))
        hi = diam / 4
        lo = max(4 * float(np.quantile(gaps, 0.999)), hi / 10**3)
        lo = min(lo, hi / 100)
        scales = np.logspace(math.log10(hi), math.log10(lo), 9)
    scales = np.asarray(scales, dtype=float)
    pts = densify(curve, scales.min() / 4)
    return box_dimension(pts, scales, offsets=offsets)


def equivariance_check(
    base: GroupPresentation,
    deformed: GroupPresentation,
    samples: BoundarySamples,
    n_elements: int = 200,
    seed: int = 0,
    match_tol: float = 1e-10,
) -> float:
    """Max |g_def(w) - w'| where w' is the sample paired with g_base(e^{it}).

    Only images whose parameter matches an existing sample within
    ``match_tol`` are compared; a looser match mixes the parameter gap into
    the error.
    """
    rng = np.random.default_rng(seed)
    order = np.argsort(samples.t)
    ts, ws = samples.t[order], samples.w[order]
    Gb, Gd = base.matrices, deformed.matrices
    gi = rng.integers(0, len(Gb), n_elements)
    si = rng.integers(0, len(ts), n_elements)
    worst = 0.0
    for g, s in zip(gi, si):
        zb = apply_many(Gb[g], np.exp(1j * ts[s]))[0]
        tt = np.mod(np.angle(zb), TWO_PI)
        k = np.searchsorted(ts, tt)
        cand = [k % len(ts), (k - 1) % len(ts)]
        dist = [abs(np.angle(np.exp(1j * (ts[c] - tt)))) for c in cand]
        j = int(np.argmin(dist))
        if dist[j] > match_tol:
            continue
        wd = apply_many(Gd[g], ws[s])[0]
        worst = max(worst, float(abs(wd - ws[cand[j]])))
    return worst


def write_samples_csv(path, samples: BoundarySamples):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "re_w", "im_w", "word_length"])
        for t, w, L in zip(samples.t, samples.w, samples.length):
            wr.writerow([repr(float(t)), repr(float(w.real)), repr(float(w.imag)), int(L)])


def read_samples_csv(path) -> BoundarySamples:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    w = data[:, 1] + 1j * data[:, 2]
    L = data[:, 3].astype(np.int64)
    return BoundarySamples(t, w, np.full(len(t), -1), L)
