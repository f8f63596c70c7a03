"""Orbit-sum approximations of the geometric measure on the limit set."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import BasePointTooClose, DegenerateDenominator, ValidationError
from .groups import Orbit
from .mobius import INFINITY, MobiusElement, apply_many
from .quantized import FourierData, commutator_svd, localized_trace


@dataclass
class MeasureAtoms:
    weights: np.ndarray
    points: np.ndarray
    s: float
    z0: object
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.weights)

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))


def _bbox(points, inflate: float):
    z = np.asarray(points)
    x0, x1 = z.real.min(), z.real.max()
    y0, y1 = z.imag.min(), z.imag.max()
    dx, dy = inflate * (x1 - x0), inflate * (y1 - y0)
    return x0 - dx, x1 + dx, y0 - dy, y1 + dy


def default_base_point(orbit: Orbit, radius_factor: float = 4.0, n_candidates: int = 16) -> complex:
    """A point far outside the limit set maximizing the distance to the orbit poles."""
    m = orbit.matrices[orbit.length > 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        poles = -m[:, 1, 1] / m[:, 1, 0]
    poles = poles[np.isfinite(poles)]
    R = radius_factor * max(1.0, float(np.max(np.abs(poles))) if len(poles) else 1.0)
    cand = R * np.exp(2j * np.pi * np.arange(n_candidates) / n_candidates)
    d = np.min(np.abs(cand[:, None] - poles[None, ::max(1, len(poles) // 20000)]), axis=1)
    return complex(cand[np.argmax(d)])


def patterson_sullivan(
    orbit: Orbit,
    p_hat: float,
    z0=INFINITY,
    s_offset: float = 0.1,
    limit_points=None,
    inflate: float = 0.1,
) -> MeasureAtoms:
    """Atoms at g(z0) with weights |g'(z0)|^s, s = p_hat + s_offset, normalized to mass 1.

    ``z0 = INFINITY`` uses the spherical derivative |g21|^-2 at infinity and
    skips the identity.  When ``limit_points`` is given, atoms outside their
    bounding box inflated by ``inflate`` are dropped (``meta['dropped_mass']``).
    """
    if not 0 < s_offset <= 0.2:
        raise ValidationError("s_offset must lie in (0, 0.2]")
    s = p_hat + s_offset
    m = orbit.matrices
    if z0 is INFINITY:
        m = m[orbit.length > 0]
        deriv = np.abs(m[:, 1, 0]) ** -2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            pts = m[:, 0, 0] / m[:, 1, 0]
    else:
        z0 = complex(z0)
        den = m[:, 1, 0] * z0 + m[:, 1, 1]
        deriv = 1.0 / np.abs(den) ** 2
        pts = apply_many(m, z0)
    if np.any(deriv > 1 + 1e-12) or not np.all(np.isfinite(pts)):
        raise BasePointTooClose(f"max |g'(z0)| = {deriv.max():.3g} > 1")
    w = deriv**s
    meta = {"dropped_mass": 0.0, "n_orbit": len(orbit)}
    if limit_points is not None:
        x0, x1, y0, y1 = _bbox(limit_points, inflate)
        keep = (pts.real >= x0) & (pts.real <= x1) & (pts.imag >= y0) & (pts.imag <= y1)
        meta["dropped_mass"] = float(w[~keep].sum() / w.sum())
        w, pts = w[keep], pts[keep]
    return MeasureAtoms(w / w.sum(), pts, s, z0, meta)


def integrate(measure: MeasureAtoms, f):
    vals = f(measure.points)
    return np.sum(measure.weights * np.asarray(vals))


def geometricity_check(
    measure: MeasureAtoms, g: MobiusElement, f, exponent: float | None = None, pole_tol: float = 1e-9
) -> float:
    """|int f o g^-1 dnu - int f |g'|^q dnu| / max(|int f dnu|, 0.1), q = measure.s by default.

    Atoms sitting on g(inf) or g^-1(inf) are left out of both sides: for
    atoms built from z0 = inf they are the images of the missing identity atom.
    """
    q = measure.s if exponent is None else exponent
    x = measure.points
    keep = np.ones(len(x), bool)
    if g.g21 != 0:
        for pole in (g.g11 / g.g21, -g.g22 / g.g21):
            keep &= np.abs(x - pole) > pole_tol * (1 + abs(pole))
    x, w = x[keep], measure.weights[keep]
    gi = g.inverse()
    lhs = np.sum(w * f((gi.g11 * x + gi.g12) / (gi.g21 * x + gi.g22)))
    gp = 1.0 / np.abs(g.g21 * x + g.g22) ** 2
    rhs = np.sum(w * gp**q * f(x))
    scale = max(abs(integrate(measure, f)), 0.1)
    return float(abs(lhs - rhs) / scale)


STANDARD_TEST_FUNCTIONS = {
    "one": lambda w: np.ones(np.shape(w)),
    "re": lambda w: np.real(w),
    "im": lambda w: np.imag(w),
    "abs2": lambda w: np.abs(w) ** 2,
}


@dataclass(frozen=True)
class TraceMeasureRow:
    name: str
    trace: float
    integral: float
    ratio: float | None


@dataclass(frozen=True)
class TraceMeasureReport:
    rows: tuple
    spread: float
    c1: float
    skipped: tuple


def trace_vs_measure_report(
    fd_Z: FourierData,
    measure: MeasureAtoms,
    p_hat: float,
    test_functions=None,
    M: int = 1024,
    min_integral: float = 1e-3,
    n_grid=None,
    method: str = "eigen",
) -> TraceMeasureReport:
    """Ratios c_f = (localized trace of f) / (integral of f) and their spread about c_1."""
    tf = STANDARD_TEST_FUNCTIONS if test_functions is None else test_functions
    if "one" not in tf:
        raise ValidationError("test functions must include the constant 'one'")
    Zs = fd_Z.samples()
    svd = commutator_svd(fd_Z, M)
    rows, skipped = [], []
    for name, f in tf.items():
        integ = float(np.real(integrate(measure, f)))
        tr = localized_trace(fd_Z, np.real(f(Zs)), p_hat, M, n_grid, method, svd).value
        if abs(integ) < min_integral:
            skipped.append(name)
            rows.append(TraceMeasureRow(name, tr, integ, None))
            continue
        rows.append(TraceMeasureRow(name, tr, integ, tr / integ))
    c1 = next(r.ratio for r in rows if r.name == "one")
    if c1 is None:
        raise DegenerateDenominator("integral of the constant function vanished")
    spread = max((abs(r.ratio / c1 - 1) for r in rows if r.ratio is not None), default=0.0)
    return TraceMeasureReport(tuple(rows), float(spread), float(c1), tuple(skipped))


def write_atoms_csv(path, measure: MeasureAtoms):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["weight", "re", "im"])
        for w, z in zip(measure.weights, measure.points):
            wr.writerow([repr(float(w)), repr(float(z.real)), repr(float(z.imag))])


def read_atoms_csv(path, s: float = float("nan")) -> MeasureAtoms:
    d = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return MeasureAtoms(d[:, 0], d[:, 1] + 1j * d[:, 2], s, None)
