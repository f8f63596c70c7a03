"""Riemann map of the disk onto the inside of a closed polygon-like curve.

The forward chain psi (curve side -> disk) is

    phi1:  z -> i sqrt(k (z - z1)/(z - z0))          plane minus first arc -> upper half-plane
    slit:  z -> c + (z - c) sqrt(1 + s^2/(z - c)^2)  one per remaining vertex
    square z -> sigma (z - c_n)^2                    quadrant -> upper half-plane
    disk:  z -> rot (z - a)/(z - conj a)              upper half-plane -> disk, a = image of w0

The unit factor k makes the first piece the circular arc through the last,
first and second vertices.  Z = psi^{-1}.  A curve that is a round circle
(to rounding) is mapped by the exact Moebius map instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import CurvePolyline
from .errors import FitDiverged, OutsideDomain, ValidationError

EPS_FIT = 1e-3
CIRCLE_TOL = 1e-9
SCHEMA = "qftrace.conformal/1"


def _sqrt(z):
    return np.sqrt(np.asarray(z, dtype=complex))


def _upper(w):
    """Copy of ``w`` with nonpositive imaginary parts replaced by +0.0."""
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    out.real = w.real
    out.imag = np.where(w.imag > 0, w.imag, 0.0)
    return out


def slit_forward(z, c, s):
    u = z - c
    with np.errstate(divide="ignore", invalid="ignore"):
        return c + u * _sqrt(1 + (s * s) / (u * u))


def slit_inverse(w, c, s):
    w = _upper(w) - c
    return c + _sqrt(w - s) * _sqrt(w + s)


def winding_number(points, w) -> np.ndarray:
    """Winding number of the closed polygon ``points`` around each ``w``."""
    p = np.asarray(points, dtype=complex)
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    q = np.roll(p, -1)
    out = np.empty(len(w))
    for i, x in enumerate(w):
        out[i] = np.sum(np.angle((q - x) / (p - x))) / (2 * math.pi)
    return np.rint(out).astype(int)


def signed_area(points) -> float:
    p = np.asarray(points, dtype=complex)
    q = np.roll(p, -1)
    return 0.5 * float(np.sum(p.real * q.imag - q.real * p.imag))


def default_interior_point(points) -> complex:
    """Vertex centroid, or the inside grid point farthest from the curve."""
    p = np.asarray(points, dtype=complex)
    c = complex(np.mean(p))
    if abs(winding_number(p, c)[0]) == 1:
        return c
    xs = np.linspace(p.real.min(), p.real.max(), 41)
    ys = np.linspace(p.imag.min(), p.imag.max(), 41)
    grid = (xs[None, :] + 1j * ys[:, None]).ravel()
    sub = p[:: max(1, len(p) // 512)]
    inside = np.abs(winding_number(sub, grid)) == 1
    if not inside.any():
        raise ValidationError("could not find an interior point")
    cand = grid[inside]
    d = np.min(np.abs(cand[:, None] - sub[None, :]), axis=1)
    return complex(cand[np.argmax(d)])


def fit_circle(points):
    """Least-squares circle through the points: (center, radius, max residual)."""
    p = np.asarray(points, dtype=complex)
    A = np.column_stack([p.real, p.imag, np.ones(len(p))])
    b = np.abs(p) ** 2
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    center = 0.5 * (sol[0] + 1j * sol[1])
    r = math.sqrt(max(sol[2] + abs(center) ** 2, 0.0))
    resid = float(np.max(np.abs(np.abs(p - center) - r)))
    return complex(center), r, resid


@dataclass
class ConformalMap:
    kind: str  # "zipper" or "mobius"
    w0: complex
    vertices: np.ndarray
    eps_fit: float = 0.0
    # zipper data
    z0: complex = 0j
    z1: complex = 0j
    kappa: complex = 1 + 0j
    slits: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    sq_c: float = 0.0
    sq_sigma: float = -1.0
    disk_a: complex = 1j
    disk_rot: complex = 1 + 0j
    # round-circle data: Z(z) = center + radius (z + b)/(1 + conj(b) z)
    center: complex = 0j
    radius: float = 1.0
    b: complex = 0j

    @property
    def n_steps(self) -> int:
        return len(self.slits)

    # -- forward chain psi: curve side -> disk -------------------------------

    def _to_half_plane(self, w):
        """Steps phi1 and the slits, i.e. psi without the last two steps."""
        w = np.asarray(w, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = 1j * _sqrt(self.kappa * (w - self.z1) / (w - self.z0))
        for c, s in self.slits:
            z = slit_forward(z, c, s)
        return z

    def psi(self, w):
        w = np.asarray(w, dtype=complex)
        if self.kind == "mobius":
            u = (w - self.center) / self.radius
            return (u - self.b) / (1 - np.conj(self.b) * u)
        z = self._to_half_plane(w)
        z = self.sq_sigma * (z - self.sq_c) ** 2
        with np.errstate(invalid="ignore"):
            out = self.disk_rot * (z - self.disk_a) / (z - np.conj(self.disk_a))
        # the first vertex goes to infinity and then to the point disk_rot
        return np.where(np.isfinite(z), out, self.disk_rot)

    def psi_derivative(self, w):
        w = np.asarray(w, dtype=complex)
        if self.kind == "mobius":
            u = (w - self.center) / self.radius
            bb = np.conj(self.b)
            return (1 - abs(self.b) ** 2) / (1 - bb * u) ** 2 / self.radius
        q = self.kappa * (w - self.z1) / (w - self.z0)
        rq = _sqrt(q)
        z = 1j * rq
        d = 1j * self.kappa * (self.z1 - self.z0) / (w - self.z0) ** 2 / (2 * rq)
        for c, s in self.slits:
            f = slit_forward(z, c, s)
            d = d * (z - c) / (f - c)
            z = f
        d = d * 2 * self.sq_sigma * (z - self.sq_c)
        z = self.sq_sigma * (z - self.sq_c) ** 2
        a = self.disk_a
        return d * self.disk_rot * (a - np.conj(a)) / (z - np.conj(a)) ** 2

    # -- inverse chain Z: disk -> curve side ---------------------------------

    def _from_disk(self, zeta, on_circle: bool):
        zeta = np.asarray(zeta, dtype=complex)
        if self.kind == "mobius":
            return self.center + self.radius * (zeta + self.b) / (1 + np.conj(self.b) * zeta)
        a = self.disk_a
        x = zeta / self.disk_rot
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (a - np.conj(a) * x) / (1 - x)
        if on_circle:
            z = z.real + 0j
        z = _upper(z)
        if self.sq_sigma < 0:
            z = self.sq_c - _sqrt(-z)
        else:
            z = self.sq_c + _sqrt(z)
        for c, s in self.slits[::-1]:
            z = slit_inverse(z, c, s)
        z = _upper(z)
        q = -(z * z) / self.kappa
        return (self.z1 - q * self.z0) / (1 - q)

    def to_dict(self) -> dict:
        def cpx(z):
            return [float(np.real(z)), float(np.imag(z))]

        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "w0": cpx(self.w0),
            "eps_fit": self.eps_fit,
            "vertices": [cpx(v) for v in self.vertices],
            "z0": cpx(self.z0),
            "z1": cpx(self.z1),
            "kappa": cpx(self.kappa),
            "steps": [[float(c), float(s), 1.0] for c, s in self.slits],
            "square": {"c": float(self.sq_c), "sigma": float(self.sq_sigma)},
            "disk": {"a": cpx(self.disk_a), "rotation": cpx(self.disk_rot)},
            "circle": {"center": cpx(self.center), "radius": self.radius, "b": cpx(self.b)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConformalMap":
        def cpx(v):
            return complex(v[0], v[1])

        steps = np.array([[c, s] for c, s, _ in d["steps"]], dtype=float).reshape(-1, 2)
        return cls(
            kind=d["kind"],
            w0=cpx(d["w0"]),
            vertices=np.array([cpx(v) for v in d["vertices"]], dtype=complex),
            eps_fit=float(d["eps_fit"]),
            z0=cpx(d["z0"]),
            z1=cpx(d["z1"]),
            kappa=cpx(d.get("kappa", [1.0, 0.0])),
            slits=steps,
            sq_c=float(d["square"]["c"]),
            sq_sigma=float(d["square"]["sigma"]),
            disk_a=cpx(d["disk"]["a"]),
            disk_rot=cpx(d["disk"]["rotation"]),
            center=cpx(d["circle"]["center"]),
            radius=float(d["circle"]["radius"]),
            b=cpx(d["circle"]["b"]),
        )


def save_map(path, cmap: ConformalMap):
    with open(path, "w") as fh:
        json.dump(cmap.to_dict(), fh, indent=1)


def load_map(path) -> ConformalMap:
    with open(path) as fh:
        return ConformalMap.from_dict(json.load(fh))


def _as_points(curve) -> np.ndarray:
    if isinstance(curve, CurvePolyline):
        return np.asarray(curve.points, dtype=complex)
    return np.asarray(curve, dtype=complex).ravel()


def fit_zipper(
    curve,
    w0: complex | None = None,
    eps_fit: float = EPS_FIT,
    detect_circle: bool = True,
    max_vertices: int | None = None,
) -> ConformalMap:
    """Fit the slit zipper through the curve vertices.

    ``curve`` is a closed ``CurvePolyline`` or an array of vertices in order.
    Raises ``FitDiverged`` when a vertex lands below the real axis by more
    than ``eps_fit`` before it is zipped.
    """
    if isinstance(curve, CurvePolyline) and max_vertices is not None:
        curve = curve.subsample(max_vertices)
    pts = _as_points(curve)
    if len(pts) < 4:
        raise ValidationError("need at least 4 vertices")
    if w0 is None:
        w0 = default_interior_point(pts)
    w0 = complex(w0)
    if abs(winding_number(pts, w0)[0]) != 1:
        raise ValidationError("w0 is not inside the curve")

    if detect_circle:
        center, r, resid = fit_circle(pts)
        if resid <= CIRCLE_TOL * max(r, 1.0):
            b = (w0 - center) / r
            return ConformalMap("mobius", w0, pts, resid, center=center, radius=r, b=b)

    ccw = signed_area(pts) > 0
    z0, z1 = complex(pts[0]), complex(pts[1])
    m_last = (pts[-1] - z1) / (pts[-1] - z0)
    kappa = complex(abs(m_last) / m_last)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = 1j * _sqrt(kappa * (pts[2:] - z1) / (pts[2:] - z0))
        zw = 1j * _sqrt(kappa * (w0 - z1) / (w0 - z0))
    slits = np.empty((len(zeta), 2))
    worst = 0.0
    for k in range(len(zeta)):
        v = zeta[k]
        if v.imag < 0:
            worst = max(worst, -v.imag)
            if -v.imag > eps_fit:
                raise FitDiverged(
                    f"vertex {k + 2} fell {-v.imag:.3g} below the real axis (eps_fit = {eps_fit})"
                )
        c, s = v.real, abs(v.imag)
        slits[k] = (c, s)
        rest = zeta[k + 1 :]
        zeta[k + 1 :] = slit_forward(rest, c, s)
        zeta[k] = c
        zw = slit_forward(zw, c, s)
    sq_c = float(slits[-1, 0]) if len(slits) else 0.0
    sigma = -1.0 if ccw else 1.0
    a = sigma * (zw - sq_c) ** 2
    if not a.imag > 0:
        raise FitDiverged("interior point did not land in the upper half-plane")
    cmap = ConformalMap(
        "zipper", w0, pts, 0.0, z0=z0, z1=z1, kappa=kappa, slits=slits, sq_c=sq_c, sq_sigma=sigma, disk_a=complex(a)
    )
    d = complex(cmap.psi_derivative(w0))
    cmap.disk_rot = complex(np.conj(d) / abs(d))
    cmap.eps_fit = max(worst, vertex_residual(cmap))
    return cmap


def vertex_residual(cmap: ConformalMap) -> float:
    """Max distance of the vertex images from the real axis before the last two steps."""
    if cmap.kind == "mobius":
        return float(np.max(np.abs(np.abs(cmap.psi(cmap.vertices)) - 1)))
    z = cmap._to_half_plane(cmap.vertices[2:])
    return float(np.max(np.abs(z.imag))) if len(z) else 0.0


def eval_interior(cmap: ConformalMap, z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise OutsideDomain("points must lie in the open unit disk")
    return cmap._from_disk(z, on_circle=False)


def eval_boundary(cmap: ConformalMap, N: int) -> np.ndarray:
    """Z(e^{2 pi i k/N}) for k = 0..N-1."""
    if N < 64 or N & (N - 1):
        raise ValidationError("N must be a power of two >= 64")
    zeta = np.exp(2j * np.pi * np.arange(N) / N)
    return cmap._from_disk(zeta, on_circle=True)


def inverse(cmap: ConformalMap, w):
    w = np.asarray(w, dtype=complex)
    inside = np.abs(winding_number(cmap.vertices, w.ravel())) == 1
    if not inside.all():
        raise OutsideDomain("points must lie strictly inside the curve")
    return cmap.psi(w)


def derivative(cmap: ConformalMap, z):
    """Z'(z) for |z| < 1 by the chain rule through the elementary steps."""
    w = eval_interior(cmap, z)
    return 1.0 / cmap.psi_derivative(w)


def derivative_fd(cmap: ConformalMap, z, h: float = 1e-5):
    z = np.asarray(z, dtype=complex)
    return (eval_interior(cmap, z + h) - eval_interior(cmap, z - h)) / (2 * h)


def derivative_profile(cmap: ConformalMap, tiles):
    """Rows ((1 - |z|^2)|Z'(z)|, |g21|^-2) for (g, z) pairs, z a point of the tile g F."""
    gs, zs = zip(*tiles) if len(tiles) else ((), ())
    z = np.asarray(zs, dtype=complex)
    g21 = np.array([abs(g.g21) if hasattr(g, "g21") else abs(np.asarray(g)[1, 0]) for g in gs])
    prof = (1 - np.abs(z) ** 2) * np.abs(derivative(cmap, z))
    with np.errstate(divide="ignore"):
        return np.column_stack([prof, g21**-2.0])


def cauchy_riemann_residual(cmap: ConformalMap, radius: float = 0.8, n: int = 16, h: float = 1e-4) -> float:
    """Max |dZ/dx + i dZ/dy| / |Z'| on a polar grid, a discrete conformality check."""
    r = np.linspace(0, radius, n)[1:]
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    z = (r[:, None] * np.exp(1j * t[None, :])).ravel()
    fx = (eval_interior(cmap, z + h) - eval_interior(cmap, z - h)) / (2 * h)
    fy = (eval_interior(cmap, z + 1j * h) - eval_interior(cmap, z - 1j * h)) / (2 * h)
    return float(np.max(np.abs(fx + 1j * fy) / np.abs(fx)))


def injectivity_violations(cmap: ConformalMap, n: int = 64, tol: float = 1e-10) -> int:
    """Number of coincident image pairs on an n x n grid of the disk."""
    from scipy.spatial import cKDTree

    x = np.linspace(-1, 1, n + 2)[1:-1]
    g = (x[None, :] + 1j * x[:, None]).ravel()
    g = g[np.abs(g) < 1]
    w = eval_interior(cmap, g)
    tree = cKDTree(np.column_stack([w.real, w.imag]))
    return len(tree.query_pairs(tol))


def boundary_hausdorff(samples, vertices) -> float:
    """Symmetric Hausdorff distance between two planar point sets."""
    from scipy.spatial import cKDTree

    a = np.column_stack([np.real(samples), np.imag(samples)])
    b = np.column_stack([np.real(vertices), np.imag(vertices)])
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def boundary_inversions(values, center: complex) -> int:
    """Backward steps of arg(Z(e^{it}) - center) along the circle grid."""
    a = np.angle(np.asarray(values) - center)
    d = np.angle(np.exp(1j * np.diff(np.append(a, a[0]))))
    return int(np.sum(d < 0))
