"""SL(2,C) elements acting on the Riemann sphere and on hyperbolic 3-space.

Scalar API (``MobiusElement``, ``apply``, ``fixed_points`` ...) plus a few
array helpers (``apply_many``, ``attracting_fixed_points``) used by the orbit
and boundary code, which work on stacks of matrices of shape ``(n, 2, 2)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NotApplicable, PoleAt

ALG_TOL = 1e-10
CLASSIFY_TOL = 1e-9
_RENORM_DRIFT = 1e-12


class _Infinity:
    """The point at infinity of the extended complex plane."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()


def is_infinite(z) -> bool:
    return z is INFINITY


@dataclass(frozen=True)
class MobiusElement:
    g11: complex
    g12: complex
    g21: complex
    g22: complex

    def __post_init__(self):
        for name in ("g11", "g12", "g21", "g22"):
            object.__setattr__(self, name, complex(getattr(self, name)))

    @classmethod
    def from_matrix(cls, m, normalize: bool = True) -> "MobiusElement":
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
        if normalize:
            det = a * d - b * c
            if det == 0:
                raise ValueError("singular matrix")
            if abs(det - 1) > _RENORM_DRIFT:
                r = cmath.sqrt(det)
                a, b, c, d = a / r, b / r, c / r, d / r
        return cls(a, b, c, d)

    @classmethod
    def identity(cls) -> "MobiusElement":
        return cls(1, 0, 0, 1)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g21, self.g22]], dtype=complex)

    @property
    def det(self) -> complex:
        return self.g11 * self.g22 - self.g12 * self.g21

    @property
    def trace(self) -> complex:
        return self.g11 + self.g22

    def inverse(self) -> "MobiusElement":
        return MobiusElement(self.g22, -self.g12, -self.g21, self.g11)

    def __matmul__(self, other: "MobiusElement") -> "MobiusElement":
        return compose(self, other)

    def canonical(self) -> "MobiusElement":
        """Sign representative whose first nonzero entry has argument in (-pi/2, pi/2]."""
        for x in (self.g11, self.g12, self.g21, self.g22):
            if abs(x) > ALG_TOL:
                ang = cmath.phase(x)
                if -math.pi / 2 < ang <= math.pi / 2:
                    return self
                return MobiusElement(-self.g11, -self.g12, -self.g21, -self.g22)
        return self

    def psl_distance(self, other: "MobiusElement") -> float:
        d = self.matrix - other.matrix
        s = self.matrix + other.matrix
        return float(min(np.abs(d).max(), np.abs(s).max()))

    def psl_equal(self, other: "MobiusElement", tol: float = 1e-8) -> bool:
        return self.psl_distance(other) <= tol

    def is_identity(self, tol: float = CLASSIFY_TOL) -> bool:
        return self.psl_equal(MobiusElement.identity(), tol)

    def norm_sq(self) -> float:
        """Squared operator norm on C^2."""
        return float(np.linalg.norm(self.matrix, ord=2) ** 2)

    def __call__(self, z):
        return apply(self, z)


def diag(a: complex) -> MobiusElement:
    return MobiusElement(a, 0, 0, 1 / a)


def rotation(phi: float) -> MobiusElement:
    """Disk rotation z -> e^{i phi} z."""
    return diag(cmath.exp(0.5j * phi))


def compose(g: MobiusElement, h: MobiusElement) -> MobiusElement:
    m = g.matrix @ h.matrix
    out = MobiusElement.from_matrix(m, normalize=True)
    return out


def apply(g: MobiusElement, z):
    if z is INFINITY:
        if g.g21 == 0:
            return INFINITY
        return g.g11 / g.g21
    z = complex(z)
    den = g.g21 * z + g.g22
    if den == 0:
        return INFINITY
    return (g.g11 * z + g.g12) / den


def derivative(g: MobiusElement, z) -> complex:
    if z is INFINITY:
        raise PoleAt("derivative at infinity is not defined in the affine chart")
    den = g.g21 * complex(z) + g.g22
    if den == 0:
        raise PoleAt(f"z = {z} is the pole of the transformation")
    return 1 / den**2


class MobiusClass(str, Enum):
    IDENTITY = "Identity"
    ELLIPTIC = "Elliptic"
    PARABOLIC = "Parabolic"
    LOXODROMIC = "Loxodromic"


def classify(g: MobiusElement) -> MobiusClass:
    if g.is_identity(CLASSIFY_TOL):
        return MobiusClass.IDENTITY
    t2 = g.trace**2
    if abs(t2 - 4) <= CLASSIFY_TOL:
        return MobiusClass.PARABOLIC
    if abs(t2.imag) <= CLASSIFY_TOL and -CLASSIFY_TOL <= t2.real < 4:
        return MobiusClass.ELLIPTIC
    return MobiusClass.LOXODROMIC


def fixed_points(g: MobiusElement):
    """(attracting, repelling) fixed points; both equal for a parabolic element."""
    kind = classify(g)
    if kind in (MobiusClass.IDENTITY, MobiusClass.ELLIPTIC):
        raise NotApplicable(f"{kind.value} element has no attracting fixed point")
    a, b, c, d = g.g11, g.g12, g.g21, g.g22
    if kind is MobiusClass.PARABOLIC:
        if abs(c) <= ALG_TOL * max(1.0, abs(a), abs(d)):
            return INFINITY, INFINITY
        w = (a - d) / (2 * c)
        return w, w
    if abs(c) <= ALG_TOL * max(1.0, abs(a), abs(d)):
        # z -> (a z + b)/d, fixed points infinity and b/(d - a)
        finite = b / (d - a)
        if abs(a) > abs(d):
            return INFINITY, finite
        return finite, INFINITY
    lam_big, lam_small = _eigenvalues(a + d)
    return _fixed_point_for(a, b, c, d, lam_big), _fixed_point_for(a, b, c, d, lam_small)


def _eigenvalues(tr):
    disc = cmath.sqrt(tr * tr - 4)
    l1, l2 = (tr + disc) / 2, (tr - disc) / 2
    return (l1, l2) if abs(l1) >= abs(l2) else (l2, l1)


def _fixed_point_for(a, b, c, d, lam):
    # (w, 1) is an eigenvector for lam; pick the better conditioned row
    if abs(lam - a) >= abs(c):
        return b / (lam - a)
    return (lam - d) / c


# ---------------------------------------------------------------------------
# array helpers


def as_stack(mats) -> np.ndarray:
    m = np.asarray(mats, dtype=complex)
    if m.ndim == 2:
        m = m[None]
    return m


def apply_many(mats: np.ndarray, z) -> np.ndarray:
    """Apply each matrix in a stack to ``z`` (scalar or broadcastable array)."""
    m = as_stack(mats)
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (m[:, 0, 0] * z + m[:, 0, 1]) / (m[:, 1, 0] * z + m[:, 1, 1])


def abs_derivative_many(mats: np.ndarray, z) -> np.ndarray:
    m = as_stack(mats)
    return 1.0 / np.abs(m[:, 1, 0] * z + m[:, 1, 1]) ** 2


def attracting_fixed_points(mats: np.ndarray):
    """Attracting fixed points of a stack of loxodromic matrices.

    Returns ``(w, multiplier)`` with ``multiplier = |g'(w)| = 1/|lambda|^2``.
    Entries where the element is not strictly loxodromic (multiplier within
    1e-12 of 1) are returned as NaN.
    """
    m = as_stack(mats)
    a, b, c, d = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]
    tr = a + d
    disc = np.sqrt(tr * tr - 4)
    l1 = (tr + disc) / 2
    l2 = (tr - disc) / 2
    lam = np.where(np.abs(l1) >= np.abs(l2), l1, l2)
    with np.errstate(divide="ignore", invalid="ignore"):
        w_top = b / (lam - a)
        w_bot = (lam - d) / c
    w = np.where(np.abs(lam - a) >= np.abs(c), w_top, w_bot)
    mult = 1.0 / np.abs(lam) ** 2
    bad = np.abs(mult - 1) <= 1e-12
    w = np.where(bad, np.nan + 0j, w)
    return w, mult


def normalize_stack(mats: np.ndarray) -> np.ndarray:
    m = as_stack(mats).copy()
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    drift = np.abs(det - 1) > _RENORM_DRIFT
    if drift.any():
        m[drift] /= np.sqrt(det[drift])[:, None, None]
    return m


def norm_sq_many(mats: np.ndarray) -> np.ndarray:
    """Squared operator norms of a stack of SL(2,C) matrices.

    For det = 1 the singular values are s and 1/s with
    s^2 + s^-2 = ||g||_F^2, which gives a closed form.
    """
    m = as_stack(mats)
    f2 = np.sum(np.abs(m) ** 2, axis=(1, 2))
    return 0.5 * (f2 + np.sqrt(np.maximum(f2 * f2 - 4.0, 0.0)))


# ---------------------------------------------------------------------------
# quaternions and the ball model


@dataclass(frozen=True)
class Quaternion:
    q0: float
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0

    @classmethod
    def from_complex_pair(cls, z: complex, w: complex) -> "Quaternion":
        """The quaternion z + w j for complex z, w (with i j = k)."""
        return cls(z.real, z.imag, w.real, w.imag)

    def __mul__(self, o: "Quaternion") -> "Quaternion":
        a0, a1, a2, a3 = self.q0, self.q1, self.q2, self.q3
        b0, b1, b2, b3 = o.q0, o.q1, o.q2, o.q3
        return Quaternion(
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        )

    def __add__(self, o: "Quaternion") -> "Quaternion":
        return Quaternion(self.q0 + o.q0, self.q1 + o.q1, self.q2 + o.q2, self.q3 + o.q3)

    def conj(self) -> "Quaternion":
        return Quaternion(self.q0, -self.q1, -self.q2, -self.q3)

    def prime(self) -> "Quaternion":
        # inner automorphism by k
        return Quaternion(self.q0, -self.q1, -self.q2, self.q3)

    def norm(self) -> float:
        return math.sqrt(self.q0**2 + self.q1**2 + self.q2**2 + self.q3**2)

    def inverse(self) -> "Quaternion":
        n2 = self.norm() ** 2
        c = self.conj()
        return Quaternion(c.q0 / n2, c.q1 / n2, c.q2 / n2, c.q3 / n2)

    def as_tuple(self):
        return (self.q0, self.q1, self.q2, self.q3)


@dataclass(frozen=True)
class BallPoint:
    u0: float
    u1: float
    u2: float

    def __post_init__(self):
        if self.u0**2 + self.u1**2 + self.u2**2 >= 1.0:
            raise ValueError("ball point must satisfy |u| < 1")

    @property
    def norm(self) -> float:
        return math.sqrt(self.u0**2 + self.u1**2 + self.u2**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.u0, self.u1, self.u2])

    def as_quaternion(self) -> Quaternion:
        return Quaternion(self.u0, self.u1, self.u2, 0.0)


ORIGIN = BallPoint(0.0, 0.0, 0.0)


def quaternion_rep(g: MobiusElement):
    """The quaternion pair (a, c) with a = (g11 + conj g22)/2 + (g12 - conj g21)/2 j."""
    a = Quaternion.from_complex_pair(
        0.5 * (g.g11 + g.g22.conjugate()), 0.5 * (g.g12 - g.g21.conjugate())
    )
    c = Quaternion.from_complex_pair(
        0.5 * (g.g21 + g.g12.conjugate()), 0.5 * (g.g22 - g.g11.conjugate())
    )
    return a, c


def h3_translate(g: MobiusElement, u: BallPoint) -> BallPoint:
    a, c = quaternion_rep(g)
    q = u.as_quaternion()
    num = a * q + c.prime()
    den = c * q + a.prime()
    r = num * den.inverse()
    n2 = r.q0**2 + r.q1**2 + r.q2**2
    if n2 >= 1.0:
        # rounding for points at the edge of double precision
        s = (1.0 - 1e-16) / math.sqrt(n2)
        return BallPoint(r.q0 * s, r.q1 * s, r.q2 * s)
    return BallPoint(r.q0, r.q1, r.q2)


def h3_dist0(u: BallPoint) -> float:
    r = u.norm
    return math.log((1 + r) / (1 - r))


def h3_dist(u: BallPoint, v: BallPoint) -> float:
    du = u.as_array() - v.as_array()
    x = 2 * float(du @ du) / ((1 - u.norm**2) * (1 - v.norm**2))
    # arccosh(1 + x) without cancellation
    return math.log1p(x + math.sqrt(x * (x + 2)))
