"""Concrete groups and the orbit engine.

Generators are stored with their inverses interleaved: index ``2k`` is the
k-th generator and ``2k + 1`` its inverse, so the inverse of letter ``i`` is
``i ^ 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    Capacity,
    InfinityInLimitSet,
    InsufficientData,
    NotLoxodromic,
    ValidationError,
)
from .mobius import (
    MobiusClass,
    MobiusElement,
    classify,
    norm_sq_many,
    normalize_stack,
)

DEDUP_QUANTUM = 1e-7
MAX_DEPTH = 24
DEFAULT_CAPACITY = 6_000_000
THETA_MAX = 0.6

SQRT2 = math.sqrt(2.0)
T_MATRIX = np.array(
    [[1 + SQRT2, math.sqrt(2 + 2 * SQRT2)], [math.sqrt(2 + 2 * SQRT2), 1 + SQRT2]],
    dtype=complex,
)


class GroupKind(str, Enum):
    FUCHSIAN = "Fuchsian"
    QUASI_FUCHSIAN = "QuasiFuchsian"
    CONJUGATED = "Conjugated"


@dataclass(frozen=True)
class GroupPresentation:
    label: str
    generators: tuple  # MobiusElement, inverses interleaved
    kind: GroupKind
    bending_angle: float = 0.0

    def __post_init__(self):
        gens = tuple(self.generators)
        if len(gens) % 2:
            raise ValidationError("generator list must contain inverse pairs")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def from_generators(cls, label, gens, kind, bending_angle=0.0):
        """Build a presentation from the non-inverted generators only."""
        full = []
        for g in gens:
            full.extend([g, g.inverse()])
        return cls(label, tuple(full), kind, bending_angle)

    @property
    def rank(self) -> int:
        return len(self.generators) // 2

    @property
    def matrices(self) -> np.ndarray:
        return np.array([g.matrix for g in self.generators])

    def primary(self, k: int) -> MobiusElement:
        return self.generators[2 * k]

    def word_matrix(self, word) -> np.ndarray:
        m = np.eye(2, dtype=complex)
        for i in word:
            m = m @ self.generators[i].matrix
        return m

    def word_element(self, word) -> MobiusElement:
        return MobiusElement.from_matrix(self.word_matrix(word))

    def check(self):
        """Validate the invariants: loxodromic, pairwise distinct generators."""
        for i, g in enumerate(self.generators):
            if classify(g) is not MobiusClass.LOXODROMIC:
                raise ValidationError(f"generator {i} is not loxodromic")
        for i in range(len(self.generators)):
            for j in range(i):
                if self.generators[i].psl_equal(self.generators[j]):
                    raise ValidationError(f"generators {j} and {i} coincide")
        return self


def _rot(phi: float) -> np.ndarray:
    return np.diag([np.exp(0.5j * phi), np.exp(-0.5j * phi)])


def _side_pairing(j: int, k: int) -> np.ndarray:
    # hyperbolic element carrying side j of the regular octagon onto side k
    return _rot(k * np.pi / 4) @ T_MATRIX @ _rot(np.pi - j * np.pi / 4)


# sides paired in the pattern a b a^-1 b^-1 c d c^-1 d^-1
OCTAGON_PAIRING = ((2, 0), (1, 3), (6, 4), (5, 7))
OCTAGON_RELATOR = (0, 2, 1, 3, 4, 6, 5, 7)  # [g0, g1] [g2, g3] as letters


def octagon_fuchsian() -> GroupPresentation:
    """Cocompact genus-2 Fuchsian group of the regular octagon with angles pi/4.

    All generators lie in SU(1,1) and have trace 2 + sqrt 2.
    """
    gens = [MobiusElement.from_matrix(_side_pairing(j, k)) for j, k in OCTAGON_PAIRING]
    return GroupPresentation.from_generators("octagon", gens, GroupKind.FUCHSIAN)


def commutator(g: MobiusElement, h: MobiusElement) -> MobiusElement:
    return g @ h @ g.inverse() @ h.inverse()


def bending_rotation(pres: GroupPresentation, theta: float) -> MobiusElement:
    """E_theta = M diag(e^{i theta/2}, e^{-i theta/2}) M^-1 for K = [g0, g1] = M diag(l, 1/l) M^-1."""
    K = commutator(pres.primary(0), pres.primary(1))
    t2 = K.trace**2
    if not abs(t2) > 4 or classify(K) is not MobiusClass.LOXODROMIC:
        raise NotLoxodromic(f"bending axis is not loxodromic (tr^2 = {t2:.6g})")
    ev, M = np.linalg.eig(K.matrix)
    M = M[:, np.argsort(-np.abs(ev))]
    E = M @ np.diag([np.exp(0.5j * theta), np.exp(-0.5j * theta)]) @ np.linalg.inv(M)
    return MobiusElement.from_matrix(E)


def bend(pres: GroupPresentation, theta: float, theta_max: float = THETA_MAX) -> GroupPresentation:
    if pres.rank != 4:
        raise ValidationError("bending is defined for the four-generator octagon group")
    if abs(theta) > theta_max:
        raise ValidationError(f"|theta| = {abs(theta)} exceeds theta_max = {theta_max}")
    E = bending_rotation(pres, theta)
    Ei = E.inverse()
    gens = [pres.primary(0), pres.primary(1)]
    gens += [E @ pres.primary(k) @ Ei for k in (2, 3)]
    kind = GroupKind.FUCHSIAN if theta == 0 else GroupKind.QUASI_FUCHSIAN
    return GroupPresentation.from_generators(f"bent:{theta:g}", gens, kind, float(theta))


def conjugate(pres: GroupPresentation, m: MobiusElement) -> GroupPresentation:
    mi = m.inverse()
    gens = tuple(m @ g @ mi for g in pres.generators)
    kind = GroupKind.CONJUGATED if pres.kind is GroupKind.FUCHSIAN else pres.kind
    return GroupPresentation(f"conj:{pres.label}", gens, kind, pres.bending_angle)


# a fixed conjugator sending the unit circle to a round circle that misses infinity
DEFAULT_CONJUGATOR = MobiusElement.from_matrix(np.array([[1.0, 0.3], [0.2, 1.5]], dtype=complex))

CATALOG = {
    "octagon": "regular-octagon genus-2 Fuchsian group",
    "bent:<theta>": "octagon bent along [g0, g1] by angle theta (|theta| <= 0.6)",
    "conj": "octagon conjugated by z -> (z + 0.3)/(0.2 z + 1.5)",
}


def group_from_label(label: str) -> GroupPresentation:
    """Resolve a catalog label such as ``octagon``, ``bent:0.3`` or ``conj``."""
    base = octagon_fuchsian()
    if label == "octagon":
        return base
    if label == "conj":
        return conjugate(base, DEFAULT_CONJUGATOR)
    if label.startswith("bent:"):
        try:
            theta = float(label.split(":", 1)[1])
        except ValueError as exc:
            raise ValidationError(f"bad bending angle in {label!r}") from exc
        return bend(base, theta)
    raise ValidationError(f"unknown group label {label!r}; known: {', '.join(CATALOG)}")


def baseline_for(pres: GroupPresentation) -> GroupPresentation:
    """The Fuchsian group sharing the generator indexing of a catalog group."""
    return octagon_fuchsian()


# ---------------------------------------------------------------------------
# orbit enumeration


@dataclass(frozen=True)
class OrbitElement:
    word: tuple
    matrix: MobiusElement
    norm_sq: float
    g21_abs: float


@dataclass
class Orbit:
    """Breadth-first enumerated group elements, stored column-wise.

    ``parent[i]`` is the index of the element whose word is the word of ``i``
    with its last letter ``letter[i]`` removed (``-1`` for the identity).
    """

    label: str
    max_len: int
    prune: float | None
    matrices: np.ndarray
    parent: np.ndarray
    letter: np.ndarray
    length: np.ndarray
    norm_sq: np.ndarray
    g21_abs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.norm_sq)

    def word(self, i: int) -> tuple:
        out = []
        while self.parent[i] >= 0:
            out.append(int(self.letter[i]))
            i = self.parent[i]
        return tuple(reversed(out))

    def element(self, i: int) -> OrbitElement:
        return OrbitElement(
            self.word(i),
            MobiusElement.from_matrix(self.matrices[i], normalize=False),
            float(self.norm_sq[i]),
            float(self.g21_abs[i]),
        )

    @property
    def elements(self):
        return [self.element(i) for i in range(len(self))]

    def evaluate_in(self, pres: GroupPresentation) -> np.ndarray:
        """Matrices of the same abstract words evaluated with another generator set."""
        G = pres.matrices
        out = np.empty_like(self.matrices)
        out[0] = np.eye(2)
        for L in range(1, int(self.length.max(initial=0)) + 1):
            idx = np.nonzero(self.length == L)[0]
            out[idx] = np.einsum("nij,njk->nik", out[self.parent[idx]], G[self.letter[idx]])
        return out

    def subset(self, mask) -> "Orbit":
        """Restrict to a prefix-closed subset (e.g. word length <= L)."""
        mask = np.asarray(mask, bool)
        idx = np.nonzero(mask)[0]
        remap = np.full(len(self), -1, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        par = self.parent[idx]
        new_par = np.where(par >= 0, remap[np.maximum(par, 0)], -1)
        if np.any((par >= 0) & (new_par < 0)):
            raise ValidationError("subset is not closed under taking prefixes")
        return Orbit(
            self.label,
            self.max_len,
            self.prune,
            self.matrices[idx],
            new_par,
            self.letter[idx],
            self.length[idx],
            self.norm_sq[idx],
            self.g21_abs[idx],
            dict(self.meta),
        )

    def truncate(self, max_len: int) -> "Orbit":
        sub = self.subset(self.length <= max_len)
        sub.max_len = max_len
        return sub


def _quantize(mats: np.ndarray, q: float):
    x = np.concatenate([mats.reshape(-1, 4).real, mats.reshape(-1, 4).imag], axis=1)
    x = x[:, [0, 4, 1, 5, 2, 6, 3, 7]]  # row-major, real before imaginary
    r = np.round(x / q).astype(np.int64)
    # PSL sign: make the first nonzero quantized component positive
    nz = r != 0
    first = np.argmax(nz, axis=1)
    sgn = np.sign(r[np.arange(len(r)), first])
    sgn[sgn == 0] = 1
    r *= sgn[:, None]
    f = np.floor(x * sgn[:, None] / q).astype(np.int64)
    return r, f


def _keys(mats: np.ndarray, q: float):
    r, f = _quantize(mats, q)
    return [a.tobytes() for a in r], [b.tobytes() for b in f]


def enumerate_orbit(
    pres: GroupPresentation,
    max_len: int,
    prune: float | None = None,
    capacity: int = DEFAULT_CAPACITY,
    quantum: float = DEDUP_QUANTUM,
) -> Orbit:
    """Enumerate distinct group elements of word length <= max_len.

    Elements with ||g||^2 > prune are kept but not extended, so deep shells
    are under-counted; ``meta['pruned']`` records how many were cut.
    """
    if max_len < 0 or max_len > MAX_DEPTH:
        raise ValidationError(f"max_len must be in [0, {MAX_DEPTH}]")
    G = pres.matrices
    n_letters = len(G)
    seen_r: set = set()
    seen_f: set = set()
    ident = np.eye(2, dtype=complex)[None]
    r0, f0 = _keys(ident, quantum)
    seen_r.update(r0)
    seen_f.update(f0)

    mats = [ident]
    parents = [np.array([-1])]
    letters = [np.array([-1])]
    lengths = [np.array([0])]
    frontier_idx = np.array([0])
    frontier = ident
    frontier_last = np.array([-1])
    total = 1
    collisions = 0
    pruned = 0

    for L in range(1, max_len + 1):
        if len(frontier) == 0:
            break
        cand_m, cand_p, cand_l = [], [], []
        for i in range(n_letters):
            keep = (frontier_last ^ 1) != i if L > 1 else np.ones(len(frontier), bool)
            cand_m.append(frontier[keep] @ G[i])
            cand_p.append(frontier_idx[keep])
            cand_l.append(np.full(int(keep.sum()), i))
        m = normalize_stack(np.concatenate(cand_m))
        p = np.concatenate(cand_p)
        lt = np.concatenate(cand_l)
        kr, kf = _keys(m, quantum)
        sel = np.zeros(len(m), bool)
        for j in range(len(m)):
            a, b = kr[j], kf[j]
            if a in seen_r or b in seen_f:
                collisions += 1
                continue
            seen_r.add(a)
            seen_f.add(b)
            sel[j] = True
        m, p, lt = m[sel], p[sel], lt[sel]
        if total + len(m) > capacity:
            raise Capacity(f"orbit would exceed capacity {capacity} at word length {L}")
        idx = np.arange(total, total + len(m))
        total += len(m)
        mats.append(m)
        parents.append(p)
        letters.append(lt)
        lengths.append(np.full(len(m), L))
        if prune is not None:
            n2 = norm_sq_many(m)
            ext = n2 <= prune
            pruned += int((~ext).sum())
        else:
            ext = np.ones(len(m), bool)
        frontier, frontier_idx, frontier_last = m[ext], idx[ext], lt[ext]

    matrices = np.concatenate(mats)
    return Orbit(
        label=pres.label,
        max_len=max_len,
        prune=prune,
        matrices=matrices,
        parent=np.concatenate(parents).astype(np.int64),
        letter=np.concatenate(letters).astype(np.int64),
        length=np.concatenate(lengths).astype(np.int64),
        norm_sq=norm_sq_many(matrices),
        g21_abs=np.abs(matrices[:, 1, 0]),
        meta={"collisions": collisions, "pruned": pruned, "quantum": quantum},
    )


# ---------------------------------------------------------------------------
# growth statistics


def effective_norm_cap(orbit: Orbit) -> float:
    """Largest ||g||^2 up to which the counting data is meaningful."""
    top = float(orbit.norm_sq.max())
    return min(top, orbit.prune) if orbit.prune is not None else top


def growth_counting(orbit: Orbit, t=None, per_decade: int = 10):
    """Return ``(t, N)`` with N(t) = #{g : ||g||^-2 >= t} on a log-spaced grid."""
    if len(orbit) == 0:
        raise ValidationError("empty orbit")
    if t is None:
        decades = math.log10(effective_norm_cap(orbit))
        n = max(2, int(math.ceil(decades * per_decade)) + 1)
        t = np.logspace(0, -decades, n)
    t = np.asarray(t, dtype=float)
    inv = np.sort(1.0 / orbit.norm_sq)
    # tolerate roundoff for ||I|| = 1
    N = len(inv) - np.searchsorted(inv, t * (1 - 1e-12), side="left")
    return t, N


def _ols(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(coef[1]), float(math.sqrt(cov[0, 0]))


def critical_exponent(orbit: Orbit, trim: float = 0.1, min_depth: int = 10):
    """Slope of log N(t) against -log t over the middle of the available decades.

    Returns ``(p_hat, stderr)``.
    """
    if orbit.max_len < min_depth:
        raise InsufficientData(f"orbit depth {orbit.max_len} < {min_depth}")
    t, N = growth_counting(orbit)
    x, y = -np.log(t), np.log(np.maximum(N, 1))
    span = x[-1] - x[0]
    sel = (x >= x[0] + trim * span) & (x <= x[-1] - trim * span)
    if sel.sum() < 4:
        raise InsufficientData("too few grid points in the fit window")
    slope, _, err = _ols(x[sel], y[sel])
    return slope, err


def g21_tail(orbit: Orbit, base_conjugation: MobiusElement | None = None) -> np.ndarray:
    """Descending |g21|^-2 over non-identity elements of the (conjugated) orbit."""
    mats = orbit.matrices[orbit.length > 0]
    if base_conjugation is not None:
        m = base_conjugation.matrix
        mi = base_conjugation.inverse().matrix
        mats = m @ mats @ mi
    a = np.abs(mats[:, 1, 0])
    if len(a) and a.min() < 1e-9:
        raise InfinityInLimitSet("some element fixes infinity up to 1e-9 (|g21| too small)")
    return np.sort(a ** -2.0)[::-1]


def weak_lp_profile(values, p: float) -> float:
    """sup_k (k+1)^{1/p} mu(k) for a descending nonnegative sequence."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    k = np.arange(1, v.size + 1, dtype=float)
    return float(np.max(k ** (1.0 / p) * v))


def lower_bound_constant(values, p: float, k_min: int = 0, k_max: int | None = None) -> float:
    """min_k (k+1)^{1/p} mu(k) over a window of indices."""
    v = np.asarray(values, dtype=float)
    hi = v.size if k_max is None else min(k_max, v.size)
    if hi <= k_min:
        raise InsufficientData("empty window for the lower-bound constant")
    k = np.arange(k_min + 1, hi + 1, dtype=float)
    return float(np.min(k ** (1.0 / p) * v[k_min:hi]))
