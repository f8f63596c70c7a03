import numpy as np
import pytest
from hypothesis import given, strategies as st

from qftrace.boundary import (
    BoundarySamples,
    CurvePolyline,
    box_dimension,
    crossing_count,
    curve_box_dimension,
    equivariance_check,
    fixed_point_pairs,
    max_gap,
    order_curve,
    order_violations,
    read_samples_csv,
    write_samples_csv,
)
from qftrace.errors import InsufficientScales, TooFew
from qftrace.groups import DEFAULT_CONJUGATOR, bend, conjugate, enumerate_orbit, octagon_fuchsian
from qftrace.mobius import apply_many

OCT = octagon_fuchsian()


@pytest.fixture(scope="module")
def orbit6():
    return enumerate_orbit(OCT, 6)


@pytest.fixture(scope="module")
def bent12():
    bent = bend(OCT, 0.3)
    orbit = enumerate_orbit(bent, 12, prune=1e5)
    return bent, fixed_point_pairs(OCT, bent, orbit)


def _circle_samples(t):
    t = np.asarray(t, float)
    n = len(t)
    return BoundarySamples(t, np.exp(1j * t), np.arange(n), np.ones(n, np.int64))


def test_pairs_identity_deformation(orbit6):
    s = fixed_point_pairs(OCT, OCT, orbit6)
    assert len(s) > 1000
    assert np.abs(s.w - np.exp(1j * s.t)).max() < 1e-9


def test_pairs_conjugated(orbit6):
    conj = conjugate(OCT, DEFAULT_CONJUGATOR)
    s = fixed_point_pairs(OCT, conj, orbit6)
    expect = apply_many(DEFAULT_CONJUGATOR.matrix, np.exp(1j * s.t))
    assert np.abs(s.w - expect).max() < 1e-8


def test_pairs_bent_depth12(bent12):
    _, s = bent12
    assert len(np.unique(s.t)) >= 10_000
    r = np.abs(s.w)
    assert r.min() >= 0.5 and r.max() <= 2.0


def test_bent_curve_is_jordan(bent12):
    _, s = bent12
    curve = order_curve(s)
    assert crossing_count(curve) == 0


def test_equivariance_identity(orbit6):
    s = fixed_point_pairs(OCT, OCT, orbit6)
    assert equivariance_check(OCT, OCT, s) < 1e-12


def test_equivariance_conjugated(orbit6):
    conj = conjugate(OCT, DEFAULT_CONJUGATOR)
    s = fixed_point_pairs(OCT, conj, orbit6)
    assert equivariance_check(OCT, conj, s) <= 1e-8


def test_equivariance_bent(bent12):
    bent, s = bent12
    assert equivariance_check(OCT, bent, s, n_elements=500) <= 1e-6


def test_order_curve_circle_in_angular_order():
    rng = np.random.default_rng(1)
    t = rng.uniform(0, 2 * np.pi, 200)
    c = order_curve(_circle_samples(t))
    assert np.all(np.diff(c.t) > 0)
    assert order_violations(c, center=0) == 0
    assert crossing_count(c) == 0


@given(st.integers(0, 2**32 - 1))
def test_order_curve_shuffle_invariant(seed):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 2 * np.pi, 64))
    a = order_curve(_circle_samples(t))
    perm = rng.permutation(len(t))
    b = order_curve(_circle_samples(t[perm]))
    assert np.array_equal(a.points, b.points)


def test_order_curve_too_few():
    with pytest.raises(TooFew):
        order_curve(_circle_samples(np.linspace(0, 1, 5)))


def test_order_curve_drops_duplicates():
    t = np.r_[np.linspace(0, 6, 40), 3.0, 3.0]
    c = order_curve(_circle_samples(t))
    assert len(c) == 41


def test_max_gap_includes_wraparound():
    t = np.linspace(0, np.pi, 20)
    c = order_curve(_circle_samples(t))
    assert max_gap(c) == pytest.approx(np.pi)


def test_crossing_count_figure_eight():
    pts = np.array([0, 1 + 1j, 2, 1 - 1j, 0.5 + 0.2j, 0.2 - 0.5j, -0.3 + 0.4j], complex)
    c = CurvePolyline(np.array([0, 2 + 2j, 2, 0 + 2j]), np.arange(4.0))
    assert crossing_count(c) == 1
    assert crossing_count(CurvePolyline(pts[:4], np.arange(4.0))) == 0


def test_box_dimension_circle():
    t = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
    fit = box_dimension(np.exp(1j * t))
    assert 0.92 <= fit.dimension <= 1.08


def test_box_dimension_segment():
    x = np.linspace(0, 1, 10_000)
    assert box_dimension(x + 0j).dimension == pytest.approx(1.0, abs=0.05)


def test_box_dimension_needs_scales():
    z = np.exp(1j * np.linspace(0, 6, 2000))
    with pytest.raises(InsufficientScales):
        box_dimension(z, [0.1, 0.05, 0.02])
    with pytest.raises(InsufficientScales):
        box_dimension(z[:10])


def test_curve_box_dimension_circle():
    t = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    c = CurvePolyline(np.exp(1j * t), t)
    assert curve_box_dimension(c).dimension == pytest.approx(1.0, abs=0.03)


def test_samples_csv_roundtrip(tmp_path, orbit6):
    s = fixed_point_pairs(OCT, OCT, orbit6).take(slice(0, 100))
    path = tmp_path / "s.csv"
    write_samples_csv(path, s)
    r = read_samples_csv(path)
    assert np.array_equal(r.t, s.t)
    assert np.array_equal(r.w, s.w)
    assert np.array_equal(r.length, s.length)


def test_max_gap_shrinks_with_depth():
    gaps = [max_gap(order_curve(fixed_point_pairs(OCT, OCT, enumerate_orbit(OCT, d)))) for d in (2, 4, 6)]
    assert gaps[0] > gaps[1] > gaps[2]
