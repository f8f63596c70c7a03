import numpy as np
import pytest
from hypothesis import given, strategies as st

from qftrace.errors import DegenerateDenominator, ValidationError
from qftrace.groups import bend, enumerate_orbit, octagon_fuchsian
from qftrace.measures import (
    STANDARD_TEST_FUNCTIONS,
    MeasureAtoms,
    geometricity_check,
    integrate,
    patterson_sullivan,
    read_atoms_csv,
    trace_vs_measure_report,
    write_atoms_csv,
)
from qftrace.mobius import MobiusElement, rotation
from qftrace.quantized import commutator_svd, fourier_coeffs, localized_trace

OCT = octagon_fuchsian()
CIRCLE = np.exp(1j * np.linspace(0, 2 * np.pi, 200))


@pytest.fixture(scope="module")
def baseline():
    orbit = enumerate_orbit(OCT, 10, prune=1e5)
    return patterson_sullivan(orbit, 1.0, limit_points=CIRCLE)


@pytest.fixture(scope="module")
def bent_orbit():
    return enumerate_orbit(bend(OCT, 0.3), 12, prune=1e5)


def test_mass_one(baseline):
    assert baseline.total == pytest.approx(1.0, abs=1e-12)
    assert integrate(baseline, lambda w: np.ones(np.shape(w))) == pytest.approx(1.0, abs=1e-12)


def test_baseline_centered(baseline):
    assert abs(integrate(baseline, lambda w: w)) <= 0.02


def test_baseline_half_plane(baseline):
    assert integrate(baseline, lambda w: (w.real > 0) * 1.0) == pytest.approx(0.5, abs=0.05)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_integrate_linear(a, b):
    nu = MeasureAtoms(np.array([0.2, 0.3, 0.5]), np.array([1, 1j, -1 + 0.5j]), 1.1, None)
    f, g = np.real, lambda w: np.abs(w) ** 2
    lhs = integrate(nu, lambda w: a * f(w) + b * g(w))
    assert lhs == pytest.approx(a * integrate(nu, f) + b * integrate(nu, g), abs=1e-12)


def test_atoms_lie_outside_disk(baseline):
    r = np.abs(baseline.points)
    heavy = baseline.weights > 1e-6 * baseline.weights.max()
    assert np.all(r[heavy] >= 1.0)


def test_s_offset_stability(bent_orbit):
    box = 1.2 * CIRCLE
    a = integrate(patterson_sullivan(bent_orbit, 1.008, s_offset=0.1, limit_points=box), np.real)
    b = integrate(patterson_sullivan(bent_orbit, 1.008, s_offset=0.05, limit_points=box), np.real)
    assert abs(a - b) < 0.05


def test_s_offset_range(baseline):
    orbit = enumerate_orbit(OCT, 2)
    with pytest.raises(ValidationError):
        patterson_sullivan(orbit, 1.0, s_offset=0.5)


def test_finite_base_point_weights():
    orbit = enumerate_orbit(OCT, 4)
    nu = patterson_sullivan(orbit, 1.0, z0=0.0)
    assert nu.total == pytest.approx(1.0)
    assert np.all(np.abs(nu.points) < 1)


def test_geometricity_identity(baseline):
    assert geometricity_check(baseline, MobiusElement.identity(), np.real) == 0.0


def test_geometricity_rotation_baseline(baseline):
    assert geometricity_check(baseline, rotation(np.pi / 4), np.real) <= 1e-3


def test_geometricity_generator_baseline(baseline):
    assert geometricity_check(baseline, OCT.primary(0), np.real) <= 0.1


def _self_measure(fd, p, M):
    """Atoms on the curve samples whose integrals reproduce the linear localized trace."""
    Zs = fd.samples()
    svd = commutator_svd(fd, M)
    e = np.eye(len(Zs))
    w = np.array([localized_trace(fd, e[j], p, M, method="compress", svd=svd).value for j in range(len(Zs))])
    return MeasureAtoms(w / w.sum(), Zs, p, None), w.sum()


def test_trace_measure_self_comparison():
    t = 2 * np.pi * np.arange(256) / 256
    rng = np.random.default_rng(4)
    z = np.exp(1j * t)
    for j in range(2, 32):
        z += 0.25 / j * np.exp(2j * np.pi * rng.uniform()) * np.exp(-1j * j * t)
    fd = fourier_coeffs(z)
    nu, total = _self_measure(fd, 1.0, 32)
    rep = trace_vs_measure_report(fd, nu, 1.0, M=32, method="compress")
    assert rep.spread < 1e-9
    assert rep.c1 == pytest.approx(total, rel=1e-9)
    assert rep.c1 > 0


def test_trace_measure_requires_constant():
    fd = fourier_coeffs(np.exp(2j * np.pi * np.arange(64) / 64))
    nu = MeasureAtoms(np.ones(3) / 3, np.array([1, 1j, -1]), 1.0, None)
    with pytest.raises(ValidationError):
        trace_vs_measure_report(fd, nu, 1.0, {"re": np.real}, M=8)


def test_trace_measure_zero_mass_constant():
    fd = fourier_coeffs(np.exp(2j * np.pi * np.arange(64) / 64))
    nu = MeasureAtoms(np.zeros(3), np.array([1, 1j, -1]), 1.0, None)
    with pytest.raises(DegenerateDenominator):
        trace_vs_measure_report(fd, nu, 1.0, {"one": STANDARD_TEST_FUNCTIONS["one"]}, M=8)


def test_atoms_csv_roundtrip(tmp_path, baseline):
    path = tmp_path / "a.csv"
    write_atoms_csv(path, baseline)
    back = read_atoms_csv(path)
    assert np.array_equal(back.weights, baseline.weights)
    assert np.array_equal(back.points, baseline.points)
