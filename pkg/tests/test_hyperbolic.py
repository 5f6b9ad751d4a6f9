import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from mobius_ot.errors import ValidationError
from mobius_ot.hyperbolic import (IDENTITY, DiskMobius, base_mobius, build_quadrature, disk_area,
                                  euclidean_radius, hyperbolic_distance, mobius_apply, mobius_compose,
                                  mobius_family, mobius_inverse)

disk_points = st.builds(lambda r, t: r * np.exp(1j * t), st.floats(0, 0.95), st.floats(0, 2 * np.pi))
unit = st.builds(lambda t: complex(np.exp(1j * t)), st.floats(0, 2 * np.pi))
mobius = st.builds(DiskMobius, disk_points, unit)


def radial_integral(g, R):
    """Hyperbolic-area integral of a radial function over the disk of radius R."""
    return 2 * np.pi * quad(lambda r: g(r) * r / (1 - r * r) ** 2, 0, np.tanh(R), epsabs=1e-13)[0]


def test_identity_and_validation():
    assert IDENTITY(0.3 + 0.2j) == pytest.approx(0.3 + 0.2j)
    with pytest.raises(ValidationError):
        DiskMobius(1.0, 1)
    with pytest.raises(ValidationError):
        DiskMobius(0.1, 2)


def test_mobius_apply_scalar_and_array():
    m = DiskMobius(0.5, 1j)
    assert isinstance(mobius_apply(m, 0.5), complex) and mobius_apply(m, 0.5) == 0
    z = np.array([0.0, 0.1j])
    assert mobius_apply(m, z).shape == (2,)


@settings(max_examples=50, deadline=None)
@given(mobius, disk_points)
def test_inverse_roundtrip(m, z):
    assert mobius_inverse(m)(m(z)) == pytest.approx(z, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(mobius, mobius, disk_points)
def test_compose_matches_sequential(m1, m2, z):
    assert mobius_compose(m1, m2)(z) == pytest.approx(m1(m2(z)), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(mobius, disk_points, disk_points)
def test_isometry(m, z, w):
    assert hyperbolic_distance(m(z), m(w)) == pytest.approx(hyperbolic_distance(z, w), rel=1e-7, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(mobius, disk_points)
def test_maps_disk_to_disk(m, z):
    assert abs(m(z)) < 1 + 1e-12
    assert abs(m(np.exp(1j * np.angle(z + 1e-3)))) == pytest.approx(1.0)


def test_derivative_matches_finite_difference():
    m = DiskMobius(0.3 - 0.4j, np.exp(0.7j))
    z, h = 0.2 + 0.1j, 1e-6
    fd = (m(z + h) - m(z - h)) / (2 * h)
    assert m.derivative(z) == pytest.approx(fd, rel=1e-8)


@settings(max_examples=50, deadline=None)
@given(disk_points, disk_points, unit, disk_points)
def test_family_factorization(z0, w0, sigma, u):
    m = mobius_family(z0, w0, sigma)
    assert m(z0) == pytest.approx(w0, abs=1e-9)
    lhs = m(base_mobius(z0)(u))
    rhs = base_mobius(w0)(sigma * u)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_family_members_are_distinct():
    ms = [mobius_family(0.2, -0.3j, np.exp(2j * np.pi * k / 8)) for k in range(8)]
    images = [m(0.5) for m in ms]
    assert len({round(x.real, 9) + 1j * round(x.imag, 9) for x in images}) == 8


def test_base_mobius_sends_zero():
    assert base_mobius(0.4 - 0.2j)(0) == pytest.approx(0.4 - 0.2j)


def test_roundtrip_dict():
    m = DiskMobius(0.1 + 0.2j, np.exp(1.1j))
    assert DiskMobius.from_dict(m.to_dict()) == m


def test_distance_examples():
    assert hyperbolic_distance(0, np.tanh(1.0)) == pytest.approx(1.0)
    assert hyperbolic_distance(0.3j, 0.3j) == 0
    assert euclidean_radius(1.0) == pytest.approx(0.7615941559557649)
    assert disk_area(1.0) == pytest.approx(np.pi * np.sinh(1.0) ** 2)
    # closed form agrees with direct integration
    assert radial_integral(lambda r: 1.0, 1.0) == pytest.approx(disk_area(1.0), rel=1e-10)


@pytest.mark.parametrize("R", [0.5, 1.0, 1.5])
def test_quadrature_weights_sum_to_area(R):
    g = build_quadrature(R, 100, seed=3)
    assert g.weights.sum() == pytest.approx(disk_area(R), rel=1e-12)
    assert (g.weights > 0).all()
    assert np.abs(g.centers).max() <= np.tanh(R)
    assert g.K == 100 and g.r_R == pytest.approx(np.tanh(R))


def test_quadrature_deterministic_and_seeded():
    a, b = build_quadrature(1.0, 50, seed=1), build_quadrature.__wrapped__(1.0, 50, seed=1)
    assert np.array_equal(a.centers, b.centers) and np.array_equal(a.weights, b.weights)
    c = build_quadrature(1.0, 50, seed=2)
    assert not np.array_equal(a.centers, c.centers)


def test_quadrature_is_roughly_uniform():
    g = build_quadrature(1.0, 300, seed=0)
    share = g.weights / g.weights.sum()
    assert share.max() < 5 / 300


@pytest.mark.parametrize("R", [0.5, 1.0, 1.5])
def test_quadrature_integrates_smooth_functions(R):
    g = build_quadrature(R, 300, seed=0)
    cases = [lambda r: (1 - r * r) ** 2, lambda r: r * r, lambda r: np.cos(3 * r)]
    for f in cases:
        exact = radial_integral(f, R)
        approx = g.integrate(lambda z: f(np.abs(z)))
        assert approx == pytest.approx(exact, rel=0.02)


def test_quadrature_rejects_bad_input():
    with pytest.raises(ValidationError):
        build_quadrature(0.0, 10)
    with pytest.raises(ValidationError):
        build_quadrature(1.0, 0)


def test_quadrature_json():
    import json

    g = build_quadrature(1.0, 20, seed=0)
    d = json.loads(g.to_json())
    assert d["R"] == 1.0 and len(d["centers"]) == 20
    assert np.allclose(d["weights"], g.weights)
