import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coneatoms import cones

CONES = ["halfline", "lorentz:3", "lorentz:4", "spd:2", "spd:3"]


def _points(cone, seed, size, radius=1.5):
    return cones.random_points(cone, np.random.default_rng(seed), size, radius)


@pytest.mark.parametrize(
    "spec, n, R",
    [("halfline", 1, 1), ("lorentz:3", 3, 2), ("lorentz:5", 5, 2), ("spd:2", 3, 2), ("spd:3", 6, 3)],
)
def test_descriptor_dimensions(spec, n, R):
    cone = cones.parse_cone(spec)
    assert (cone.n, cone.R) == (n, R)
    assert cone.n == cone.R + cone.peirce * cone.R * (cone.R - 1) // 2
    assert cones.det(cone, cone.e) == pytest.approx(1.0)
    assert str(cone) == spec


@pytest.mark.parametrize("bad", ["lorentz", "lorentz:2", "spd", "cube:3", "halfline:2", "", "lorentz:x"])
def test_parse_rejects_malformed(bad):
    with pytest.raises(ValueError):
        cones.parse_cone(bad)


def test_phi_e_closed_forms():
    # lorentz(m): V_{m-1} Gamma(m) with V the unit-ball volume
    assert cones.make_cone("lorentz", 3).phi_e == pytest.approx(2 * math.pi, rel=2e-3)
    vol3 = 4 * math.pi / 3
    assert cones.make_cone("lorentz", 4).phi_e == pytest.approx(vol3 * math.gamma(4), rel=3e-3)
    # spd(r) in orthonormal coordinates: 2^{r(r-1)/4} Gamma_Omega(n/R)
    for r in (2, 3):
        cone = cones.make_cone("spd", r)
        exact = 2 ** (r * (r - 1) / 4) * cones.gamma_cone_spd(r, cone.n_over_R)
        assert cone.phi_e == pytest.approx(exact, rel=3e-3)
    assert cones.make_cone("spd", 2).phi_e == pytest.approx(math.pi / math.sqrt(2), rel=1e-3)


def test_characteristic_homogeneity():
    cone = cones.parse_cone("lorentz:3")
    x = np.array([2.0, 0.5, -0.3])
    assert cones.characteristic(cone, 3 * x) == pytest.approx(
        3 ** (-cone.n) * cones.characteristic(cone, x)
    )


def test_spd_factorize_example():
    cone = cones.parse_cone("spd:2")
    y = cones.sym_to_vec(np.array([[4.0, 2.0], [2.0, 2.0]]))
    h = cones.factorize(cone, y)
    np.testing.assert_allclose(h.params["L"], [[2.0, 0.0], [1.0, 1.0]], atol=1e-14)
    assert h.abs_det == pytest.approx(8.0)
    np.testing.assert_allclose(h.act(cone.e), y, atol=1e-14)


@pytest.mark.parametrize("spec", CONES)
def test_factorize_maps_identity(spec):
    cone = cones.parse_cone(spec)
    for y in _points(cone, 1, 20):
        h = cones.factorize(cone, y)
        np.testing.assert_allclose(h.act(cone.e), y, rtol=1e-12, atol=1e-12)
        assert h.abs_det == pytest.approx(abs(np.linalg.det(h.matrix)), rel=1e-10)
        np.testing.assert_allclose(h.act_inverse(h.act(y)), y, rtol=1e-10)


@pytest.mark.parametrize("spec", CONES)
def test_determinant_relation(spec):
    cone = cones.parse_cone(spec)
    rng = np.random.default_rng(5)
    for _ in range(50):
        h = cones.random_group_element(cone, rng, 2.0)
        lhs = cones.det(cone, h.act(cone.e))
        assert lhs == pytest.approx(h.abs_det ** (cone.R / cone.n), rel=1e-10)


def test_factorize_outside_raises():
    cone = cones.parse_cone("lorentz:3")
    with pytest.raises(cones.OutsideConeError):
        cones.factorize(cone, np.array([1.0, 2.0, 0.0]))


@pytest.mark.parametrize("spec", CONES)
def test_distance_invariance(spec):
    cone = cones.parse_cone(spec)
    x, y = _points(cone, 2, 2)
    rng = np.random.default_rng(3)
    for _ in range(10):
        h = cones.random_group_element(cone, rng, 1.5)
        assert cones.distance(cone, h.act(x), h.act(y)) == pytest.approx(
            cones.distance(cone, x, y), rel=1e-9, abs=1e-12
        )
        # the transpose action preserves the cone and the metric too
        assert cones.distance(cone, h.act_transpose(x), h.act_transpose(y)) == pytest.approx(
            cones.distance(cone, x, y), rel=1e-9, abs=1e-12
        )


@pytest.mark.parametrize("spec", CONES)
def test_distance_metric_axioms(spec):
    cone = cones.parse_cone(spec)
    x, y, z = _points(cone, 4, 3)
    assert cones.distance(cone, x, x) == pytest.approx(0.0, abs=1e-7)
    assert cones.distance(cone, x, y) == pytest.approx(cones.distance(cone, y, x), rel=1e-10)
    assert cones.distance(cone, x, z) <= cones.distance(cone, x, y) + cones.distance(cone, y, z) + 1e-12


def test_halfline_distance_is_log_ratio():
    cone = cones.parse_cone("halfline")
    assert cones.distance(cone, np.array([2.0]), np.array([8.0])) == pytest.approx(math.log(4))


@pytest.mark.parametrize("spec", CONES)
def test_exp_log_and_tangent_basis(spec):
    cone = cones.parse_cone(spec)
    Q = cones.tangent_basis(cone)
    rng = np.random.default_rng(6)
    u = rng.standard_normal((30, cone.n))
    y = cones.exp_map(cone, u @ Q.T)
    np.testing.assert_allclose(cones.log_map(cone, y), u @ Q.T, atol=1e-10)
    np.testing.assert_allclose(cones.distance(cone, cone.e, y), np.linalg.norm(u, axis=1), rtol=1e-9)
    np.testing.assert_allclose(np.log(cones.det(cone, y)), math.sqrt(cone.R) * u[:, 0], atol=1e-10)


@pytest.mark.parametrize("spec", ["halfline", "lorentz:3", "spd:2"])
def test_exp_jacobian_matches_finite_differences(spec):
    cone = cones.parse_cone(spec)
    s = np.random.default_rng(8).standard_normal(cone.n) * 0.7
    eps = 1e-6
    J = np.empty((cone.n, cone.n))
    for k in range(cone.n):
        ds = np.zeros(cone.n)
        ds[k] = eps
        J[:, k] = (cones.exp_map(cone, s + ds) - cones.exp_map(cone, s - ds)) / (2 * eps)
    assert cones.exp_jacobian(cone, s) == pytest.approx(abs(np.linalg.det(J)), rel=1e-6)


def test_complex_det_and_branch():
    cone = cones.parse_cone("halfline")
    assert cones.det_complex(cone, np.array([2 + 1j])) == 2 + 1j
    with pytest.raises(cones.BranchAmbiguityError):
        cones.det_complex(cone, np.array([-1.0 + 0j]))
    lor = cones.parse_cone("lorentz:3")
    z = np.array([2.0 + 0.3j, 0.5 - 1j, 0.2 + 0.1j])
    assert np.exp(cones.log_det_complex(lor, z)) == pytest.approx(cones.det_complex(lor, z))


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(0.2, 5.0),
    b=st.floats(-20.0, 20.0),
)
def test_log_det_complex_is_continuous_branch(a, b):
    # on the half-line the continuous branch is the principal log of a + i b
    cone = cones.parse_cone("halfline")
    z = np.array([a + 1j * b])
    assert cones.log_det_complex(cone, z) == pytest.approx(np.log(a + 1j * b))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(CONES))
def test_relative_spectrum_product_is_det_ratio(seed, spec):
    cone = cones.parse_cone(spec)
    x, y = _points(cone, seed, 2, 2.0)
    mu = cones.relative_spectrum(cone, x, y)
    assert np.prod(mu) == pytest.approx(cones.det(cone, y) / cones.det(cone, x), rel=1e-8)


def test_ball_bounding_box_contains_ball_samples():
    cone = cones.parse_cone("lorentz:3")
    lo, hi = cones.ball_bounding_box(cone, 1.0)
    pts = _points(cone, 9, 2000, 1.0)
    assert np.all(pts >= lo - 0.05) and np.all(pts <= hi + 0.05)
