import math
import warnings

import numpy as np
import pytest

from coneatoms import cones, lattice, pipeline, spectral, tube
from coneatoms.besov import ParamSet


@pytest.fixture(scope="module")
def halfline_f():
    grid = spectral.FrequencyGrid.from_box([0.0], [4.0], 4096)
    return spectral.GridFunction(grid, spectrum=spectral.interval_indicator(grid, 1.0, 2.0))


@pytest.fixture(scope="module")
def lorentz_f():
    cone = cones.parse_cone("lorentz:3")
    grid = pipeline.auto_grid(cone, 1.5, 32)
    f = pipeline.sample_function(cone, grid, np.random.default_rng(5), shift=1.0)
    return cone, f


HALF = cones.parse_cone("halfline")


def test_closed_form_at_unit_height(halfline_f):
    g = tube.extend(halfline_f, np.array([1.0]), HALF)
    o = halfline_f.grid.N // 2
    val = g.samples[o].real / tube.transform_constant(1)
    assert val == pytest.approx(math.exp(-1) - math.exp(-2), rel=1e-6)


def test_extend_linear(halfline_f):
    y = np.array([0.5])
    g = spectral.GridFunction(halfline_f.grid, spectrum=halfline_f.spectrum * np.exp(
        -1j * halfline_f.grid.freq_axes()[0]))
    lhs = tube.extend(halfline_f + g, y, HALF)
    rhs = tube.extend(halfline_f, y, HALF) + tube.extend(g, y, HALF)
    assert (lhs - rhs).norm(2) <= 1e-14 * lhs.norm(2)


def test_extend_errors():
    grid = spectral.FrequencyGrid(1, 256, [4.0], [0.0])
    f = spectral.GridFunction(grid, spectrum=spectral.bump(grid.freq_axes()[0]))
    with pytest.raises(tube.ExtensionError):
        tube.extend(f, np.array([1.0]), HALF)
    with pytest.raises(cones.OutsideConeError):
        tube.extend(f, np.array([-1.0]), HALF)


def test_damping_plancherel_and_decay(lorentz_f):
    cone, f = lorentz_f
    w = f.grid.frequencies().reshape(-1, 3)
    mag = np.abs(f.spectrum.reshape(-1)) ** 2
    norms = []
    for t in (0.05, 0.2, 0.5, 1.0, 2.0):
        g = tube.extend(f, t * cone.e, cone)
        want = float(np.sum(mag * np.exp(-2 * t * (w @ cone.e)))) * f.grid.cell_w
        assert g.norm(2) ** 2 == pytest.approx(want, rel=1e-8)
        norms.append(g.norm(2))
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_semigroup(lorentz_f):
    cone, f = lorentz_f
    y1 = cones.exp_map(cone, np.array([0.2, 0.3, -0.1]))
    y2 = cones.exp_map(cone, np.array([-0.5, 0.1, 0.4]))
    two = tube.extend(tube.extend(f, y1, cone), y2, cone)
    one = tube.extend(f, y1 + y2, cone)
    assert (two - one).norm(2) <= 1e-8 * one.norm(2)


def test_extend_full_matches_extend_on_interior(lorentz_f):
    cone, f = lorentz_f
    lat = lattice.build_lattice(cone, 0.25, 2.0, lattice.Region.ball(0.75), covering_probes=0)
    part = spectral.build_partition(cone, lat, f.grid)
    support = np.abs(f.spectrum) > 0
    assert np.all(part.interior_mask[support])
    tg = tube.log_radial_heights(cone, f.grid, (-2.0, 1.0), 1.0, 0.5, 3)
    F = tube.extend_full(f, tg, part, ParamSet(2, 2, 2))
    for k in (0, len(tg) // 2, len(tg) - 1):
        g = tube.extend(f, tg.heights[k], cone)
        assert (F.at(k) - g).norm(2) <= 1e-12 * max(g.norm(2), 1e-300)
    Z = tube.extend_full(spectral.GridFunction.zeros(f.grid), tg)
    assert tube.bergman_norm(Z, ParamSet(2, 2, 2)) == 0.0


def test_extend_full_gate():
    cone = cones.parse_cone("spd:3")
    grid = spectral.FrequencyGrid(6, 4, 1.0, 2.0)
    tg = tube.log_radial_heights(cone, grid, (-1.0, 1.0), 1.0, 0.5, 2)
    f = spectral.GridFunction.zeros(grid)
    # q~ = 4 for spd:3, p = 4, nu = 1
    with pytest.raises(tube.GateError):
        tube.extend_full(f, tg, params=ParamSet(4, 5, 1))


def test_restrict_inverts_extend(lorentz_f):
    cone, f = lorentz_f
    y = cones.exp_map(cone, np.array([-0.3, 0.2, 0.1]))
    back = tube.restrict(tube.extend(f, y, cone), y, cone)
    assert (back - f).norm(2) <= 1e-9 * f.norm(2)
    zero = spectral.GridFunction.zeros(f.grid)
    assert tube.restrict(zero, y, cone).spectral_norm() == 0.0


def test_restrict_cap_violation():
    cone = cones.parse_cone("lorentz:3")
    grid = spectral.FrequencyGrid(3, 32, 4.0, [10.0, 8.0, 0.0])
    w = grid.frequencies().reshape(-1, 3)
    # spectrum hugging the boundary ray through (1, 1, 0)
    target = np.array([10.0, 9.8, 0.0])
    spec = spectral.bump(np.linalg.norm(w - target, axis=1) / 1.0)
    spec[~cones.contains(cone, w)] = 0
    f = spectral.GridFunction(grid, spectrum=spec.reshape(grid.shape))
    g = tube.extend(f, cone.e, cone)
    with pytest.raises(tube.ExtensionError):
        tube.restrict(g, cone.e, cone, amplification_cap=1e3)
    # with the default cap the inversion goes through
    assert (tube.restrict(g, cone.e, cone) - f).norm(2) <= 1e-9 * f.norm(2)


def test_bergman_norm_paths_agree(lorentz_f):
    cone, f = lorentz_f
    tg = tube.log_radial_heights(cone, f.grid, (-2.0, 1.0), 0.5, 0.5, 3)
    F = tube.extend_full(f, tg)
    S = tube.TubeFunction(tg, samples=[F.samples(k) for k in range(len(tg))])
    for ps in (ParamSet(2, 2, 2), ParamSet(2, 3, 1.5)):
        assert tube.bergman_norm(S, ps) == pytest.approx(tube.bergman_norm(F, ps), rel=1e-10)
    ps = ParamSet(3, 2, 2)
    assert tube.bergman_norm(2 * F, ps) == pytest.approx(2 * tube.bergman_norm(F, ps))


def test_tube_grid_validation():
    cone = cones.parse_cone("lorentz:3")
    with pytest.raises(cones.OutsideConeError):
        tube.TubeGrid(cone, None, np.array([[1.0, 2.0, 0.0]]), np.array([1.0]))
    with pytest.raises(ValueError):
        tube.TubeGrid(cone, None, np.array([[1.0, 0.0, 0.0]]), np.array([0.0]))


def test_log_radial_weights_integrate_exponential():
    # int_Omega exp(-<e, y>) dy = phi(e) on every cone
    for spec, ang in (("halfline", (0.0, 1)), ("lorentz:3", (6.0, 61)), ("spd:2", (6.0, 61))):
        cone = cones.parse_cone(spec)
        tg = tube.log_radial_heights(cone, None, (-14.0, 5.0), 0.05, *ang)
        got = float(np.sum(tg.weights * np.exp(-(tg.heights @ cone.e))))
        assert got == pytest.approx(cone.phi_e, rel=5e-3)


# -- kernel --------------------------------------------------------------------


def test_halfline_kernel_classical():
    c = 1 / math.pi
    assert tube.bergman_kernel(HALF, np.array([1j]), np.array([1j]), c) == pytest.approx(
        1 / (4 * math.pi)
    )
    rng = np.random.default_rng(1)
    for _ in range(20):
        z = rng.standard_normal() + 1j * rng.uniform(0.1, 3)
        w = rng.standard_normal() + 1j * rng.uniform(0.1, 3)
        want = -1 / (math.pi * (z - np.conj(w)) ** 2)
        assert tube.bergman_kernel(HALF, np.array([z]), np.array([w]), c) == pytest.approx(want)


@pytest.mark.parametrize("spec", ["halfline", "lorentz:3", "spd:2"])
def test_kernel_symmetry_and_dilation(spec):
    cone = cones.parse_cone(spec)
    rng = np.random.default_rng(2)
    for _ in range(10):
        z = rng.standard_normal(cone.n) + 1j * cones.random_points(cone, rng, 1, 1.0)[0]
        w = rng.standard_normal(cone.n) + 1j * cones.random_points(cone, rng, 1, 1.0)[0]
        bzw = tube.bergman_kernel(cone, z, w, 1.0)
        assert bzw == pytest.approx(np.conj(tube.bergman_kernel(cone, w, z, 1.0)), rel=1e-10)
        t = 1.7
        assert tube.bergman_kernel(cone, t * z, t * w, 1.0) == pytest.approx(
            t ** (-2 * cone.n) * bzw, rel=1e-10
        )


def test_kernel_rejects_points_outside_tube():
    with pytest.raises(cones.OutsideConeError):
        tube.bergman_kernel(HALF, np.array([1 - 1j]), np.array([1j]), 1.0)


@pytest.mark.parametrize(
    "spec, exact, rel",
    [("halfline", 1 / math.pi, 1e-8), ("lorentz:3", 24 / math.pi**3, 5e-3),
     ("spd:2", 3 / math.pi**3, 5e-3)],
)
def test_kernel_constant_closed_forms(spec, exact, rel):
    assert tube.calibrate_kernel_constant(cones.parse_cone(spec)) == pytest.approx(exact, rel=rel)


def test_kernel_constant_direct_quadrature():
    c = tube.calibrate_kernel_constant(HALF, method="direct")
    assert c == pytest.approx(1 / math.pi, rel=0.02)
    with pytest.raises(ValueError):
        tube.calibrate_kernel_constant(HALF, method="guess")


def test_reproducing_property_halfline():
    tg = tube._default_tube_grid(HALF)
    c = 1 / math.pi
    z = np.array([0.3 + 1.5j])
    got = tube.reproduce(lambda w: (w[..., 0] + 2j) ** -3, z, tg, c)
    assert got == pytest.approx((z[0] + 2j) ** -3, rel=0.01)


# -- Coifman-Rochberg atoms ------------------------------------------------------


def test_cr_atom_example():
    val = tube.cr_atom(HALF, np.array([2j]), np.array([1j]), 0.0, 0.0, 2.0, c=1 / math.pi)
    assert val == pytest.approx(2 / (9 * math.sqrt(math.pi)), rel=1e-12)


def test_cr_atom_at_base_point():
    cone = cones.parse_cone("lorentz:3")
    xi = np.array([0.3, -0.2, 0.1]) + 1j * cone.e
    c = tube.calibrate_kernel_constant(cone)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        val = tube.cr_atom(cone, xi, xi, 0.5, 2.0, 2.0)
    bxx = tube.bergman_kernel(cone, xi, xi, c)
    assert val == pytest.approx(bxx ** (1.5 / 2), rel=1e-12)


def test_cr_atom_validity_warning():
    with pytest.warns(tube.CRValidityWarning):
        tube.cr_atom(HALF, np.array([2j]), np.array([1j]), 0.0, -5.0, 2.0, c=1 / math.pi)


def test_dump_tube(tmp_path, halfline_f):
    tg = tube.log_radial_heights(HALF, halfline_f.grid, (-1.0, 1.0), 1.0)
    F = tube.extend_full(halfline_f, tg)
    tube.dump_tube(F, tmp_path, "# config_hash=0123", heights=[0])
    files = sorted(p.name for p in tmp_path.iterdir())
    assert "tube_meta.json" in files and len(files) == 2
    csv_name = next(n for n in files if n.endswith(".csv"))
    assert (tmp_path / csv_name).read_text().splitlines()[0] == "# config_hash=0123"
