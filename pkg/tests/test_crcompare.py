import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coneatoms import cones, crcompare

SPECS = ["halfline", "lorentz:3", "lorentz:7", "spd:2", "spd:4"]


@pytest.mark.parametrize(
    "spec, eps, gamma",
    [("halfline", 0.5, 0.0), ("lorentz:3", 1 / 3, 1 / 6), ("spd:2", 1 / 3, 1 / 6)],
)
def test_constants(spec, eps, gamma):
    k = crcompare.constants(cones.parse_cone(spec))
    assert k.eps == pytest.approx(eps) and k.gamma == pytest.approx(gamma)
    assert k.eps + k.gamma == 0.5


def test_nu_r_dictionary():
    lor = cones.parse_cone("lorentz:3")
    assert crcompare.nu_to_r(lor, 1.5) == 0.0
    assert crcompare.nu_to_r(lor, 2.0) == pytest.approx(1 / 6)


@given(st.sampled_from(SPECS), st.floats(-50, 50))
def test_nu_r_inverse(spec, nu):
    cone = cones.parse_cone(spec)
    assert crcompare.r_to_nu(cone, crcompare.nu_to_r(cone, nu)) == pytest.approx(nu, abs=1e-9)


@pytest.mark.parametrize(
    "spec, p, ours, cr",
    [
        ("lorentz:3", 2.0, -1 / 3, -1 / 6),
        ("halfline", 2.0, -0.5, -0.5),
        ("halfline", 3.0, None, 0.0),
    ],
)
def test_threshold_examples(spec, p, ours, cr):
    cone = cones.parse_cone(spec)
    if ours is not None:
        assert crcompare.our_threshold(cone, p) == pytest.approx(ours)
    assert crcompare.cr_threshold(cone, p) == pytest.approx(cr)


@pytest.mark.parametrize("spec", SPECS)
def test_threshold_at_p1_is_minus_eps(spec):
    cone = cones.parse_cone(spec)
    assert crcompare.our_threshold(cone, 1.0) == pytest.approx(-crcompare.constants(cone).eps)


@given(st.sampled_from(SPECS), st.floats(1.0, 50.0))
def test_dominance(spec, p):
    cone = cones.parse_cone(spec)
    assert crcompare.our_threshold(cone, p) <= crcompare.cr_threshold(cone, p) + 1e-12


def test_compare_reports():
    lor = cones.parse_cone("lorentz:3")
    (r,) = crcompare.compare(lor, [2.0])
    assert (r.r_ours, r.r_cr, r.dominates) == (pytest.approx(-1 / 3), pytest.approx(-1 / 6), True)
    assert r.nu_ours == pytest.approx(crcompare.r_to_nu(lor, -1 / 3))
    reps = crcompare.compare(lor)
    assert [x.p for x in reps] == list(np.arange(1.0, 4.01, 0.25))
    assert all(x.dominates for x in reps)
    assert crcompare.compare(lor, []) == []
    with pytest.raises(ValueError):
        crcompare.compare(lor, [0.5])


def test_compare_csv(tmp_path):
    path = tmp_path / "c.csv"
    crcompare.write_compare_csv(crcompare.compare(cones.parse_cone("halfline"), [2.0]), path,
                                "# config_hash=1")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=1"
    rows = list(csv.DictReader(lines[1:]))
    assert rows[0]["r_ours"] == rows[0]["r_cr"] == "-0.5" and rows[0]["dominates"] == "true"
