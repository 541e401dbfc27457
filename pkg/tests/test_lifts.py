import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polar_degree_lab import geometry as geo
from polar_degree_lab import lifts
from polar_degree_lab import maps as mp
from polar_degree_lab.errors import DegenerateTransversalDegree, OnPolarSphere


@pytest.fixture(scope="module")
def power2_report():
    return lifts.count_fixed_point_free_lifts(mp.power_s2(2), 0.1, d=2)


@pytest.fixture(scope="module")
def join_report():
    return lifts.count_fixed_point_free_lifts(mp.join_power(2, 3), 0.1, d=2)


def cover_points(rng, m, n, t_range=3.0, radius=0.9):
    u = rng.normal(size=(n, m - 1))
    u *= (radius * rng.random(n) ** (1.0 / (m - 1)) / np.linalg.norm(u, axis=1))[:, None]
    return np.column_stack([rng.uniform(-t_range, t_range, n), u])


@pytest.mark.parametrize("d", [2, 3, -2])
def test_lift_of_power_map_is_affine_in_t(d, rng):
    # z -> z^d lifts to (t, u) -> (d t, u-image) with the branch through the origin
    G = lifts.make_lift(mp.power_s2(d), 0, d)
    q = cover_points(rng, 2, 200)
    np.testing.assert_allclose(G(q)[:, 0], d * q[:, 0], atol=1e-9)


@pytest.mark.parametrize("f", [mp.power_s2(2), mp.power_s2(-2), mp.join_power(2, 3),
                               mp.join_power(-2, 3), mp.perturb(mp.power_s2(3), 0.05, 2)], ids=repr)
def test_deck_law_and_projection(f, rng):
    G = lifts.make_lift(f)
    q = cover_points(rng, f.m, 300)
    a = G(q)
    b = G(q + np.eye(f.m)[0])
    np.testing.assert_allclose(b[:, 0] - a[:, 0], G.d, atol=1e-9)
    np.testing.assert_allclose(b[:, 1:], a[:, 1:], atol=1e-12)
    down = f(geo.lift_to_sphere_arr(q[:, 0], q[:, 1:]))
    np.testing.assert_allclose(geo.lift_to_sphere_arr(a[:, 0], a[:, 1:]), down, atol=1e-9)


@settings(max_examples=25)
@given(st.integers(-5, 5), st.floats(-4, 4), st.floats(-0.9, 0.9))
def test_deck_power_commutes(k, t, u):
    G = lifts.make_lift(mp.power_s2(3), 0, 3)
    q = np.array([[t, u]])
    shifted = G.shifted(k)(q)
    np.testing.assert_allclose(shifted[0, 0], G(q)[0, 0] + k, atol=1e-12)
    # G(tau^j q) = tau^{d j} G(q)
    np.testing.assert_allclose(G(q + [2.0, 0.0])[0, 0], G(q)[0, 0] + 6.0, atol=1e-9)


def test_lift_rejects_polar_points():
    G = lifts.make_lift(mp.power_s2(2), 0, 2)
    with pytest.raises(OnPolarSphere):
        G(np.array([[0.0, 1.0]]))


def test_family_sizes():
    assert len(lifts.lift_family(mp.power_s2(2), 2)) == 1
    assert len(lifts.lift_family(mp.power_s2(3), 3)) == 2
    assert len(lifts.lift_family(mp.power_s2(-2), -2)) == 3
    with pytest.raises(DegenerateTransversalDegree):
        lifts.lift_family(mp.identity(2), 1)


def test_search_box_and_opposition():
    G = lifts.make_lift(mp.power_s2(2), 0, 2)
    box = lifts.choose_search_box(G, 0.1)
    assert box.half_length == 2
    lo_face, hi_face = lifts.end_face_margins(G, box)
    assert lo_face >= 0 and hi_face >= 0
    assert lifts.lift_opposition(G, box)


def test_box_chart_maps_onto_cylinder(rng):
    box = lifts.SearchBox(4.0, 0.1)
    s = rng.uniform(-1, 1, size=(500, 3))
    s[:, 0] *= 4.0
    q = lifts.box_chart(box, s)
    np.testing.assert_allclose(q[:, 0], s[:, 0])
    assert np.all(np.linalg.norm(q[:, 1:], axis=1) <= 0.9 + 1e-12)


@pytest.mark.parametrize("d", [2, 3, -2])
def test_power_lift_fixed_points(d):
    rep = lifts.count_fixed_point_free_lifts(mp.power_s2(d), 0.1, d=d)
    assert rep.family_size == abs(d - 1)
    assert rep.free_count == 0 and rep.verdict and rep.lower_bound_ok and rep.nielsen
    for s in rep.searches:
        assert s.certificate.degree != 0 and not s.inconsistent
        [r] = s.records
        assert abs(r.location.t - s.k / (1 - d)) < 1e-9
        assert abs(r.location.u[0]) < 1e-9


def test_records_are_fixed_downstairs(power2_report, join_report):
    for f, rep in ((mp.power_s2(2), power2_report), (mp.join_power(2, 3), join_report)):
        for s in rep.searches:
            for r in s.records:
                x = r.sphere_point.coords
                assert np.linalg.norm(f(x)[0] - x) < 1e-8


def test_join_lift(join_report):
    assert join_report.family_size == 1
    assert join_report.polar_fix_count == 2
    assert join_report.free_count <= join_report.bound == 4
    assert join_report.searches[0].certificate.degree == 3
    assert len(join_report.searches[0].records) == 3


def test_perturbed_lift_keeps_fixed_point(power2_report):
    rep = lifts.count_fixed_point_free_lifts(mp.perturb(mp.power_s2(2), 0.05, 0), 0.1, d=2, polar_fix_count=2)
    assert [bool(s.records) for s in rep.searches] == [bool(s.records) for s in power2_report.searches]


def test_nielsen_breach_is_detected():
    rep = lifts.count_fixed_point_free_lifts(mp.power_s2(3), 0.1, d=3)
    records = {s.k: list(s.records) for s in rep.searches}
    assert lifts.nielsen_check(records, 3)
    records[1].append(records[0][0])
    bad = lifts.nielsen_check(records, 3)
    assert not bad and bad.breaches[0][:2] == (0, 1)


def test_report_dict(power2_report):
    out = power2_report.as_dict()
    assert out["verdict"] == "pass" and out["bound"] == 4 and out["family_size"] == 1
    assert out["lifts"][0]["half_length"] == 2


def test_delta_range():
    G = lifts.make_lift(mp.power_s2(2), 0, 2)
    with pytest.raises(ValueError):
        lifts.choose_search_box(G, 0.5)
