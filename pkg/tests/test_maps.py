import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polar_degree_lab import geometry as geo
from polar_degree_lab import maps as mp
from polar_degree_lab.errors import ChartDomain, InvarianceViolated, NotC1, SpecError


def stereo(w):
    """Inverse stereographic projection, complex plane -> S^2 (south pole is w = 0)."""
    a2 = np.abs(w) ** 2
    return np.column_stack([2 * w.real, 2 * w.imag, a2 - 1]) / (1 + a2)[:, None]


def unstereo(x):
    return (x[:, 0] + 1j * x[:, 1]) / (1 - x[:, 2])


@pytest.mark.parametrize("d", [2, 3, -2, 5])
def test_power_s2_matches_complex_power(d, rng):
    w = rng.normal(size=200) + 1j * rng.normal(size=200)
    w = w[(np.abs(w) > 0.2) & (np.abs(w) < 5)]
    got = mp.power_s2(d)(stereo(w))
    np.testing.assert_allclose(got, stereo(w ** d), atol=1e-12)


def test_power_s2_fixes_one():
    x = stereo(np.array([1.0 + 0j]))
    y = mp.eval(mp.power_s2(2), geo.SpherePoint(x[0]))
    np.testing.assert_allclose(y.coords, x[0], atol=1e-14)


def test_power_s2_rejects_zero():
    with pytest.raises(SpecError):
        mp.power_s2(0)


@pytest.mark.parametrize("d, n, count", [(2, 1, 3), (2, 3, 9), (-2, 1, 3)])
def test_power_s2_fix_count_oracle(d, n, count):
    assert mp.power_s2(d).oracle.fix_count(n) == count


def test_power_s2_negative_swaps_poles():
    poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    np.testing.assert_allclose(mp.power_s2(-2)(poles), poles[::-1], atol=1e-15)
    np.testing.assert_allclose(mp.power_s2(2)(poles), poles, atol=1e-15)


def test_cone_model_fixes_south_pole():
    south = np.array([[0.0, 0.0, -1.0]])
    np.testing.assert_allclose(mp.cone_model(2.0)(south), south, atol=1e-15)


def test_identity_is_identity(rng):
    for m in (2, 3):
        x = geo.normalize_rows(rng.normal(size=(50, m + 1)))
        np.testing.assert_allclose(mp.identity(m)(x), x, atol=1e-15)


def test_antipodal(rng):
    x = geo.normalize_rows(rng.normal(size=(50, 4)))
    np.testing.assert_allclose(mp.antipodal(3)(x), -x, atol=1e-15)


@pytest.mark.parametrize("f", [mp.power_s2(2), mp.power_s2(-2), mp.power_s2(5), mp.join_power(2, 3),
                               mp.join_power(-2, 3), mp.identity(3), mp.antipodal(2), mp.cone_model(2.0),
                               mp.north_south(), mp.perturb(mp.join_power(2, 3), 0.05, 3)],
                         ids=repr)
def test_builtin_families_preserve_polar_sphere(f, rng):
    assert mp.validate_invariance(f, n_samples=300).ok
    x = geo.normalize_rows(rng.normal(size=(100, f.m + 1)))
    y = f(x)
    np.testing.assert_allclose(np.linalg.norm(y, axis=1), 1.0, atol=1e-12)


def test_invariance_detects_translation_of_polar_sphere():
    c, s = math.cos(0.3), math.sin(0.3)
    rot = np.array([[c, 0, -s], [0, 1, 0], [s, 0, c]])
    f = mp.SphereMap(2, lambda x: x @ rot.T, name="tilt")
    rep = mp.validate_invariance(f)
    assert not rep.ok and rep.polar_violations
    with pytest.raises(InvarianceViolated):
        mp.restrict_to_polar(f)


def test_join_power_restriction_is_cube_on_circle():
    g = mp.restrict_to_polar(mp.join_power(2, 3))
    th = np.linspace(0, 2 * np.pi, 17)
    p = np.column_stack([np.cos(th), np.sin(th)])
    np.testing.assert_allclose(g(p), np.column_stack([np.cos(3 * th), np.sin(3 * th)]), atol=1e-12)


def test_restriction_on_zero_sphere():
    pts = np.array([[1.0], [-1.0]])
    np.testing.assert_allclose(mp.restrict_to_polar(mp.power_s2(2))(pts), pts)
    np.testing.assert_allclose(mp.restrict_to_polar(mp.power_s2(-2))(pts), -pts)


def test_join_power_fix_polar_oracle():
    f = mp.join_power(2, 3)
    assert f.oracle.fix_polar_count(1) == 2
    assert mp.join_power(-2, 3).oracle.fix_count is None


def test_perturb_zero_amplitude_is_exact(rng):
    base = mp.power_s2(2)
    x = geo.normalize_rows(rng.normal(size=(100, 3)))
    np.testing.assert_array_equal(mp.perturb(base, 0.0, 4)(x), base(x))


def test_perturb_rejects_large_amplitude():
    with pytest.raises(SpecError):
        mp.perturb(mp.power_s2(2), 0.5, 0)


def test_perturb_keeps_polar_sphere_pointwise():
    base = mp.join_power(2, 3)
    th = np.linspace(0, 2 * np.pi, 40)
    x = np.column_stack([np.zeros(40), np.zeros(40), np.cos(th), np.sin(th)])
    np.testing.assert_allclose(mp.perturb(base, 0.09, 7)(x), base(x), atol=1e-15)


def test_iterate(rng):
    f = mp.join_power(2, 3)
    x = geo.normalize_rows(rng.normal(size=(30, 4)))
    np.testing.assert_allclose(mp.iterate(f, 1)(x), f(x), atol=1e-15)
    np.testing.assert_allclose(mp.iterate(f, 3)(x), f(f(f(x))), atol=1e-12)
    assert mp.iterate(mp.power_s2(2), 3).oracle.fix_count(1) == 9


def test_normal_component_at_pole_is_quadratic():
    # z^2 at the south pole: f_p(u) = u^2 in the disk, so A_p = 0
    nc = mp.normal_component(mp.power_s2(2), [-1.0])
    np.testing.assert_allclose(nc(np.zeros((1, 2))), 0.0, atol=1e-15)
    np.testing.assert_allclose(mp.jacobian(nc).entries, 0.0, atol=1e-8)
    with pytest.raises(ChartDomain):
        mp.normal_component(mp.power_s2(2), [-1.0], s=1.0)


def test_join_normal_block_is_singular():
    p = [math.cos(math.pi), math.sin(math.pi)]
    A = mp.jacobian(mp.normal_component(mp.join_power(2, 3), p)).entries
    assert abs(np.linalg.det(A)) < 1e-6


def test_jacobian_identity_and_richardson():
    J = mp.jacobian(mp.identity(3), np.array([0.3, 0.4, 0.5, math.sqrt(0.5)]))
    np.testing.assert_allclose(J.entries, np.eye(3), atol=1e-8)
    assert J.richardson_ok


def test_jacobian_block_triangular_at_join_fixed_point():
    x = np.array([0.0, 0.0, 1.0, 0.0])  # w = 1 is fixed by w^3
    J = mp.jacobian(mp.join_power(2, 3), x, h=1e-5).entries
    assert np.max(np.abs(J[:2, 2:])) < 1e-6


def test_jacobian_refuses_c0_map():
    with pytest.raises(NotC1):
        mp.jacobian(mp.north_south(), np.array([0.6, 0.0, 0.8]))


# --- spec grammar ---------------------------------------------------------

@given(st.integers(-9, 9).filter(lambda v: v != 0), st.integers(-9, 9).filter(lambda v: v != 0))
def test_spec_round_trip(a, b):
    f = mp.build_map(f"family=join_power b={b} a={a}")
    g = mp.build_map(f.spec)
    assert g.spec == f.spec
    x = np.array([[0.6, 0.0, 0.0, 0.8], [0.0, 0.28, 0.96, 0.0]])
    np.testing.assert_array_equal(f(x), g(x))


def test_nested_spec():
    f = mp.build_map("family=perturbed base='family=power_s2 d=2' amplitude=0.05 seed=3")
    assert mp.build_map(f.spec).spec == f.spec
    g = mp.build_map("family=iterate base='family=power_s2 d=3' n=2")
    assert g.oracle.transversal == 9


@pytest.mark.parametrize("text", ["d=2", "family=power_s2 d", "family=power_s2 d=2 d=3",
                                  "family=power_s2 d='2", "family=nosuch", "family=power_s2 d=2 e=1",
                                  "family=power_s2 d=two", "family=cone_model lam=x", "family=power_s2",
                                  "family=identity m=1"])
def test_bad_specs(text):
    with pytest.raises(SpecError):
        mp.build_map(text)
