import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polar_degree_lab import local
from polar_degree_lab import maps as mp
from polar_degree_lab.errors import NonSingularJacobian, NotAFixedPoint, NotC1, SpectralGapTooSmall


def unit_samples(n=1000, seed=0):
    th = np.random.default_rng(seed).uniform(0, 2 * math.pi, n)
    return np.column_stack([np.cos(th), np.sin(th)])


def max_ratio(norm, A, u):
    return float(np.max(norm(u @ A.T) / norm(u)))


def test_diagonal_norm():
    A = np.diag([0.0, 3.0])
    norm = local.adapted_norm(A, 3.1)
    assert norm.kind == "l1"
    assert max_ratio(norm, A, unit_samples()) <= 3.0 + 1e-12


def test_rotation_norm_is_conformal():
    A = 2.0 * np.array([[0.0, -1.0], [1.0, 0.0]])
    norm = local.adapted_norm(A, 2.1)
    assert norm.kind == "l2"
    ratios = norm(unit_samples() @ A.T) / norm(unit_samples())
    np.testing.assert_allclose(ratios, 2.0, atol=1e-12)


def test_jordan_norm():
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    norm = local.adapted_norm(A, 2.1)
    assert norm.scale == pytest.approx(20.0)
    # column of A e1 in the adapted basis: 1/K on the first vector, 2 on the second
    coeff = norm.coords((A @ norm.basis[:, 1])[None, :])[0]
    assert np.sum(np.abs(coeff)) == pytest.approx(2.05)
    assert max_ratio(norm, A, unit_samples()) < 2.1


def test_gap_too_small():
    with pytest.raises(SpectralGapTooSmall):
        local.adapted_norm(np.diag([0.0, 2.0]), 2.0)


@settings(max_examples=60)
@given(st.integers(0, 10 ** 6), st.floats(0.01, 1.0))
def test_adapted_norm_property(seed, gap):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2))
    if seed % 2:
        A = np.outer(rng.normal(size=2), rng.normal(size=2))
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    norm = local.adapted_norm(A, rho + gap)
    assert max_ratio(norm, A, unit_samples(seed=seed)) < rho + gap
    assert norm.operator_norm(A) < rho + gap


@given(st.floats(1.0, 20.0))
def test_aperture_monotone_and_compatible(lam):
    alphas = [local.cone_aperture(lam, e) for e in sorted(local.EPS_LADDER)]
    assert all(a < b for a, b in zip(alphas, alphas[1:]))
    eps = local.choose_eps(lam)
    assert 0 < eps < 0.5
    alpha = local.cone_aperture(lam, eps)
    assert 0 < alpha < (lam - 3 * eps) / (3 * eps)


def test_pole_of_power_map_is_attracting():
    f = mp.power_s2(2)
    for p in ([1.0], [-1.0]):
        cls = local.classify_fixed_point(f, p, d=2)
        assert cls.verdict == "AttractingNormal" and cls.rho < 1e-6
        assert cls.norm.c == pytest.approx(0.5 * (1 + cls.rho))
        rep = local.verify_sector_inequalities(f, p, cls)
        assert rep.ok and rep.delta == pytest.approx(0.2)


def test_sphere_point_accepted():
    cls = local.classify_fixed_point(mp.power_s2(3), np.array([0.0, 0.0, -1.0]))
    assert cls.verdict == "AttractingNormal"


def test_cone_model():
    f = mp.cone_model(2.0)
    cls = local.classify_fixed_point(f, [-1.0])
    assert cls.verdict == "ConeCase"
    assert cls.cone.lam == pytest.approx(2.0, abs=1e-6)
    assert cls.eps == 0.1 and cls.cone.alpha == pytest.approx(1.5, abs=1e-6)
    assert cls.projection_error < 1e-6
    assert abs(cls.cone.e0[0]) == pytest.approx(1.0, abs=1e-6)
    rep = local.verify_sector_inequalities(f, [-1.0], cls, seed=3)
    assert rep.ok and rep.n_checked > 0


@pytest.mark.parametrize("lam", [1.0, 5.0])
def test_cone_model_sector(lam):
    f = mp.cone_model(lam)
    cls = local.classify_fixed_point(f, [-1.0])
    assert cls.verdict == "ConeCase"
    assert local.verify_sector_inequalities(f, [-1.0], cls).ok


def test_verdict_stable_under_step_halving():
    for f, p in ((mp.power_s2(2), [1.0]), (mp.cone_model(2.0), [-1.0]), (mp.join_power(2, 3), [1.0, 0.0])):
        a = local.classify_fixed_point(f, p, h=1e-5)
        b = local.classify_fixed_point(f, p, h=5e-6)
        assert a.verdict == b.verdict


def test_join_fixed_points_are_attracting():
    f = mp.join_power(2, 3)
    for w in ([1.0, 0.0], [-1.0, 0.0]):
        cls = local.classify_fixed_point(f, w, d=2)
        assert cls.verdict == "AttractingNormal"
        assert abs(np.linalg.det(cls.jacobian.entries)) < 1e-6


def test_nonsingular_flag():
    with pytest.raises(NonSingularJacobian):
        local.classify_fixed_point(mp.identity(2), [1.0], d=2)


def test_not_a_fixed_point():
    with pytest.raises(NotAFixedPoint):
        local.classify_fixed_point(mp.join_power(2, 3), [0.0, 1.0])
    with pytest.raises(NotAFixedPoint):
        local.classify_fixed_point(mp.power_s2(2), np.array([0.6, 0.0, 0.8]))


def test_neighborhood_radius():
    f = mp.join_power(2, 3)
    cls = local.classify_fixed_point(f, [1.0, 0.0])
    assert local.neighborhood_radius(f, [1.0, 0.0], cls) == (0.2, 0.2)
    g = mp.perturb(f, 0.05, 1)
    cls = local.classify_fixed_point(g, [1.0, 0.0])
    delta, r = local.neighborhood_radius(g, [1.0, 0.0], cls)
    assert delta > 1e-4 and r > 0
    assert local.verify_sector_inequalities(g, [1.0, 0.0], cls).ok


def test_neighborhood_needs_c1():
    cls = local.classify_fixed_point(mp.power_s2(2), [1.0])
    with pytest.raises(NotC1):
        local.neighborhood_radius(mp.north_south(), [1.0], cls)


def test_failure_is_reported_not_raised():
    # the attracting class of a pole of z^2, checked against the antipodal map, which preserves norms
    cls = local.classify_fixed_point(mp.power_s2(2), [-1.0])
    rep = local.verify_sector_inequalities(mp.antipodal(2), [-1.0], cls, delta=0.1, mesh_radius=0.0)
    assert not rep.ok and rep.failures and rep.halvings == local.HALVING_CAP
