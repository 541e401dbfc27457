import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polar_degree_lab import geometry as geo
from polar_degree_lab import maps as mp
from polar_degree_lab.errors import ContinuumSuspected
from polar_degree_lab.fixedpoints import (chunked, circle_degree, circle_fixed_points, cluster,
                                          find_sphere_roots, newton_rn, polar_fixed_points, sort_rows,
                                          sphere_newton)


def circle_power(k):
    def g(p):
        z = (p[:, 0] + 1j * p[:, 1]) ** k
        return np.column_stack([z.real, z.imag])
    return g


@pytest.mark.parametrize("k", [2, 3, 4, -2, -3])
def test_circle_fixed_points_of_powers(k):
    # w^k = w on the unit circle: |k - 1| roots of unity
    roots = circle_fixed_points(circle_power(k))
    assert len(roots) == abs(k - 1)
    want = sorted((2 * math.pi * j / (k - 1)) % (2 * math.pi) for j in range(abs(k - 1)))
    np.testing.assert_allclose(roots, want, atol=1e-9)
    assert circle_degree(circle_power(k)) == k


def test_circle_identity_is_continuum():
    with pytest.raises(ContinuumSuspected):
        circle_fixed_points(lambda p: p)


def test_zero_sphere():
    assert polar_fixed_points(mp.restrict_to_polar(mp.power_s2(3))) == [1, -1]
    assert polar_fixed_points(mp.restrict_to_polar(mp.power_s2(-3))) == []


def test_sphere_newton_converges_to_fixed_point():
    f = mp.power_s2(2)
    x0 = np.array([[0.9, 0.1, 0.1]])
    res = sphere_newton(lambda x: f(x) - x, x0)
    assert res.converged[0]
    np.testing.assert_allclose(res.x[0], [1.0, 0.0, 0.0], atol=1e-10)


def test_find_sphere_roots_counts_fixed_points():
    f = mp.power_s2(3)
    roots = find_sphere_roots(lambda x: f(x) - x, geo.sphere_seeds(2, 4000, 1))
    assert len(roots) == 4
    assert all(r.multiplicity == "isolated" for r in roots)


def test_preimage_signs():
    f = mp.power_s2(2)
    y = geo.normalize_rows(np.array([[0.3, -0.5, 0.2]]))[0]
    roots = find_sphere_roots(lambda x: f(x) - y, geo.sphere_seeds(2, 4000, 2), orientation_target=y)
    assert [r.local_sign for r in roots] == [1, 1]
    g = mp.antipodal(2)
    roots = find_sphere_roots(lambda x: g(x) - y, geo.sphere_seeds(2, 2000, 2), orientation_target=y)
    assert [r.local_sign for r in roots] == [-1]


@given(st.integers(1, 30), st.integers(0, 1000))
def test_cluster_merges_duplicates(n, seed):
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n, 3))
    pts = np.concatenate([base, base + 1e-10 * rng.normal(size=base.shape)])
    reps, sizes = cluster(pts, radius=1e-7)
    assert sizes.sum() == 2 * n
    assert len(reps) == len(np.unique(np.round(base, 6), axis=0))


def test_cluster_order_is_canonical(rng):
    pts = rng.normal(size=(20, 2))
    a, _ = cluster(pts)
    perm = rng.permutation(20)
    b, _ = cluster(pts[perm])
    np.testing.assert_array_equal(pts[a], pts[perm][b])


def test_chunked_preserves_order():
    x = np.arange(10000.0)[:, None]
    out = chunked(lambda c: c.sum(), x, jobs=3, chunk=1000)
    assert out == [float(x[i:i + 1000].sum()) for i in range(0, 10000, 1000)]


def test_newton_rn_and_sort_rows():
    res = newton_rn(lambda x: x ** 2 - 2.0, np.array([[1.0], [-3.0]]))
    np.testing.assert_allclose(res.x[:, 0], [math.sqrt(2), -math.sqrt(2)], atol=1e-12)
    assert sort_rows([np.array([1.0, 0.0]), np.array([-1.0, 2.0])]) == [1, 0]
