"""Independent reference computations used to cross-check the main algorithms.

Nothing here shares code with the degree, lift or census kernels: the box
degree is recomputed from dense boundary sampling, and the power-map degrees
from complex root counting.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np


def winding_degree_2d(field: Callable[[np.ndarray], np.ndarray], lo, hi, per_edge: int = 20_000) -> int:
    """Winding number of a planar field along the counter-clockwise boundary of a rectangle."""
    (x0, y0), (x1, y1) = lo, hi
    s = np.linspace(0.0, 1.0, per_edge, endpoint=False)
    edges = [
        np.column_stack([x0 + (x1 - x0) * s, np.full_like(s, y0)]),
        np.column_stack([np.full_like(s, x1), y0 + (y1 - y0) * s]),
        np.column_stack([x1 - (x1 - x0) * s, np.full_like(s, y1)]),
        np.column_stack([np.full_like(s, x0), y1 - (y1 - y0) * s]),
    ]
    pts = np.concatenate(edges + [edges[0][:1]])
    v = field(pts)
    ang = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
    return int(round((ang[-1] - ang[0]) / (2.0 * math.pi)))


def _solid_angle(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


def solid_angle_degree_3d(field: Callable[[np.ndarray], np.ndarray], lo, hi, per_face: int = 80) -> int:
    """Total signed solid angle swept by v/|v| over the box boundary, divided by 4 pi."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    g = np.linspace(0.0, 1.0, per_face + 1)
    total = 0.0
    for axis in range(3):
        a, b = [i for i in range(3) if i != axis]
        for side, normal in ((lo[axis], -1.0), (hi[axis], 1.0)):
            A, B = np.meshgrid(lo[a] + (hi[a] - lo[a]) * g, lo[b] + (hi[b] - lo[b]) * g, indexing="ij")
            pts = np.empty(A.shape + (3,))
            pts[..., axis] = side
            pts[..., a] = A
            pts[..., b] = B
            v = field(pts.reshape(-1, 3)).reshape(pts.shape)
            v = v / np.linalg.norm(v, axis=-1, keepdims=True)
            p00, p10 = v[:-1, :-1].reshape(-1, 3), v[1:, :-1].reshape(-1, 3)
            p01, p11 = v[:-1, 1:].reshape(-1, 3), v[1:, 1:].reshape(-1, 3)
            # (e_a, e_b, e_axis) orientation; flip so every face is oriented by its outward normal
            e = np.zeros((3, 3))
            e[0, a] = e[1, b] = e[2, axis] = 1.0
            sign = normal * np.sign(np.linalg.det(e))
            om = _solid_angle(p00, p10, p11) + _solid_angle(p00, p11, p01)
            total += sign * float(np.sum(om))
    return int(round(total / (4.0 * math.pi)))


def dense_box_degree(field, lo, hi) -> int:
    k = len(lo)
    if k == 2:
        return winding_degree_2d(field, lo, hi)
    if k == 3:
        return solid_angle_degree_3d(field, lo, hi)
    raise ValueError("dense oracle implemented for k = 2, 3")


def boundary_margin(field, lo, hi, per_axis: int = 41) -> float:
    """Smallest |v| over a dense boundary grid."""
    k = len(lo)
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(k)]
    mins = []
    for axis in range(k):
        others = [axes[i] for i in range(k) if i != axis]
        grid = np.stack(np.meshgrid(*others, indexing="ij"), axis=-1).reshape(-1, k - 1)
        for val in (lo[axis], hi[axis]):
            pts = np.insert(grid, axis, val, axis=1)
            mins.append(float(np.min(np.linalg.norm(field(pts), axis=1))))
    return min(mins)


def random_polynomial_field(k: int, seed: int):
    """v(x) = c + B x + Q(x, x) with Gaussian coefficients."""
    rng = np.random.default_rng(seed)
    c = 0.6 * rng.normal(size=k)
    B = rng.normal(size=(k, k))
    Q = 0.7 * rng.normal(size=(k, k, k))

    def v(x):
        x = np.atleast_2d(x)
        return c + x @ B.T + np.einsum("iab,na,nb->ni", Q, x, x)

    return v


def power_map_degrees(d: int) -> tuple[int, int, int]:
    """(deg, deg on the poles, transversal degree) of z -> z^d on the Riemann sphere.

    deg is the signed count of solutions of z^d = w0 for a generic w0, each
    counted with the sign of the real Jacobian |(z^d)'|^2 > 0; the poles are
    swapped exactly when d < 0; the transversal degree is the winding of z^d
    around 0 along the unit circle.
    """
    w0 = 0.37 + 0.21j
    e = abs(d)
    target = w0 if d > 0 else 1.0 / w0
    roots = np.roots([1.0] + [0.0] * (e - 1) + [-target])
    signs = [1 if abs(d * z ** (d - 1)) ** 2 > 0 else 0 for z in roots]
    deg = int(sum(signs))
    deg_polar = 1 if d > 0 else -1
    th = np.linspace(0.0, 2.0 * math.pi, 4001)
    img = np.exp(1j * th) ** d
    wind = int(round((np.unwrap(np.angle(img))[-1] - np.angle(img[0])) / (2.0 * math.pi)))
    return deg, deg_polar, wind
