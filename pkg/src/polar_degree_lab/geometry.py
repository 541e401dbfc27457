"""Charts of S^m adapted to the polar sphere P and the cyclic cover of S - P.

Coordinates used throughout:

* ``P  = {x0 = x1 = 0}``, a copy of S^(m-2);
* ``P' = {x2 = ... = xm = 0}``, a great circle;
* product chart on S - P':  x -> (z, p) with z = (x0, x1) in D^2 and
  p = (x2, ..., xm) / |(x2, ..., xm)| in P;
* annular chart on S - P:   x -> (angle, u) with angle = (x0, x1) / |(x0, x1)|
  and u = (x2, ..., xm) in D^(m-1);
* cover of S - P:           (t, u) in R x D^(m-1), angle = exp(2 pi i t).

The cover coordinate t is measured in turns, so the deck generator is t -> t + 1.

The dataclasses are the public value types; the ``*_arr`` functions are the
vectorised kernels the numerical modules call on (N, m+1) batches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OnPolarSphere, OnPrimeSphere

MEMBERSHIP_TOL = 1e-12
TWO_PI = 2.0 * math.pi


def _as_vector(a) -> np.ndarray:
    v = np.array(a, dtype=float).reshape(-1)
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class SpherePoint:
    """A point of S^m in R^(m+1); renormalised on construction."""

    coords: np.ndarray

    def __post_init__(self):
        v = np.array(self.coords, dtype=float).reshape(-1)
        if v.size < 3:
            raise ValueError("SpherePoint needs dimension m >= 2")
        n = np.linalg.norm(v)
        if n == 0.0:
            raise ValueError("cannot normalise the zero vector")
        object.__setattr__(self, "coords", _as_vector(v / n))

    @property
    def m(self) -> int:
        return self.coords.size - 1

    def on_polar(self, tol: float = MEMBERSHIP_TOL) -> bool:
        return bool(np.hypot(self.coords[0], self.coords[1]) <= tol)

    def on_prime(self, tol: float = MEMBERSHIP_TOL) -> bool:
        return bool(np.linalg.norm(self.coords[2:]) <= tol)

    def __eq__(self, other):
        return isinstance(other, SpherePoint) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


@dataclass(frozen=True, eq=False)
class ChartPoint:
    """Product-chart coordinates (z in D^2, p in P = S^(m-2))."""

    z: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        z = _as_vector(self.z)
        p = np.array(self.p, dtype=float).reshape(-1)
        if z.size != 2:
            raise ValueError("z must be a 2-vector")
        if not np.linalg.norm(z) < 1.0:
            raise ValueError("z must lie in the open unit disk")
        pn = np.linalg.norm(p)
        if pn == 0.0:
            raise ValueError("p must be a unit vector")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "p", _as_vector(p / pn))


@dataclass(frozen=True, eq=False)
class AnnularPoint:
    """Annular-chart coordinates (angle in S^1, u in D^(m-1))."""

    angle: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        a = np.array(self.angle, dtype=float).reshape(-1)
        if a.size != 2 or np.linalg.norm(a) == 0.0:
            raise ValueError("angle must be a nonzero 2-vector")
        u = _as_vector(self.u)
        if not np.linalg.norm(u) < 1.0:
            raise ValueError("u must lie in the open unit disk")
        object.__setattr__(self, "angle", _as_vector(a / np.linalg.norm(a)))
        object.__setattr__(self, "u", u)

    @property
    def theta(self) -> float:
        return math.atan2(self.angle[1], self.angle[0])


@dataclass(frozen=True, eq=False)
class LiftPoint:
    """A point (t, u) of the cover R x D^(m-1); t is measured in turns."""

    t: float
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "u", _as_vector(self.u))

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.t], self.u])


# ---------------------------------------------------------------------------
# vectorised kernels

def normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def polar_distance_arr(x: np.ndarray) -> np.ndarray:
    """|(x0, x1)|, comparable to the geodesic distance to P near P."""
    x = np.asarray(x, dtype=float)
    return np.hypot(x[..., 0], x[..., 1])


def chart_to_sphere_arr(z: np.ndarray, p: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    p = p / np.linalg.norm(p, axis=-1, keepdims=True)
    n = max(z.shape[0], p.shape[0])
    z = np.broadcast_to(z, (n, 2))
    p = np.broadcast_to(p, (n, p.shape[1]))
    r2 = np.sum(z * z, axis=-1, keepdims=True)
    tail = np.sqrt(np.clip(1.0 - r2, 0.0, None)) * p
    return normalize_rows(np.concatenate([z, tail], axis=-1))


def sphere_to_chart_arr(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    tail = x[:, 2:]
    nt = np.linalg.norm(tail, axis=-1, keepdims=True)
    if np.any(nt <= MEMBERSHIP_TOL):
        raise OnPrimeSphere("point lies on P' (|(x2..xm)| <= 1e-12)")
    return x[:, :2].copy(), tail / nt


def sphere_to_annular_arr(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = polar_distance_arr(x)[:, None]
    if np.any(r <= MEMBERSHIP_TOL):
        raise OnPolarSphere("point lies on P (|(x0, x1)| <= 1e-12)")
    return x[:, :2] / r, x[:, 2:].copy()


def annular_to_sphere_arr(theta: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse of the annular chart; ``theta`` in radians."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    rho = np.sqrt(np.clip(1.0 - np.sum(u * u, axis=-1), 0.0, None))
    x = np.empty((theta.size, u.shape[1] + 2))
    x[:, 0] = rho * np.cos(theta)
    x[:, 1] = rho * np.sin(theta)
    x[:, 2:] = u
    return x


def lift_to_sphere_arr(t: np.ndarray, u: np.ndarray) -> np.ndarray:
    return annular_to_sphere_arr(TWO_PI * np.asarray(t, dtype=float), u)


def tangent_basis_arr(x: np.ndarray) -> np.ndarray:
    """Orthonormal bases of the tangent spaces, shape (N, m+1, m).

    Built from a Householder reflection exchanging e0 and +-x; the frame
    orientation det(x, T) is not fixed, callers that need it compute it.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, k = x.shape
    sign = np.where(x[:, 0] > 0.0, 1.0, -1.0)
    v = x.copy()
    v[:, 0] += sign
    vv = np.sum(v * v, axis=-1)
    h = np.broadcast_to(np.eye(k), (n, k, k)) - 2.0 * v[:, :, None] * v[:, None, :] / vv[:, None, None]
    return h[:, :, 1:]


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    h = 1.0 - 2.0 * i / n
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    r = np.sqrt(1.0 - h * h)
    return np.stack([r * np.cos(phi), r * np.sin(phi), h], axis=-1)


def sphere_seeds(m: int, n: int, seed: int = 0) -> np.ndarray:
    """Deterministic, well-spread seed points on S^m."""
    if m == 0:
        return np.array([[1.0], [-1.0]])
    if m == 1:
        th = TWO_PI * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if m == 2:
        return fibonacci_sphere(n)
    from scipy.stats import norm, qmc

    pts = qmc.Sobol(d=m + 1, scramble=True, seed=seed).random_base2(max(1, math.ceil(math.log2(n))))
    g = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    return normalize_rows(g)


# ---------------------------------------------------------------------------
# typed operations

def chart_to_sphere(c: ChartPoint) -> SpherePoint:
    return SpherePoint(chart_to_sphere_arr(c.z, c.p)[0])


def sphere_to_chart(x: SpherePoint) -> ChartPoint:
    z, p = sphere_to_chart_arr(x.coords)
    r = np.linalg.norm(z[0])
    if r >= 1.0:
        z = z * (1.0 - 1e-16) / r
    return ChartPoint(z[0], p[0])


def sphere_to_annular(x: SpherePoint) -> AnnularPoint:
    a, u = sphere_to_annular_arr(x.coords)
    return AnnularPoint(a[0], u[0])


def annular_to_sphere(a: AnnularPoint) -> SpherePoint:
    return SpherePoint(annular_to_sphere_arr(a.theta, a.u)[0])


def deck(k: int, q: LiftPoint) -> LiftPoint:
    return LiftPoint(q.t + int(k), q.u)


def project(q: LiftPoint) -> AnnularPoint:
    return AnnularPoint((math.cos(TWO_PI * q.t), math.sin(TWO_PI * q.t)), q.u)


def lift_point(a: AnnularPoint, branch: int = 0) -> LiftPoint:
    """The lift of ``a`` with t in [branch - 1/2, branch + 1/2)."""
    return LiftPoint(a.theta / TWO_PI + branch, a.u)
