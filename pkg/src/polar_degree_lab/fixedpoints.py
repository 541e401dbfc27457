"""Multi-start Newton solvers on spheres and circles, deduplication, chunked parallelism.

Shared by the degree module (preimages of regular values), the census
(fixed points of f^n and of f^n|P) and the lift searches.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import geometry as geo
from .errors import ContinuumSuspected, SamplingCapExceeded

NEWTON_TOL = 1e-12
DEDUP_RADIUS = 1e-7
FD_STEP = 1e-7
CONTINUUM_LIMITS = 1000
DEGENERATE_SIGMA = 1e-6


def chunked(fn: Callable[[np.ndarray], tuple], x: np.ndarray, jobs: int = 1, chunk: int = 4096) -> list:
    """Apply ``fn`` to row chunks of ``x``; results come back in chunk order."""
    pieces = [x[i:i + chunk] for i in range(0, len(x), chunk)] or [x[:0]]
    if jobs <= 1 or len(pieces) == 1:
        return [fn(p) for p in pieces]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, pieces))


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: np.ndarray
    converged: np.ndarray


def tangent_jacobian(residual: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                     h: float = FD_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Ambient derivative of ``residual`` along an orthonormal tangent frame.

    Returns (J, T) with J of shape (N, m+1, m) and T the frame.
    """
    n, k = x.shape
    t = geo.tangent_basis_arr(x)
    m = k - 1
    probes = np.concatenate([x[:, None, :] + h * np.swapaxes(t, 1, 2), x[:, None, :] - h * np.swapaxes(t, 1, 2)], axis=1)
    probes = geo.normalize_rows(probes.reshape(-1, k))
    r = residual(probes).reshape(n, 2 * m, k)
    j = (r[:, :m, :] - r[:, m:, :]) / (2.0 * h)
    return np.swapaxes(j, 1, 2), t


def sphere_newton(residual: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, tol: float = NEWTON_TOL,
                  max_iter: int = 60, max_step: float = 0.3) -> NewtonResult:
    """Damped Gauss-Newton for residual(x) = 0 with x constrained to the sphere."""
    x = geo.normalize_rows(np.array(x0, dtype=float))
    n = len(x)
    res = np.full(n, np.inf)
    conv = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for _ in range(max_iter + 1):
        if active.size == 0:
            break
        xa = x[active]
        r = residual(xa)
        nr = np.linalg.norm(r, axis=-1)
        res[active] = nr
        done = nr < tol
        conv[active[done]] = True
        keep = ~done & np.isfinite(nr)
        active, xa, r = active[keep], xa[keep], r[keep]
        if active.size == 0:
            break
        j, t = tangent_jacobian(residual, xa)
        jt = np.swapaxes(j, 1, 2)
        a = jt @ j
        g = -(jt @ r[:, :, None])[:, :, 0]
        mu = 1e-14 * (np.trace(a, axis1=1, axis2=2) + 1e-300)
        a = a + mu[:, None, None] * np.eye(a.shape[-1])
        try:
            v = np.linalg.solve(a, g[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            v = np.stack([np.linalg.lstsq(ai, gi, rcond=None)[0] for ai, gi in zip(a, g)])
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        v = np.where(nv > max_step, v * (max_step / np.maximum(nv, 1e-300)), v)
        v = np.nan_to_num(v)
        x[active] = geo.normalize_rows(xa + (t @ v[:, :, None])[:, :, 0])
    return NewtonResult(x, res, conv)


def cluster(points: np.ndarray, radius: float = DEDUP_RADIUS, score: np.ndarray | None = None):
    """Group points closer than ``radius`` (transitively).

    Returns (representatives, sizes): for each cluster, the index of its
    best-scoring member (lowest score, ties by index), in canonical
    lexicographic order of the representative coordinates.
    """
    if len(points) == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    score = np.zeros(len(points)) if score is None else np.asarray(score)
    # collapse near-identical points on a fine grid first; the KD pass then joins neighbours
    _, first, inverse = np.unique(np.round(points / (radius * 1e-2)), axis=0, return_index=True,
                                  return_inverse=True)
    inverse = inverse.reshape(-1)
    tree = cKDTree(points[first])
    pairs = tree.query_pairs(radius, output_type="ndarray")
    parent = np.arange(len(first))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(first))])[inverse]
    order_all = np.lexsort((np.arange(len(points)), score, roots))
    boundaries = np.flatnonzero(np.diff(roots[order_all])) + 1
    groups = np.split(order_all, boundaries)
    reps = np.array([g[0] for g in groups])
    sizes = np.array([len(g) for g in groups])
    order = np.lexsort(np.round(points[reps], 9).T[::-1])
    return reps[order], sizes[order]


@dataclass
class SphereRoot:
    point: np.ndarray
    residual: float
    sigma_min: float
    multiplicity: str
    local_sign: int
    hits: int


def find_sphere_roots(residual: Callable[[np.ndarray], np.ndarray], seeds: np.ndarray, jobs: int = 1,
                      tol: float = NEWTON_TOL, orientation_target: np.ndarray | None = None,
                      continuum_check: bool = False) -> list[SphereRoot]:
    """All distinct zeros of ``residual`` reached from ``seeds``.

    ``orientation_target`` (a fixed image point y) switches on the local
    degree sign computation used for preimage counting.
    """
    results = chunked(lambda s: sphere_newton(residual, s, tol=tol), seeds, jobs)
    x = np.concatenate([r.x for r in results])
    res = np.concatenate([r.residual for r in results])
    conv = np.concatenate([r.converged for r in results])
    xs, rs = x[conv], res[conv]
    if len(xs) == 0:
        return []
    reps, sizes = cluster(xs, DEDUP_RADIUS, rs)
    pts = xs[reps]
    j, t = tangent_jacobian(residual, pts)
    sig = np.linalg.svd(j, compute_uv=False)[:, -1]
    degenerate = sig < DEGENERATE_SIGMA
    if continuum_check and int(np.sum(degenerate)) > CONTINUUM_LIMITS:
        raise ContinuumSuspected(f"{int(np.sum(degenerate))} distinct degenerate Newton limits")
    signs = np.zeros(len(pts), dtype=int)
    if orientation_target is not None:
        y = np.broadcast_to(orientation_target, pts.shape)
        img = np.linalg.det(np.concatenate([y[:, :, None], j], axis=2))
        dom = np.linalg.det(np.concatenate([pts[:, :, None], t], axis=2))
        signs = (np.sign(img) * np.sign(dom)).astype(int)
    out = []
    for i in range(len(pts)):
        mult = "isolated" if not degenerate[i] else "cluster"
        out.append(SphereRoot(pts[i], float(rs[reps[i]]), float(sig[i]), mult, int(signs[i]), int(sizes[i])))
    return out


# ---------------------------------------------------------------------------
# circle maps

def _angles(y: np.ndarray) -> np.ndarray:
    return np.arctan2(y[:, 1], y[:, 0])


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def circle_lift_samples(g: Callable[[np.ndarray], np.ndarray], theta0: float = 0.1234567,
                        n_init: int = 64, cap: int = 2 ** 20, max_gap: float = math.pi / 2):
    """Sample a circle map on a uniform grid fine enough that unwrapped gaps < max_gap.

    Returns (theta, lifted) with lifted a continuous lift of the image angle.
    """
    n = n_init
    while True:
        th = theta0 + 2 * math.pi * np.arange(n + 1) / n
        ang = _angles(g(np.stack([np.cos(th), np.sin(th)], axis=-1)))
        steps = _wrap(np.diff(ang))
        if np.max(np.abs(steps)) < max_gap:
            lifted = ang[0] + np.concatenate([[0.0], np.cumsum(steps)])
            return th, lifted
        n *= 2
        if n > cap:
            raise SamplingCapExceeded(f"circle map sampling exceeded {cap} points")


def circle_degree(g) -> int:
    th, lifted = circle_lift_samples(g)
    return int(round((lifted[-1] - lifted[0]) / (2 * math.pi)))


def circle_fixed_points(g: Callable[[np.ndarray], np.ndarray], tol: float = 1e-13) -> list[float]:
    """Angles of the fixed points of a circle map, located by bracketing and Brent refinement."""
    th, lifted = circle_lift_samples(g)
    disp = lifted - th
    flat = np.abs(_wrap(disp)) < 1e-10
    run = 0
    for v in flat:
        run = run + 1 if v else 0
        if run > 16:
            raise ContinuumSuspected("circle map has an arc of fixed points")

    def lift_at(x, j):
        a = _angles(g(np.array([[math.cos(x), math.sin(x)]])))[0]
        return lifted[j] + _wrap(a - _angles(g(np.array([[math.cos(th[j]), math.sin(th[j])]])))[0])

    roots = []
    for j in range(len(th) - 1):
        lo, hi = disp[j], disp[j + 1]
        kmin = math.ceil(min(lo, hi) / (2 * math.pi))
        kmax = math.floor(max(lo, hi) / (2 * math.pi))
        for k in range(kmin, kmax + 1):
            target = 2 * math.pi * k

            def phi(x, j=j, target=target):
                return lift_at(x, j) - x - target

            a, b = phi(th[j]), phi(th[j + 1])
            if a == 0.0:
                r = th[j]
            elif b == 0.0:
                continue
            elif a * b > 0:
                continue
            else:
                r = brentq(phi, th[j], th[j + 1], xtol=tol)
            r %= 2 * math.pi
            roots.append(0.0 if 2 * math.pi - r < 1e-12 else r)
    roots.sort()
    dedup: list[float] = []
    for r in roots:
        if not dedup or abs(r - dedup[-1]) > 1e-9:
            dedup.append(r)
    if len(dedup) > 1 and abs(dedup[0] + 2 * math.pi - dedup[-1]) <= 1e-9:
        dedup.pop()
    return dedup


def zero_sphere_fixed_points(g: Callable[[np.ndarray], np.ndarray]) -> list[int]:
    pts = np.array([[1.0], [-1.0]])
    img = np.sign(g(pts)[:, 0])
    return [int(p) for p, q in zip(pts[:, 0], img) if p == q]


def polar_fixed_points(restricted, seeds_per_dim: int = 4000, seed: int = 0, jobs: int = 1) -> list:
    """Fixed points of a self-map of P = S^k: k = 0, 1 handled exactly-ish, k >= 2 by Newton."""
    k = restricted.m
    if k == 0:
        return zero_sphere_fixed_points(restricted)
    if k == 1:
        return circle_fixed_points(restricted)
    seeds = geo.sphere_seeds(k, seeds_per_dim * k, seed)
    return find_sphere_roots(lambda x: restricted(x) - x, seeds, jobs=jobs, continuum_check=True)


def newton_rn(g: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, tol: float = 1e-12, max_iter: int = 60,
              h: float = 1e-7, max_step: float = 0.25,
              inside: Callable[[np.ndarray], np.ndarray] | None = None) -> NewtonResult:
    """Damped Newton for g(x) = 0 in R^k, batched; points leaving ``inside`` are dropped."""
    x = np.array(x0, dtype=float)
    n, k = x.shape
    res = np.full(n, np.inf)
    conv = np.zeros(n, dtype=bool)
    active = np.arange(n)
    eye = np.eye(k) * h
    for _ in range(max_iter + 1):
        if active.size == 0:
            break
        xa = x[active]
        r = g(xa)
        nr = np.linalg.norm(r, axis=-1)
        res[active] = nr
        done = nr < tol
        conv[active[done]] = True
        keep = ~done & np.isfinite(nr)
        active, xa, r = active[keep], xa[keep], r[keep]
        if active.size == 0:
            break
        probes = np.concatenate([xa[:, None, :] + eye, xa[:, None, :] - eye], axis=1).reshape(-1, k)
        rp = g(probes).reshape(len(xa), 2 * k, k)
        j = np.swapaxes((rp[:, :k] - rp[:, k:]) / (2 * h), 1, 2)
        det = np.linalg.det(j)
        ok = np.abs(det) > 1e-300
        v = np.zeros_like(xa)
        if np.any(ok):
            v[ok] = -np.linalg.solve(j[ok], r[ok][:, :, None])[:, :, 0]
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        v = np.where(nv > max_step, v * (max_step / np.maximum(nv, 1e-300)), v)
        xn = xa + v
        alive = ok.copy()
        if inside is not None:
            alive &= inside(xn)
        x[active[alive]] = xn[alive]
        active = active[alive]
    return NewtonResult(x, res, conv)


def sort_rows(points: Sequence[np.ndarray]) -> list[int]:
    if len(points) == 0:
        return []
    arr = np.round(np.asarray(points), 9)
    return list(np.lexsort(arr.T[::-1]))
