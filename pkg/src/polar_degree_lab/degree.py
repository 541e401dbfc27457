"""Topological degrees: preimage counting, restriction to P, transversal winding, box boundaries."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from . import maps as mp
from .errors import (
    BoundaryZeroSuspected,
    DegreeInconsistent,
    DepthCapExceeded,
    NotC1,
    PreimageSearchIncomplete,
    RegularValueNotFound,
    SamplingCapExceeded,
)
from .fixedpoints import find_sphere_roots

REGULAR_DET = 1e-6
UNWRAP_GAP = math.pi / 2
WINDING_CAP = 2 ** 20
BOX_MARGIN = 1e-4
BOX_DEPTH_CAP = 24
MAX_DIRECTION_SPREAD = math.pi / 3


@dataclass
class DegreeReport:
    deg_f: int
    deg_restriction: int
    transversal_d: int
    decomposition_ok: bool
    regular_value_used: geo.SpherePoint | None = None
    confidence: int = 0

    def as_dict(self) -> dict:
        return {
            "deg": self.deg_f,
            "deg_polar": self.deg_restriction,
            "transversal": self.transversal_d,
            "decomposition_ok": self.decomposition_ok,
            "confidence": self.confidence,
        }


@dataclass
class WindingSample:
    params: np.ndarray
    images: np.ndarray
    unwrapped: np.ndarray
    turns: int


@dataclass
class BoxDegreeCertificate:
    box: tuple
    degree: int
    depth: int
    n_simplices: int
    min_norm: float
    boundary_points: np.ndarray = field(repr=False, default=None)
    boundary_values: np.ndarray = field(repr=False, default=None)


@dataclass
class OpposingReport:
    ok: bool
    witnesses: list
    min_separation: float

    def __bool__(self):
        return self.ok


# ---------------------------------------------------------------------------
# degree of a sphere map by signed preimage counting

def _seed_levels(m: int) -> list[int]:
    full = min(50 ** (m + 1), 125_000)
    levels = [max(full // 16, 200)]
    while levels[-1] < full:
        levels.append(min(levels[-1] * 2, full))
    return levels


def _preimages(f: mp.SphereMap, y: np.ndarray, seed: int, jobs: int):
    levels = _seed_levels(f.m)
    previous = None
    for n in levels:
        seeds = geo.sphere_seeds(f.m, n, seed)
        roots = find_sphere_roots(lambda x: f(x) - y, seeds, jobs=jobs, orientation_target=y)
        key = [tuple(np.round(r.point, 6)) for r in roots]
        if previous is not None and key == previous:
            return roots
        previous = key
    raise PreimageSearchIncomplete(f"preimage set of {y} did not stabilise within {levels[-1]} seeds")


def degree_by_preimage(f: mp.SphereMap, seed: int = 0, jobs: int = 1, n_targets: int = 3,
                       return_target: bool = False):
    """Signed count of preimages of random regular values; ``n_targets`` of them must agree."""
    if not f.c1:
        raise NotC1("preimage degree needs a C1 map")
    rng = np.random.default_rng(seed)
    degrees: list[int] = []
    first_target = None
    tries = 0
    while len(degrees) < n_targets:
        if tries >= 10 + n_targets:
            raise RegularValueNotFound(f"no regular value found after {tries} draws")
        tries += 1
        y = geo.normalize_rows(rng.normal(size=(1, f.m + 1)))[0]
        roots = _preimages(f, y, seed + tries, jobs)
        if any(r.multiplicity != "isolated" or r.local_sign == 0 for r in roots):
            continue
        dets = [r.sigma_min for r in roots]
        if dets and min(dets) <= REGULAR_DET:
            continue
        degrees.append(sum(r.local_sign for r in roots))
        if first_target is None:
            first_target = y
    if len(set(degrees)) != 1:
        raise DegreeInconsistent(f"regular values gave different degrees {degrees}")
    if return_target:
        return degrees[0], geo.normalize_rows(first_target[None])[0], len(degrees)
    return degrees[0]


def degree_restriction(f: mp.SphereMap, seed: int = 0, jobs: int = 1) -> int:
    """Degree of f|P.  For m = 2, with [P] = [north] - [south]: identity 1, swap -1, otherwise 0."""
    g = mp.restrict_to_polar(f)
    if f.m == 2:
        img = np.sign(g(np.array([[1.0], [-1.0]]))[:, 0])
        if img[0] == 1 and img[1] == -1:
            return 1
        if img[0] == -1 and img[1] == 1:
            return -1
        return 0
    return degree_by_preimage(g, seed=seed, jobs=jobs)


# ---------------------------------------------------------------------------
# transversal degree

def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def unwrap_adaptive(angle_of: Callable[[np.ndarray], np.ndarray], n_init: int = 64,
                    max_gap: float = UNWRAP_GAP, cap: int = WINDING_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Sample theta in [0, 2 pi] and bisect every interval whose angle gap is >= max_gap."""
    th = np.linspace(0.0, 2 * math.pi, n_init + 1)
    ang = angle_of(th)
    while True:
        gaps = _wrap(np.diff(ang))
        bad = np.flatnonzero(np.abs(gaps) >= max_gap)
        if bad.size == 0:
            return th, ang[0] + np.concatenate([[0.0], np.cumsum(gaps)])
        if th.size + bad.size > cap:
            raise SamplingCapExceeded(f"winding refinement exceeded {cap} samples")
        mid = 0.5 * (th[bad] + th[bad + 1])
        th = np.insert(th, bad + 1, mid)
        ang = np.insert(ang, bad + 1, angle_of(mid))


def winding_sample(f: mp.SphereMap, p0, r: float = 0.05) -> WindingSample:
    p0 = np.asarray(p0, dtype=float).reshape(-1)

    def angle_of(th):
        z = r * np.stack([np.cos(th), np.sin(th)], axis=-1)
        y = f(geo.chart_to_sphere_arr(z, p0))
        return np.arctan2(y[:, 1], y[:, 0])

    th, unwrapped = unwrap_adaptive(angle_of)
    total = (unwrapped[-1] - unwrapped[0]) / (2 * math.pi)
    turns = int(round(total))
    if abs(total - turns) > 1e-6:
        raise SamplingCapExceeded(f"loop image did not close up ({total} turns)")
    images = np.stack([np.cos(unwrapped), np.sin(unwrapped)], axis=-1)
    return WindingSample(th, images, unwrapped, turns)


def _polar_probes(m: int, n: int, seed: int) -> list[np.ndarray]:
    if m == 2:
        return [np.array([1.0]), np.array([-1.0]), np.array([1.0])][:n]
    rng = np.random.default_rng(seed)
    return list(geo.normalize_rows(rng.normal(size=(n, m - 1))))


def transversal_degree(f: mp.SphereMap, seed: int = 0) -> int:
    """Turns made around P by the image of a small loop linking P, checked over 3 loops."""
    radii = (0.05, 0.03, 0.08)
    turns = [winding_sample(f, p0, r).turns for p0, r in zip(_polar_probes(f.m, 3, seed), radii)]
    if len(set(turns)) != 1:
        raise DegreeInconsistent(f"transversal winding depends on the loop: {turns}")
    return turns[0]


def check_decomposition(f: mp.SphereMap, seed: int = 0, jobs: int = 1) -> DegreeReport:
    deg, y, conf = degree_by_preimage(f, seed=seed, jobs=jobs, return_target=True)
    dres = degree_restriction(f, seed=seed, jobs=jobs)
    d = transversal_degree(f, seed=seed)
    return DegreeReport(deg, dres, d, deg == d * dres, geo.SpherePoint(y), conf)


# ---------------------------------------------------------------------------
# Brouwer degree of a vector field on the boundary of a box

def _kuhn_facets(lo: np.ndarray, hi: np.ndarray, res: int):
    """Oriented Kuhn triangulation of the boundary of [lo, hi]; returns (vertices, orientation)."""
    k = lo.size
    q = k - 1
    cells = np.array(list(itertools.product(range(res), repeat=q)), dtype=float)
    perms = list(itertools.permutations(range(q)))
    local = []
    for perm in perms:
        v = np.zeros((q + 1, q))
        for j, ax in enumerate(perm):
            v[j + 1] = v[j]
            v[j + 1, ax] += 1.0
        local.append(v)
    local = np.array(local)  # (P, q+1, q)
    grid = (cells[:, None, None, :] + local[None]) / res  # (C, P, q+1, q)
    grid = grid.reshape(-1, q + 1, q)
    out_v, out_o = [], []
    for axis in range(k):
        others = [a for a in range(k) if a != axis]
        for side in (0, 1):
            v = np.empty((grid.shape[0], q + 1, k))
            v[:, :, others] = lo[others] + (hi[others] - lo[others]) * grid
            v[:, :, axis] = hi[axis] if side else lo[axis]
            normal = np.zeros(k)
            normal[axis] = 1.0 if side else -1.0
            edges = v[:, 1:, :] - v[:, :1, :]
            mat = np.concatenate([np.broadcast_to(normal, (len(v), 1, k)), edges], axis=1)
            out_v.append(v)
            out_o.append(np.sign(np.linalg.det(mat)))
    return np.concatenate(out_v), np.concatenate(out_o).astype(int)


def _pair_angles(dirs: np.ndarray) -> np.ndarray:
    k = dirs.shape[1]
    worst = np.zeros(len(dirs))
    for i in range(k):
        for j in range(i + 1, k):
            c = np.clip(np.sum(dirs[:, i] * dirs[:, j], axis=-1), -1.0, 1.0)
            worst = np.maximum(worst, np.arccos(c))
    return worst


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def brouwer_degree_box(field_fn: Callable[[np.ndarray], np.ndarray], box, margin: float = BOX_MARGIN,
                       init_res: int = 4, max_depth: int = BOX_DEPTH_CAP,
                       max_simplices: int = 2_000_000) -> BoxDegreeCertificate:
    """Degree of x -> v(x)/|v(x)| on the boundary of an axis-aligned box.

    A nonzero value certifies a zero of ``field_fn`` inside the box.
    """
    lo = np.asarray(box[0], dtype=float).reshape(-1)
    hi = np.asarray(box[1], dtype=float).reshape(-1)
    k = lo.size
    if k == 1:
        vals = field_fn(np.array([[lo[0]], [hi[0]]]))[:, 0]
        mn = float(np.min(np.abs(vals)))
        if mn < margin:
            raise BoundaryZeroSuspected(f"boundary field norm {mn:.3g} below margin {margin}")
        deg = int((np.sign(vals[1]) - np.sign(vals[0])) // 2)
        return BoxDegreeCertificate((lo, hi), deg, 0, 2, mn)
    verts, orient = _kuhn_facets(lo, hi, init_res)
    vals = field_fn(verts.reshape(-1, k)).reshape(verts.shape)
    depth = np.zeros(len(verts), dtype=int)
    min_norm = float(np.min(np.linalg.norm(vals, axis=-1)))
    if min_norm < margin:
        raise BoundaryZeroSuspected(f"boundary field norm {min_norm:.3g} below margin {margin}")
    done_v, done_f, done_o = [], [], []
    max_seen = 0
    while len(verts):
        dirs = _unit(vals)
        spread = _pair_angles(dirs)
        # longest edge and its midpoint
        best = np.zeros(len(verts))
        ia = np.zeros(len(verts), dtype=int)
        ib = np.ones(len(verts), dtype=int)
        for i in range(k):
            for j in range(i + 1, k):
                ln = np.linalg.norm(verts[:, i] - verts[:, j], axis=-1)
                sel = ln > best
                best = np.where(sel, ln, best)
                ia = np.where(sel, i, ia)
                ib = np.where(sel, j, ib)
        rows = np.arange(len(verts))
        mid = 0.5 * (verts[rows, ia] + verts[rows, ib])
        fm = field_fn(mid)
        nm = np.linalg.norm(fm, axis=-1)
        if np.min(nm) < margin:
            raise BoundaryZeroSuspected(f"boundary field norm {np.min(nm):.3g} below margin {margin}")
        min_norm = min(min_norm, float(np.min(nm)))
        dm = fm / nm[:, None]
        ang_a = np.arccos(np.clip(np.sum(dm * dirs[rows, ia], axis=-1), -1, 1))
        ang_b = np.arccos(np.clip(np.sum(dm * dirs[rows, ib], axis=-1), -1, 1))
        need = (spread >= MAX_DIRECTION_SPREAD) | (ang_a >= MAX_DIRECTION_SPREAD) | (ang_b >= MAX_DIRECTION_SPREAD)
        ok = ~need
        done_v.append(verts[ok])
        done_f.append(dirs[ok])
        done_o.append(orient[ok])
        if not np.any(need):
            break
        if np.any(depth[need] >= max_depth):
            raise DepthCapExceeded(f"boundary subdivision reached depth {max_depth}")
        v, f, o, dp = verts[need], vals[need], orient[need], depth[need]
        a, b, mv, mf = ia[need], ib[need], mid[need], fm[need]
        r = np.arange(len(v))
        c1v, c1f = v.copy(), f.copy()
        c1v[r, b], c1f[r, b] = mv, mf
        c2v, c2f = v.copy(), f.copy()
        c2v[r, a], c2f[r, a] = mv, mf
        verts = np.concatenate([c1v, c2v])
        vals = np.concatenate([c1f, c2f])
        orient = np.concatenate([o, o])
        depth = np.concatenate([dp, dp]) + 1
        max_seen = max(max_seen, int(depth.max()))
        if len(verts) + sum(len(x) for x in done_v) > max_simplices:
            raise DepthCapExceeded("boundary subdivision exceeded the simplex budget")
    sv = np.concatenate(done_v)
    sd = np.concatenate(done_f)
    so = np.concatenate(done_o)
    w = np.swapaxes(sd, 1, 2)  # columns are vertex directions
    det = np.linalg.det(w)
    # degenerate image simplices cover a null set of directions
    live = np.abs(det) > 1e-13
    w, so, sign = w[live], so[live], np.sign(det[live]).astype(int)
    rng = np.random.default_rng(20240917)
    counts = []
    for _ in range(3):
        y = _unit(rng.normal(size=k))
        lam = np.linalg.solve(w, np.broadcast_to(y, (len(w), k))[:, :, None])[:, :, 0]
        inside = np.all(lam > 0.0, axis=1)
        counts.append(int(np.sum(so[inside] * sign[inside])))
    if len(set(counts)) != 1:
        raise DegreeInconsistent(f"direction-map counts disagree across targets: {counts}")
    return BoxDegreeCertificate((lo, hi), counts[0], max_seen, len(sv), min_norm, sv, sd)


def opposing_fields_check(v: Callable[[np.ndarray], np.ndarray], w: Callable[[np.ndarray], np.ndarray],
                          probes: np.ndarray, tol: float = 1e-6) -> OpposingReport:
    """True iff v and w never point in the same direction at the probes."""
    probes = np.atleast_2d(probes)
    dv = _unit(v(probes))
    dw = _unit(w(probes))
    sep = np.arccos(np.clip(np.sum(dv * dw, axis=-1), -1.0, 1.0))
    bad = sep <= tol
    witnesses = [tuple(map(float, p)) for p in probes[bad]]
    return OpposingReport(not witnesses, witnesses, float(np.min(sep)) if len(sep) else math.inf)


def box_boundary_probes(box, per_axis: int = 9) -> np.ndarray:
    """Grid points on every facet of the box (corners repeated)."""
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    k = lo.size
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(k)]
    pts = []
    for axis in range(k):
        others = [axes[a] for a in range(k) if a != axis]
        grid = np.array(list(itertools.product(*others))) if others else np.zeros((1, 0))
        for val in (lo[axis], hi[axis]):
            p = np.empty((len(grid), k))
            p[:, [a for a in range(k) if a != axis]] = grid
            p[:, axis] = val
            pts.append(p)
    return np.concatenate(pts)
