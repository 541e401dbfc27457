"""Lifts of f to the cyclic cover of S - P and their fixed points.

A lift F is evaluated by following the angle of the f-image along the
straight segment from the base point (t, u) = (0, 0) to the query point and
unwrapping it.  The deck offset k adds k turns to the result.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import maps as mp
from .degree import (BOX_MARGIN, BoxDegreeCertificate, OpposingReport, box_boundary_probes,
                     brouwer_degree_box, opposing_fields_check, transversal_degree)
from .errors import (BoundaryZeroSuspected, BoxCapExceeded, CertificateInconsistency,
                     DegenerateTransversalDegree, OnPolarSphere, TrackingLoss)
from .fixedpoints import DEDUP_RADIUS, cluster, newton_rn

TRACK_GAP = math.pi / 2
TRACK_CAP = 2 ** 16
PATH_BUDGET = 400_000  # path samples per evaluation chunk
END_FACE_SLACK = 0.5
BOX_CAP = 2 ** 10
HYBRID_BAND = 0.05
ISOLATED_RESIDUAL = 1e-10
NIELSEN_SEPARATION = 1e-6


def _wrap(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True, eq=False)
class Lift:
    """The lift of ``base`` fixing the branch at (0, 0), composed with the deck power ``k``."""

    base: mp.SphereMap
    d: int
    k: int
    base_turns: float

    @property
    def m(self) -> int:
        return self.base.m

    def __call__(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        if q.shape[1] != self.m:
            raise ValueError(f"expected cover points of width {self.m}, got {q.shape[1]}")
        if np.any(np.sum(q[:, 1:] ** 2, axis=1) >= 1.0):
            raise OnPolarSphere("cover point has |u| >= 1")
        out = np.empty_like(q)
        turns = np.abs(q[:, 0]) * max(abs(self.d), 1) + np.linalg.norm(q[:, 1:], axis=1)
        level = np.maximum(3, np.ceil(np.log2(8.0 * (1.0 + turns)))).astype(int)
        pending = np.arange(len(q))
        while pending.size:
            retry = []
            for lv in np.unique(level[pending]):
                n = 2 ** int(lv)
                if n > TRACK_CAP:
                    raise TrackingLoss(f"angle gaps stay above pi/2 with {TRACK_CAP} path samples")
                idx = pending[level[pending] == lv]
                step = max(1, PATH_BUDGET // n)
                for s in range(0, idx.size, step):
                    chunk = idx[s:s + step]
                    vals, ok = self._track(q[chunk], n)
                    out[chunk[ok]] = vals[ok]
                    level[chunk[~ok]] += 1
                    retry.append(chunk[~ok])
            pending = np.concatenate(retry) if retry else np.empty(0, dtype=int)
        return out

    def _track(self, q: np.ndarray, n: int):
        s = np.linspace(0.0, 1.0, n + 1)
        path = s[None, :, None] * q[:, None, :]
        flat = path.reshape(-1, self.m)
        y = self.base(geo.lift_to_sphere_arr(flat[:, 0], flat[:, 1:])).reshape(len(q), n + 1, -1)
        ang = np.arctan2(y[:, :, 1], y[:, :, 0])
        gaps = _wrap(np.diff(ang, axis=1))
        ok = np.max(np.abs(gaps), axis=1) < TRACK_GAP
        vals = np.empty_like(q)
        vals[:, 0] = self.base_turns + np.sum(gaps, axis=1) / geo.TWO_PI + self.k
        vals[:, 1:] = y[:, -1, 2:]
        return vals, ok

    def eval(self, q: geo.LiftPoint) -> geo.LiftPoint:
        r = self(q.as_array()[None, :])[0]
        return geo.LiftPoint(r[0], r[1:])

    def shifted(self, k: int) -> "Lift":
        return Lift(self.base, self.d, int(k), self.base_turns)


def make_lift(f: mp.SphereMap, k: int = 0, d: int | None = None) -> Lift:
    """Lift of f to the cover, followed by the deck transformation t -> t + k."""
    if d is None:
        d = transversal_degree(f)
    x0 = geo.lift_to_sphere_arr(np.zeros(1), np.zeros((1, f.m - 1)))
    y0 = f(x0)[0]
    return Lift(f, int(d), int(k), math.atan2(y0[1], y0[0]) / geo.TWO_PI)


def lift_family(f: mp.SphereMap, d: int | None = None) -> list[Lift]:
    if d is None:
        d = transversal_degree(f)
    if d in (0, 1):
        raise DegenerateTransversalDegree(f"transversal degree {d} has no finite lift family")
    base = make_lift(f, 0, d)
    return [base.shifted(k) for k in range(abs(d - 1))]


# ---------------------------------------------------------------------------
# search boxes

@dataclass(frozen=True)
class SearchBox:
    """The piece [-half_length, half_length] x D^(m-1)(1 - delta) of the cover."""

    half_length: float
    delta: float

    @property
    def radius(self) -> float:
        return 1.0 - self.delta


def _disk_samples(dim: int, radius: float, n: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.linspace(-radius, radius, n)[:, None]
    g = rng.normal(size=(n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / dim)
    r[: n // 4] = radius  # keep part of the sample on the rim
    return g * r[:, None]


def end_face_margins(G: Lift, box: SearchBox, n_samples: int = 1000, seed: int = 0) -> tuple[float, float]:
    """Signed margins by which the end-face displacement inequalities hold (negative = violated)."""
    rng = np.random.default_rng(seed)
    half = max(1, n_samples // 2)
    u = _disk_samples(G.m - 1, box.radius, half, rng)
    left = G(np.column_stack([np.full(half, -box.half_length), u]))[:, 0]
    right = G(np.column_stack([np.full(half, box.half_length), u]))[:, 0]
    if G.d > 1:
        return float(np.min(-box.half_length - 1.0 - left)), float(np.min(right - box.half_length - 1.0))
    return float(np.min(left - (-box.half_length + 1.0))), float(np.min(box.half_length - 1.0 - right))


def choose_search_box(G: Lift, delta: float, n_samples: int = 1000, seed: int = 0) -> SearchBox:
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 0.5)")
    if G.d in (0, 1):
        raise DegenerateTransversalDegree(f"transversal degree {G.d} is excluded")
    length = 2
    while length <= BOX_CAP:
        box = SearchBox(float(length), float(delta))
        if min(end_face_margins(G, box, n_samples, seed)) >= END_FACE_SLACK:
            return box
        length *= 2
    raise BoxCapExceeded(f"end-face inequalities still fail at half-length {BOX_CAP}")


# ---------------------------------------------------------------------------
# box coordinates: [-L, L] x [-1, 1]^(m-1) -> search box of half-length L

def _square_to_disk(y: np.ndarray) -> np.ndarray:
    """Orientation-preserving homeomorphism [-1, 1]^k -> D^k for k <= 2."""
    if y.shape[1] == 1:
        return y.copy()
    a, b = y[:, 0], y[:, 1]
    return np.column_stack([a * np.sqrt(1.0 - 0.5 * b * b), b * np.sqrt(1.0 - 0.5 * a * a)])


def box_chart(box: SearchBox, s: np.ndarray) -> np.ndarray:
    s = np.atleast_2d(s)
    if s.shape[1] > 3:
        raise NotImplementedError("box search implemented for m <= 3")
    return np.column_stack([s[:, 0], box.radius * _square_to_disk(s[:, 1:])])


def box_bounds(box: SearchBox, m: int):
    lo = np.array([-box.half_length] + [-1.0] * (m - 1))
    return lo, -lo


def displacement(G: Lift):
    return lambda q: G(q) - np.atleast_2d(q)


def reference_field(box: SearchBox, d: int):
    """Comparison field on the boundary of the search box, in cover coordinates.

    Inward normal when d > 1.  For d <= -1: inward on the lateral face,
    outward on the end faces, blended linearly in a band of width 0.05 half_length on
    the lateral face next to each end.
    """
    band = HYBRID_BAND * box.half_length
    edge = 1e-9 * max(1.0, box.half_length)

    def w(q):
        q = np.atleast_2d(q)
        t, u = q[:, 0], q[:, 1:]
        nu = np.linalg.norm(u, axis=1)
        radial = -u / np.maximum(nu, 1e-300)[:, None]
        lateral = nu >= box.radius - edge
        end = np.abs(t) >= box.half_length - edge
        out = np.zeros_like(q)
        e_t = np.sign(t)
        if d > 1:
            out[:, 0] = np.where(end, -e_t, 0.0)
            out[:, 1:] = np.where(lateral[:, None], radial, 0.0)
        else:
            s = np.clip((np.abs(t) - (box.half_length - band)) / band, 0.0, 1.0)
            s = np.where(lateral, s, 1.0)
            out[:, 0] = s * e_t
            out[:, 1:] = np.where(lateral[:, None], (1.0 - s)[:, None] * radial, 0.0)
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    return w


def lift_opposition(G: Lift, box: SearchBox, per_axis: int = 9) -> OpposingReport:
    """Checks that the displacement never points along the reference field on the boundary."""
    lo, hi = box_bounds(box, G.m)
    probes = box_chart(box, box_boundary_probes((lo, hi), per_axis))
    return opposing_fields_check(displacement(G), reference_field(box, G.d), probes)


# ---------------------------------------------------------------------------
# certified search

@dataclass
class FixedPointRecord:
    location: geo.LiftPoint | geo.SpherePoint
    k: int | None
    certificate: BoxDegreeCertificate | None
    residual: float
    multiplicity: str  # isolated | cluster | continuum-suspected

    @property
    def sphere_point(self) -> geo.SpherePoint:
        if isinstance(self.location, geo.SpherePoint):
            return self.location
        q = self.location
        return geo.SpherePoint(geo.lift_to_sphere_arr(np.array([q.t]), q.u[None, :])[0])


@dataclass
class LiftSearch:
    k: int
    box: SearchBox
    certificate: BoxDegreeCertificate
    records: list[FixedPointRecord]
    inconsistent: bool = False

    @property
    def free(self) -> bool:
        """No fixed point found in the box and a zero degree certificate."""
        return self.certificate.degree == 0 and not self.records


def _newton_seeds(box: SearchBox, m: int, d: int) -> np.ndarray:
    n_t = int(min(2001, max(33, 16 * box.half_length * abs(d - 1) + 1)))
    ts = np.linspace(-box.half_length, box.half_length, n_t)
    if m == 2:
        us = np.linspace(-box.radius, box.radius, 21)[:, None]
    else:
        g = np.linspace(-box.radius, box.radius, 9)
        us = np.array([(a, b) for a in g for b in g if a * a + b * b <= box.radius ** 2])
    return np.column_stack([np.repeat(ts, len(us)), np.tile(us, (n_t, 1))])


def _multiplicity(G: Lift, q: np.ndarray, h: float = 1e-6) -> str:
    m = G.m
    eye = np.eye(m) * h
    r = displacement(G)
    jp = r(q[None, :] + eye)
    jm = r(q[None, :] - eye)
    sig = np.linalg.svd(((jp - jm) / (2 * h)).T, compute_uv=False)
    return "isolated" if sig[-1] > 1e-6 else "cluster"


def find_fixed_points(G: Lift, box: SearchBox, strict: bool = False,
                      margin: float = BOX_MARGIN) -> LiftSearch:
    """Degree certificate on the boundary of the search box plus multi-start Newton inside.

    On a suspected boundary zero the box is doubled in length once.  A
    nonzero degree with no Newton root is flagged on the result; with
    ``strict`` it raises CertificateInconsistency.
    """
    v = displacement(G)
    try:
        cert = brouwer_degree_box(lambda s: v(box_chart(box, s)), box_bounds(box, G.m), margin)
    except BoundaryZeroSuspected:
        box = SearchBox(2.0 * box.half_length, box.delta)
        cert = brouwer_degree_box(lambda s: v(box_chart(box, s)), box_bounds(box, G.m), margin)

    rad2 = box.radius ** 2

    def inside(x):
        return (np.abs(x[:, 0]) <= box.half_length + 1.0) & (np.sum(x[:, 1:] ** 2, axis=1) < 1.0 - 1e-9)

    res = newton_rn(v, _newton_seeds(box, G.m, G.d), tol=1e-13, max_iter=60, inside=inside)
    x, r = res.x, res.residual
    keep = (r < 1e-11) & (np.abs(x[:, 0]) <= box.half_length) & (np.sum(x[:, 1:] ** 2, axis=1) <= rad2)
    records = []
    if np.any(keep):
        pts, rs = x[keep], r[keep]
        reps, _ = cluster(pts, DEDUP_RADIUS, rs)
        for q in pts[reps]:
            res_q = float(np.linalg.norm(v(q[None, :])[0]))
            records.append(FixedPointRecord(geo.LiftPoint(q[0], q[1:]), G.k, cert, res_q,
                                            _multiplicity(G, q)))
    inconsistent = cert.degree != 0 and not records
    if inconsistent and strict:
        raise CertificateInconsistency(f"lift k={G.k}: degree {cert.degree} but no Newton root in the box")
    return LiftSearch(G.k, box, cert, records, inconsistent)


# ---------------------------------------------------------------------------
# family-level checks

@dataclass
class NielsenReport:
    ok: bool
    breaches: list = field(default_factory=list)  # (k, k', distance)

    def __bool__(self):
        return self.ok


def nielsen_check(records: dict[int, list[FixedPointRecord]], d: int) -> NielsenReport:
    """Fixed points of distinct lifts in the family project to distinct points."""
    if d == 1:
        raise DegenerateTransversalDegree("d = 1 has no finite lift family")
    n = abs(d - 1)
    keys = sorted(k for k in records if 0 <= k < n)
    breaches = []
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            for ra in records[a]:
                for rb in records[b]:
                    dist = float(np.linalg.norm(ra.sphere_point.coords - rb.sphere_point.coords))
                    if dist <= NIELSEN_SEPARATION:
                        breaches.append((a, b, dist))
    return NielsenReport(not breaches, breaches)


@dataclass
class FreeLiftReport:
    d: int
    family_size: int
    free_count: int
    polar_fix_count: int
    searches: list[LiftSearch]
    nielsen: NielsenReport

    @property
    def bound(self) -> int:
        return 2 * self.polar_fix_count

    @property
    def nonfree_count(self) -> int:
        return self.family_size - self.free_count

    @property
    def verdict(self) -> bool:
        return self.free_count <= self.bound

    @property
    def lower_bound_ok(self) -> bool:
        return self.nonfree_count >= self.family_size - self.bound

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "family_size": self.family_size,
            "free_lifts": self.free_count,
            "polar_fixed_points": self.polar_fix_count,
            "bound": self.bound,
            "verdict": "pass" if self.verdict else "fail",
            "nielsen_ok": bool(self.nielsen),
            "lifts": [
                {"k": s.k, "half_length": s.box.half_length, "degree": s.certificate.degree,
                 "fixed_points": [[float(r.location.t), *map(float, r.location.u)] for r in s.records],
                 "inconsistent": s.inconsistent}
                for s in self.searches
            ],
        }


def count_fixed_point_free_lifts(f: mp.SphereMap, delta: float = 0.1, jobs: int = 1, d: int | None = None,
                                 polar_fix_count: int | None = None) -> FreeLiftReport:
    """Runs the certified search over the whole lift family.

    "Free" means: zero degree certificate and no Newton root inside the search box.
    Fixed points outside the box are not excluded.
    """
    if d is None:
        d = transversal_degree(f)
    family = lift_family(f, d)
    if polar_fix_count is None:
        from .fixedpoints import polar_fixed_points
        polar_fix_count = len(polar_fixed_points(mp.restrict_to_polar(f)))

    def run(G):
        return find_fixed_points(G, choose_search_box(G, delta))

    if jobs > 1 and len(family) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            searches = list(ex.map(run, family))
    else:
        searches = [run(G) for G in family]
    free = sum(1 for s in searches if s.free)
    nielsen = nielsen_check({s.k: s.records for s in searches}, d)
    return FreeLiftReport(int(d), len(family), free, int(polar_fix_count), searches, nielsen)
