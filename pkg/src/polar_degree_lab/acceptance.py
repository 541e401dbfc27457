"""The acceptance suite as library functions; shared by ``verify`` and the test-suite.

Each check returns a :class:`CriterionResult` whose details are deterministic
(no timings), so the JSON emitted by ``verify`` is reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import census, lifts, local, oracles
from . import geometry as geo
from . import maps as mp
from .degree import brouwer_degree_box, check_decomposition, transversal_degree

RUNTIME_LIMITS = {1: 5.0, 2: 30.0, 3: 120.0, 4: 60.0, 5: 60.0, 6: None, 7: 60.0, 8: 60.0, 9: 120.0}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.title}"

    def as_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": self.passed, "details": self.details}


def degree_triples(seed: int = 0, jobs: int = 1, ds=(2, 3, -2, 5)) -> CriterionResult:
    rows = []
    ok = True
    for d in ds:
        rep = check_decomposition(mp.power_s2(d), seed=seed, jobs=jobs)
        want = oracles.power_map_degrees(d)
        got = (rep.deg_f, rep.deg_restriction, rep.transversal_d)
        row_ok = (got == want and rep.decomposition_ok and rep.deg_f == d * rep.deg_restriction
                  and rep.confidence == 3)
        ok &= row_ok
        rows.append({"d": d, "computed": list(got), "oracle": list(want), "targets_agreeing": rep.confidence,
                     "ok": row_ok})
    return CriterionResult(1, "degree triples of power_s2", ok, {"rows": rows})


def join_degrees(seed: int = 0, jobs: int = 1) -> CriterionResult:
    f = mp.join_power(2, 3)
    rep = check_decomposition(f, seed=seed, jobs=jobs)
    d2 = transversal_degree(mp.iterate(f, 2), seed=seed)
    got = [rep.deg_f, rep.deg_restriction, rep.transversal_d]
    ok = got == [6, 3, 2] and rep.decomposition_ok and d2 == 4
    return CriterionResult(2, "join_power(2,3) degrees and iterate transversal degree", ok,
                           {"computed": got, "second_iterate_transversal": d2})


def census_power2(seed: int = 0, jobs: int = 1) -> CriterionResult:
    f = mp.power_s2(2)
    rep = census.growth_report(f, 6, seed=seed, jobs=jobs)
    counts = [r.fix_count for r in rep.rows]
    exact = counts == [2 ** n + 1 for n in range(1, 7)]
    rows_ok = all(r.verdict is True for r in rep.rows)
    g6 = rep.rows[-1].growth
    target = math.log(2.0) + math.log(65.0 / 64.0) / 6.0
    ok = exact and rows_ok and abs(g6 - target) <= 0.01
    return CriterionResult(3, "census of power_s2(2), n = 1..6", ok,
                           {"rows": [r.as_dict() for r in rep.rows], "growth_n6": g6, "target": target})


def negative_alternation(seed: int = 0, jobs: int = 1) -> CriterionResult:
    f = mp.power_s2(-2)
    rows = [census.census_row(f, n, -2, seed=seed, jobs=jobs) for n in (1, 2)]
    ok = ([r.fix_polar_count for r in rows] == [0, 2] and [r.bound for r in rows] == [3, 3]
          and all(r.verdict is True for r in rows))
    return CriterionResult(4, "power_s2(-2) polar alternation", ok, {"rows": [r.as_dict() for r in rows]})


def brouwer_kernel(seed: int = 0, jobs: int = 1, n_random: int = 10) -> CriterionResult:
    checks = []
    for k in (2, 3):
        box = (-np.ones(k), np.ones(k))
        checks.append(("identity", k, brouwer_degree_box(lambda x: x, box).degree, 1))
        checks.append(("negation", k, brouwer_degree_box(lambda x: -x, box).degree, (-1) ** k))
        checks.append(("constant", k, brouwer_degree_box(lambda x: np.ones_like(x), box).degree, 0))
    polys = []
    s = 1000 * seed
    while len(polys) < n_random:
        k = 2 + len(polys) % 2
        v = oracles.random_polynomial_field(k, s)
        s += 1
        lo, hi = -np.ones(k), np.ones(k)
        if oracles.boundary_margin(v, lo, hi) <= 1e-3:
            continue
        polys.append({"k": k, "seed": s - 1, "kernel": brouwer_degree_box(v, (lo, hi)).degree,
                      "oracle": oracles.dense_box_degree(v, lo, hi)})
    ok = all(c[2] == c[3] for c in checks) and all(p["kernel"] == p["oracle"] for p in polys)
    return CriterionResult(5, "Brouwer degree kernel", ok,
                           {"model_fields": [list(c) for c in checks], "random_fields": polys})


def builtin_families() -> list[mp.SphereMap]:
    return [mp.power_s2(2), mp.power_s2(3), mp.power_s2(-2), mp.power_s2(5), mp.join_power(2, 3),
            mp.join_power(-2, 3), mp.identity(2), mp.identity(3), mp.antipodal(2), mp.antipodal(3),
            mp.cone_model(2.0), mp.north_south(), mp.perturb(mp.power_s2(2), 0.05, 1)]


def lift_algebra(seed: int = 0, jobs: int = 1, n_points: int = 1000) -> CriterionResult:
    rows = []
    ok = True
    for f in builtin_families():
        d = transversal_degree(f, seed=seed)
        G = lifts.make_lift(f, 0, d)
        rng = np.random.default_rng(seed)
        m = f.m
        u = rng.normal(size=(n_points, m - 1))
        u *= (0.9 * rng.random(n_points) ** (1.0 / (m - 1)) / np.linalg.norm(u, axis=1))[:, None]
        q = np.column_stack([rng.uniform(-3.0, 3.0, n_points), u])
        q1 = q.copy()
        q1[:, 0] += 1.0
        a, b = G(q), G(q1)
        deck = float(max(np.max(np.abs(b[:, 0] - a[:, 0] - d)), np.max(np.abs(b[:, 1:] - a[:, 1:]))))
        # the lift covers f: its image projects onto f of the projection
        img = f(geo.lift_to_sphere_arr(q[:, 0], q[:, 1:]))
        proj = float(np.max(np.abs(geo.lift_to_sphere_arr(a[:, 0], a[:, 1:]) - img)))
        row_ok = deck < 1e-9 and proj < 1e-9
        ok &= row_ok
        rows.append({"map": f.spec, "d": d, "deck_residual_ok": deck < 1e-9, "projection_ok": proj < 1e-9})
    return CriterionResult(6, "lift commutation and increment law", ok, {"families": rows})


def free_lift_counts(seed: int = 0, jobs: int = 1, delta: float = 0.1) -> CriterionResult:
    rows = []
    ok = True
    for d in (2, 3, -2):
        f = mp.power_s2(d)
        rep = lifts.count_fixed_point_free_lifts(f, delta, jobs=jobs, d=d)
        positions_ok = True
        for s in rep.searches:
            want = s.k / (1.0 - d)
            pts = [(r.location.t, float(np.linalg.norm(r.location.u))) for r in s.records]
            positions_ok &= len(pts) == 1 and abs(pts[0][0] - want) < 1e-8 and pts[0][1] < 1e-8
        row_ok = rep.free_count == 0 and rep.verdict and positions_ok and bool(rep.nielsen)
        ok &= row_ok
        rows.append({"d": d, "free": rep.free_count, "bound": rep.bound, "positions_ok": positions_ok,
                     "nielsen_ok": bool(rep.nielsen), "ok": row_ok})
    return CriterionResult(7, "fixed-point-free lifts of power_s2", ok, {"rows": rows})


def local_suite(seed: int = 0, jobs: int = 1) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(100):
        A = np.outer(rng.normal(size=2), rng.normal(size=2))
        rho = float(np.max(np.abs(np.linalg.eigvals(A))))
        norm = local.adapted_norm(A, rho + 0.1)
        u = rng.normal(size=(1000, 2))
        worst = max(worst, float(np.max(norm(u @ A.T) / norm(u))) - (rho + 0.1))
    norms_ok = worst < 0.0
    cones = []
    for lam in (1.0, 2.0, 5.0):
        f = mp.cone_model(lam)
        cls = local.classify_fixed_point(f, [-1.0])
        rep = local.verify_sector_inequalities(f, [-1.0], cls, seed=seed)
        cones.append({"lambda": lam, "verdict": cls.verdict, "eps": cls.eps, "delta": rep.delta,
                      "violations": len(rep.failures), "ok": cls.verdict == "ConeCase" and rep.ok})
    singular = []
    for f in (mp.power_s2(2), mp.power_s2(3), mp.power_s2(-2), mp.power_s2(5), mp.join_power(2, 3),
              mp.join_power(-2, 3)):
        pts = [np.array([1.0]), np.array([-1.0])] if f.m == 2 else \
            [np.array([math.cos(a), math.sin(a)]) for a in np.linspace(0, 2 * math.pi, 8, endpoint=False)]
        dets = [abs(float(np.linalg.det(mp.jacobian(mp.normal_component(f, p)).entries))) for p in pts]
        singular.append({"map": f.spec, "max_det": max(dets), "ok": max(dets) < 1e-6})
    ok = norms_ok and all(c["ok"] for c in cones) and all(s["ok"] for s in singular)
    return CriterionResult(8, "local analysis suite", ok,
                           {"adapted_norm_ok": norms_ok, "cones": cones, "singularity": singular})


def homotopy_stability(seed: int = 0, jobs: int = 1, delta: float = 0.1) -> CriterionResult:
    base = mp.power_s2(2)
    ref = check_decomposition(base, seed=seed, jobs=jobs).as_dict()
    ref_lifts = [bool(s.records) for s in lifts.count_fixed_point_free_lifts(base, delta, d=2).searches]
    rows = []
    ok = True
    for s in range(5):
        g = mp.perturb(base, 0.05, s)
        rep = check_decomposition(g, seed=seed, jobs=jobs).as_dict()
        lf = lifts.count_fixed_point_free_lifts(g, delta, d=rep["transversal"], polar_fix_count=2)
        exist = [bool(x.records) for x in lf.searches]
        same = ({k: rep[k] for k in ("deg", "deg_polar", "transversal", "decomposition_ok")} ==
                {k: ref[k] for k in ("deg", "deg_polar", "transversal", "decomposition_ok")}) and exist == ref_lifts
        ok &= same
        rows.append({"seed": s, "degrees": [rep["deg"], rep["deg_polar"], rep["transversal"]],
                     "lift_fixed_points_exist": exist, "ok": same})
    return CriterionResult(9, "homotopy stability under perturbation", ok, {"rows": rows})


CRITERIA = {
    1: degree_triples,
    2: join_degrees,
    3: census_power2,
    4: negative_alternation,
    5: brouwer_kernel,
    6: lift_algebra,
    7: free_lift_counts,
    8: local_suite,
    9: homotopy_stability,
}


def run_all(seed: int = 0, jobs: int = 1) -> list[CriterionResult]:
    return [fn(seed=seed, jobs=jobs) for fn in CRITERIA.values()]
