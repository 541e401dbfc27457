"""Local dynamics of f in the 2-dimensional direction normal to P.

At a fixed point p of f|P the normal map f_p : D^2 -> D^2 fixes the origin;
A_p is its Jacobian there.  When |d| > 1, A_p is singular and either the
origin attracts (spectral radius < 1) or there is a cone of directions that
the map can expand, whose image stays away from the kernel line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from . import maps as mp
from .errors import NonSingularJacobian, NotAFixedPoint, NotC1, RadiusCollapse, SpectralGapTooSmall

SPECTRAL_BAND = 1e-9
SINGULAR_DET = 1e-4
EPS_LADDER = (0.3, 0.1, 0.03, 0.01)
HALVING_CAP = 10
START_RADIUS = 0.2
MIN_RADIUS = 1e-6
MESH_LEVELS = 10
LINE_CLEARANCE = 1e-6
FIXED_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AdaptedNorm:
    """ell^1 or ell^2 norm of the coordinates in ``basis`` (columns)."""

    basis: np.ndarray
    kind: str  # "l1" | "l2"
    c: float
    scale: float = 1.0

    def coords(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        return np.linalg.solve(self.basis, u.T).T

    def __call__(self, u: np.ndarray) -> np.ndarray:
        a = self.coords(u)
        if self.kind == "l1":
            return np.sum(np.abs(a), axis=-1)
        return np.linalg.norm(a, axis=-1)

    def operator_norm(self, M: np.ndarray) -> float:
        """Induced norm of the linear map M."""
        B = np.linalg.solve(self.basis, M @ self.basis)
        if self.kind == "l1":
            return float(np.max(np.sum(np.abs(B), axis=0)))
        return float(np.linalg.norm(B, 2))

    def euclidean_factors(self) -> tuple[float, float]:
        """(lo, hi) with lo |u| <= ||u|| <= hi |u|, sampled on the unit circle."""
        th = np.linspace(0.0, 2.0 * math.pi, 3601)
        vals = self(np.column_stack([np.cos(th), np.sin(th)]))
        return float(vals.min()), float(vals.max())


def _real(z: complex, scale: float) -> bool:
    return abs(z.imag) <= 1e-12 * max(1.0, scale)


def adapted_norm(A: np.ndarray, c: float) -> AdaptedNorm:
    """A norm with ||A u|| < c ||u|| for all u != 0; requires c > rho(A)."""
    A = np.asarray(A, dtype=float).reshape(2, 2)
    ev, vecs = np.linalg.eig(A)
    rho = float(np.max(np.abs(ev)))
    if not c > rho + SPECTRAL_BAND:
        raise SpectralGapTooSmall(f"c = {c} does not exceed the spectral radius {rho} by 1e-9")
    scale = max(1.0, float(np.max(np.abs(A))))
    if not (_real(ev[0], scale) and _real(ev[1], scale)):
        v = vecs[:, 0]
        v = v * np.exp(-0.5j * np.angle(np.sum(v * v)))  # makes Re v and Im v orthogonal
        basis = np.column_stack([v.real, v.imag]) / np.linalg.norm(v.real)
        return AdaptedNorm(basis, "l2", float(c))
    lam = np.real(ev)
    order = np.argsort(np.abs(lam), kind="stable")
    lam, vecs = lam[order], np.real(vecs[:, order])
    tol = 1e-9 * scale
    if abs(lam[0] - lam[1]) > tol:
        basis = vecs / np.linalg.norm(vecs, axis=0)
        return AdaptedNorm(basis, "l1", float(c))
    mu = 0.5 * (lam[0] + lam[1])
    N = A - mu * np.eye(2)
    if np.max(np.abs(N)) <= tol:
        return AdaptedNorm(np.eye(2), "l1", float(c))
    # Jordan block: N = e0 w^T with e0 the eigenvector, and N e1 = e0 for e1 = w / |w|^2
    col = int(np.argmax(np.linalg.norm(N, axis=0)))
    e0 = N[:, col] / np.linalg.norm(N[:, col])
    w = N.T @ e0
    e1 = w / (w @ w)
    K = 2.0 / (c - abs(mu))
    return AdaptedNorm(np.column_stack([K * e0, e1]), "l1", float(c), K)


@dataclass(frozen=True, eq=False)
class ConeData:
    e0: np.ndarray
    e_lambda: np.ndarray
    lam: float
    eps: float
    alpha: float
    delta: float | None = None

    @property
    def beta(self) -> float:
        """Aperture of the larger cone on which the lambda-coordinate stays large."""
        return (abs(self.lam) - 3.0 * self.eps) / (3.0 * self.eps)


def cone_aperture(lam: float, eps: float) -> float:
    return (abs(lam) + 2.0 * eps - 1.0) / (1.0 - 2.0 * eps)


def choose_eps(lam: float) -> float:
    """Largest ladder value with alpha(eps) < (|lam| - 3 eps) / (3 eps)."""
    for eps in EPS_LADDER:
        if cone_aperture(lam, eps) > 0 and cone_aperture(lam, eps) < (abs(lam) - 3 * eps) / (3 * eps):
            return eps
    raise SpectralGapTooSmall(f"no ladder value of eps is compatible with lambda = {lam}")


@dataclass(frozen=True, eq=False)
class FixedPointClass:
    point: np.ndarray  # p in P, as a unit vector of R^(m-1)
    jacobian: mp.JacobianMatrix
    rho: float
    verdict: str  # AttractingNormal | ConeCase
    norm: AdaptedNorm
    cone: ConeData | None = None
    projection_error: float = 0.0

    @property
    def eps(self) -> float:
        return self.cone.eps if self.cone is not None else 1.0 - self.norm.c


def _polar_point(f: mp.SphereMap, p) -> np.ndarray:
    p = p.coords if isinstance(p, geo.SpherePoint) else np.asarray(p, dtype=float).reshape(-1)
    if p.size == f.m + 1:
        if np.hypot(p[0], p[1]) > FIXED_TOL:
            raise NotAFixedPoint("point is not on P")
        p = p[2:]
    if p.size != f.m - 1:
        raise ValueError(f"expected a point of P in R^{f.m - 1}")
    return p / np.linalg.norm(p)


def classify_fixed_point(f: mp.SphereMap, p, d: int | None = None, h: float = mp.DEFAULT_STEP) -> FixedPointClass:
    """Attracting-normal or cone classification at a fixed point p of f|P.

    ``d`` is the transversal degree when known; the singularity of A_p is only
    demanded when |d| > 1.
    """
    p = _polar_point(f, p)
    img = mp.restrict_to_polar(f, check=False)(p[None, :])[0]
    if np.linalg.norm(img - p) >= FIXED_TOL:
        raise NotAFixedPoint(f"|f(p) - p| = {np.linalg.norm(img - p):.3g}")
    jac = mp.jacobian(mp.normal_component(f, p), h=h)
    A = jac.entries
    if d is not None and abs(d) > 1 and abs(np.linalg.det(A)) > SINGULAR_DET:
        raise NonSingularJacobian(f"det A_p = {np.linalg.det(A):.4g} with |d| = {abs(d)} > 1")
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho < 1.0 - SPECTRAL_BAND:
        return FixedPointClass(p, jac, rho, "AttractingNormal", adapted_norm(A, 0.5 * (1.0 + rho)))
    # nearest rank-one matrix; its eigenvalues are exactly {0, lam}
    U, s, Vt = np.linalg.svd(A)
    A1 = s[0] * np.outer(U[:, 0], Vt[0])
    lam = float(s[0] * (Vt[0] @ U[:, 0]))
    if abs(lam) < 1e-12:
        raise SpectralGapTooSmall("rank-one part of A_p is nilpotent although rho >= 1")
    e_lam = U[:, 0]
    e0 = Vt[1]
    eps = choose_eps(lam)
    norm = AdaptedNorm(np.column_stack([e0, e_lam]), "l1", abs(lam) + eps)
    cone = ConeData(e0, e_lam, lam, eps, cone_aperture(lam, eps))
    return FixedPointClass(p, jac, rho, "ConeCase", norm, cone, float(s[1]))


# ---------------------------------------------------------------------------
# neighbourhoods of p

def polar_mesh(p: np.ndarray, radius: float) -> np.ndarray:
    """p together with points of P at distance radius/2 and radius along each tangent axis."""
    k = p.size - 1
    if k == 0 or radius == 0.0:
        return p[None, :]
    T = geo.tangent_basis_arr(p)[0] if p.size > 1 else np.zeros((1, 0))
    pts = [p]
    for j in range(k):
        for s in (0.5, 1.0, -0.5, -1.0):
            pts.append(math.cos(s * radius) * p + math.sin(s * radius) * T[:, j])
    return geo.normalize_rows(np.array(pts))


def _disk_mesh(delta: float) -> np.ndarray:
    th = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    ring = np.column_stack([np.cos(th), np.sin(th)])
    return np.concatenate([np.zeros((1, 2)), 0.5 * delta * ring, 0.999 * delta * ring])


def _jacobians(g, pts: np.ndarray, h: float) -> np.ndarray:
    e = np.eye(2) * h
    plus = g((pts[:, None, :] + e).reshape(-1, 2)).reshape(len(pts), 2, 2)
    minus = g((pts[:, None, :] - e).reshape(-1, 2)).reshape(len(pts), 2, 2)
    return np.swapaxes((plus - minus) / (2.0 * h), 1, 2)


def gamma_estimate(f: mp.SphereMap, cls: FixedPointClass, delta: float, mesh_radius: float) -> float:
    """max over the mesh of q and v in D^2(delta) of ||Df_q|_v - Df_p|_v|| (adapted operator norm)."""
    v = _disk_mesh(delta)
    h = min(1e-6, 0.1 * delta)
    ref = _jacobians(mp.normal_component(f, cls.point), v, h)
    worst = 0.0
    for q in polar_mesh(cls.point, mesh_radius)[1:]:
        jq = _jacobians(mp.normal_component(f, q), v, h)
        for diff in jq - ref:
            worst = max(worst, cls.norm.operator_norm(diff))
    return worst


def neighborhood_radius(f: mp.SphereMap, p, cls: FixedPointClass) -> tuple[float, float]:
    """Largest tested (delta, radius of the mesh on P around p) with gamma_q < eps on the mesh."""
    if not f.c1:
        raise NotC1("neighbourhood estimate needs a C1 map")
    delta = START_RADIUS
    single = cls.point.size == 1
    while delta >= MIN_RADIUS:
        if single:
            return delta, 0.0
        r = START_RADIUS
        for _ in range(MESH_LEVELS + 1):
            if gamma_estimate(f, cls, delta, r) < cls.eps:
                return delta, r
            r *= 0.5
        delta *= 0.5
    raise RadiusCollapse(f"no admissible neighbourhood with delta >= {MIN_RADIUS}")


# ---------------------------------------------------------------------------
# sampled sector checks

@dataclass
class SectorReport:
    ok: bool
    verdict: str
    delta: float
    mesh_radius: float
    halvings: int
    n_checked: int
    failures: list = field(default_factory=list)  # (check name, q index, u)
    norm_factors: tuple = (1.0, 1.0)

    def __bool__(self):
        return self.ok

    def as_dict(self) -> dict:
        return {"ok": self.ok, "verdict": self.verdict, "delta": self.delta, "mesh_radius": self.mesh_radius,
                "halvings": self.halvings, "n_checked": self.n_checked, "n_failures": len(self.failures),
                "norm_factors": list(self.norm_factors)}


def _cone_samples(norm: AdaptedNorm, lo: float, hi: float, n: int, delta: float, rng) -> np.ndarray:
    """Vectors with lo <= |a0 / a_lam| < hi in the adapted basis, Euclidean length in (0, delta)."""
    if math.isinf(hi):
        a_lam = rng.uniform(-1.0, 1.0, n) / lo
        a = np.column_stack([np.sign(rng.uniform(-1, 1, n)), a_lam])
    else:
        ratio = rng.uniform(lo, hi, n)
        a = np.column_stack([ratio * np.sign(rng.uniform(-1, 1, n)), np.sign(rng.uniform(-1, 1, n))])
    u = a @ norm.basis.T
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = delta * np.sqrt(rng.uniform(1e-6, 1.0, n))
    return u * r[:, None]


def _line_angle(e0: np.ndarray, y: np.ndarray) -> np.ndarray:
    e = e0 / np.linalg.norm(e0)
    ny = np.linalg.norm(y, axis=1)
    cross = np.abs(e[0] * y[:, 1] - e[1] * y[:, 0])
    return np.arcsin(np.clip(cross / np.maximum(ny, 1e-300), 0.0, 1.0))


def _sector_failures(f, cls: FixedPointClass, delta: float, mesh_radius: float, n_samples: int, seed: int):
    rng = np.random.default_rng(seed)
    norm = cls.norm
    qs = polar_mesh(cls.point, mesh_radius)
    failures = []
    checked = 0
    if cls.verdict == "AttractingNormal":
        u = rng.normal(size=(n_samples, 2))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        u *= delta * np.sqrt(rng.uniform(1e-6, 1.0, n_samples))[:, None]
        nu = norm(u)
        for iq, q in enumerate(qs):
            y = mp.normal_component(f, q)(u)
            bound = (1.0 - cls.eps) * nu if iq == 0 else nu
            bad = ~(norm(y) <= bound) if iq else ~(norm(y) < bound)
            failures += [("contraction", iq, tuple(x)) for x in u[bad]]
            checked += len(u)
        return failures, checked
    cone = cls.cone
    n3 = max(1, n_samples // 3)
    outside = _cone_samples(norm, cone.alpha, math.inf, n3, delta, rng)
    inner = _cone_samples(norm, 0.0, cone.alpha, n3, delta, rng)
    middle = _cone_samples(norm, cone.alpha, cone.beta, n3, delta, rng) if cone.beta > cone.alpha else inner[:0]
    big = np.concatenate([inner, middle])
    for iq, q in enumerate(qs):
        g = mp.normal_component(f, q)
        y = g(outside)
        nu = norm(outside)
        bound = (1.0 - cone.eps) * nu if iq == 0 else nu
        bad = ~(norm(y) < bound) if iq == 0 else ~(norm(y) <= bound)
        failures += [("outside-cone contraction", iq, tuple(x)) for x in outside[bad]]
        y = g(big)
        lam_coord = np.abs(norm.coords(y)[:, 1])
        need = cone.eps * norm(big) if iq == 0 else np.zeros(len(big))
        bad = ~(lam_coord > need)
        failures += [("cone lambda-coordinate", iq, tuple(x)) for x in big[bad]]
        y = g(inner)
        bad = ~(_line_angle(cone.e0, y) > LINE_CLEARANCE)
        failures += [("image meets kernel line", iq, tuple(x)) for x in inner[bad]]
        checked += len(outside) + len(big) + len(inner)
    return failures, checked


def verify_sector_inequalities(f: mp.SphereMap, p, cls: FixedPointClass, n_samples: int = 1000,
                        delta: float | None = None, mesh_radius: float | None = None,
                        seed: int = 0) -> SectorReport:
    """Samples the contraction and cone inequalities near p, halving delta on failure."""
    if delta is None or mesh_radius is None:
        d0, r0 = neighborhood_radius(f, p, cls)
        delta = d0 if delta is None else delta
        mesh_radius = r0 if mesh_radius is None else mesh_radius
    factors = cls.norm.euclidean_factors()
    failures, checked = [], 0
    for halvings in range(HALVING_CAP + 1):
        failures, checked = _sector_failures(f, cls, delta, mesh_radius, n_samples, seed)
        if not failures:
            return SectorReport(True, cls.verdict, delta, mesh_radius, halvings, checked, [], factors)
        if halvings < HALVING_CAP:
            delta *= 0.5
    return SectorReport(False, cls.verdict, delta, mesh_radius, HALVING_CAP, checked, failures, factors)


def with_delta(cls: FixedPointClass, delta: float) -> FixedPointClass:
    if cls.cone is None:
        return cls
    return replace(cls, cone=replace(cls.cone, delta=float(delta)))
