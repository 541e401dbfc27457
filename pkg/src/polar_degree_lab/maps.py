"""Self-maps of S^m leaving the polar sphere P completely invariant.

Every evaluator is vectorised: it takes an (N, m+1) array of unit vectors and
returns an (N, m+1) array of unit vectors.  Families with closed forms carry an
:class:`ExactOracle` so numerical results can be compared with exact counts.
"""
from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import geometry as geo
from .errors import ChartDomain, EvaluationFailure, InvarianceViolated, NotC1, SpecError

DEFAULT_STEP = 1e-5
DEFAULT_NORMAL_RADIUS = 0.2


@dataclass(frozen=True)
class ExactOracle:
    """Closed-form values a family admits; any field may be unknown (None)."""

    deg: int | None = None
    deg_polar: int | None = None
    transversal: int | None = None
    fix_count: Callable[[int], int] | None = None
    fix_polar_count: Callable[[int], int] | None = None


@dataclass(frozen=True, eq=False)
class SphereMap:
    m: int
    func: Callable[[np.ndarray], np.ndarray]
    c1: bool = True
    name: str = "custom"
    params: dict = field(default_factory=dict)
    oracle: ExactOracle | None = None
    spec: str | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.m + 1:
            raise EvaluationFailure(f"expected points of R^{self.m + 1}, got shape {x.shape}")
        y = np.asarray(self.func(x), dtype=float)
        n = np.linalg.norm(y, axis=-1, keepdims=True)
        if not np.all(np.isfinite(y)) or np.any(n == 0.0):
            raise EvaluationFailure(f"{self.name}: non-finite or zero image")
        return y / n

    def __repr__(self):
        return f"SphereMap({self.spec or self.name}, m={self.m})"


@dataclass(frozen=True, eq=False)
class NormalComponentMap:
    """u -> projection to D^2 of f(u, p), for u in D^2(radius)."""

    base_point: np.ndarray
    func: Callable[[np.ndarray], np.ndarray]
    radius: float
    c1: bool = True

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.func(np.atleast_2d(np.asarray(u, dtype=float)))


@dataclass(frozen=True)
class JacobianMatrix:
    entries: np.ndarray
    base_point: np.ndarray
    step: float
    richardson_error: float

    @property
    def richardson_ok(self) -> bool:
        return self.richardson_error <= 10.0 * self.step


@dataclass
class InvarianceReport:
    ok: bool
    polar_violations: list = field(default_factory=list)
    escape_violations: list = field(default_factory=list)
    n_samples: int = 0


def eval(f: SphereMap, x: geo.SpherePoint) -> geo.SpherePoint:  # noqa: A001
    return geo.SpherePoint(f(x.coords)[0])


# ---------------------------------------------------------------------------
# model families

def _stereo_image_from_w(wp: np.ndarray, inverted: np.ndarray) -> np.ndarray:
    """Sphere point of w' (or of 1/w' where ``inverted``), given |value| <= 1."""
    a2 = np.abs(wp) ** 2
    out = np.empty(wp.shape + (3,))
    den = 1.0 + a2
    # w' itself: x = (2w', |w'|^2 - 1) / (1 + |w'|^2); for v' = 1/w' use conj(v')
    num = np.where(inverted, np.conj(wp), wp)
    out[..., 0] = 2.0 * num.real / den
    out[..., 1] = 2.0 * num.imag / den
    out[..., 2] = np.where(inverted, 1.0 - a2, a2 - 1.0) / den
    return out


def _power_s2_func(d: int) -> Callable[[np.ndarray], np.ndarray]:
    def func(x):
        zeta = x[:, 0] + 1j * x[:, 1]
        h = x[:, 2]
        south = h <= 0.0
        # c = w in the south chart, c = 1/w in the north chart; |c| <= 1
        c = np.where(south, zeta / (1.0 - np.minimum(h, 0.0)), np.conj(zeta) / (1.0 + np.maximum(h, 0.0)))
        e = np.where(south, d, -d)
        cp = c ** np.abs(e)
        return _stereo_image_from_w(cp, inverted=e < 0)

    return func


def power_s2(d: int) -> SphereMap:
    """S^2 conjugated by stereographic projection to z -> z^d, P = {0, inf}."""
    d = int(d)
    if d == 0:
        raise SpecError("power_s2 needs d != 0")
    ad = abs(d)
    oracle = ExactOracle(
        deg=ad,
        deg_polar=1 if d > 0 else -1,
        transversal=d,
        fix_count=(lambda n: ad ** n + 1) if ad >= 2 else None,
        fix_polar_count=(lambda n: 2 if d ** n > 0 else 0) if ad >= 1 else None,
    )
    return SphereMap(2, _power_s2_func(d), True, "power_s2", {"d": d}, oracle, f"family=power_s2 d={d}")


def _signed_power(z: np.ndarray, a: int) -> np.ndarray:
    return z ** a if a > 0 else np.conj(z) ** (-a)


def join_power(a: int, b: int) -> SphereMap:
    """(z, w) -> (z^a, w^b) / |(z^a, w^b)| on S^3 in C^2; P = {z = 0}.

    A negative exponent means the conjugate power, which agrees with z^a on
    the unit circle and keeps the map smooth on all of S^3.
    """
    a, b = int(a), int(b)
    if a == 0 or b == 0:
        raise SpecError("join_power needs a, b != 0")

    def func(x):
        z = _signed_power(x[:, 0] + 1j * x[:, 1], a)
        w = _signed_power(x[:, 2] + 1j * x[:, 3], b)
        return np.stack([z.real, z.imag, w.real, w.imag], axis=-1)

    def fix_count(n):
        A, B = a ** n, b ** n
        return A * B - 1

    oracle = ExactOracle(
        deg=a * b,
        deg_polar=b,
        transversal=a,
        fix_count=fix_count if a >= 2 and b >= 2 else None,
        fix_polar_count=(lambda n: abs(b ** n - 1)) if abs(b) >= 2 else None,
    )
    return SphereMap(3, func, True, "join_power", {"a": a, "b": b}, oracle, f"family=join_power a={a} b={b}")


def identity(m: int = 2) -> SphereMap:
    m = int(m)
    return SphereMap(m, lambda x: x.copy(), True, "identity", {"m": m},
                     ExactOracle(deg=1, deg_polar=1, transversal=1), f"family=identity m={m}")


def antipodal(m: int = 2) -> SphereMap:
    m = int(m)
    oracle = ExactOracle(deg=(-1) ** (m + 1), deg_polar=(-1) ** (m - 1), transversal=1)
    return SphereMap(m, lambda x: -x, True, "antipodal", {"m": m}, oracle, f"family=antipodal m={m}")


def cone_model(lam: float) -> SphereMap:
    """S^2 map with normal map (u0, u1) -> (u0^2, lam*u1) + o(|u|^2) at the south pole.

    In the stereographic coordinate w (south pole = 0) it is w -> 2 Re(w)^2 + i lam Im(w).
    The south pole is a fixed point of the restriction with A_p = diag(0, lam);
    smoothness is only claimed near that pole.
    """
    lam = float(lam)
    if lam == 0.0:
        raise SpecError("cone_model needs lam != 0")

    def func(x):
        zeta = x[:, 0] + 1j * x[:, 1]
        h = x[:, 2]
        at_north = (np.abs(zeta) < 1e-150) & (h > 0.0)
        safe = np.where(at_north, 1.0, 1.0 - h)
        w = np.where(at_north, 0.0, zeta / np.where(safe > 0, safe, 1.0))
        wp = 2.0 * w.real ** 2 + 1j * lam * w.imag
        big = np.abs(wp) > 1.0
        val = np.where(big, 1.0 / np.where(big, wp, 1.0), wp)
        out = _stereo_image_from_w(val, inverted=big)
        out[at_north] = (0.0, 0.0, 1.0)
        return out

    return SphereMap(2, func, True, "cone_model", {"lam": lam}, ExactOracle(), f"family=cone_model lam={_fmt(lam)}")


def north_south() -> SphereMap:
    """Degree-2 C0 map of S^2 whose only periodic points are the two poles.

    Angle doubling around the polar axis combined with a height map pushing
    every non-polar point strictly south.  Not C1 at the north pole.
    """

    def func(x):
        zeta = x[:, 0] + 1j * x[:, 1]
        h = np.clip(x[:, 2], -1.0, 1.0)
        r = np.abs(zeta)
        dirn = np.where(r > 0, zeta / np.where(r > 0, r, 1.0), 1.0) ** 2
        # 1 + h from r when close to the south pole, so the image stays off P
        one_plus = np.where(h < 0.0, r * r / (1.0 - np.minimum(h, 0.0)), 1.0 + h)
        one_plus_p = 0.5 * one_plus * one_plus
        hp = one_plus_p - 1.0
        rp = np.sqrt(np.clip((1.0 - hp) * one_plus_p, 0.0, None))
        z = rp * dirn
        return np.stack([z.real, z.imag, hp], axis=-1)

    oracle = ExactOracle(deg=2, deg_polar=1, transversal=2, fix_count=lambda n: 2, fix_polar_count=lambda n: 2)
    return SphereMap(2, func, False, "north_south", {}, oracle, "family=north_south")


def _bump(r: np.ndarray) -> np.ndarray:
    inside = (r > 0.1) & (r < 0.9)
    q = np.where(inside, (r - 0.1) * (0.9 - r), 1.0)
    return np.where(inside, np.exp(6.25 - 1.0 / q), 0.0)


def perturb(f: SphereMap, amplitude: float, seed: int) -> SphereMap:
    """Smooth perturbation supported where 0.1 < |(x0, x1)| < 0.9.

    The image angle around P is rotated and the (x2..xm) block rescaled by a
    positive factor, so images of S - P stay off P and the homotopy
    amplitude -> 0 runs through maps with f^-1(P) = P.
    """
    amplitude = float(amplitude)
    if not abs(amplitude) < 0.1:
        raise SpecError("perturbation amplitude must be < 0.1")
    rng = np.random.default_rng(int(seed))
    k = f.m + 1
    freq = rng.normal(size=(2, 3, k)) * 2.0
    phase = rng.uniform(0, 2 * math.pi, size=(2, 3))
    weight = rng.uniform(-1, 1, size=(2, 3)) / 3.0

    def func(x):
        y = f(x)
        b = amplitude * _bump(geo.polar_distance_arr(x))
        s = np.einsum("ij,nij->ni", weight, np.sin(np.einsum("ijk,nk->nij", freq, x) + phase))
        rot = math.pi * b * s[:, 0]
        scale = np.exp(b * s[:, 1])
        c, sn = np.cos(rot), np.sin(rot)
        out = y.copy()
        out[:, 0] = c * y[:, 0] - sn * y[:, 1]
        out[:, 1] = sn * y[:, 0] + c * y[:, 1]
        out[:, 2:] *= scale[:, None]
        return out

    oracle = None
    if f.oracle is not None:
        oracle = ExactOracle(deg=f.oracle.deg, deg_polar=f.oracle.deg_polar, transversal=f.oracle.transversal)
    spec = None
    if f.spec is not None:
        spec = canonical_spec({"family": "perturbed", "base": f.spec, "amplitude": amplitude, "seed": int(seed)})
    return SphereMap(f.m, func, f.c1, "perturbed", {"amplitude": amplitude, "seed": int(seed)}, oracle, spec)


def compose(f: SphereMap, g: SphereMap) -> SphereMap:
    """f o g."""
    if f.m != g.m:
        raise ValueError("dimension mismatch")
    oracle = None
    if f.oracle is not None and g.oracle is not None:
        def mul(a, b):
            return None if a is None or b is None else a * b
        oracle = ExactOracle(deg=mul(f.oracle.deg, g.oracle.deg),
                             deg_polar=mul(f.oracle.deg_polar, g.oracle.deg_polar),
                             transversal=mul(f.oracle.transversal, g.oracle.transversal))
    return SphereMap(f.m, lambda x: f(g(x)), f.c1 and g.c1, "compose", {}, oracle, None)


def iterate(f: SphereMap, n: int) -> SphereMap:
    n = int(n)
    if n < 1:
        raise ValueError("iterate needs n >= 1")
    if n == 1:
        return f

    def func(x):
        for _ in range(n):
            x = f(x)
        return x

    oracle = None
    if f.oracle is not None:
        o = f.oracle

        def pw(v):
            return None if v is None else v ** n

        oracle = ExactOracle(
            deg=pw(o.deg), deg_polar=pw(o.deg_polar), transversal=pw(o.transversal),
            fix_count=(lambda k: o.fix_count(n * k)) if o.fix_count else None,
            fix_polar_count=(lambda k: o.fix_polar_count(n * k)) if o.fix_polar_count else None,
        )
    spec = canonical_spec({"family": "iterate", "base": f.spec, "n": n}) if f.spec else None
    return SphereMap(f.m, func, f.c1, "iterate", {"n": n}, oracle, spec)


# ---------------------------------------------------------------------------
# structure relative to P

def validate_invariance(f: SphereMap, n_samples: int = 200, seed: int = 0) -> InvarianceReport:
    """Sampled check of f(P) in P and f(x) not in P for x close to (not on) P."""
    rng = np.random.default_rng(seed)
    k = f.m - 1
    if k == 1:
        p = np.array([[1.0], [-1.0]])
    else:
        p = geo.normalize_rows(rng.normal(size=(n_samples, k)))
    xp = geo.chart_to_sphere_arr(np.zeros((len(p), 2)), p)
    yp = f(xp)
    bad_p = geo.polar_distance_arr(yp) >= 1e-9
    report = InvarianceReport(ok=True, n_samples=len(p) + n_samples)
    report.polar_violations = [tuple(map(float, v)) for v in xp[bad_p]]

    r = 10.0 ** rng.uniform(-6, -2, size=n_samples)
    th = rng.uniform(0, 2 * math.pi, size=n_samples)
    z = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    q = p[rng.integers(len(p), size=n_samples)] if k == 1 else geo.normalize_rows(rng.normal(size=(n_samples, k)))
    xs = geo.chart_to_sphere_arr(z, q)
    ys = f(xs)
    bad_s = ~(geo.polar_distance_arr(ys) > 0.0)
    report.escape_violations = [tuple(map(float, v)) for v in xs[bad_s]]
    report.ok = not report.polar_violations and not report.escape_violations
    return report


def restrict_to_polar(f: SphereMap, check: bool = True) -> SphereMap:
    """f|P as a self-map of S^(m-2); for m = 2 a map of the 0-sphere {+1, -1}."""
    if check:
        rep = validate_invariance(f, n_samples=64)
        if rep.polar_violations:
            raise InvarianceViolated(f"f(P) not in P at {rep.polar_violations[:3]}")
    k = f.m - 2

    def func(p):
        x = geo.chart_to_sphere_arr(np.zeros((len(p), 2)), p)
        y = f(x)
        tail = y[:, 2:]
        return tail / np.linalg.norm(tail, axis=-1, keepdims=True)

    oracle = None
    if f.oracle is not None:
        oracle = ExactOracle(deg=f.oracle.deg_polar, fix_count=f.oracle.fix_polar_count)
    spec = f"restrict({f.spec})" if f.spec else None
    return SphereMap(k, func, f.c1, "restriction", {}, oracle, spec)


def normal_component(f: SphereMap, p, s: float = DEFAULT_NORMAL_RADIUS) -> NormalComponentMap:
    if not 0.0 < s < 1.0:
        raise ChartDomain("normal radius must lie in (0, 1)")
    p = np.asarray(p, dtype=float).reshape(-1)
    p = p / np.linalg.norm(p)

    def func(u):
        return f(geo.chart_to_sphere_arr(u, p))[:, :2]

    return NormalComponentMap(p, func, float(s), f.c1)


def _central_jacobian(g: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, h: float) -> np.ndarray:
    k = x0.size
    e = np.eye(k) * h
    plus = g(x0[None, :] + e)
    minus = g(x0[None, :] - e)
    return ((plus - minus) / (2.0 * h)).T


def _product_chart_maps(f: SphereMap, x: np.ndarray):
    """Local product coordinates (z, s) around x and around f(x)."""
    _, p = geo.sphere_to_chart_arr(x)
    p = p[0]
    bp = geo.tangent_basis_arr(p)[0] if p.size > 1 else np.zeros((p.size, 0))
    y = f(x[None, :])[0]
    _, q = geo.sphere_to_chart_arr(y)
    q = q[0]
    bq = geo.tangent_basis_arr(q)[0] if q.size > 1 else np.zeros((q.size, 0))

    def g(coords):
        z = coords[:, :2]
        s = coords[:, 2:]
        pp = p[None, :] + s @ bp.T
        img = f(geo.chart_to_sphere_arr(z, pp))
        zi, qi = geo.sphere_to_chart_arr(img)
        si = (qi @ bq) / (qi @ q)[:, None]
        return np.concatenate([zi, si], axis=-1)

    z0 = x[:2]
    return g, np.concatenate([z0, np.zeros(f.m - 2)])


def jacobian(f, x=None, h: float = DEFAULT_STEP) -> JacobianMatrix:
    """Central finite-difference Jacobian.

    For a :class:`NormalComponentMap` the derivative is taken at ``x`` in D^2
    (default the origin).  For a :class:`SphereMap` it is taken in product
    coordinates (normal disk first, then P), so at p in Fix(f|P) the result is
    block lower triangular with A_p in the top-left corner.
    """
    if not getattr(f, "c1", True):
        raise NotC1("Jacobian requested for a map flagged C0 only")
    if isinstance(f, NormalComponentMap):
        x0 = np.zeros(2) if x is None else np.asarray(x, dtype=float).reshape(-1)
        g = f
    else:
        pt = x.coords if isinstance(x, geo.SpherePoint) else np.asarray(x, dtype=float).reshape(-1)
        g, x0 = _product_chart_maps(f, pt)
    j1 = _central_jacobian(g, x0, h)
    j2 = _central_jacobian(g, x0, h / 2.0)
    return JacobianMatrix(j2, x0, h, float(np.max(np.abs(j1 - j2))))


# ---------------------------------------------------------------------------
# specification grammar

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_spec(text: str) -> dict:
    try:
        tokens = shlex.split(text)
    except ValueError as exc:
        raise SpecError(f"cannot tokenize map spec: {exc}") from None
    out: dict = {}
    for tok in tokens:
        if "=" not in tok:
            raise SpecError(f"expected key=value, got {tok!r}")
        key, _, val = tok.partition("=")
        if not key or key in out:
            raise SpecError(f"empty or duplicate key in {tok!r}")
        out[key] = val
    if "family" not in out:
        raise SpecError("map spec needs family=<name>")
    return out


def canonical_spec(fields: dict) -> str:
    parts = [f"family={fields['family']}"]
    for key in sorted(k for k in fields if k != "family"):
        val = _fmt(fields[key])
        parts.append(f"{key}={shlex.quote(val) if any(c.isspace() for c in val) else val}")
    return " ".join(parts)


def _int(fields, key, default=None):
    if key not in fields:
        if default is None:
            raise SpecError(f"missing parameter {key}")
        return default
    try:
        return int(fields[key])
    except ValueError:
        raise SpecError(f"parameter {key} must be an integer") from None


def _float(fields, key):
    if key not in fields:
        raise SpecError(f"missing parameter {key}")
    try:
        return float(fields[key])
    except ValueError:
        raise SpecError(f"parameter {key} must be a real number") from None


_ALLOWED = {
    "power_s2": {"d"},
    "join_power": {"a", "b"},
    "identity": {"m"},
    "antipodal": {"m"},
    "cone_model": {"lam"},
    "north_south": set(),
    "perturbed": {"base", "amplitude", "seed"},
    "iterate": {"base", "n"},
}


def build_map(spec: str | dict) -> SphereMap:
    """Build a map from ``family=<name> key=value ...``."""
    fields = parse_spec(spec) if isinstance(spec, str) else dict(spec)
    fam = fields["family"]
    if fam not in _ALLOWED:
        raise SpecError(f"unknown family {fam!r}; known: {', '.join(sorted(_ALLOWED))}")
    extra = set(fields) - _ALLOWED[fam] - {"family"}
    if extra:
        raise SpecError(f"unexpected parameters for {fam}: {sorted(extra)}")
    if fam == "power_s2":
        f = power_s2(_int(fields, "d"))
    elif fam == "join_power":
        f = join_power(_int(fields, "a"), _int(fields, "b"))
    elif fam == "identity":
        f = identity(_int(fields, "m", 2))
    elif fam == "antipodal":
        f = antipodal(_int(fields, "m", 2))
    elif fam == "cone_model":
        f = cone_model(_float(fields, "lam"))
    elif fam == "north_south":
        f = north_south()
    elif fam == "perturbed":
        if "base" not in fields:
            raise SpecError("perturbed needs base=<spec>")
        f = perturb(build_map(fields["base"]), _float(fields, "amplitude"), _int(fields, "seed", 0))
    else:
        if "base" not in fields:
            raise SpecError("iterate needs base=<spec>")
        f = iterate(build_map(fields["base"]), _int(fields, "n"))
    if f.m < 2:
        raise SpecError("dimension m must be >= 2")
    return f


def with_spec(f: SphereMap, spec: str) -> SphereMap:
    return replace(f, spec=spec)
