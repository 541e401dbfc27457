"""Command-line front end: ``polar-degree-lab <command> --map SPEC ...``.

Exit codes: 0 success, 1 success with a failed verdict, 2 usage or spec
error, 3 computation error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import acceptance, census, lifts, local
from . import maps as mp
from .degree import check_decomposition, transversal_degree
from .errors import NotC1, PolarLabError, SpecError
from .fixedpoints import polar_fixed_points

SCHEMA = "polar-degree-lab/1"
COMMANDS = ("degree", "transversal", "census", "lifts", "classify", "verify")
CONFIG_KEYS = {"nmax": int, "delta": float, "out": str, "seed": int, "jobs": int}


@dataclass
class RunConfig:
    command: str
    spec: str | None
    n_max: int
    delta: float
    out: str
    seed: int
    jobs: int


class UsageError(Exception):
    pass


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return float(f"{v:.12g}")
    return obj


def read_config(path: str) -> tuple[dict, dict]:
    """Config file: ``key=value`` tokens; map fields and command defaults share one grammar."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = " ".join(line.split("#", 1)[0] for line in fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    fields = mp.parse_spec(text)
    defaults = {}
    for key, cast in CONFIG_KEYS.items():
        if key in fields:
            try:
                defaults[key] = cast(fields.pop(key))
            except ValueError as exc:
                raise UsageError(f"bad value for {key} in config") from exc
    return fields, defaults


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polar-degree-lab",
                                description="Degrees, lifts and periodic points of sphere maps with an invariant polar sphere.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--map", dest="spec", help='map spec, e.g. "family=power_s2 d=2"')
    p.add_argument("--config", help="file with key=value map fields and defaults")
    p.add_argument("--nmax", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--out", choices=("json", "csv", "table"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    fields, defaults = ({}, {})
    if args.config:
        fields, defaults = read_config(args.config)
    spec = args.spec
    if spec is None and fields:
        spec = mp.canonical_spec(fields)
    elif spec is not None and fields:
        raise UsageError("give the map either with --map or in the config file, not both")

    def pick(name, key, fallback):
        value = getattr(args, name)
        return value if value is not None else defaults.get(key, fallback)

    cfg = RunConfig(args.command, spec, pick("nmax", "nmax", 6), pick("delta", "delta", 0.1),
                    pick("out", "out", "json"), pick("seed", "seed", 0), pick("jobs", "jobs", 1))
    if cfg.out not in ("json", "csv", "table"):
        raise UsageError(f"unknown output format {cfg.out}")
    if cfg.command != "verify" and not cfg.spec:
        raise UsageError(f"{cfg.command} needs --map or --config")
    if cfg.command == "census" and not 1 <= cfg.n_max <= census.N_MAX_CAP:
        raise UsageError(f"--nmax must lie in 1..{census.N_MAX_CAP}")
    if cfg.command == "lifts" and not 0.0 < cfg.delta < 0.5:
        raise UsageError("--delta must lie in (0, 0.5)")
    if cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return cfg


# ---------------------------------------------------------------------------
# commands; each returns (result dict, verdict ok, table rows)

def cmd_degree(f: mp.SphereMap, cfg: RunConfig):
    rep = check_decomposition(f, seed=cfg.seed, jobs=cfg.jobs).as_dict()
    return rep, rep["decomposition_ok"], [(k, rep[k]) for k in rep]


def cmd_transversal(f: mp.SphereMap, cfg: RunConfig):
    d = transversal_degree(f, seed=cfg.seed)
    return {"transversal": d}, True, [("transversal", d)]


def cmd_census(f: mp.SphereMap, cfg: RunConfig):
    rep = census.growth_report(f, cfg.n_max, seed=cfg.seed, jobs=cfg.jobs)
    summary = census.check_growth_bounds(rep)
    result = rep.as_dict()
    result["summary"] = summary.as_dict()
    return result, summary.passed, None


def cmd_lifts(f: mp.SphereMap, cfg: RunConfig):
    rep = lifts.count_fixed_point_free_lifts(f, cfg.delta, jobs=cfg.jobs)
    result = rep.as_dict()
    result["note"] = "absence of fixed points is only certified inside each box"
    rows = [(s.k, s.box.half_length, s.certificate.degree, len(s.records)) for s in rep.searches]
    return result, rep.verdict and bool(rep.nielsen), rows


def _polar_points(f: mp.SphereMap, cfg: RunConfig) -> list[np.ndarray]:
    g = mp.restrict_to_polar(f)
    found = polar_fixed_points(g, seed=cfg.seed, jobs=cfg.jobs)
    if g.m == 0:
        return [np.array([float(v)]) for v in found]
    if g.m == 1:
        return [np.array([math.cos(a), math.sin(a)]) for a in found]
    return [r.point for r in found]


def cmd_classify(f: mp.SphereMap, cfg: RunConfig):
    if not f.c1:
        raise NotC1("classification needs a C1 map")
    d = transversal_degree(f, seed=cfg.seed)
    records = []
    ok = True
    for p in _polar_points(f, cfg):
        cls = local.classify_fixed_point(f, p, d)
        rep = local.verify_sector_inequalities(f, p, cls, seed=cfg.seed)
        ok &= rep.ok
        rec = {"point": p, "rho": cls.rho, "verdict": cls.verdict, "norm": cls.norm.kind,
               "sector": rep.as_dict()}
        if cls.cone is not None:
            rec["cone"] = {"lambda": cls.cone.lam, "eps": cls.cone.eps, "alpha": cls.cone.alpha,
                           "projection_error": cls.projection_error}
        records.append(rec)
    rows = [(np.round(r["point"], 6).tolist(), r["verdict"], r["rho"], r["sector"]["delta"]) for r in records]
    return {"transversal": d, "fixed_points": records}, ok, rows


def cmd_verify(cfg: RunConfig):
    results = acceptance.run_all(seed=cfg.seed, jobs=cfg.jobs)
    ok = all(r.passed for r in results)
    rows = [(r.number, "pass" if r.passed else "fail", r.title) for r in results]
    return {"criteria": [r.as_dict() for r in results], "passed": ok}, ok, rows


# ---------------------------------------------------------------------------
# rendering

def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if v is None:
        return "-"
    return str(v)


def _census_rows(result: dict) -> tuple[list[str], list[list]]:
    header = ["n", "fix", "fix_P", "bound", "ok", "growth"]
    rows = []
    for r in result["rows"]:
        flagged = r["continuum"] or r["error"] is not None
        rows.append([r["n"], "~" if flagged else r["fix"], "~" if flagged else r["fix_P"], r["bound"],
                     "~" if r["ok"] is None else ("ok" if r["ok"] else "FAIL"), r["growth"]])
    return header, rows


def render(cfg: RunConfig, result: dict, table_rows) -> str:
    if cfg.out == "json":
        doc = {"schema": SCHEMA, "command": cfg.command, "map": cfg.spec, "seed": cfg.seed, "result": result}
        return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
    if cfg.command == "census":
        header, rows = _census_rows(_clean(result))
    else:
        header = {"degree": ["field", "value"], "transversal": ["field", "value"],
                  "lifts": ["k", "half_length", "degree", "fixed_points"],
                  "classify": ["point", "verdict", "rho", "delta"],
                  "verify": ["criterion", "verdict", "title"]}[cfg.command]
        rows = [list(r) for r in table_rows]
    if cfg.out == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows([[_fmt(v) for v in r] for r in rows])
        return buf.getvalue()
    cells = [header] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(str(row[i])) for row in cells) for i in range(len(header))]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def run(argv: list[str] | None = None) -> tuple[int, str]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), ""
    try:
        cfg = resolve_config(args)
        f = None
        if cfg.command != "verify":
            f = mp.build_map(cfg.spec)
            cfg.spec = f.spec or cfg.spec
    except (UsageError, SpecError) as exc:
        return 2, f"error: {exc}\n"
    try:
        if cfg.command == "verify":
            result, ok, rows = cmd_verify(cfg)
        else:
            handler = {"degree": cmd_degree, "transversal": cmd_transversal, "census": cmd_census,
                       "lifts": cmd_lifts, "classify": cmd_classify}[cfg.command]
            result, ok, rows = handler(f, cfg)
    except (PolarLabError, ValueError) as exc:
        return 3, f"error: {type(exc).__name__}: {exc}\n"
    return (0 if ok else 1), render(cfg, result, rows)


def main(argv: list[str] | None = None) -> int:
    code, text = run(argv)
    stream = sys.stdout if code in (0, 1) else sys.stderr
    stream.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
