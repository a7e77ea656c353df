"""Command-line front end: curvature reports, verification suites, convergence studies."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .adm import (
    adm_split,
    energy_density,
    gw_trace_check,
    hamiltonian_residual,
    lefloch_residual,
    einstein_to_lefloch_factor,
    normal_energy,
)
from .catalog import (
    FAMILIES,
    KasnerParams,
    ParameterError,
    T2ModelParams,
    family,
    kasner,
    kasner_sphere_point,
    parse_metric_file,
    t2_limit,
)
from .checks import MODES, CheckResult, check_zero, cross_validate, metric_sample_points, nonzero_entries
from .expr import EvaluationError, Expr, ZERO, evaluate, simplify, to_string
from .geometry import (
    GeometryError,
    Metric,
    christoffel,
    contracted_bianchi,
    curvature_norm,
    einstein_tensor,
    ricci,
    riemann,
    scalar_curvature,
)
from .rescaling import RescalingError, kasner_plan, proper_time_estimate, pullback, t2_convergence

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3
SCHEMA = 1


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# JSON with 17 significant digits


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    text = "%.17g" % x
    if all(ch not in text for ch in ".en"):
        text += ".0"
    return text


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: floats as %.17g, NaN/inf as null, Exprs as strings."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, Expr):
        return json.dumps(to_string(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_output(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    command: str
    metric: Optional[str] = None
    p: Optional[tuple] = None
    t2: T2ModelParams = field(default_factory=T2ModelParams)
    ti: tuple = (1e2, 1e4, 1e6, 1e8)
    grid: int = 9
    j: int = 2
    mode: str = "auto"
    out: Optional[str] = None
    suite: Optional[str] = None
    files: tuple = ()


def _split_numbers(text: str, what: str) -> List[str]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"--{what} needs a comma-separated list")
    return items


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(ns.command)
    cfg.metric = getattr(ns, "metric", None)
    cfg.mode = getattr(ns, "mode", "auto")
    cfg.out = getattr(ns, "out", None)
    cfg.suite = getattr(ns, "suite", None)
    cfg.files = tuple(getattr(ns, "files", ()) or ())
    if getattr(ns, "p", None):
        cfg.p = tuple(_split_numbers(ns.p, "p"))
    kw = {}
    for flag, key in (("K", "K"), ("CU", "C_U"), ("Cinf", "C_inf"), ("Lprofile", "L"), ("Gprofile", "G")):
        val = getattr(ns, flag, None)
        if val is not None:
            kw[key] = val
    try:
        cfg.t2 = T2ModelParams(**kw)
        cfg.t2.validate()
    except (ParameterError, EvaluationError) as exc:
        raise ConfigError(str(exc)) from exc
    if getattr(ns, "ti", None):
        try:
            cfg.ti = tuple(float(s) for s in _split_numbers(ns.ti, "ti"))
        except ValueError as exc:
            raise ConfigError(f"bad --ti: {exc}") from exc
        if any(b <= a for a, b in zip(cfg.ti, cfg.ti[1:])):
            raise ConfigError("--ti values must be increasing")
    if getattr(ns, "grid", None) is not None:
        if ns.grid < 2:
            raise ConfigError("--grid needs at least 2 points per axis")
        cfg.grid = ns.grid
    if getattr(ns, "j", None) is not None:
        if ns.j < 1:
            raise ConfigError("--j must be >= 1")
        cfg.j = ns.j
    if cfg.mode not in MODES:
        raise ConfigError(f"--mode must be one of {MODES}")
    return cfg


def build_metric(cfg: RunConfig, default: str = "kasner") -> Metric:
    name = cfg.metric or default
    try:
        if name in FAMILIES:
            if name == "kasner":
                return kasner(KasnerParams(cfg.p)) if cfg.p else family("kasner")
            if cfg.p:
                raise ConfigError("--p only applies to --metric kasner")
            return family(name, params=cfg.t2)
        if os.path.isfile(name):
            with open(name, encoding="utf-8") as fh:
                return parse_metric_file(fh.read())
    except (ParameterError, GeometryError, EvaluationError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown metric {name!r}; use one of {FAMILIES} or a metric file")


# --------------------------------------------------------------------------
# commands


def _max_abs(exprs: Sequence[Expr], g: Metric) -> float:
    from .expr import compile_many

    exprs = [e for e in exprs if e != ZERO]
    if not exprs:
        return 0.0
    pts = metric_sample_points(g, 10)
    names = sorted(pts[0])
    fn = compile_many(exprs, names)
    vals = fn(*[np.array([p[n] for p in pts]) for n in names])
    return float(np.max(np.abs(vals)))


def cmd_curvature(cfg: RunConfig) -> int:
    g = build_metric(cfg)
    gam, rie, ric, G = christoffel(g), riemann(g), ricci(g), einstein_tensor(g)
    R = scalar_curvature(g)
    pt = g.chart.sample_points(1, seed=3)[0]
    report = {
        "schema": SCHEMA,
        "command": "curvature",
        "metric": g.name,
        "chart": list(g.chart.names),
        "parameters": dict(sorted(g.defaults.items())),
        "metric_components": g.as_tensor().component_dict(),
        "christoffel": gam.component_dict(),
        "riemann": rie.component_dict(),
        "ricci": ric.component_dict(),
        "scalar_curvature": R,
        "einstein": G.component_dict(),
        "ricci_max_abs": _max_abs([ric[i] for i in ric.indices()], g),
        "riemann_nonzero": len(rie.nonzero()),
        "curvature_norm": {"point": pt, "value": curvature_norm(g, pt)} if g.signature == "lorentzian" else None,
    }
    write_output(to_json(report) + "\n", cfg.out)
    return EXIT_OK


def _pattern_check(name: str, got: Sequence, want: Sequence, modes: Sequence[str] = ("symbolic",)) -> CheckResult:
    ok = sorted(got) == sorted(want)
    mode = "numeric" if "numeric" in modes else "symbolic"
    return CheckResult(name, ok, mode, 0.0 if ok else 1.0, f"nonzero={[list(k) for k in sorted(got)]}")


def _positive_check(name: str, expr: Expr, points: Sequence[Dict[str, float]]) -> CheckResult:
    vals = [evaluate(expr, p) for p in points]
    lo = min(vals)
    return CheckResult(name, lo > 0, "numeric", lo, "minimum over sample points")


def suite_erratum(cfg: RunConfig) -> List[CheckResult]:
    g = t2_limit(cfg.t2)
    pts = metric_sample_points(g)
    G = einstein_tensor(g)
    nz, nz_modes = nonzero_entries({idx: G[idx] for idx in G.nonzero() if idx[0] <= idx[1]}, pts, cfg.mode)
    rep = gw_trace_check(g, mode=cfg.mode)
    t00 = rep.frame_components.get((0, 0), ZERO)
    tth = rep.frame_components.get((1, 1), ZERO)
    return [
        check_zero("scalar_curvature", [scalar_curvature(g)], pts, cfg.mode),
        _pattern_check("einstein_nonzero_components", nz, [(0, 0), (1, 1)], nz_modes),
        check_zero("stress_energy_trace", [rep.trace], pts, cfg.mode),
        _pattern_check("frame_nonzero_components", rep.nonzero, [(0, 0), (1, 1)], rep.modes),
        check_zero("frame_T_thth_minus_T00", [simplify(tth - t00)], pts, cfg.mode),
        _positive_check("frame_T00_positive", t00, pts),
        check_zero("contracted_bianchi", contracted_bianchi(g), pts, cfg.mode),
    ]


def suite_kasner(cfg: RunConfig) -> List[CheckResult]:
    g = kasner(KasnerParams(cfg.p)) if cfg.p else family("kasner")
    pts = metric_sample_points(g)
    ric = ricci(g)
    s = adm_split(g)
    hubble = simplify(g.chart.symbols[0] + Fraction(g.dim - 1) / s.H)
    return [
        check_zero("ricci", [ric[i] for i in ric.indices()], pts, cfg.mode),
        check_zero("hamiltonian", [hamiltonian_residual(s)], pts, cfg.mode),
        check_zero("hubble_time", [hubble], pts, cfg.mode),
        check_zero("contracted_bianchi", contracted_bianchi(g), pts, cfg.mode),
    ]


def suite_kasner_pullback(cfg: RunConfig) -> List[CheckResult]:
    params = KasnerParams(cfg.p) if cfg.p else KasnerParams(("2/3", "2/3", "-1/3"))
    g = kasner(params)
    plan = kasner_plan(params, cfg.ti)
    pulled = pullback(g, plan.target, plan.mapping, plan.scale)
    ref = kasner(params)
    n = g.dim
    diffs = [simplify(pulled[a, b] - _rename(ref, plan)[a][b]) for a in range(n) for b in range(n)]
    pts = [dict(p, t_i=1e3) for p in plan.target.sample_points(NPTS)]
    return [check_zero("pullback_equals_kasner", diffs, pts, cfg.mode)]


NPTS = 20


def _rename(g: Metric, plan) -> List[List[Expr]]:
    from .expr import substitute

    u = plan.target.symbol("u")
    return [[substitute(g[a, b], {"t": u}) for b in range(g.dim)] for a in range(g.dim)]


def suite_lefloch(cfg: RunConfig) -> List[CheckResult]:
    res = lefloch_residual(cfg.t2)
    sym = lefloch_residual(T2ModelParams.symbolic())
    pts = [{"Rhat": r, **cfg.t2.binding()} for r in (0.5, 1.0, 2.0)]
    worst = max(abs(evaluate(res.lhs, p) * p["Rhat"] - 1.25) for p in pts)
    factor = einstein_to_lefloch_factor(cfg.t2)
    return [
        check_zero("lefloch_difference", [res.difference], pts, cfg.mode),
        check_zero("lefloch_difference_symbolic_constants", [sym.difference], [dict(p, K=1.3, C_U=0.2, C_inf=0.7) for p in pts], cfg.mode),
        CheckResult("lefloch_lhs_times_R", worst <= 1e-12, "numeric", worst),
        CheckResult("einstein_RR_over_lhs", True, "symbolic", 0.0, to_string(factor)),
    ]


def suite_constraints(cfg: RunConfig) -> List[CheckResult]:
    out = []
    for s in (Fraction(1, 2), Fraction(2), Fraction(3, 5), Fraction(5, 7), Fraction(4)):
        g = kasner(KasnerParams(kasner_sphere_point(s)))
        out.append(check_zero(f"hamiltonian_kasner_s={s}", [hamiltonian_residual(adm_split(g))], metric_sample_points(g), cfg.mode))
    gu = t2_limit(cfg.t2, chart="u")
    rho = energy_density(adm_split(gu))
    pts = [{"u": u, **cfg.t2.binding()} for u in (0.5, 1.0, 2.0, 10.0)]
    out.append(_positive_check("energy_density_positive", rho, pts))
    scaled = [evaluate(rho, p) * p["u"] ** 2 for p in pts]
    spread = (max(scaled) - min(scaled)) / max(abs(v) for v in scaled)
    out.append(CheckResult("u2_energy_density_constant", spread <= 1e-9, "numeric", spread))
    out.append(check_zero("gauss_consistency", [simplify(rho - normal_energy(gu))], metric_sample_points(gu), cfg.mode))
    return out


def suite_crossval(cfg: RunConfig) -> List[CheckResult]:
    out = []
    for name, g in (("kasner", family("kasner")), ("t2_limit", t2_limit(cfg.t2))):
        cv = cross_validate(g)
        out.append(CheckResult(f"finite_difference_{name}", cv.passed(1e-6), "numeric", cv.max_relative_error))
    return out


def suite_proper_time(cfg: RunConfig) -> List[CheckResult]:
    b = cfg.t2.binding()
    k = abs(float(evaluate(simplify(cfg.t2.k), b)))
    cu = float(evaluate(simplify(cfg.t2.c_u), b))
    target = math.exp(-cu) / (2 * k)
    out = []
    for R, tol in ((100.0, 1e-2), (1e4, 1e-4)):
        rel = abs(proper_time_estimate(cfg.t2, 1.0, R) / R**2 - target) / target
        out.append(CheckResult(f"proper_time_R={R:g}", rel <= tol, "numeric", rel))
    return out


SUITES = {
    "erratum": (suite_erratum, ("t2_limit",)),
    "kasner": (suite_kasner, ("kasner",)),
    "kasner-pullback": (suite_kasner_pullback, ("kasner",)),
    "lefloch": (suite_lefloch, ("t2_limit",)),
    "constraints": (suite_constraints, ("kasner", "t2_limit")),
    "crossval": (suite_crossval, ("kasner", "t2_limit")),
    "proper-time": (suite_proper_time, ("t2_model",)),
}


def cmd_verify(cfg: RunConfig) -> int:
    names = list(SUITES) if cfg.suite in (None, "all") else [cfg.suite]
    if cfg.metric is not None:
        for s in names:
            if cfg.metric not in SUITES[s][1]:
                raise ConfigError(f"suite {s!r} runs on {SUITES[s][1]}, not {cfg.metric!r}")
    checks: List[CheckResult] = []
    groups = []
    for s in names:
        res = SUITES[s][0](cfg)
        groups.append({"suite": s, "passed": all(c.passed for c in res), "checks": [c.to_dict() for c in res]})
        checks += res
    report = {
        "schema": SCHEMA,
        "command": "verify",
        "mode": cfg.mode,
        "passed": all(c.passed for c in checks),
        "suites": groups,
    }
    write_output(to_json(report) + "\n", cfg.out)
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_converge(cfg: RunConfig) -> int:
    if cfg.metric not in (None, "t2_model"):
        raise ConfigError("converge runs the T2 model family (--metric t2_model)")
    if len(cfg.ti) < 4:
        raise ConfigError(f"a rate fit needs at least 4 --ti values, got {len(cfg.ti)}")
    try:
        rep = t2_convergence(cfg.t2, cfg.ti, cfg.j, cfg.grid)
    except RescalingError as exc:
        raise ConfigError(str(exc)) from exc
    doc = {"schema": SCHEMA, "command": "converge", "parameters": _t2_dict(cfg.t2), **rep.to_dict()}
    if cfg.out is None or cfg.out == "-":
        sys.stdout.write(rep.to_csv())
        sys.stdout.write(to_json(doc) + "\n")
    else:
        stem = cfg.out[:-5] if cfg.out.endswith(".json") else cfg.out
        write_output(rep.to_csv(), stem + ".csv")
        write_output(to_json(doc) + "\n", stem + ".json")
    return EXIT_OK


def _t2_dict(p: T2ModelParams) -> Dict[str, str]:
    return {
        "K": to_string(p.k),
        "C_U": to_string(p.c_u),
        "C_inf": to_string(p.c_inf),
        "L": to_string(p.l_profile),
        "G": to_string(p.g_profile),
    }


def cmd_report(cfg: RunConfig) -> int:
    """Summarise existing JSON reports: one line per check, exit 1 if any failed."""
    if not cfg.files:
        raise ConfigError("report needs at least one JSON file")
    lines, failed = [], False
    for path in cfg.files:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}") from exc
        if doc.get("schema") != SCHEMA:
            raise ConfigError(f"{path}: unsupported schema {doc.get('schema')!r}")
        cmd = doc.get("command")
        if cmd == "verify":
            for grp in doc.get("suites", []):
                for c in grp.get("checks", []):
                    failed |= not c["passed"]
                    lines.append(f"{path}\t{grp['suite']}\t{c['name']}\t{'PASS' if c['passed'] else 'FAIL'}\t{c['mode']}\t{c['residual']}")
        elif cmd == "converge":
            fit = doc.get("fit", {})
            lines.append(f"{path}\tconverge\tslope\t{fit.get('slope')}\tci95={fit.get('slope_ci95')}")
        elif cmd == "curvature":
            lines.append(f"{path}\tcurvature\t{doc.get('metric')}\tricci_max_abs={doc.get('ricci_max_abs')}")
        else:
            raise ConfigError(f"{path}: unknown report command {cmd!r}")
    write_output("\n".join(lines) + "\n", cfg.out)
    return EXIT_FAILED if failed else EXIT_OK


COMMANDS = {"curvature": cmd_curvature, "verify": cmd_verify, "converge": cmd_converge, "report": cmd_report}


def _add_family_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", help=f"family name ({', '.join(FAMILIES)}) or metric definition file")
    p.add_argument("--p", help="Kasner exponents, e.g. 2/3,2/3,-1/3")
    p.add_argument("--K", help="twist constant (default 1)")
    p.add_argument("--CU", help="constant C_U (default 0)")
    p.add_argument("--Cinf", help="constant C_inf (default 5/4)")
    p.add_argument("--Lprofile", help="L(theta) expression (default 1)")
    p.add_argument("--Gprofile", help="G(theta) expression (default 0)")
    p.add_argument("--mode", default="auto", choices=MODES, help="verification mode")
    p.add_argument("--out", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="einstein-limits", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("curvature", help="curvature tensors of a metric")
    _add_family_flags(p)
    p = sub.add_parser("verify", help="run verification suites")
    _add_family_flags(p)
    p.add_argument("--suite", default="all", choices=["all"] + list(SUITES))
    p.add_argument("--ti", help="basepoint times for pullback checks")
    p = sub.add_parser("converge", help="type-III convergence study of the T2 model")
    _add_family_flags(p)
    p.add_argument("--ti", help="basepoint times, e.g. 1e2,1e4,1e6,1e8")
    p.add_argument("--grid", type=int, help="grid points per axis (default 9)")
    p.add_argument("--j", type=int, help="compact-set index (default 2)")
    p = sub.add_parser("report", help="summarise JSON reports")
    p.add_argument("files", nargs="*")
    p.add_argument("--out", help="output path (default stdout)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"einstein-limits: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, RescalingError) as exc:
        print(f"einstein-limits: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, EvaluationError, ArithmeticError, FloatingPointError, ValueError) as exc:
        print(f"einstein-limits: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
