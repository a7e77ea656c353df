"""Rescaling plans, exact pullbacks, C0 distances and convergence-rate fits."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, stats

from .catalog import (
    LIMIT_U_CHART,
    MODEL_CHART,
    THETA,
    KasnerParams,
    ParameterError,
    T2ModelParams,
    kasner,
    t2_limit,
)
from .expr import (
    ZERO,
    Add,
    Const,
    Expr,
    Mul,
    Parameter,
    compile_many,
    differentiate,
    evaluate,
    lift,
    simplify,
    substitute,
)
from .geometry import Chart, Metric, _determinant, curvature_norm

T_I = Parameter("t_i", positive=True)
C_I = Parameter("c_i", positive=True)
THREADS_ENV = "EINSTEIN_LIMITS_THREADS"


class RescalingError(ValueError):
    pass


def thread_count(requested: Optional[int] = None) -> int:
    """Worker count: ``requested`` capped by EINSTEIN_LIMITS_THREADS (default 1)."""
    cap = os.environ.get(THREADS_ENV)
    try:
        cap_n = max(1, int(cap)) if cap else None
    except ValueError:
        raise RescalingError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    n = requested if requested is not None else (cap_n or 1)
    return max(1, min(n, cap_n) if cap_n else n)


# --------------------------------------------------------------------------
# pullback


def jacobian(old_chart: Chart, new_chart: Chart, mapping: Mapping[str, Expr]) -> List[List[Expr]]:
    """J[mu][a] = d old^mu / d new^a."""
    exprs = _full_mapping(old_chart, new_chart, mapping)
    syms = new_chart.symbols
    return [[differentiate(exprs[mu], s) for s in syms] for mu in old_chart.names]


def _full_mapping(old_chart: Chart, new_chart: Chart, mapping: Mapping[str, Expr]) -> Dict[str, Expr]:
    out = {}
    for name in old_chart.names:
        if name in mapping:
            out[name] = lift(mapping[name])
        elif name in new_chart.names:
            out[name] = new_chart.symbol(name)
        else:
            raise RescalingError(f"map gives no expression for old coordinate {name!r}")
    unknown = set(mapping) - set(old_chart.names)
    if unknown:
        raise RescalingError(f"map names {sorted(unknown)} are not coordinates of the source chart")
    return out


def pullback(g: Metric, new_chart: Chart, mapping: Mapping[str, Expr], scale=1, defaults=None) -> Metric:
    """scale * J^T g(map) J on ``new_chart``.

    ``mapping`` sends each old coordinate name to an expression in the new
    coordinates (and parameters); old coordinates that also name a new
    coordinate may be omitted and map identically.
    """
    full = _full_mapping(g.chart, new_chart, mapping)
    jac = jacobian(g.chart, new_chart, mapping)
    if simplify(_determinant(jac)) == ZERO:
        raise RescalingError("coordinate map has a singular Jacobian")
    scale = lift(scale)
    n, m = g.dim, new_chart.dim
    moved = [[substitute(g[mu, nu], full) for nu in range(n)] for mu in range(n)]
    comps = [[ZERO] * m for _ in range(m)]
    for a in range(m):
        for b in range(a, m):
            terms = []
            for mu in range(n):
                if jac[mu][a] == ZERO:
                    continue
                for nu in range(n):
                    if jac[nu][b] == ZERO or moved[mu][nu] == ZERO:
                        continue
                    terms.append(Mul((jac[mu][a], jac[nu][b], moved[mu][nu])))
            if terms:
                val = simplify(Mul((scale, terms[0] if len(terms) == 1 else Add(terms))))
                comps[a][b] = comps[b][a] = val
    merged = dict(g.defaults)
    merged.update(defaults or {})
    return Metric(new_chart, comps, merged, signature=g.signature, name=g.name)


# --------------------------------------------------------------------------
# sampling boxes and distances


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with a uniform grid of ``points`` nodes per axis."""

    intervals: Tuple[Tuple[str, float, float], ...]
    points: int = 9

    def __post_init__(self):
        if self.points < 2:
            raise RescalingError("grid needs at least 2 points per axis")

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(i[0] for i in self.intervals)

    def axes(self) -> List[np.ndarray]:
        return [np.linspace(lo, hi, self.points) for _, lo, hi in self.intervals]

    def grid(self) -> Dict[str, np.ndarray]:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return {n: m.ravel() for n, m in zip(self.names, mesh)}

    def spec(self) -> Dict[str, object]:
        return {"intervals": [list(i) for i in self.intervals], "points_per_axis": self.points}


def _eval_components(exprs: Sequence[Expr], grid: Mapping[str, np.ndarray], extra: Mapping[str, float]) -> np.ndarray:
    names = sorted(set(grid) | set(extra))
    fn = compile_many(list(exprs), names)
    args = [grid[n] if n in grid else extra[n] for n in names]
    return fn(*args)


def sup_distance(g1: Metric, g2: Metric, box: Box, bindings: Optional[Mapping[str, float]] = None) -> float:
    """max over grid nodes and component pairs of |g1_ab - g2_ab|.

    Differences are formed symbolically before evaluation, so components
    that coincide exactly contribute exactly zero.
    """
    if g1.chart.names != g2.chart.names:
        raise RescalingError(f"chart mismatch: {g1.chart.names} vs {g2.chart.names}")
    if set(box.names) != set(g1.chart.names):
        raise RescalingError("sampling box must cover every chart coordinate")
    extra = dict(g2.defaults)
    extra.update(g1.defaults)
    extra.update(bindings or {})
    n = g1.dim
    diffs = [simplify(g1[a, b] - g2[a, b]) for a in range(n) for b in range(a, n)]
    vals = _eval_components(diffs, box.grid(), extra)
    return float(np.max(np.abs(vals)))


# --------------------------------------------------------------------------
# plans


@dataclass
class RescalingPlan:
    """One pointed-comparison family.

    ``mapping`` sends old coordinates to expressions in the new chart, with
    the basepoint time as parameter ``t_i`` (and ``c_i`` for type II);
    ``scale`` is the factor c_i as an expression.  ``theta_profile`` is set
    when the theta-map has no closed form and must be inverted numerically.
    """

    kind: str
    t_list: Tuple[float, ...]
    scales: Tuple[float, ...]
    source: Chart
    target: Chart
    mapping: Dict[str, Expr]
    scale: Expr
    basepoint: Dict[str, float] = field(default_factory=dict)
    theta_profile: Optional[Expr] = None

    def bindings(self, i: int) -> Dict[str, float]:
        return {"t_i": float(self.t_list[i]), "c_i": float(self.scales[i])}

    def time_map(self, u: float, i: int) -> float:
        time = self.source.names[0]
        return evaluate(self.mapping[time], {self.target.names[0]: u, **self.bindings(i)})

    def compact_set(self, j: int, points: int = 9) -> Box:
        """K_j = C_j x K'_j, with K'_j = [-j, j]^n in the target chart."""
        if j < 1:
            raise RescalingError("compact-set index j must be >= 1")
        t0 = self.target.names[0]
        c = (t0, 1.0 / j, float(j)) if self.kind == "type-III" else (t0, -float(j), float(j))
        return Box((c,) + tuple((n, -float(j), float(j)) for n in self.target.names[1:]), points)

    def check_jacobian(self, j: int = 2, points: int = 5) -> float:
        """Smallest |det J| over the grid of K_j for every t_i; raises if it vanishes."""
        if self.theta_profile is not None:
            return 1.0
        jac = jacobian(self.source, self.target, self.mapping)
        det = simplify(_determinant(jac))
        grid = self.compact_set(j, points).grid()
        worst = math.inf
        for i in range(len(self.t_list)):
            v = np.abs(_eval_components([det], grid, self.bindings(i))[0])
            worst = min(worst, float(np.min(v)))
        if not worst > 0:
            raise RescalingError("plan map degenerates on K_j")
        return worst


def _check_t_list(t_list: Sequence[float], need: int = 1) -> Tuple[float, ...]:
    ts = tuple(float(t) for t in t_list)
    if len(ts) < need:
        raise RescalingError(f"need at least {need} basepoint times, got {len(ts)}")
    if any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise RescalingError("basepoint times must be positive and increasing")
    return ts


def kasner_plan(params: KasnerParams, t_list: Sequence[float], basepoint: Optional[Mapping[str, float]] = None) -> RescalingPlan:
    """Type-III: t = t_i u, x^k = t_i^(1 - p_k) y^k + x_i^k, c_i = t_i^-2."""
    g = kasner(params)
    ts = _check_t_list(t_list)
    target = Chart(("u",) + g.chart.names[1:], positive={"u"}, ranges=(("u", 0.5, 2.0),))
    base = dict(basepoint or {})
    mapping: Dict[str, Expr] = {"t": T_I * target.symbol("u")}
    for name, p in zip(g.chart.names[1:], params.exponents):
        e = T_I ** (1 - Const(p)) * target.symbol(name)
        if base.get(name):
            e = e + Const(base[name])
        mapping[name] = e
    return RescalingPlan("type-III", ts, tuple(t ** -2 for t in ts), g.chart, target, mapping, T_I ** Const(-2), base)


def t2_plan(params: T2ModelParams, t_list: Sequence[float]) -> RescalingPlan:
    """Type-III plan in hat coordinates.

    t = t_i u, x = t_i xhat, y = t_i^(1/2) yhat, and theta solves
    dthetahat = t_i^(-1/4) L(theta) dtheta with theta(0) = 0.
    """
    ts = _check_t_list(t_list)
    tgt = LIMIT_U_CHART
    lp = params.l_profile
    mapping: Dict[str, Expr] = {
        "t": T_I * tgt.symbol("u"),
        "x": T_I * tgt.symbol("xhat"),
        "y": T_I ** Const(Fraction(1, 2)) * tgt.symbol("yhat"),
    }
    profile = None
    if params.l_constant:
        mapping[THETA] = T_I ** Const(Fraction(1, 4)) * tgt.symbol("thetahat") / lp
    else:
        profile = lp
    return RescalingPlan(
        "type-III", ts, tuple(t ** -2 for t in ts), MODEL_CHART, tgt, mapping, T_I ** Const(-2), {}, profile
    )


def type_ii_plan(g: Metric, points: Sequence[Mapping[str, float]], verify: bool = True) -> RescalingPlan:
    """Type-II plan: c_i = |Rm(p_i)|, t = c_i^(-1/2) u + t_i, x = x_i + c_i^(-1/2) y.

    With ``verify`` the rescaled curvature norm at each basepoint is
    checked to equal one within 1e-9.
    """
    if not points:
        raise RescalingError("type-II plan needs at least one basepoint")
    time = g.chart.names[0]
    ts, cs = [], []
    for p in points:
        c = curvature_norm(g, p)
        if not c > 0:
            raise RescalingError(f"curvature vanishes at {dict(p)}; type-II rescaling is undefined")
        ts.append(float(p[time]))
        cs.append(c)
    if len(set(ts)) != len(ts) or any(b < a for a, b in zip(ts, ts[1:])):
        raise RescalingError("basepoint times must be increasing")
    target = Chart(("u",) + g.chart.names[1:])
    root = C_I ** Const(Fraction(-1, 2))
    mapping = {time: root * target.symbol("u") + T_I}
    base = {n: float(points[0].get(n, 0.0)) for n in g.chart.names[1:]}
    for n in g.chart.names[1:]:
        mapping[n] = Parameter(f"{n}_i") + root * target.symbol(n)
    plan = RescalingPlan("type-II", tuple(ts), tuple(cs), g.chart, target, mapping, C_I, base)
    plan._points = [dict(p) for p in points]
    if verify:
        for i in range(len(ts)):
            norm = rescaled_norm(g, plan, i)
            if abs(norm - 1.0) > 1e-9:
                raise RescalingError(f"rescaled |Rm| at basepoint {i} is {norm!r}, expected 1")
    return plan


def _type_ii_bindings(plan: RescalingPlan, i: int) -> Dict[str, float]:
    b = plan.bindings(i)
    pts = getattr(plan, "_points", None)
    for n in plan.source.names[1:]:
        b[f"{n}_i"] = float(pts[i].get(n, 0.0)) if pts else 0.0
    return b


def rescaled_norm(g: Metric, plan: RescalingPlan, i: int) -> float:
    """|Rm| of the pulled-back rescaled metric at the new-chart origin."""
    b = _type_ii_bindings(plan, i)
    concrete = {k: substitute(v, b) for k, v in plan.mapping.items()}
    pulled = pullback(g, plan.target, concrete, scale=b["c_i"])
    origin = {n: 0.0 for n in plan.target.names}
    return curvature_norm(pulled, origin)


# --------------------------------------------------------------------------
# convergence studies


@dataclass
class ConvergenceReport:
    rows: List[Tuple[float, int, float]]
    slope: Optional[float]
    intercept: Optional[float]
    slope_ci: Optional[Tuple[float, float]]
    residuals: List[float]
    grid: Dict[str, object]
    method: str

    @property
    def distances(self) -> List[float]:
        return [r[2] for r in self.rows]

    def to_csv(self) -> str:
        lines = ["t_i,j,sup_distance"]
        lines += [f"{_g17(t)},{j},{_g17(d)}" for t, j, d in self.rows]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> Dict[str, object]:
        return {
            "rows": [{"t_i": t, "j": j, "sup_distance": d} for t, j, d in self.rows],
            "fit": {
                "slope": self.slope,
                "intercept": self.intercept,
                "slope_ci95": list(self.slope_ci) if self.slope_ci else None,
                "residuals": self.residuals,
            },
            "grid": self.grid,
            "method": self.method,
        }


def _g17(x: float) -> str:
    return "%.17g" % x


def fit_rate(t_list: Sequence[float], distances: Sequence[float]):
    """OLS slope of log10(distance) against log10(t_i), with a 95% interval."""
    ts, ds = np.asarray(t_list, float), np.asarray(distances, float)
    if np.any(ds <= 0):
        return None, None, None, []
    x, y = np.log10(ts), np.log10(ds)
    res = stats.linregress(x, y)
    resid = (y - (res.intercept + res.slope * x)).tolist()
    if len(ts) > 2:
        half = float(stats.t.ppf(0.975, len(ts) - 2) * res.stderr)
    else:
        half = math.nan
    return float(res.slope), float(res.intercept), (float(res.slope) - half, float(res.slope) + half), resid


class ThetaMap:
    """theta(thetahat) for dthetahat = t_i^(-1/4) L(theta) dtheta, theta(0) = 0.

    The primitive of L is integrated adaptively and inverted by bracketed
    root finding; results are cached per (t_i, thetahat).
    """

    def __init__(self, profile: Expr, tol: float = 1e-12):
        self.profile = profile
        self.tol = tol
        self._f = compile_many([profile], [THETA])
        self._cache: Dict[Tuple[float, float], float] = {}
        self._lmin = float(np.min(self.values(np.linspace(-50, 50, 4001))))
        if not self._lmin > 0:
            raise RescalingError("L profile must be positive for the theta-map to be invertible")

    def values(self, theta):
        return self._f(np.asarray(theta, float))[0]

    def primitive(self, theta: float) -> float:
        val, _ = integrate.quad(lambda s: float(self.values(s)), 0.0, theta, epsabs=1e-14, epsrel=1e-13, limit=200)
        return val

    def invert(self, target: float) -> float:
        if target == 0:
            return 0.0
        # primitive is increasing with slope >= lmin, so |theta| <= |target| / lmin
        bound = abs(target) / self._lmin * 1.01 + 1e-9
        lo, hi = (0.0, bound) if target > 0 else (-bound, 0.0)
        return optimize.brentq(lambda th: self.primitive(th) - target, lo, hi, xtol=self.tol, rtol=4 * np.finfo(float).eps)

    def theta(self, t_i: float, thetahat: float) -> float:
        key = (t_i, thetahat)
        if key not in self._cache:
            self._cache[key] = self.invert(t_i ** 0.25 * thetahat)
        return self._cache[key]


def _numeric_pullback(model: Metric, plan: RescalingPlan, i: int, grid: Mapping[str, np.ndarray], tmap: ThetaMap) -> np.ndarray:
    """Components (n, n, npts) of c_i phi^* g when the theta-map is numeric."""
    b = plan.bindings(i)
    t_i = b["t_i"]
    new = plan.target.names
    old = plan.source.names
    th_hat = grid["thetahat"]
    uniq, inv = np.unique(th_hat, return_inverse=True)
    thetas = np.array([tmap.theta(t_i, float(v)) for v in uniq])[inv]
    old_vals = {THETA: thetas}
    jac = np.zeros((len(old), len(new), th_hat.size))
    for mu, name in enumerate(old):
        if name == THETA:
            jac[mu, new.index("thetahat")] = t_i ** 0.25 / tmap.values(thetas)
            continue
        e = plan.mapping[name]
        old_vals[name] = _eval_components([e], grid, b)[0]
        for a, s in enumerate(plan.target.symbols):
            d = differentiate(e, s)
            if d != ZERO:
                jac[mu, a] = _eval_components([d], grid, b)[0]
    gfun = model.numeric()
    gv = gfun(*[old_vals[n] for n in old])
    scale = float(evaluate(plan.scale, b))
    return scale * np.einsum("man,mvn,vbn->abn", jac, gv, jac)


def convergence_study(
    model: Metric,
    plan: RescalingPlan,
    limit: Metric,
    j: int = 2,
    points: int = 9,
    threads: Optional[int] = None,
) -> ConvergenceReport:
    """Sup distances between c_i phi_i^* g and the limit on K_j, and the fitted rate."""
    ts = plan.t_list
    if len(ts) < 4:
        raise RescalingError(f"a rate fit needs at least 4 basepoint times, got {len(ts)}")
    if math.log10(ts[-1] / ts[0]) < 4 - 1e-9:
        raise RescalingError("basepoint times must span at least 4 decades")
    if limit.chart.names != plan.target.names:
        raise RescalingError(f"limit chart {limit.chart.names} differs from plan target {plan.target.names}")
    box = plan.compact_set(j, points)
    grid = box.grid()
    n = limit.dim
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    extra = dict(model.defaults)
    extra.update(limit.defaults)

    if plan.theta_profile is None:
        pulled = pullback(model, plan.target, plan.mapping, plan.scale)
        diffs = [simplify(pulled[a, b] - limit[a, b]) for a, b in pairs]
        names = sorted(set(grid) | set(extra) | {"t_i", "c_i"})
        fn = compile_many(diffs, names)
        method = "symbolic-pullback"

        def distance(i: int) -> float:
            b = dict(extra)
            b.update(plan.bindings(i))
            vals = fn(*[grid[k] if k in grid else b[k] for k in names])
            return float(np.max(np.abs(vals)))

    else:
        tmap = ThetaMap(plan.theta_profile)
        lim_vals = _eval_components([limit[a, b] for a, b in pairs], grid, extra)
        method = "numeric-theta-map"

        def distance(i: int) -> float:
            comps = _numeric_pullback(model, plan, i, grid, tmap)
            vals = np.array([comps[a, b] for a, b in pairs])
            return float(np.max(np.abs(vals - lim_vals)))

    workers = thread_count(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            dists = list(pool.map(distance, range(len(ts))))
    else:
        dists = [distance(i) for i in range(len(ts))]
    slope, intercept, ci, resid = fit_rate(ts, dists)
    rows = [(t, j, d) for t, d in zip(ts, dists)]
    return ConvergenceReport(rows, slope, intercept, ci, resid, box.spec(), method)


def t2_convergence(
    params: T2ModelParams,
    t_list: Sequence[float] = (1e2, 1e4, 1e6, 1e8),
    j: int = 2,
    points: int = 9,
    model: Optional[Metric] = None,
    threads: Optional[int] = None,
) -> ConvergenceReport:
    """Convergence of the rescaled T2 model (or a perturbed variant) to g_inf."""
    from .catalog import t2_model

    g = model if model is not None else t2_model(params)
    plan = t2_plan(params, t_list)
    return convergence_study(g, plan, t2_limit(params, chart="u"), j, points, threads)


# --------------------------------------------------------------------------
# proper time


def _numeric_constant(e: Expr, defaults: Mapping[str, float], name: str) -> float:
    try:
        return float(evaluate(simplify(e), defaults))
    except Exception as exc:
        raise ParameterError(f"{name} needs a numeric value") from exc


def proper_time_estimate(params: T2ModelParams, R0: float, R: float) -> float:
    """Leading-order maximal causal length between the R0 and R slices.

    Adaptive quadrature of exp(<eta> - <U>) with <eta> = log(r/|K|) and
    <U> = C_U.
    """
    if not (R0 > 0 and R >= R0):
        raise RescalingError(f"need R >= R0 > 0, got R0={R0}, R={R}")
    b = params.binding()
    k = abs(_numeric_constant(params.k, b, "K"))
    cu = _numeric_constant(params.c_u, b, "C_U")
    if k == 0:
        raise ParameterError("K must be nonzero")
    if R == R0:
        return 0.0
    val, _ = integrate.quad(lambda r: math.exp(math.log(r / k) - cu), R0, R, epsrel=1e-10, epsabs=0.0, limit=200)
    return val
