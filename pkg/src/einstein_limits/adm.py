"""Slicing a block-form metric into lapse, spatial metric and extrinsic curvature."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

from .catalog import LIMIT_CHART, T2ModelParams, _hat_coefficients
from .checks import CheckResult, check_zero, metric_sample_points, nonzero_entries
from .expr import (
    ZERO,
    Add,
    Const,
    Expr,
    Mul,
    Pow,
    differentiate,
    evaluate,
    exp,
    simplify,
)
from .geometry import (
    Chart,
    GeometryError,
    Metric,
    _obj_array,
    _prod,
    _simp_sum,
    coordinate_frame,
    einstein_tensor,
    frame_components,
    inverse_metric,
    scalar_curvature,
    trace,
)

HALF = Const(Fraction(1, 2))


class SliceError(GeometryError):
    pass


@dataclass
class AdmSlice:
    """Constant-time slice data of g = -L^2 dt^2 + h(t).

    K_ab = -(1/(2L)) d_t h_ab, so expanding slices have H < 0.
    """

    time: str
    h: Metric
    lapse: Expr
    K: np.ndarray
    H: Expr
    source: Metric

    @property
    def n(self) -> int:
        return self.h.dim

    def k_norm_squared(self) -> Expr:
        hinv = inverse_metric(self.h).components
        n = self.n
        terms = []
        for a in range(n):
            for b in range(n):
                if self.K[a, b] == ZERO:
                    continue
                for c in range(n):
                    for d in range(n):
                        terms.append(_prod(hinv[a, c], hinv[b, d], self.K[a, b], self.K[c, d]))
        return _simp_sum(terms)


def adm_split(g: Metric) -> AdmSlice:
    """Read off lapse, spatial metric, second fundamental form and mean curvature."""
    if g.signature != "lorentzian":
        raise SliceError("adm_split needs a Lorentzian metric")
    n = g.dim
    for i in range(1, n):
        if g[0, i] != ZERO:
            raise SliceError(
                f"metric has a shift term g[{g.chart.names[0]},{g.chart.names[i]}]; change coordinates to block form first"
            )
    time = g.chart.names[0]
    lapse2 = simplify(-g[0, 0])
    for pt in g.chart.sample_points(8):
        if not evaluate(lapse2, g.bindings(pt)) > 0:
            raise SliceError(f"lapse squared is not positive at {pt}")
    lapse = simplify(Pow(lapse2, HALF))
    spatial = Chart(g.chart.names[1:], positive=g.chart.positive - {time}, ranges=tuple(r for r in g.chart.ranges if r[0] != time))
    comps = [[g[a, b] for b in range(1, n)] for a in range(1, n)]
    defaults = dict(g.defaults)
    lo, hi = g.chart.range_of(time)
    defaults.setdefault(time, 0.5 * (lo + hi))
    h = Metric(spatial, comps, defaults, signature="riemannian", name=f"{g.name}_slice")
    m = n - 1
    factor = simplify(Mul((Const(Fraction(-1, 2)), Pow(lapse, Const(-1)))))
    tsym = g.chart.symbols[0]
    K = _obj_array((m, m))
    for a in range(m):
        for b in range(a, m):
            K[a, b] = K[b, a] = simplify(_prod(factor, differentiate(h[a, b], tsym)))
    hinv = inverse_metric(h).components
    H = _simp_sum([_prod(hinv[a, b], K[a, b]) for a in range(m) for b in range(m)])
    return AdmSlice(time, h, lapse, K, H, g)


def hamiltonian_residual(s: AdmSlice) -> Expr:
    """R_h - |K|^2 + H^2."""
    rh = scalar_curvature(s.h) if s.n > 1 else ZERO
    return _simp_sum([rh, _prod(Const(-1), s.k_norm_squared()), _prod(s.H, s.H)])


def energy_density(s: AdmSlice) -> Expr:
    """Gauss energy density (R_h - |K|^2 + H^2) / 2."""
    return simplify(_prod(HALF, hamiltonian_residual(s)))


def normal_energy(g: Metric) -> Expr:
    """G(e_0, e_0) = G_tt / L^2 from the four-dimensional Einstein tensor."""
    G = einstein_tensor(g)
    return simplify(Mul((G[0, 0], Pow(simplify(-g[0, 0]), Const(-1)))))


@dataclass
class LeflochResult:
    lhs: Expr
    difference: Expr
    rhs: Expr


def lefloch_residual(params: T2ModelParams) -> LeflochResult:
    """eta_R + K^2/(4R^3) e^(2 eta) - a R (a^-1 U_R^2 + a U_th^2) from the hat coefficients.

    Returns the left side, the right side 5/(4R) and their difference.
    """
    r = LIMIT_CHART.symbol("Rhat")
    th = LIMIT_CHART.symbol("thetahat")
    c = _hat_coefficients(params, r)
    eta, U, ainv = c["eta"], c["U"], c["ainv"]
    a = Pow(ainv, Const(-1))
    k = params.k
    eta_r = differentiate(eta, r)
    u_r = differentiate(U, r)
    u_th = differentiate(U, th)
    lhs = simplify(
        Add(
            (
                eta_r,
                Mul((k ** Const(2), Const(Fraction(1, 4)), r ** Const(-3), exp(2 * eta))),
                Mul((Const(-1), a, r, Add((Mul((ainv, u_r ** Const(2))), Mul((a, u_th ** Const(2))))))),
            )
        )
    )
    rhs = simplify(Const(Fraction(5, 4)) / r)
    return LeflochResult(lhs, simplify(lhs - rhs), rhs)


def einstein_to_lefloch_factor(params: T2ModelParams) -> Expr:
    """G(d_R, d_R) of g_inf divided by the left side above."""
    from .catalog import t2_limit

    g = t2_limit(params)
    G = einstein_tensor(g)
    return simplify(G[0, 0] / lefloch_residual(params).lhs)


@dataclass
class ConstraintReport:
    checks: List[CheckResult] = field(default_factory=list)
    values: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> Dict[str, object]:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks], "values": self.values}


def constraint_report(g: Metric, mode: str = "auto") -> ConstraintReport:
    """Hamiltonian residual and Gauss consistency for a block-form metric."""
    s = adm_split(g)
    pts = metric_sample_points(g)
    ham = hamiltonian_residual(s)
    rho = energy_density(s)
    rep = ConstraintReport()
    rep.checks.append(check_zero("hamiltonian", [ham], pts, mode))
    rep.checks.append(check_zero("gauss_consistency", [simplify(rho - normal_energy(g))], pts, mode))
    rep.values["energy_density"] = rho
    rep.values["mean_curvature"] = s.H
    return rep


@dataclass
class GwTraceReport:
    trace: Expr
    scalar_curvature: Expr
    frame_components: Dict[Tuple[int, int], Expr]
    frame_order: str
    nonzero: List[Tuple[int, int]]
    modes: List[str]


def gw_trace_check(g: Metric, order: str = "reversed", mode: str = "auto") -> GwTraceReport:
    """Trace and scalar curvature of T = Ric - R g / 2, plus its nonzero frame components.

    The frame has e_0 along d_t.  The default ``order="reversed"`` builds
    the spatial vectors last coordinate first, which for the T2 limit makes
    e_thetahat orthogonal to the two symmetry directions.  Components are
    classified as zero by :func:`check_zero` in the given ``mode``.
    """
    G = einstein_tensor(g)
    tr = trace(g, G)
    R = scalar_curvature(g)
    fr = coordinate_frame(g, order)
    comps = frame_components(G, fr)
    entries = {(a, b): comps[a, b] for a in range(g.dim) for b in range(a, g.dim) if comps[a, b] != ZERO}
    nonzero, modes = nonzero_entries(entries, metric_sample_points(g), mode)
    return GwTraceReport(tr, R, entries, order, nonzero, modes)
