"""Metric families: Minkowski, Kasner, the T2-symmetric model and its limit."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .expr import (
    ONE,
    ZERO,
    Const,
    Expr,
    Parameter,
    ParseError,
    evaluate,
    exp,
    lift,
    log,
    parse,
    simplify,
    sqrt,
)
from .geometry import Chart, Metric

Number = Union[int, float, Fraction, str]

THETA = "theta"
MODEL_CHART = Chart(("t", THETA, "x", "y"), positive={"t"}, ranges=(("t", 0.5, 2.0),))
POLAR_CHART = Chart(("R", THETA, "x", "y"), positive={"R"}, ranges=(("R", 0.5, 2.0),))
LIMIT_CHART = Chart(("Rhat", "thetahat", "xhat", "yhat"), positive={"Rhat"}, ranges=(("Rhat", 0.5, 2.0),))
LIMIT_U_CHART = Chart(("u", "thetahat", "xhat", "yhat"), positive={"u"}, ranges=(("u", 0.5, 2.0),))


class ParameterError(ValueError):
    """Invalid family parameters."""


def to_rational(value: Number):
    """Parse ``"2/3"``, ints and Fractions exactly; floats stay floats."""
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    if isinstance(value, float):
        return value
    text = str(value).strip()
    try:
        return Fraction(text) if re.fullmatch(r"[-+]?\d+(/\d+)?", text) else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParameterError(f"not a number: {value!r}") from exc


def minkowski(n: int = 3) -> Metric:
    """diag(-1, 1, ..., 1) in dimension n + 1."""
    if n < 1:
        raise ParameterError("Minkowski space needs n >= 1 (dimension >= 2)")
    names = ("t",) + _spatial_names(n)
    comps = [[ZERO] * (n + 1) for _ in range(n + 1)]
    comps[0][0] = Const(-1)
    for k in range(1, n + 1):
        comps[k][k] = ONE
    return Metric(Chart(names), comps, name=f"minkowski{n}")


def _spatial_names(n: int) -> Tuple[str, ...]:
    return ("x", "y", "z") if n == 3 else tuple(f"x{k}" for k in range(1, n + 1))


@dataclass(frozen=True)
class KasnerParams:
    exponents: Tuple

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(to_rational(p) for p in self.exponents))

    @property
    def n(self) -> int:
        return len(self.exponents)

    def sums(self):
        return sum(self.exponents), sum(p * p for p in self.exponents)

    def validate(self) -> None:
        if self.n < 1:
            raise ParameterError("Kasner needs at least one exponent")
        s1, s2 = self.sums()
        if s1 != 1 or s2 != 1:
            raise ParameterError(f"Kasner exponents need sum p = sum p^2 = 1, got sum p = {s1}, sum p^2 = {s2}")


def kasner(params: KasnerParams, check: bool = True) -> Metric:
    """g = -(1/n^2) dt^2 + sum t^(2 p_k) (dx^k)^2 on t > 0.

    ``check=False`` skips the exponent constraints (for off-shell tests).
    """
    if check:
        params.validate()
    n = params.n
    chart = Chart(("t",) + _spatial_names(n), positive={"t"}, ranges=(("t", 0.5, 2.0),))
    t = chart.symbol("t")
    comps = [[ZERO] * (n + 1) for _ in range(n + 1)]
    comps[0][0] = Const(Fraction(-1, n * n))
    for k, p in enumerate(params.exponents, start=1):
        comps[k][k] = t ** (2 * Const(p))
    return Metric(chart, comps, name="kasner")


def kasner_sphere_point(s: Fraction) -> Tuple[Fraction, Fraction, Fraction]:
    """Rational point on the n = 3 Kasner circle.

    Uses the standard parametrisation p = (-s, 1 + s, s(1 + s)) / (1 + s + s^2).
    """
    s = Fraction(s)
    d = 1 + s + s * s
    return (-s / d, (1 + s) / d, s * (1 + s) / d)


# --------------------------------------------------------------------------
# T2-symmetric family


def _profile(value, what: str) -> Expr:
    if isinstance(value, str):
        try:
            e = parse(value, coordinates=[THETA])
        except ParseError as exc:
            raise ParameterError(f"bad {what} profile: {exc}") from exc
    else:
        e = lift(value)
    extra = e.free_names() - {THETA}
    if extra:
        raise ParameterError(f"{what} profile may only depend on {THETA}, found {sorted(extra)}")
    return simplify(e)


def _const_value(e: Expr) -> Optional[float]:
    e = simplify(e)
    return float(e.value) if isinstance(e, Const) else None


def _constant(value, name: str, positive: bool = False) -> Expr:
    if isinstance(value, Expr):
        return value
    if value is None:
        return Parameter(name, positive=positive)
    v = to_rational(value)
    return Const(v)


@dataclass(frozen=True)
class T2ModelParams:
    """Asymptotic data of a T2-symmetric expanding vacuum spacetime.

    Numeric entries are fixed; ``None`` keeps a constant as a symbolic
    parameter (``K``, ``C_U``, ``C_inf``) with its value taken from
    ``defaults`` for numeric work.
    """

    K: object = 1
    C_U: object = 0
    C_inf: object = Fraction(5, 4)
    L: object = 1
    G: object = 0
    defaults: Tuple[Tuple[str, float], ...] = ()

    @classmethod
    def symbolic(cls, K=1.0, C_U=0.0, C_inf=1.25, L=1, G=0) -> "T2ModelParams":
        return cls(None, None, None, L, G, (("K", K), ("C_U", C_U), ("C_inf", C_inf)))

    @property
    def k(self) -> Expr:
        return _constant(self.K, "K")

    @property
    def c_u(self) -> Expr:
        return _constant(self.C_U, "C_U")

    @property
    def c_inf(self) -> Expr:
        return _constant(self.C_inf, "C_inf", positive=True)

    @property
    def l_profile(self) -> Expr:
        return _profile(self.L, "L")

    @property
    def g_profile(self) -> Expr:
        return _profile(self.G, "G")

    def binding(self) -> Dict[str, float]:
        return {k: float(v) for k, v in self.defaults}

    def validate(self) -> None:
        b = self.binding()
        k = _const_value(self.k)
        if k is None and "K" in b:
            k = b["K"]
        if k is not None and k == 0:
            raise ParameterError("twist constant K must be nonzero (the Gowdy case K = 0 is excluded)")
        c = _const_value(self.c_inf)
        if c is None and "C_inf" in b:
            c = b["C_inf"]
        if c is not None and not c > 0:
            raise ParameterError(f"C_inf must be positive, got {c}")
        lp = self.l_profile
        self.g_profile
        thetas = np.linspace(-2 * math.pi, 2 * math.pi, 65)
        for th in thetas:
            v = evaluate(lp, {THETA: float(th)})
            if not v > 0:
                raise ParameterError(f"L profile must be positive, L({th:.4g}) = {v}")

    @property
    def l_constant(self) -> bool:
        return THETA not in self.l_profile.free_names()


def _four_over_k_root5(p: T2ModelParams) -> Expr:
    return 4 / (p.k * sqrt(Const(5)))


def t2_model(params: T2ModelParams) -> Metric:
    """Leading-order model metric in (t, theta, x, y), t = R^2.

    -1/4 K^-2 e^(-2C_U) dt^2 + 4/5 K^-2 e^(-2C_U) C_inf L^2 t^(3/2) dtheta^2
    + e^(2C_U) (dx + G dtheta)^2 + e^(-2C_U) t (dy + h dtheta)^2
    with h = 4/(K sqrt 5) C_inf^(1/2) L t^(1/4).
    """
    params.validate()
    k, cu, ci = params.k, params.c_u, params.c_inf
    L, G = params.l_profile, params.g_profile
    t = MODEL_CHART.symbol("t")
    em, ep = exp(-2 * cu), exp(2 * cu)
    h = _four_over_k_root5(params) * ci ** Const(Fraction(1, 2)) * L * t ** Const(Fraction(1, 4))
    comps = [[ZERO] * 4 for _ in range(4)]
    comps[0][0] = -Const(Fraction(1, 4)) * k ** Const(-2) * em
    comps[1][1] = (
        Const(Fraction(4, 5)) * k ** Const(-2) * em * ci * L ** Const(2) * t ** Const(Fraction(3, 2))
        + ep * G ** Const(2)
        + em * t * h ** Const(2)
    )
    comps[2][2] = ep
    comps[1][2] = comps[2][1] = ep * G
    comps[3][3] = em * t
    comps[1][3] = comps[3][1] = em * t * h
    return Metric(MODEL_CHART, comps, params.binding(), name="t2_model")


def _hat_coefficients(params: T2ModelParams, r: Expr) -> Dict[str, Expr]:
    """Leading hat coefficients as functions of the areal coordinate ``r``."""
    k, ci = params.k, params.c_inf
    half = Const(Fraction(1, 2))
    return {
        "eta": half * log(k ** Const(-2) * r ** Const(2)),
        "U": params.c_u,
        "ainv": 2 / sqrt(Const(5)) * ci ** half * r ** half,
        "G": ZERO,
        "H": _four_over_k_root5(params) * ci ** half * r ** half,
    }


def polar_metric(chart: Chart, coeffs: Mapping[str, Expr], r: Expr, defaults=None, name="") -> Metric:
    """e^(2(eta-U)) (-dR^2 + a^-2 dth^2) + e^(2U) (dx + G dth)^2 + e^(-2U) R^2 (dy + H dth)^2."""
    eta, U, ainv, G, H = (coeffs[k] for k in ("eta", "U", "ainv", "G", "H"))
    lead = exp(2 * (eta - U))
    ep, em = exp(2 * U), exp(-2 * U)
    comps = [[ZERO] * 4 for _ in range(4)]
    comps[0][0] = -lead
    comps[1][1] = lead * ainv ** Const(2) + ep * G ** Const(2) + em * r ** Const(2) * H ** Const(2)
    comps[2][2] = ep
    comps[1][2] = comps[2][1] = ep * G
    comps[3][3] = em * r ** Const(2)
    comps[1][3] = comps[3][1] = em * r ** Const(2) * H
    return Metric(chart, comps, defaults, name=name)


def t2_limit(params: T2ModelParams, chart: str = "Rhat") -> Metric:
    """The spatially homogeneous limit metric g_inf.

    ``chart="Rhat"`` gives the polar form in (Rhat, thetahat, xhat, yhat);
    ``chart="u"`` gives the same metric in u = Rhat^2.
    """
    params.validate()
    r = LIMIT_CHART.symbol("Rhat")
    g = polar_metric(LIMIT_CHART, _hat_coefficients(params, r), r, params.binding(), name="t2_limit")
    if chart == "Rhat":
        return g
    if chart == "u":
        from .rescaling import pullback

        u = LIMIT_U_CHART.symbol("u")
        out = pullback(g, LIMIT_U_CHART, {"Rhat": u ** Const(Fraction(1, 2))})
        out.name = "t2_limit_u"
        return out
    raise ParameterError(f"unknown chart {chart!r}; use 'Rhat' or 'u'")


# --------------------------------------------------------------------------
# perturbations

# strongest admissible growth exponent in R for each coefficient
ALLOWANCE = {
    "eta": Fraction(-1, 4),
    "U": Fraction(-1, 2),
    "ainv": Fraction(-1),
    "H": Fraction(1, 4),
}
TARGETS = ("eta", "U", "ainv", "G", "H")


class PerturbationError(ParameterError):
    pass


@dataclass(frozen=True)
class Perturbation:
    """Adds ``profile(theta) * R^exponent`` to one coefficient function.

    For ``eta`` the bound on |K^2 e^(2 eta) - R^2| translates into a
    relative bound on eta itself, so its allowance is R^(-1/4).
    """

    target: str
    profile: object
    exponent: object

    def validate(self) -> None:
        if self.target not in TARGETS:
            raise PerturbationError(f"unknown perturbation target {self.target!r}; use one of {TARGETS}")
        prof = _profile(self.profile, f"{self.target} perturbation")
        if self.target == "G":
            if prof != ZERO:
                raise PerturbationError("G admits no perturbation: G equals its profile exactly")
            return
        e = to_rational(self.exponent)
        if e > ALLOWANCE[self.target]:
            raise PerturbationError(
                f"{self.target} perturbation decays like R^{e}, weaker than the allowed R^{ALLOWANCE[self.target]}"
            )

    def term(self, r: Expr) -> Expr:
        return _profile(self.profile, self.target) * r ** Const(to_rational(self.exponent))


def apply_perturbation(params: T2ModelParams, perts: Sequence[Perturbation] = ()) -> Metric:
    """Model metric in (t, theta, x, y) with perturbed coefficient functions.

    The polar form is built from the leading coefficients (with L and G
    profiles), each perturbation adds its term, and R = t^(1/2).
    """
    params.validate()
    for p in perts:
        p.validate()
    r = POLAR_CHART.symbol("R")
    coeffs = _hat_coefficients(params, r)
    coeffs["ainv"] = coeffs["ainv"] * params.l_profile
    coeffs["H"] = coeffs["H"] * params.l_profile
    coeffs["G"] = params.g_profile
    for p in perts:
        if p.target != "G":
            coeffs[p.target] = coeffs[p.target] + p.term(r)
    polar = polar_metric(POLAR_CHART, coeffs, r, params.binding())
    from .rescaling import pullback

    t = MODEL_CHART.symbol("t")
    out = pullback(polar, MODEL_CHART, {"R": t ** Const(Fraction(1, 2)), THETA: MODEL_CHART.symbol(THETA)})
    out.name = "t2_perturbed" if perts else "t2_model"
    return out


# --------------------------------------------------------------------------
# named families and metric definition files


def family(name: str, **kw) -> Metric:
    """Build a catalog metric by name: minkowski, kasner, t2_model, t2_limit, t2_limit_u."""
    if name == "minkowski":
        return minkowski(int(kw.get("n", 3)))
    if name == "kasner":
        return kasner(KasnerParams(kw.get("p", (Fraction(2, 3), Fraction(2, 3), Fraction(-1, 3)))))
    params = kw.get("params") or T2ModelParams()
    if name == "t2_model":
        return t2_model(params)
    if name == "t2_limit":
        return t2_limit(params)
    if name == "t2_limit_u":
        return t2_limit(params, chart="u")
    raise ParameterError(f"unknown metric family {name!r}")


FAMILIES = ("minkowski", "kasner", "t2_model", "t2_limit", "t2_limit_u")

_LINE = re.compile(r"^g\[\s*(\w+)\s*,\s*(\w+)\s*\]\s*=\s*(.+)$")


def parse_metric_file(text: str) -> Metric:
    """Read a metric definition.

    Lines (``#`` starts a comment)::

        chart: t x y z
        positive: t
        range: t 0.5 2
        param: p = 2/3
        signature: lorentzian
        g[t,t] = -1
        g[x,x] = t^(2*p)

    Unlisted components are zero; ``g[a,b]`` also sets ``g[b,a]``.
    """
    names: Optional[Tuple[str, ...]] = None
    positive: List[str] = []
    ranges = []
    defaults: Dict[str, float] = {}
    signature = "lorentzian"
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("chart:"):
                names = tuple(line[6:].split())
            elif line.startswith("positive:"):
                positive += line[9:].split()
            elif line.startswith("range:"):
                nm, lo, hi = line[6:].split()
                ranges.append((nm, float(lo), float(hi)))
            elif line.startswith("param:"):
                nm, val = (s.strip() for s in line[6:].split("=", 1))
                defaults[nm] = float(evaluate(parse(val), {}))
            elif line.startswith("signature:"):
                signature = line[10:].strip()
            else:
                m = _LINE.match(line)
                if not m:
                    raise ParameterError("unrecognised line")
                entries.append((m.group(1), m.group(2), m.group(3)))
        except (ValueError, ParseError) as exc:
            raise ParameterError(f"line {lineno}: {exc}") from exc
    if names is None:
        raise ParameterError("metric file has no 'chart:' line")
    chart = Chart(names, positive=set(positive) & set(names), ranges=ranges)
    n = chart.dim
    comps = [[ZERO] * n for _ in range(n)]
    pos = set(positive)
    for a, b, src in entries:
        if a not in names or b not in names:
            raise ParameterError(f"g[{a},{b}] uses a name outside the chart {names}")
        try:
            e = parse(src, coordinates=names, positive=pos)
        except ParseError as exc:
            raise ParameterError(f"g[{a},{b}]: {exc}") from exc
        i, j = names.index(a), names.index(b)
        comps[i][j] = comps[j][i] = e
    return Metric(chart, comps, defaults, signature=signature, name="file")
