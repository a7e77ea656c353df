"""Coordinate tensor calculus on (pseudo-)Riemannian metrics.

Conventions: signature (-,+,...,+) with the time coordinate first,

    Gamma^a_{bc} = 1/2 g^{ad} (d_b g_{dc} + d_c g_{db} - d_d g_{bc})
    R^a_{bcd}    = d_c Gamma^a_{db} - d_d Gamma^a_{cb}
                   + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}
    Ric_{bd}     = R^a_{bad},   R = g^{bd} Ric_{bd},   G = Ric - R g / 2

With these signs a round sphere has positive scalar curvature and the
Hamiltonian constraint reads R_h - |K|^2 + H^2 = 0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .expr import (
    ONE,
    ZERO,
    Add,
    Const,
    Coordinate,
    Expr,
    Mul,
    Pow,
    compile_many,
    differentiate,
    lift,
    simplify,
    substitute,
)

HALF = Const(Fraction(1, 2))


class GeometryError(ValueError):
    pass


class SingularMetricError(GeometryError):
    pass


class FrameError(GeometryError):
    pass


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names, time first for Lorentzian metrics."""

    names: Tuple[str, ...]
    positive: frozenset = frozenset()
    ranges: Tuple[Tuple[str, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "positive", frozenset(self.positive))
        object.__setattr__(self, "ranges", tuple(tuple(r) for r in self.ranges))
        if len(set(self.names)) != len(self.names):
            raise GeometryError(f"duplicate coordinate names in {self.names}")
        if len(self.names) < 1:
            raise GeometryError("a chart needs at least one coordinate")
        for name, lo, hi in self.ranges:
            if name not in self.names or not lo < hi:
                raise GeometryError(f"bad range for {name!r}: ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def symbols(self) -> Tuple[Coordinate, ...]:
        return tuple(Coordinate(n, positive=n in self.positive) for n in self.names)

    def symbol(self, name: str) -> Coordinate:
        if name not in self.names:
            raise KeyError(name)
        return Coordinate(name, positive=name in self.positive)

    def range_of(self, name: str) -> Tuple[float, float]:
        for n, lo, hi in self.ranges:
            if n == name:
                return lo, hi
        if name in self.positive:
            return 0.5, 2.0
        return -1.0, 1.0

    def sample_points(self, count: int, seed: int = 0) -> List[Dict[str, float]]:
        """Deterministic interior points, away from the range ends."""
        rng = np.random.default_rng(seed)
        pts = []
        for _ in range(count):
            pt = {}
            for n in self.names:
                lo, hi = self.range_of(n)
                lo, hi = lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)
                pt[n] = float(rng.uniform(lo, hi))
            pts.append(pt)
        return pts


def _obj_array(shape) -> np.ndarray:
    arr = np.empty(shape, dtype=object)
    arr.fill(ZERO)
    return arr


class TensorField:
    """Components of a tensor in a chart.

    ``valence`` is a string of ``'u'`` (contravariant) and ``'d'``
    (covariant) flags, one per index.  ``symmetries`` lists index pairs
    ``(i, j, sign)`` that are verified on construction.
    """

    def __init__(self, chart: Chart, valence: str, components, symmetries: Iterable = (), name: str = ""):
        comps = np.asarray(components, dtype=object)
        if comps.ndim != len(valence) or any(s != chart.dim for s in comps.shape):
            raise GeometryError(
                f"component array of shape {comps.shape} does not match valence {valence!r} in dimension {chart.dim}"
            )
        if set(valence) - {"u", "d"}:
            raise GeometryError(f"valence must use 'u'/'d' flags, got {valence!r}")
        self.chart = chart
        self.valence = valence
        self.components = comps
        self.name = name
        self.symmetries = tuple(symmetries)
        for i, j, sign in self.symmetries:
            self._check_symmetry(i, j, sign)
        self._compiled = None

    def _check_symmetry(self, i, j, sign):
        for idx in itertools.product(range(self.chart.dim), repeat=self.rank):
            if idx[i] >= idx[j]:
                continue
            swapped = list(idx)
            swapped[i], swapped[j] = swapped[j], swapped[i]
            a = self.components[idx]
            b = self.components[tuple(swapped)]
            if sign > 0 and a != b:
                raise GeometryError(f"{self.name or 'tensor'} not symmetric in indices {i},{j} at {idx}")
            if sign < 0 and simplify(Add((a, b))) != ZERO:
                raise GeometryError(f"{self.name or 'tensor'} not antisymmetric in indices {i},{j} at {idx}")

    @property
    def rank(self) -> int:
        return len(self.valence)

    def __getitem__(self, idx) -> Expr:
        return self.components[idx]

    def indices(self):
        return itertools.product(range(self.chart.dim), repeat=self.rank)

    def nonzero(self) -> List[Tuple[int, ...]]:
        return [idx for idx in self.indices() if self.components[idx] != ZERO]

    def is_zero(self) -> bool:
        return not self.nonzero()

    def max_nodes(self) -> int:
        return max((self.components[idx].count_nodes() for idx in self.indices()), default=0)

    def _compile(self, names):
        key = tuple(names)
        if self._compiled is None or self._compiled[0] != key:
            flat = [self.components[idx] for idx in self.indices()]
            self._compiled = (key, compile_many(flat, names))
        return self._compiled[1]

    def evaluate(self, point: Mapping[str, float]) -> np.ndarray:
        names = sorted(point)
        fn = self._compile(names)
        vals = fn(*[point[n] for n in names])
        return np.asarray(vals, dtype=float).reshape((self.chart.dim,) * self.rank)

    def map(self, fn) -> "TensorField":
        out = _obj_array(self.components.shape)
        for idx in self.indices():
            out[idx] = fn(self.components[idx])
        return TensorField(self.chart, self.valence, out, name=self.name)

    def component_dict(self) -> Dict[str, str]:
        from .expr import to_string

        return {
            ",".join(self.chart.names[i] for i in idx): to_string(self.components[idx])
            for idx in self.nonzero()
        }


class Metric:
    """Symmetric matrix of expressions on a chart.

    ``defaults`` binds parameters to values for numeric work; ``signature``
    is ``"lorentzian"`` (time coordinate first) or ``"riemannian"``.
    """

    def __init__(
        self,
        chart: Chart,
        components,
        defaults: Optional[Mapping[str, float]] = None,
        signature: str = "lorentzian",
        name: str = "",
    ):
        n = chart.dim
        rows = [list(r) for r in components]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise GeometryError(f"metric must be {n}x{n}")
        if signature not in ("lorentzian", "riemannian"):
            raise GeometryError(f"unknown signature {signature!r}")
        if signature == "lorentzian" and n < 2:
            raise GeometryError("a Lorentzian metric needs dimension >= 2")
        comps = _obj_array((n, n))
        for a in range(n):
            for b in range(n):
                comps[a, b] = simplify(lift(rows[a][b]))
        for a in range(n):
            for b in range(a + 1, n):
                if comps[a, b] != comps[b, a]:
                    raise GeometryError(f"metric not symmetric in ({chart.names[a]},{chart.names[b]})")
        self.chart = chart
        self.components = comps
        self.defaults = dict(defaults or {})
        self.signature = signature
        self.name = name
        self._cache: Dict[str, object] = {}

    @property
    def dim(self) -> int:
        return self.chart.dim

    def __getitem__(self, idx) -> Expr:
        return self.components[idx]

    def __eq__(self, other):
        return (
            isinstance(other, Metric)
            and self.chart.names == other.chart.names
            and all(self.components[i, j] == other.components[i, j] for i in range(self.dim) for j in range(self.dim))
        )

    __hash__ = None

    @property
    def parameters(self) -> frozenset:
        names = set()
        for e in self.components.flat:
            names |= e.free_names()
        return frozenset(names - set(self.chart.names))

    def as_tensor(self) -> TensorField:
        return TensorField(self.chart, "dd", self.components, symmetries=[(0, 1, 1)], name="g")

    def with_parameters(self, values: Mapping) -> "Metric":
        """Substitute parameter values (numbers or expressions)."""
        comps = [[substitute(self.components[a, b], values) for b in range(self.dim)] for a in range(self.dim)]
        rest = {k: v for k, v in self.defaults.items() if k not in values}
        return Metric(self.chart, comps, rest, self.signature, self.name)

    def scaled(self, c) -> "Metric":
        c = lift(c)
        comps = [[Mul((c, self.components[a, b])) for b in range(self.dim)] for a in range(self.dim)]
        return Metric(self.chart, comps, self.defaults, self.signature, self.name)

    def bindings(self, point: Mapping[str, float]) -> Dict[str, float]:
        b = dict(self.defaults)
        b.update(point)
        return b

    def evaluate(self, point: Mapping[str, float]) -> np.ndarray:
        return self.as_tensor().evaluate(self.bindings(point))

    def numeric(self, extra: Sequence[str] = ()):
        """Vectorised ``f(*coords) -> array (dim, dim, ...)`` with defaults bound."""
        names = list(self.chart.names) + list(extra)
        params = sorted(self.parameters - set(extra))
        missing = [p for p in params if p not in self.defaults]
        if missing:
            raise GeometryError(f"no default value for parameters {missing}")
        bound = [[substitute(self.components[a, b], {p: self.defaults[p] for p in params}) for b in range(self.dim)] for a in range(self.dim)]
        fn = compile_many([e for row in bound for e in row], names)
        dim = self.dim

        def g(*xs):
            out = fn(*xs)
            return out.reshape((dim, dim) + out.shape[1:])

        return g

    def check_signature(self, points: Optional[Iterable[Mapping[str, float]]] = None) -> None:
        """Raise unless the eigenvalue signs match the declared signature."""
        if points is None:
            points = self.chart.sample_points(8)
        want_neg = 1 if self.signature == "lorentzian" else 0
        for pt in points:
            m = self.evaluate(pt)
            eig = np.linalg.eigvalsh(m)
            if np.any(np.abs(eig) < 1e-14 * max(1.0, np.max(np.abs(eig)))):
                raise SingularMetricError(f"metric degenerate at {pt}")
            if int(np.sum(eig < 0)) != want_neg:
                raise GeometryError(f"wrong signature at {pt}: eigenvalues {eig}")
            if self.signature == "lorentzian" and m[0, 0] >= 0:
                raise FrameError(f"d/d{self.chart.names[0]} is not timelike at {pt}")


# --------------------------------------------------------------------------
# curvature


def _simp_sum(terms) -> Expr:
    terms = [t for t in terms if t != ZERO]
    if not terms:
        return ZERO
    return simplify(terms[0] if len(terms) == 1 else Add(terms))


def _prod(*factors) -> Expr:
    if any(f == ZERO for f in factors):
        return ZERO
    fs = [f for f in factors if f != ONE]
    if not fs:
        return ONE
    return fs[0] if len(fs) == 1 else Mul(fs)


def _determinant(m: List[List[Expr]]) -> Expr:
    n = len(m)
    memo: Dict[Tuple[Tuple[int, ...], int], Expr] = {}

    def det(cols: Tuple[int, ...], row: int) -> Expr:
        if row == n:
            return ONE
        key = (cols, row)
        if key in memo:
            return memo[key]
        terms = []
        for k, c in enumerate(cols):
            if m[row][c] == ZERO:
                continue
            minor = det(cols[:k] + cols[k + 1:], row + 1)
            if minor == ZERO:
                continue
            sign = Const(-1) if k % 2 else ONE
            terms.append(_prod(sign, m[row][c], minor))
        out = _simp_sum(terms)
        memo[key] = out
        return out

    return det(tuple(range(n)), 0)


def determinant(g: Metric) -> Expr:
    if "det" not in g._cache:
        g._cache["det"] = _determinant([[g[a, b] for b in range(g.dim)] for a in range(g.dim)])
    return g._cache["det"]


def inverse_metric(g: Metric) -> TensorField:
    """g^{ab} by cofactors; raises SingularMetricError on a zero determinant."""
    if "inv" in g._cache:
        return g._cache["inv"]
    n = g.dim
    det = determinant(g)
    if det == ZERO:
        raise SingularMetricError("metric determinant simplifies to zero")
    inv_det = simplify(Pow(det, Const(-1)))
    m = [[g[a, b] for b in range(n)] for a in range(n)]
    out = _obj_array((n, n))
    for a in range(n):
        for b in range(a, n):
            # (g^-1)_{ab} = cofactor_{ba} / det
            minor = [[m[i][j] for j in range(n) if j != a] for i in range(n) if i != b]
            cof = _determinant(minor) if minor else ONE
            if (a + b) % 2:
                cof = simplify(Mul((Const(-1), cof)))
            out[a, b] = out[b, a] = simplify(_prod(cof, inv_det))
    t = TensorField(g.chart, "uu", out, symmetries=[(0, 1, 1)], name="g_inv")
    g._cache["inv"] = t
    return t


def metric_derivatives(g: Metric) -> np.ndarray:
    """dg[c, a, b] = d_c g_{ab}."""
    if "dg" not in g._cache:
        n = g.dim
        dg = _obj_array((n, n, n))
        syms = g.chart.symbols
        for c in range(n):
            for a in range(n):
                for b in range(a, n):
                    dg[c, a, b] = dg[c, b, a] = differentiate(g[a, b], syms[c])
        g._cache["dg"] = dg
    return g._cache["dg"]


def christoffel(g: Metric) -> TensorField:
    """Gamma^a_{bc}, symmetric in (b, c)."""
    if "christoffel" in g._cache:
        return g._cache["christoffel"]
    n = g.dim
    ginv = inverse_metric(g).components
    dg = metric_derivatives(g)
    # lowered symbols Gamma_{dbc}
    low = _obj_array((n, n, n))
    for d in range(n):
        for b in range(n):
            for c in range(b, n):
                low[d, b, c] = low[d, c, b] = _simp_sum(
                    [_prod(HALF, dg[b, d, c]), _prod(HALF, dg[c, d, b]), _prod(Const(Fraction(-1, 2)), dg[d, b, c])]
                )
    out = _obj_array((n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(b, n):
                out[a, b, c] = out[a, c, b] = _simp_sum([_prod(ginv[a, d], low[d, b, c]) for d in range(n)])
    t = TensorField(g.chart, "udd", out, symmetries=[(1, 2, 1)], name="Gamma")
    g._cache["christoffel"] = t
    return t


def riemann(g: Metric) -> TensorField:
    """R^a_{bcd}, antisymmetric in (c, d)."""
    if "riemann" in g._cache:
        return g._cache["riemann"]
    n = g.dim
    gam = christoffel(g).components
    syms = g.chart.symbols
    dgam: Dict[Tuple[int, int, int, int], Expr] = {}

    def d_gamma(e, a, b, c):
        key = (e, a, min(b, c), max(b, c))
        if key not in dgam:
            dgam[key] = differentiate(gam[a, b, c], syms[e])
        return dgam[key]

    out = _obj_array((n, n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(c + 1, n):
                    terms = [d_gamma(c, a, d, b), _prod(Const(-1), d_gamma(d, a, c, b))]
                    for e in range(n):
                        terms.append(_prod(gam[a, c, e], gam[e, d, b]))
                        terms.append(_prod(Const(-1), gam[a, d, e], gam[e, c, b]))
                    val = _simp_sum(terms)
                    out[a, b, c, d] = val
                    out[a, b, d, c] = simplify(Mul((Const(-1), val))) if val != ZERO else ZERO
    t = TensorField(g.chart, "uddd", out, symmetries=[(2, 3, -1)], name="Riemann")
    g._cache["riemann"] = t
    return t


def lowered_riemann(g: Metric) -> TensorField:
    """R_{abcd} = g_{ae} R^e_{bcd}."""
    if "riemann_low" in g._cache:
        return g._cache["riemann_low"]
    n = g.dim
    r = riemann(g).components
    out = _obj_array((n, n, n, n))
    for a, b, c, d in itertools.product(range(n), repeat=4):
        if d <= c:
            continue
        val = _simp_sum([_prod(g[a, e], r[e, b, c, d]) for e in range(n)])
        out[a, b, c, d] = val
        out[a, b, d, c] = simplify(Mul((Const(-1), val))) if val != ZERO else ZERO
    t = TensorField(g.chart, "dddd", out, name="Riemann_low")
    g._cache["riemann_low"] = t
    return t


def ricci(g: Metric) -> TensorField:
    if "ricci" in g._cache:
        return g._cache["ricci"]
    n = g.dim
    r = riemann(g).components
    out = _obj_array((n, n))
    for b in range(n):
        for d in range(b, n):
            out[b, d] = _simp_sum([r[a, b, a, d] for a in range(n)])
            if d != b:
                out[d, b] = out[b, d]
    t = TensorField(g.chart, "dd", out, name="Ricci")
    g._cache["ricci"] = t
    return t


def scalar_curvature(g: Metric) -> Expr:
    if "scalar" not in g._cache:
        n = g.dim
        ginv = inverse_metric(g).components
        ric = ricci(g).components
        g._cache["scalar"] = _simp_sum([_prod(ginv[a, b], ric[a, b]) for a in range(n) for b in range(n)])
    return g._cache["scalar"]


def einstein_tensor(g: Metric) -> TensorField:
    """G_{ab} = Ric_{ab} - R g_{ab} / 2."""
    if "einstein" in g._cache:
        return g._cache["einstein"]
    n = g.dim
    ric = ricci(g).components
    half_r = simplify(_prod(HALF, scalar_curvature(g)))
    out = _obj_array((n, n))
    for a in range(n):
        for b in range(a, n):
            out[a, b] = out[b, a] = _simp_sum([ric[a, b], _prod(Const(-1), half_r, g[a, b])])
    t = TensorField(g.chart, "dd", out, symmetries=[(0, 1, 1)], name="Einstein")
    g._cache["einstein"] = t
    return t


def stress_energy(g: Metric) -> TensorField:
    """Effective stress-energy T = Ric - R g / 2 (the Einstein tensor)."""
    t = einstein_tensor(g)
    return TensorField(g.chart, "dd", t.components, name="T")


def trace(g: Metric, t: TensorField) -> Expr:
    """g^{ab} T_{ab} for a covariant 2-tensor."""
    if t.valence != "dd":
        raise GeometryError("trace needs a (0,2) tensor")
    ginv = inverse_metric(g).components
    n = g.dim
    return _simp_sum([_prod(ginv[a, b], t[a, b]) for a in range(n) for b in range(n)])


def raise_both(g: Metric, t: TensorField) -> TensorField:
    ginv = inverse_metric(g).components
    n = g.dim
    out = _obj_array((n, n))
    for a in range(n):
        for b in range(n):
            out[a, b] = _simp_sum(
                [_prod(ginv[a, c], ginv[b, d], t[c, d]) for c in range(n) for d in range(n)]
            )
    return TensorField(g.chart, "uu", out, name=t.name + "^up")


def contracted_bianchi(g: Metric) -> List[Expr]:
    """nabla_a G^{ab}, one expression per b."""
    n = g.dim
    gup = raise_both(g, einstein_tensor(g)).components
    gam = christoffel(g).components
    syms = g.chart.symbols
    out = []
    for b in range(n):
        terms = [differentiate(gup[a, b], syms[a]) for a in range(n)]
        for a in range(n):
            for e in range(n):
                terms.append(_prod(gam[a, a, e], gup[e, b]))
                terms.append(_prod(gam[b, a, e], gup[a, e]))
        out.append(_simp_sum(terms))
    return out


# --------------------------------------------------------------------------
# orthonormal frames


@dataclass(frozen=True)
class Frame:
    """Orthonormal frame; ``vectors[alpha][mu]`` is the mu-component of e_alpha."""

    chart: Chart
    vectors: Tuple[Tuple[Expr, ...], ...]
    order: str = "chart"

    def evaluate(self, point: Mapping[str, float]) -> np.ndarray:
        names = sorted(point)
        flat = [e for v in self.vectors for e in v]
        vals = compile_many(flat, names)(*[point[n] for n in names])
        n = self.chart.dim
        return np.asarray(vals, dtype=float).reshape(n, n)

    def check(self, g: Metric, points: Iterable[Mapping[str, float]], tol: float = 1e-9) -> None:
        n = g.dim
        eta = np.diag([-1.0] + [1.0] * (n - 1))
        for pt in points:
            b = g.bindings(pt)
            e = self.evaluate(b)
            m = g.evaluate(pt)
            gram = e @ m @ e.T
            if not np.allclose(gram, eta, atol=tol, rtol=0):
                raise FrameError(f"frame not orthonormal at {pt}: {gram}")


def _spatial_order(n: int, order: str) -> List[int]:
    if order == "chart":
        return list(range(1, n))
    if order == "reversed":
        return list(range(n - 1, 0, -1))
    raise GeometryError(f"unknown frame order {order!r}")


def coordinate_frame(g: Metric, order: str = "chart") -> Frame:
    """Orthonormal frame with e_0 = (-g(d_t, d_t))^(-1/2) d_t.

    The spatial vectors come from Gram-Schmidt over the coordinate vectors,
    in chart order (``order="chart"``) or last coordinate first
    (``order="reversed"``).  With the reversed order e_1 is the unit vector
    orthogonal to all later coordinate directions.
    """
    key = f"frame:{order}"
    if key in g._cache:
        return g._cache[key]
    if g.signature != "lorentzian":
        raise FrameError("coordinate_frame needs a Lorentzian metric")
    n = g.dim
    gm = g.components

    def inner(u, v):
        return _simp_sum([_prod(u[a], v[b], gm[a, b]) for a in range(n) for b in range(n) if u[a] != ZERO and v[b] != ZERO])

    e0 = [ZERO] * n
    e0[0] = simplify(Pow(Mul((Const(-1), gm[0, 0])), Const(Fraction(-1, 2))))
    frame = [(e0, -1)]
    for i in _spatial_order(n, order):
        v = [ONE if k == i else ZERO for k in range(n)]
        comps = list(v)
        for e, sign in frame:
            proj = inner(v, e)
            if proj == ZERO:
                continue
            # v_perp = v - sign * g(v, e) e
            for k in range(n):
                if e[k] != ZERO:
                    comps[k] = _simp_sum([comps[k], _prod(Const(-sign), proj, e[k])])
        norm2 = inner(comps, comps)
        if norm2 == ZERO:
            raise FrameError(f"coordinate vector d/d{g.chart.names[i]} is null after projection")
        scale = simplify(Pow(norm2, Const(Fraction(-1, 2))))
        frame.append(([simplify(_prod(scale, c)) for c in comps], 1))
    vectors = [frame[0][0]] + [None] * (n - 1)
    for slot, i in enumerate(_spatial_order(n, order), start=1):
        vectors[i] = frame[slot][0]
    fr = Frame(g.chart, tuple(tuple(v) for v in vectors), order)
    g._cache[key] = fr
    return fr


def frame_components(t: TensorField, frame: Frame) -> np.ndarray:
    """T(e_alpha, e_beta) for a covariant 2-tensor, simplified."""
    if t.valence != "dd":
        raise GeometryError("frame_components needs a (0,2) tensor")
    n = t.chart.dim
    out = _obj_array((n, n))
    vs = frame.vectors
    for al in range(n):
        for be in range(al, n):
            out[al, be] = out[be, al] = _simp_sum(
                [
                    _prod(vs[al][a], vs[be][b], t[a, b])
                    for a in range(n)
                    for b in range(n)
                    if vs[al][a] != ZERO and vs[be][b] != ZERO and t[a, b] != ZERO
                ]
            )
    return out


def numeric_frame(m: np.ndarray, order: str = "chart") -> np.ndarray:
    """Rows are e_alpha for the numeric metric matrix ``m``."""
    n = m.shape[0]
    if m[0, 0] >= 0:
        raise FrameError("d/dt is not timelike at this point")
    e0 = np.zeros(n)
    e0[0] = 1.0 / math.sqrt(-m[0, 0])
    done = [(e0, -1.0)]
    rows = {0: e0}
    for i in _spatial_order(n, order):
        v = np.zeros(n)
        v[i] = 1.0
        w = v.copy()
        for e, sign in done:
            w = w - sign * (v @ m @ e) * e
        nn = w @ m @ w
        if not nn > 0:
            raise FrameError(f"Gram-Schmidt breaks down at coordinate {i}")
        e = w / math.sqrt(nn)
        done.append((e, 1.0))
        rows[i] = e
    return np.array([rows[k] for k in range(n)])


def _riemann_function(g: Metric):
    if "riemann_fn" not in g._cache:
        r = riemann(g)
        params = sorted(g.parameters)
        names = list(g.chart.names) + params
        flat = [r[idx] for idx in r.indices()]
        g._cache["riemann_fn"] = (names, compile_many(flat, names))
    return g._cache["riemann_fn"]


def curvature_norm(g: Metric, point: Mapping[str, float], order: str = "chart") -> float:
    """|Rm| = sqrt(sum R(e_a, e_b, e_c, e_d)^2) in an orthonormal frame with e_0 along d_t."""
    names, fn = _riemann_function(g)
    b = g.bindings(point)
    try:
        vals = fn(*[b[k] for k in names])
    except KeyError as exc:
        raise GeometryError(f"no value for {exc.args[0]!r}") from exc
    n = g.dim
    r_up = np.asarray(vals, dtype=float).reshape((n,) * 4)
    m = g.evaluate(point)
    r_low = np.einsum("ae,ebcd->abcd", m, r_up)
    e = numeric_frame(m, order)
    rf = np.einsum("abcd,ia,jb,kc,ld->ijkl", r_low, e, e, e, e)
    return float(math.sqrt(float(np.sum(rf * rf))))
