"""Zero checks with symbolic/numeric modes, and a finite-difference curvature oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .expr import ZERO, Expr, compile_many, simplify
from .geometry import Metric, TensorField, christoffel, ricci, riemann

NODE_LIMIT = 20_000
NUMERIC_POINTS = 20
NUMERIC_TOL = 1e-9
MODES = ("symbolic", "numeric", "auto")


@dataclass
class CheckResult:
    name: str
    passed: bool
    mode: str
    residual: float
    detail: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "passed": self.passed,
            "mode": self.mode,
            "residual": self.residual,
            "detail": self.detail,
        }


def _numeric_max(exprs: Sequence[Expr], points: Sequence[Mapping[str, float]]) -> float:
    names = sorted(set().union(*(p.keys() for p in points)))
    fn = compile_many(list(exprs), names)
    cols = [np.array([p[n] for p in points]) for n in names]
    vals = fn(*cols)
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def check_zero(
    name: str,
    exprs: Iterable[Expr],
    points: Sequence[Mapping[str, float]],
    mode: str = "auto",
    tol: float = NUMERIC_TOL,
) -> CheckResult:
    """Assert every expression vanishes.

    ``symbolic`` demands literal zero after simplification; ``numeric``
    evaluates at ``points`` and compares with ``tol``; ``auto`` tries the
    symbolic route first and falls back to numeric when an expression is
    nonzero or too large, recording which route decided.
    """
    if mode not in MODES:
        raise ValueError(f"unknown verification mode {mode!r}")
    exprs = list(exprs)
    if mode != "numeric":
        big = [e for e in exprs if e.count_nodes() > NODE_LIMIT]
        simplified = [] if big else [simplify(e) for e in exprs]
        if not big and all(e == ZERO for e in simplified):
            return CheckResult(name, True, "symbolic", 0.0)
        if mode == "symbolic":
            why = "expression exceeds node limit" if big else "did not simplify to zero"
            residual = _numeric_max(exprs, points) if points else math.nan
            return CheckResult(name, False, "symbolic", residual, why)
    residual = _numeric_max(exprs, points)
    return CheckResult(name, residual <= tol, "numeric", residual)


def nonzero_entries(
    entries: Mapping, points: Sequence[Mapping[str, float]], mode: str = "auto", tol: float = NUMERIC_TOL
) -> tuple:
    """Keys whose expressions fail a zero check, and the modes that decided."""
    keep, modes = [], set()
    for key, e in entries.items():
        if e == ZERO:
            continue
        res = check_zero(str(key), [e], points, mode, tol)
        modes.add(res.mode)
        if not res.passed:
            keep.append(key)
    return sorted(keep), sorted(modes) or ["symbolic"]


def metric_sample_points(g: Metric, count: int = NUMERIC_POINTS, seed: int = 0) -> List[Dict[str, float]]:
    return [g.bindings(p) for p in g.chart.sample_points(count, seed)]


# --------------------------------------------------------------------------
# finite-difference oracle

_STENCIL = np.array([-2.0, -1.0, 1.0, 2.0])
_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0


def _steps(x: np.ndarray, rel: float) -> np.ndarray:
    return rel * np.maximum(1.0, np.abs(x))


def _fd_christoffel_many(gfun, xs: np.ndarray, rel: float) -> np.ndarray:
    """Gamma^a_{bc} at each row of ``xs`` (shape (m, n)) -> (m, n, n, n)."""
    m, n = xs.shape
    h = _steps(xs, rel)  # (m, n)
    offs = np.zeros((m, n, 4, n))
    for c in range(n):
        offs[:, c, :, c] = _STENCIL[None, :] * h[:, c : c + 1]
    pts = xs[:, None, None, :] + offs  # (m, n, 4, n)
    gv = gfun(*[pts[..., k] for k in range(n)])  # (n, n, m, n, 4)
    dg = np.einsum("abmck,k->mcab", gv, _WEIGHTS) / h[:, :, None, None]  # d_c g_ab
    g0 = gfun(*[xs[:, k] for k in range(n)])  # (n, n, m)
    ginv = np.linalg.inv(np.moveaxis(g0, -1, 0))  # (m, n, n)
    low = 0.5 * (np.einsum("mbdc->mdbc", dg) + np.einsum("mcdb->mdbc", dg) - dg)
    return np.einsum("mad,mdbc->mabc", ginv, low)


def fd_christoffel(gfun, x: Sequence[float], rel: float = 1e-3) -> np.ndarray:
    return _fd_christoffel_many(gfun, np.atleast_2d(np.asarray(x, dtype=float)), rel)[0]


def fd_riemann(gfun, x: Sequence[float], rel: float = 1e-3) -> np.ndarray:
    """R^a_{bcd} from nested 4th-order central differences of the metric."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = _steps(x, rel)
    pts = [x]
    for c in range(n):
        for s in _STENCIL:
            p = x.copy()
            p[c] += s * h[c]
            pts.append(p)
    gam = _fd_christoffel_many(gfun, np.array(pts), rel)
    g0 = gam[0]
    shifted = gam[1:].reshape(n, 4, n, n, n)
    dgam = np.einsum("ckabd,k->cabd", shifted, _WEIGHTS) / h[:, None, None, None]  # d_c Gamma^a_bd
    r = (
        np.einsum("cadb->abcd", dgam)
        - np.einsum("dacb->abcd", dgam)
        + np.einsum("ace,edb->abcd", g0, g0)
        - np.einsum("ade,ecb->abcd", g0, g0)
    )
    return r


@dataclass
class CrossValidation:
    max_relative_error: float
    points: int
    tensors: List[str] = field(default_factory=list)

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_relative_error <= tol


def _tensor_at(t: TensorField, g: Metric, point: Mapping[str, float]) -> np.ndarray:
    return t.evaluate(g.bindings(point))


def cross_validate(g: Metric, points: Optional[Sequence[Mapping[str, float]]] = None, rel_step: float = 1e-3) -> CrossValidation:
    """Compare symbolic Gamma, Riemann and Ricci with finite differences.

    The error of each component is measured relative to the largest
    component magnitude of the same tensor at the same point, so that
    vanishing components are judged on the tensor's own scale.  Ricci uses
    at least the Riemann scale, since a vacuum Ricci has no scale of its own.
    """
    if points is None:
        points = g.chart.sample_points(10, seed=1)
    gfun = g.numeric()
    gam, rie, ric = christoffel(g), riemann(g), ricci(g)
    worst = 0.0
    for pt in points:
        x = [pt[nm] for nm in g.chart.names]
        fd_rie = fd_riemann(gfun, x, rel_step)
        s_gam, s_rie, s_ric = (_tensor_at(t, g, pt) for t in (gam, rie, ric))
        rie_scale = max(float(np.max(np.abs(s_rie))), float(np.max(np.abs(fd_rie))))
        triples = (
            (s_gam, fd_christoffel(gfun, x, rel_step), 0.0),
            (s_rie, fd_rie, 0.0),
            # Ricci is a contraction of Riemann and may vanish identically
            (s_ric, np.einsum("abad->bd", fd_rie), rie_scale),
        )
        for s, fd, floor in triples:
            scale = max(float(np.max(np.abs(s))), float(np.max(np.abs(fd))), floor, 1e-300)
            worst = max(worst, float(np.max(np.abs(s - fd))) / scale)
    return CrossValidation(worst, len(points), ["Gamma", "Riemann", "Ricci"])
