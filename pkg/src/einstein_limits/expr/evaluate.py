"""Numeric evaluation: a checked tree walk and a vectorised numpy compiler."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .nodes import Add, Const, Cos, Exp, Expr, Log, Mul, Neg, Pow, Sin, Sqrt, Symbol
from .printer import to_string


class EvaluationError(ValueError):
    pass


class UnboundNameError(EvaluationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no binding for {name!r}")


class DomainError(EvaluationError):
    def __init__(self, message: str, subexpression: Expr):
        self.subexpression = subexpression
        super().__init__(f"{message} in {to_string(subexpression)}")


def _pow(base: float, x: float, node: Expr) -> float:
    if base == 0 and x < 0:
        raise DomainError("zero raised to a negative power", node)
    if base < 0 and not float(x).is_integer():
        raise DomainError("negative base with non-integer exponent", node)
    try:
        return math.pow(base, x)
    except OverflowError as exc:
        raise DomainError("overflow", node) from exc


def _rational_pow(base: float, x: Fraction, node: Expr) -> float:
    if base == 0 and x < 0:
        raise DomainError("zero raised to a negative power", node)
    if x.denominator == 1:
        return base ** int(x)
    if base < 0:
        raise DomainError("negative base with non-integer exponent", node)
    q = x.denominator
    root = math.pow(base, 1.0 / q)
    near = round(root)
    # exact roots of perfect powers, e.g. 8^(4/3) = 16
    if near > 0 and float(near) ** q == base:
        root = float(near)
    try:
        return root ** x.numerator
    except OverflowError as exc:
        raise DomainError("overflow", node) from exc


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` in IEEE double precision.

    Every free name must be bound; domain violations raise
    :class:`DomainError` naming the offending subexpression.
    """
    memo: dict = {}

    def ev(node: Expr) -> float:
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = float(node.value)
        elif isinstance(node, Symbol):
            if node.name not in bindings:
                raise UnboundNameError(node.name)
            out = float(bindings[node.name])
        elif isinstance(node, Neg):
            out = -ev(node.arg)
        elif isinstance(node, Add):
            out = math.fsum(ev(a) for a in node.args)
        elif isinstance(node, Mul):
            out = 1.0
            for a in node.args:
                out *= ev(a)
        elif isinstance(node, Pow):
            x = node.exponent
            if isinstance(x, Const) and isinstance(x.value, Fraction):
                out = _rational_pow(ev(node.base), x.value, node)
            else:
                out = _pow(ev(node.base), ev(x), node)
        elif isinstance(node, Exp):
            try:
                out = math.exp(ev(node.arg))
            except OverflowError as exc:
                raise DomainError("overflow", node) from exc
        elif isinstance(node, Log):
            a = ev(node.arg)
            if a <= 0:
                raise DomainError("log of non-positive value", node)
            out = math.log(a)
        elif isinstance(node, Sqrt):
            a = ev(node.arg)
            if a < 0:
                raise DomainError("sqrt of negative value", node)
            out = math.sqrt(a)
        elif isinstance(node, Sin):
            out = math.sin(ev(node.arg))
        elif isinstance(node, Cos):
            out = math.cos(ev(node.arg))
        else:
            raise TypeError(f"cannot evaluate {type(node).__name__}")
        memo[node] = out
        return out

    return ev(e)


# --------------------------------------------------------------------------
# compilation to numpy


class _Emitter:
    def __init__(self, names: Sequence[str]):
        self.index = {n: i for i, n in enumerate(names)}
        self.lines = []
        self.memo = {}
        self.consts = []

    def const(self, v) -> str:
        self.consts.append(float(v))
        return f"_c[{len(self.consts) - 1}]"

    def emit(self, node: Expr) -> str:
        hit = self.memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            ref = self.const(node.value)
            self.memo[node] = ref
            return ref
        if isinstance(node, Symbol):
            if node.name not in self.index:
                raise UnboundNameError(node.name)
            ref = f"_x[{self.index[node.name]}]"
            self.memo[node] = ref
            return ref
        if isinstance(node, Neg):
            code = f"-({self.emit(node.arg)})"
        elif isinstance(node, Add):
            code = " + ".join(self.emit(a) for a in node.args)
        elif isinstance(node, Mul):
            code = " * ".join(self.emit(a) for a in node.args)
        elif isinstance(node, Pow):
            x = node.exponent
            b = self.emit(node.base)
            if isinstance(x, Const) and isinstance(x.value, Fraction) and x.value.denominator == 1:
                k = int(x.value)
                code = f"_ipow({b}, {k})"
            else:
                code = f"_fpow({b}, {self.emit(x)})"
        elif isinstance(node, Exp):
            code = f"_np.exp({self.emit(node.arg)})"
        elif isinstance(node, Log):
            code = f"_log({self.emit(node.arg)})"
        elif isinstance(node, Sqrt):
            code = f"_fpow({self.emit(node.arg)}, 0.5)"
        elif isinstance(node, Sin):
            code = f"_np.sin({self.emit(node.arg)})"
        elif isinstance(node, Cos):
            code = f"_np.cos({self.emit(node.arg)})"
        else:
            raise TypeError(f"cannot compile {type(node).__name__}")
        ref = f"_t{len(self.lines)}"
        self.lines.append(f"    {ref} = {code}")
        self.memo[node] = ref
        return ref


def _ipow(b, k):
    b = np.asarray(b, dtype=float)
    if k < 0 and np.any(b == 0):
        raise FloatingPointError("zero raised to a negative power")
    return b**k


def _fpow(b, x):
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any((b < 0) & (x != np.round(x))) or np.any((b == 0) & (x < 0)):
        raise FloatingPointError("power outside its real domain")
    return np.power(b, x)


def _log(a):
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise FloatingPointError("log of non-positive value")
    return np.log(a)


def compile_many(exprs: Sequence[Expr], names: Sequence[str]) -> Callable:
    """Compile expressions into one vectorised function of ``names``.

    The returned callable takes one array (or scalar) per name, broadcasts
    them together and returns an array of shape ``(len(exprs),) + shape``.
    Shared subexpressions are evaluated once.
    """
    em = _Emitter(list(names))
    refs = [em.emit(e) for e in exprs]
    body = "\n".join(em.lines)
    src = f"def _f(_x, _c):\n{body}\n    return ({', '.join(refs)}{',' if len(refs) == 1 else ''})\n"
    scope = {"_np": np, "_ipow": _ipow, "_fpow": _fpow, "_log": _log}
    exec(compile(src, "<einstein_limits.expr>", "exec"), scope)
    inner = scope["_f"]
    consts = tuple(em.consts)
    exprs = tuple(exprs)
    n = len(names)

    def fn(*arrays):
        if len(arrays) != n:
            raise TypeError(f"expected {n} arguments, got {len(arrays)}")
        xs = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in arrays]) if arrays else []
        shape = xs[0].shape if arrays else ()
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                vals = inner(xs, consts)
        except FloatingPointError:
            _locate_domain_error(exprs, names, xs)
            raise
        out = np.empty((len(exprs),) + shape)
        for i, v in enumerate(vals):
            out[i] = v
        return out

    fn.source = src
    return fn


def _locate_domain_error(exprs, names, xs):
    """Re-run the checked scalar evaluator to report the failing subexpression."""
    flat = [np.ravel(x) for x in xs]
    size = flat[0].size if flat else 1
    for k in range(size):
        b = {n: float(f[k]) for n, f in zip(names, flat)}
        for e in exprs:
            evaluate(e, b)
    raise DomainError("floating point failure", exprs[0])


def compile_expr(e: Expr, names: Sequence[str]) -> Callable:
    many = compile_many([e], names)

    def fn(*arrays):
        return many(*arrays)[0]

    fn.source = many.source
    return fn
