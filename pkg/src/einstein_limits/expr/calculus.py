"""Exact differentiation and simultaneous substitution."""
from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from .nodes import (
    ONE,
    ZERO,
    Add,
    Const,
    Cos,
    Exp,
    Expr,
    Log,
    Mul,
    Neg,
    Pow,
    Sin,
    Sqrt,
    Symbol,
    lift,
)
from .simplify import simplify


def _add(terms):
    terms = [t for t in terms if not t.is_zero()]
    if not terms:
        return ZERO
    return terms[0] if len(terms) == 1 else Add(terms)


def _mul(factors):
    if any(f.is_zero() for f in factors):
        return ZERO
    factors = [f for f in factors if not (isinstance(f, Const) and f.value == 1)]
    if not factors:
        return ONE
    return factors[0] if len(factors) == 1 else Mul(factors)


def _depends_on(e: Expr, name: str, memo: dict) -> bool:
    hit = memo.get(e)
    if hit is None:
        if isinstance(e, Symbol):
            hit = e.name == name
        else:
            hit = any(_depends_on(a, name, memo) for a in e.args)
        memo[e] = hit
    return hit


def _d(e: Expr, v: str, memo: dict, dep: dict) -> Expr:
    cached = memo.get(e)
    if cached is not None:
        return cached
    if not _depends_on(e, v, dep):
        out = ZERO
    elif isinstance(e, Symbol):
        out = ONE
    elif isinstance(e, Neg):
        inner = _d(e.arg, v, memo, dep)
        out = ZERO if inner.is_zero() else Neg(inner)
    elif isinstance(e, Add):
        out = _add([_d(a, v, memo, dep) for a in e.args])
    elif isinstance(e, Mul):
        terms = []
        for i, a in enumerate(e.args):
            da = _d(a, v, memo, dep)
            if not da.is_zero():
                terms.append(_mul(list(e.args[:i]) + [da] + list(e.args[i + 1:])))
        out = _add(terms)
    elif isinstance(e, Pow):
        b, x = e.base, e.exponent
        db = _d(b, v, memo, dep)
        terms = []
        if not db.is_zero():
            # x * b^(x-1) * b'
            terms.append(_mul([x, Pow(b, Add((x, Const(-1)))), db]))
        if _depends_on(x, v, dep):
            # b^x * log(b) * x'
            terms.append(_mul([e, Log(b), _d(x, v, memo, dep)]))
        out = _add(terms)
    elif isinstance(e, Exp):
        out = _mul([e, _d(e.arg, v, memo, dep)])
    elif isinstance(e, Log):
        out = _mul([_d(e.arg, v, memo, dep), Pow(e.arg, Const(-1))])
    elif isinstance(e, Sqrt):
        out = _mul([Const(Fraction(1, 2)), Pow(e.arg, Const(Fraction(-1, 2))), _d(e.arg, v, memo, dep)])
    elif isinstance(e, Sin):
        out = _mul([Cos(e.arg), _d(e.arg, v, memo, dep)])
    elif isinstance(e, Cos):
        out = _mul([Const(-1), Sin(e.arg), _d(e.arg, v, memo, dep)])
    else:
        raise TypeError(f"cannot differentiate {type(e).__name__}")
    memo[e] = out
    return out


def differentiate(e: Expr, v, simplified: bool = True) -> Expr:
    """Exact derivative of ``e`` with respect to the symbol named ``v``.

    ``v`` may be a name or a Symbol.  The result is simplified unless
    ``simplified`` is False.
    """
    name = v.name if isinstance(v, Symbol) else v
    out = _d(lift(e), name, {}, {})
    return simplify(out) if simplified else out


def substitute(e: Expr, replacements: Mapping) -> Expr:
    """Replace symbols by name, simultaneously.  No simplification."""
    if not replacements:
        return e
    table = {
        (k.name if isinstance(k, Symbol) else k): lift(val) for k, val in replacements.items()
    }
    memo: dict = {}

    def walk(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Symbol):
            out = table.get(node.name, node)
        elif not node.args:
            out = node
        else:
            new_args = [walk(a) for a in node.args]
            if all(n is o for n, o in zip(new_args, node.args)):
                out = node
            elif isinstance(node, Pow):
                out = Pow(*new_args)
            elif isinstance(node, (Add, Mul)):
                out = type(node)(new_args)
            else:
                out = type(node)(new_args[0])
        memo[node] = out
        return out

    return walk(lift(e))
