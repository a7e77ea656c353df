"""Canonical simplification.

Every expression is mapped to a normal form: a sum of terms, each a numeric
coefficient times a product of *atoms* raised to exponents.  Atoms are
symbols, prime integers carrying a fractional exponent in ``[0, 1)``,
``exp``/``log``/``sin``/``cos`` of canonical arguments, primitive sums that
could not be expanded (negative or fractional powers), and opaque powers
that may not be distributed.

Building the normal form folds constants, flattens sums and products,
collects powers of a common base, cancels ``exp``/``log`` pairs and collects
like terms.  Rendering it back gives an expression whose operands appear in
structural-key order, so two simplified expressions are equal exactly when
their trees are equal.

Rewrites that change the domain are restricted:

* ``(a^e)^x -> a^(e*x)`` needs an integer ``x``, an odd-numerator ``e`` or a
  positive ``a`` (positive symbol, ``exp(.)``, positive constant);
* ``log`` splits only over positive factors;
* ``exp(c*log(X) + rest) -> X^c * exp(rest)`` is always allowed because
  ``log(X)`` already forces ``X > 0``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Tuple, Union

from .nodes import (
    ZERO,
    Add,
    Const,
    Cos,
    Exp,
    Expr,
    Function,
    Log,
    Mul,
    Neg,
    Number,
    Pow,
    Sin,
    Sqrt,
    Symbol,
    is_integer,
)

Exponent = Union[Fraction, float, Expr]
Mono = Tuple[Tuple[Expr, Exponent], ...]
Poly = Dict[Mono, Number]

MAX_ITERATIONS = 32
EXPAND_LIMIT = 8
_CACHE_LIMIT = 500_000

F0 = Fraction(0)
F1 = Fraction(1)
_ONE_POLY: Poly = {(): F1}

_cache: Dict[Expr, Poly] = {}


def clear_cache() -> None:
    _cache.clear()


# --------------------------------------------------------------------------
# exponents: numbers, or canonical expressions when symbolic


def _is_num(x) -> bool:
    return isinstance(x, (Fraction, float))


def _ekey(e):
    return (0, float(e)) if _is_num(e) else (1, e.key)


def _epoly(e) -> Poly:
    if _is_num(e):
        return {(): e} if e != 0 else {}
    return to_poly(e)


def _from_epoly(p: Poly) -> Exponent:
    if not p:
        return F0
    if len(p) == 1 and () in p:
        return p[()]
    return to_expr(p)


def _eadd(a, b) -> Exponent:
    if _is_num(a) and _is_num(b):
        return a + b
    return _from_epoly(_padd(_epoly(a), _epoly(b)))


def _emul(a, b) -> Exponent:
    if _is_num(a) and _is_num(b):
        return a * b
    return _from_epoly(_pmul(_epoly(a), _epoly(b)))


def _eint(e) -> bool:
    return _is_num(e) and is_integer(e)


def _ezero(e) -> bool:
    return _is_num(e) and e == 0


def _odd_numerator(e) -> bool:
    return isinstance(e, Fraction) and e.numerator % 2 == 1


def _exp_expr(e) -> Expr:
    return Const(e) if _is_num(e) else e


# --------------------------------------------------------------------------
# atoms and monomials


def _is_positive_atom(a: Expr) -> bool:
    if isinstance(a, Symbol):
        return a.positive
    if isinstance(a, Exp):
        return True
    if isinstance(a, Const):
        return a.value > 0
    return False


def _mono_key(m: Mono):
    return tuple((a.key, _ekey(e)) for a, e in m)


def _make_mono(d: Dict[Expr, Exponent]) -> Mono:
    return tuple(sorted(((a, e) for a, e in d.items() if not _ezero(e)), key=lambda ae: ae[0].key))


def _needs_work(d: Dict[Expr, Exponent]) -> bool:
    n_exp = 0
    for a, e in d.items():
        if _ezero(e):
            return True
        if isinstance(a, Exp):
            n_exp += 1
            if n_exp > 1 or not (_is_num(e) and e == 1):
                return True
        elif isinstance(a, Const):
            if _is_num(e):
                v = a.value
                if isinstance(v, Fraction) and v > 0 and isinstance(e, Fraction):
                    if e < 0 or e >= 1:
                        return True
                elif is_integer(e) and v != 0:
                    return True
        elif isinstance(a, Add):
            if _eint(e) and 0 < e <= EXPAND_LIMIT:
                return True
        elif isinstance(a, (Pow, Mul)):
            if _eint(e):
                return True
        elif isinstance(a, Cos):
            if _eint(e) and e >= 2:
                return True
    return False


def _normalize(c: Number, d: Dict[Expr, Exponent]) -> Poly:
    """Turn ``c * prod(a^e)`` into a canonical polynomial."""
    if c == 0:
        return {}
    if not _needs_work(d):
        return {_make_mono(d): c}
    result: Poly = _ONE_POLY
    plain: Dict[Expr, Exponent] = {}
    exp_arg: Poly = {}
    for a, e in d.items():
        if _ezero(e):
            continue
        if isinstance(a, Exp):
            exp_arg = _padd(exp_arg, _pmul(to_poly(a.arg), _epoly(e)))
        elif isinstance(a, Const) and _is_num(e):
            v = a.value
            if isinstance(v, Fraction) and v > 0 and isinstance(e, Fraction):
                whole = math.floor(e)
                c = c * v**whole
                if e != whole:
                    plain[a] = e - whole
            elif is_integer(e) and v != 0:
                c = c * v ** int(e)
            else:
                plain[a] = e
        elif isinstance(a, Add) and _eint(e) and 0 < e <= EXPAND_LIMIT:
            result = _pmul(result, _ppow(to_poly(a), e))
        elif isinstance(a, (Pow, Mul)) and _eint(e):
            result = _pmul(result, _ppow(to_poly(a), e))
        elif isinstance(a, Cos) and _eint(e) and e >= 2:
            k = int(e)
            sin2 = {((Sin(a.arg), Fraction(2)),): F1}
            one_minus = _padd(_ONE_POLY, _pscale(sin2, -1))
            piece = _ppow(one_minus, Fraction(k // 2))
            if k % 2:
                piece = _pmul(piece, {((a, F1),): F1})
            result = _pmul(result, piece)
        else:
            plain[a] = e
    if c == 0:
        return {}
    if exp_arg:
        result = _pmul(result, _exp_poly(exp_arg))
    return _pmul(result, {_make_mono(plain): c})


def _mono_mul(m1: Mono, m2: Mono, c: Number) -> Poly:
    if not m1:
        return {m2: c}
    if not m2:
        return {m1: c}
    d = dict(m1)
    for a, e in m2:
        if a in d:
            d[a] = _eadd(d[a], e)
        else:
            d[a] = e
    return _normalize(c, d)


# --------------------------------------------------------------------------
# polynomial arithmetic (inputs are never mutated)


def _padd(p: Poly, q: Poly) -> Poly:
    if not p:
        return q
    if not q:
        return p
    r = dict(p)
    for m, c in q.items():
        v = r.get(m, 0) + c
        if v == 0:
            r.pop(m, None)
        else:
            r[m] = v
    return r


def _pscale(p: Poly, k: Number) -> Poly:
    if k == 0:
        return {}
    return {m: c * k for m, c in p.items()}


def _accumulate(r: Poly, q: Poly) -> None:
    for m, c in q.items():
        v = r.get(m, 0) + c
        if v == 0:
            r.pop(m, None)
        else:
            r[m] = v


def _pmul(p: Poly, q: Poly) -> Poly:
    if not p or not q:
        return {}
    if p is _ONE_POLY or (len(p) == 1 and p.get(()) == 1 and isinstance(p.get(()), Fraction)):
        return q
    if len(q) == 1 and q.get(()) == 1 and isinstance(q.get(()), Fraction):
        return p
    if len(p) > 1 and len(q) == 1:
        p = _fold_against(p, q)
    elif len(q) > 1 and len(p) == 1:
        q = _fold_against(q, p)
    r: Poly = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            _accumulate(r, _mono_mul(m1, m2, c1 * c2))
    return r


def _fold_against(p: Poly, mono_poly: Poly) -> Poly:
    """Rewrite the sum ``p`` as ``content * S`` when the other factor holds ``S^-k``.

    Keeps ``(x + y) * (x + y)^-1`` from expanding into uncancellable terms.
    """
    ((m, _),) = mono_poly.items()
    targets = [a for a, e in m if isinstance(a, Add) and _is_num(e) and e < 0]
    if not targets:
        return p
    content, primitive = _split_content(p, allow_any=True)
    s = to_expr(primitive)
    if s not in targets:
        return p
    folded = {((s, F1),): F1}
    return folded if content is None else _pmul(content, folded)


def _sorted_terms(p: Poly):
    return sorted(p.items(), key=lambda mc: _mono_key(mc[0]))


def _is_const(p: Poly) -> bool:
    return not p or (len(p) == 1 and () in p)


def _const_of(p: Poly) -> Number:
    return p.get((), F0)


@lru_cache(maxsize=4096)
def _factor(n: int):
    """Prime factorisation by trial division; a large cofactor is kept whole."""
    out = {}
    d = 2
    while d * d <= n and d < 1_000_000:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return tuple(sorted(out.items()))


def _radical(c: Fraction, x: Fraction) -> Poly:
    d: Dict[Expr, Exponent] = {}
    for p, k in _factor(c.numerator):
        d[Const(p)] = k * x
    for p, k in _factor(c.denominator):
        key = Const(p)
        d[key] = d.get(key, F0) - k * x
    return _normalize(F1, d)


def _coef_pow(c: Number, x: Exponent) -> Poly:
    if c == 1 and isinstance(c, Fraction):
        return _ONE_POLY
    if _is_num(x):
        if isinstance(c, Fraction) and isinstance(x, Fraction):
            if x.denominator == 1:
                if c == 0 and x < 0:
                    return {((Const(c), x),): F1}
                return {(): c ** int(x)}
            if c > 0:
                return _radical(c, x)
            return {((Const(c), x),): F1}
        if (c > 0 or is_integer(x)) and not (c == 0 and x < 0):
            return {(): float(c) ** float(x)}
        return {((Const(c), x),): F1}
    return {((Const(c), x),): F1}


def _ppow(p: Poly, x: Exponent) -> Poly:
    if _is_num(x):
        if x == 0:
            return _ONE_POLY
        if x == 1 and isinstance(x, Fraction):
            return p
    if not p:
        if _is_num(x) and x > 0:
            return {}
        return {((ZERO, x),): F1}
    if len(p) == 1:
        ((m, c),) = p.items()
        d: Dict[Expr, Exponent] = {}
        for a, e in m:
            if _eint(x) or _is_positive_atom(a) or _odd_numerator(e):
                new_e = _emul(e, x)
                d[a] = _eadd(d[a], new_e) if a in d else new_e
            else:
                atom = Pow(a, _exp_expr(e))
                d[atom] = _eadd(d[atom], x) if atom in d else x
        return _pmul(_coef_pow(c, x), _normalize(F1, d))
    if _eint(x) and 0 < x <= EXPAND_LIMIT:
        result = p
        for _ in range(int(x) - 1):
            result = _pmul(result, p)
        return result
    content, primitive = _split_content(p, allow_any=_eint(x))
    atom_part = {((to_expr(primitive), x),): F1}
    if _eint(x) and 0 < x <= EXPAND_LIMIT:
        atom_part = _ppow(primitive, x)
    if content is None:
        return atom_part
    return _pmul(_ppow(content, x), atom_part)


def _split_content(p: Poly, allow_any: bool):
    """Pull a monomial factor out of a sum.

    Returns ``(content, primitive)`` with ``content`` a one-term poly (or
    None) and ``primitive`` a sum whose leading coefficient is +-1.
    """
    terms = _sorted_terms(p)
    lead_m, lead_c = terms[0]
    if allow_any or lead_c > 0:
        k = lead_c
    else:
        k = -lead_c
    common: Dict[Expr, Exponent] = {}
    dicts = [dict(m) for m, _ in terms]
    for a, e in lead_m:
        if not _is_num(e):
            continue
        if not (allow_any or _is_positive_atom(a)):
            continue
        lowest = e
        for dm in dicts[1:]:
            other = dm.get(a)
            if other is None or not _is_num(other):
                lowest = None
                break
            lowest = min(lowest, other)
        if lowest is not None and lowest != 0:
            common[a] = lowest
    if not common and k == 1:
        return None, p
    primitive: Poly = {}
    for m, c in terms:
        dm = dict(m)
        for a, e in common.items():
            dm[a] = dm[a] - e
        _accumulate(primitive, _normalize(c / k, dm))
    return {_make_mono(common): k}, primitive


# --------------------------------------------------------------------------
# elementary functions


def _exp_poly(arg: Poly) -> Poly:
    result: Poly = _ONE_POLY
    rest: Poly = {}
    for m, c in arg.items():
        if not m:
            if isinstance(c, float):
                result = _pscale(result, math.exp(c))
            else:
                rest[m] = c
            continue
        logs = [i for i, (a, e) in enumerate(m) if isinstance(a, Log) and _is_num(e) and e == 1]
        if len(logs) == 1:
            i = logs[0]
            other = m[:i] + m[i + 1:]
            power = c if not other else to_expr({other: c})
            result = _pmul(result, _ppow(to_poly(m[i][0].arg), power))
        else:
            rest[m] = c
    if rest:
        result = _pmul(result, {((Exp(to_expr(rest)), F1),): F1})
    return result


def _log_atom(x: Expr) -> Poly:
    return {((Log(x), F1),): F1}


def _log_of_coefficient(c: Number) -> Poly:
    if isinstance(c, float):
        return {(): math.log(c)} if c != 1 else {}
    out: Poly = {}
    for p, k in _factor(c.numerator):
        _accumulate(out, _pscale(_log_atom(Const(p)), k))
    for p, k in _factor(c.denominator):
        _accumulate(out, _pscale(_log_atom(Const(p)), -k))
    return out


def _log_poly(arg: Poly) -> Poly:
    if not arg:
        return _log_atom(ZERO)
    if len(arg) > 1:
        content, primitive = _split_content(arg, allow_any=False)
        out = _log_atom(to_expr(primitive))
        if content is not None:
            out = _padd(out, _log_poly(content))
        return out
    ((m, c),) = arg.items()
    out: Poly = {}
    rest: Dict[Expr, Exponent] = {}
    for a, e in m:
        if isinstance(a, Exp):
            _accumulate(out, _pmul(to_poly(a.arg), _epoly(e)))
        elif _is_positive_atom(a) and not (isinstance(a, Const) and not isinstance(a.value, Fraction)):
            _accumulate(out, _pmul(_epoly(e), _log_atom(a)))
        else:
            rest[a] = e
    sign = 1 if c > 0 else -1
    _accumulate(out, _log_of_coefficient(c * sign))
    if rest or sign < 0:
        _accumulate(out, _log_atom(to_expr({_make_mono(rest): Fraction(sign)})))
    return out


def _trig_poly(cls, arg: Poly) -> Poly:
    if not arg:
        return {} if cls is Sin else _ONE_POLY
    if _is_const(arg) and isinstance(_const_of(arg), float):
        fn = math.sin if cls is Sin else math.cos
        return {(): fn(_const_of(arg))}
    lead_c = _sorted_terms(arg)[0][1]
    if lead_c < 0:
        flipped = _pscale(arg, -1)
        atom = {((cls(to_expr(flipped)), F1),): F1}
        return _pscale(atom, -1) if cls is Sin else atom
    return {((cls(to_expr(arg)), F1),): F1}


# --------------------------------------------------------------------------
# conversion


def to_poly(e: Expr) -> Poly:
    p = _cache.get(e)
    if p is None:
        p = _to_poly(e)
        if len(_cache) >= _CACHE_LIMIT:
            _cache.clear()
        _cache[e] = p
    return p


def _to_poly(e: Expr) -> Poly:
    if isinstance(e, Const):
        return {(): e.value} if e.value != 0 else {}
    if isinstance(e, Symbol):
        return {((e, F1),): F1}
    if isinstance(e, Neg):
        return _pscale(to_poly(e.arg), -1)
    if isinstance(e, Add):
        r: Poly = {}
        for a in e.args:
            _accumulate(r, to_poly(a))
        return r
    if isinstance(e, Mul):
        r = _ONE_POLY
        for a in e.args:
            r = _pmul(r, to_poly(a))
            if not r:
                break
        return r
    if isinstance(e, Pow):
        xp = to_poly(e.exponent)
        x = _const_of(xp) if _is_const(xp) else to_expr(xp)
        return _ppow(to_poly(e.base), x)
    if isinstance(e, Sqrt):
        return _ppow(to_poly(e.arg), Fraction(1, 2))
    if isinstance(e, Exp):
        return _exp_poly(to_poly(e.arg))
    if isinstance(e, Log):
        return _log_poly(to_poly(e.arg))
    if isinstance(e, (Sin, Cos)):
        return _trig_poly(type(e), to_poly(e.arg))
    if isinstance(e, Function):
        raise TypeError(f"unsupported function {e.fname}")
    raise TypeError(f"cannot simplify node {type(e).__name__}")


def _term_expr(m: Mono, c: Number) -> Expr:
    factors = [a if (_is_num(e) and e == 1 and isinstance(e, Fraction)) else Pow(a, _exp_expr(e)) for a, e in m]
    if not factors:
        return Const(c)
    if c == 1 and isinstance(c, Fraction):
        return factors[0] if len(factors) == 1 else Mul(factors)
    return Mul([Const(c)] + factors)


def to_expr(p: Poly) -> Expr:
    if not p:
        return ZERO
    terms = [_term_expr(m, c) for m, c in _sorted_terms(p)]
    return terms[0] if len(terms) == 1 else Add(terms)


def simplify(e: Expr, max_iterations: int = MAX_ITERATIONS) -> Expr:
    """Rewrite ``e`` into canonical form, iterating to a fixpoint."""
    current = e
    for _ in range(max_iterations):
        nxt = to_expr(to_poly(current))
        if nxt == current:
            return nxt
        current = nxt
    return current


def is_zero(e: Expr) -> bool:
    return simplify(e) == ZERO


def expand_terms(e: Expr):
    """The ``(coefficient, monomial)`` terms of the canonical form."""
    return _sorted_terms(to_poly(simplify(e)))
