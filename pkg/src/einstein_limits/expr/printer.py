"""Render expression trees in the parser's grammar."""
from __future__ import annotations

from fractions import Fraction

from .nodes import Add, Const, Expr, Function, Mul, Neg, Pow, Symbol

# binding strength of each rendered form
_ADD, _MUL, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5


def _const(value) -> tuple:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            text = str(abs(value.numerator))
        else:
            text = f"{abs(value.numerator)}/{value.denominator}"
        # a rational literal is a single token, so it behaves like an atom
        return (f"-{text}", _UNARY) if value < 0 else (text, _ATOM)
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"cannot print non-finite constant {text}")
    return (text, _UNARY) if text.startswith("-") else (text, _ATOM)


def _render(e: Expr) -> tuple:
    if isinstance(e, Const):
        return _const(e.value)
    if isinstance(e, Symbol):
        return e.name, _ATOM
    if isinstance(e, Function):
        return f"{e.fname}({_render(e.arg)[0]})", _ATOM
    if isinstance(e, Neg):
        text, prec = _render(e.arg)
        return "-" + (text if prec >= _POW else f"({text})"), _UNARY
    if isinstance(e, Pow):
        btext, bprec = _render(e.base)
        etext, eprec = _render(e.exponent)
        if bprec < _ATOM or "/" in btext:
            btext = f"({btext})"
        if eprec < _ATOM or "/" in etext:
            etext = f"({etext})"
        return f"{btext}^{etext}", _POW
    if isinstance(e, Mul):
        first = e.args[0]
        if len(e.args) > 1 and isinstance(first, Const) and first.value == -1:
            rest = e.args[1] if len(e.args) == 2 else Mul(e.args[1:])
            text, prec = _render(rest)
            return "-" + (text if prec >= _MUL else f"({text})"), _UNARY
        parts = []
        for i, a in enumerate(e.args):
            text, prec = _render(a)
            if isinstance(a, Pow) and isinstance(a.exponent, Const) and a.exponent.value == -1 and i > 0:
                dtext, dprec = _render(a.base)
                if dprec < _POW or "/" in dtext:
                    dtext = f"({dtext})"
                parts.append("/" + dtext)
                continue
            if prec < _MUL or (prec == _UNARY and i > 0):
                text = f"({text})"
            parts.append(("*" if i > 0 else "") + text)
        return "".join(parts), _MUL
    if isinstance(e, Add):
        out = []
        for i, a in enumerate(e.args):
            text, prec = _render(a)
            if i == 0:
                out.append(text if prec >= _ADD else f"({text})")
            elif isinstance(a, Neg) and _render(a.arg)[1] > _ADD:
                out.append(" - " + _render(a.arg)[0])
            elif text.startswith("-") and prec > _ADD:
                out.append(" - " + text[1:])
            else:
                out.append(" + " + (text if prec > _ADD else f"({text})"))
        return "".join(out), _ADD
    raise TypeError(f"cannot print {type(e).__name__}")


def to_string(e: Expr) -> str:
    return _render(e)[0]
