"""Symbolic scalar expressions: parse, simplify, differentiate, evaluate."""
from .calculus import differentiate, substitute
from .evaluate import (
    DomainError,
    EvaluationError,
    UnboundNameError,
    compile_expr,
    compile_many,
    evaluate,
)
from .nodes import (
    ONE,
    ZERO,
    Add,
    Const,
    Coordinate,
    Cos,
    Exp,
    Expr,
    Log,
    Mul,
    Neg,
    Parameter,
    Pow,
    Sin,
    Sqrt,
    Symbol,
    coords,
    cos,
    exp,
    lift,
    log,
    params,
    rational,
    sin,
    sqrt,
)
from .parser import ParseError, parse
from .printer import to_string
from .simplify import is_zero, simplify

__all__ = [
    "Add", "Const", "Coordinate", "Cos", "DomainError", "EvaluationError", "Exp",
    "Expr", "Log", "Mul", "Neg", "ONE", "Parameter", "ParseError", "Pow", "Sin",
    "Sqrt", "Symbol", "UnboundNameError", "ZERO", "compile_expr", "compile_many",
    "coords", "cos", "differentiate", "evaluate", "exp", "is_zero", "lift", "log",
    "params", "parse", "rational", "simplify", "sin", "sqrt", "substitute",
    "to_string",
]
