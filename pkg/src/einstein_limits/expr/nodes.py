"""Immutable expression-tree nodes.

Every node carries a structural key (used for equality and for the canonical
ordering of commutative operands) and a hash computed once at construction.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational, Real
from typing import Iterable, Tuple, Union

Number = Union[Fraction, float]


def as_number(value) -> Number:
    """Coerce ints and rationals to Fraction, everything else to float."""
    if isinstance(value, bool):
        raise TypeError("booleans are not expression constants")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, Real):
        return float(value)
    raise TypeError(f"cannot use {value!r} as a numeric constant")


def is_integer(value) -> bool:
    if isinstance(value, Fraction):
        return value.denominator == 1
    if isinstance(value, float):
        return value.is_integer()
    return False


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_key", "_hash")

    def _init_key(self, key, hash_parts):
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(hash_parts))

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    @property
    def key(self):
        return self._key

    @property
    def args(self) -> Tuple["Expr", ...]:
        return ()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return self._hash == other._hash and self._key == other._key

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    def __lt__(self, other):
        return self._key < other._key

    def __reduce__(self):
        return (type(self), self._ctor_args())

    def _ctor_args(self):
        return self.args

    # arithmetic sugar; results are raw (unsimplified) trees
    def __add__(self, other):
        return Add((self, lift(other)))

    def __radd__(self, other):
        return Add((lift(other), self))

    def __sub__(self, other):
        return Add((self, Neg(lift(other))))

    def __rsub__(self, other):
        return Add((lift(other), Neg(self)))

    def __mul__(self, other):
        return Mul((self, lift(other)))

    def __rmul__(self, other):
        return Mul((lift(other), self))

    def __truediv__(self, other):
        return Mul((self, Pow(lift(other), Const(-1))))

    def __rtruediv__(self, other):
        return Mul((lift(other), Pow(self, Const(-1))))

    def __pow__(self, other):
        return Pow(self, lift(other))

    def __rpow__(self, other):
        return Pow(lift(other), self)

    def __neg__(self):
        return Neg(self)

    def __repr__(self):
        from .printer import to_string

        return f"Expr({to_string(self)!r})"

    def __str__(self):
        from .printer import to_string

        return to_string(self)

    def free_names(self) -> frozenset:
        names = set()
        stack = [self]
        seen = set()
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if isinstance(node, Symbol):
                names.add(node.name)
            stack.extend(node.args)
        return frozenset(names)

    def count_nodes(self) -> int:
        """Tree size, counting shared subtrees once per occurrence."""
        return 1 + sum(a.count_nodes() for a in self.args)

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        v = as_number(value)
        object.__setattr__(self, "value", v)
        if isinstance(v, Fraction):
            key = (0, float(v), 0, v.numerator, v.denominator)
        else:
            key = (0, v, 1, 0, 0)
        self._init_key(key, key)

    def _ctor_args(self):
        return (self.value,)

    @property
    def is_exact(self) -> bool:
        return isinstance(self.value, Fraction)


class Symbol(Expr):
    """A named leaf. ``positive`` licenses power and log rewrites."""

    __slots__ = ("name", "positive")
    kind = "symbol"

    def __init__(self, name: str, positive: bool = False):
        if not isinstance(name, str) or not name:
            raise ValueError("symbol name must be a non-empty string")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "positive", bool(positive))
        key = (1, name, self.kind, bool(positive))
        self._init_key(key, key)

    def _ctor_args(self):
        return (self.name, self.positive)


class Coordinate(Symbol):
    __slots__ = ()
    kind = "coordinate"


class Parameter(Symbol):
    __slots__ = ()
    kind = "parameter"


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", arg)
        self._init_key((6, arg.key), (6, arg._hash))

    @property
    def args(self):
        return (self.arg,)


class _NAry(Expr):
    __slots__ = ("_args",)
    rank = -1

    def __init__(self, args: Iterable[Expr]):
        args = tuple(args)
        if not args:
            raise ValueError(f"{type(self).__name__} needs at least one operand")
        for a in args:
            if not isinstance(a, Expr):
                raise TypeError(f"operand {a!r} is not an Expr")
        object.__setattr__(self, "_args", args)
        self._init_key(
            (self.rank, tuple(a.key for a in args)),
            (self.rank, tuple(a._hash for a in args)),
        )

    @property
    def args(self):
        return self._args

    def _ctor_args(self):
        return (self._args,)


class Add(_NAry):
    __slots__ = ()
    rank = 5


class Mul(_NAry):
    __slots__ = ()
    rank = 4


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: Expr):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)
        self._init_key((3, base.key, exponent.key), (3, base._hash, exponent._hash))

    @property
    def args(self):
        return (self.base, self.exponent)


class Function(Expr):
    __slots__ = ("arg",)
    fname = ""

    def __init__(self, arg: Expr):
        if not isinstance(arg, Expr):
            raise TypeError(f"operand {arg!r} is not an Expr")
        object.__setattr__(self, "arg", arg)
        self._init_key((2, self.fname, arg.key), (2, self.fname, arg._hash))

    @property
    def args(self):
        return (self.arg,)


class Exp(Function):
    __slots__ = ()
    fname = "exp"


class Log(Function):
    __slots__ = ()
    fname = "log"


class Sqrt(Function):
    __slots__ = ()
    fname = "sqrt"


class Sin(Function):
    __slots__ = ()
    fname = "sin"


class Cos(Function):
    __slots__ = ()
    fname = "cos"


FUNCTIONS = {cls.fname: cls for cls in (Exp, Log, Sqrt, Sin, Cos)}

ZERO = Const(0)
ONE = Const(1)


def lift(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(value)


def rational(p: int, q: int = 1) -> Const:
    return Const(Fraction(p, q))


def coords(names: str, positive: bool = False):
    """``coords("t x y")`` -> tuple of Coordinate symbols."""
    return tuple(Coordinate(n, positive=positive) for n in names.split())


def params(names: str, positive: bool = False):
    return tuple(Parameter(n, positive=positive) for n in names.split())


# function-call helpers used when building metrics in code
def exp(x) -> Expr:
    return Exp(lift(x))


def log(x) -> Expr:
    return Log(lift(x))


def sqrt(x) -> Expr:
    return Sqrt(lift(x))


def sin(x) -> Expr:
    return Sin(lift(x))


def cos(x) -> Expr:
    return Cos(lift(x))
