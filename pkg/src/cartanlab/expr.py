"""Symbolic scalar expressions.

Every coefficient handled by the package (metric and coframe components,
connection coefficients, curvature and torsion components) is an
:class:`Expr`.  Nodes are immutable and hash-consed, so structurally equal
expressions are the same Python object and large shared sub-expressions are
stored once.  Constructors keep expressions in a light canonical form
(flattened, constants folded, like terms and like powers collected, arguments
sorted by a fixed order).  Heavier rewriting lives in :func:`simplify`, and
:func:`is_zero` falls back to seeded numerical sampling when rewriting is not
enough.

Floating point numbers never appear inside a tree; they only show up when an
expression is evaluated.
"""

from __future__ import annotations

import hashlib
import math
import sys
import threading
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Symbol", "Sum", "Product", "Power", "Func",
    "ExprError", "ExprSyntaxError", "UnknownFunctionError", "UnboundSymbolError",
    "DomainError", "SamplingError", "Verdict", "SamplingPolicy",
    "const", "symbol", "symbols", "add", "mul", "power", "func", "sqrt", "sin", "cos", "cot",
    "parse", "to_string", "diff", "simplify", "evaluate", "evaluate_many", "subs",
    "is_zero", "is_zero_all", "sample_points", "count_nodes", "compile_scalar", "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "cot", "sqrt")

# Derivative chains of the field equations nest a few hundred levels deep.
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError, ValueError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.text = text


class UnknownFunctionError(ExprSyntaxError):
    pass


class UnboundSymbolError(ExprError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unbound symbol {self.name!r}"


class DomainError(ExprError, ArithmeticError):
    """Evaluation hit a singular point or left the real domain."""


class SamplingError(ExprError):
    """No usable sample point could be drawn for a numeric zero test."""


class _BudgetExceeded(Exception):
    pass


# --------------------------------------------------------------------------
# node types

_TABLE: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
_LOCK = threading.Lock()

_RANK_CONST, _RANK_SYMBOL, _RANK_FUNC, _RANK_POWER, _RANK_PRODUCT, _RANK_SUM = range(6)


def _digest(*parts: bytes) -> bytes:
    return hashlib.blake2b(b"\x00".join(parts), digest_size=8).digest()


class Expr:
    """Base class of all expression nodes.  Use the module constructors."""

    __slots__ = ("_hash", "_digest", "_sk", "_free", "_dcache", "_xcache", "_cs", "__weakref__")

    # populated by subclasses through _finish
    def _finish(self, digest: bytes, sort_key: tuple, free: frozenset) -> None:
        self._digest = digest
        self._hash = int.from_bytes(digest, "little", signed=True)
        self._sk = sort_key
        self._free = free
        self._dcache = None
        self._xcache = None
        self._cs = None

    def __hash__(self) -> int:
        return self._hash

    def __reduce__(self):
        return (parse, (to_string(self),))

    @property
    def free_symbols(self) -> frozenset:
        """Names of the symbols occurring in the expression."""
        return self._free

    @property
    def is_const(self) -> bool:
        return isinstance(self, Const)

    def children(self) -> tuple:
        return ()

    # arithmetic sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(-1, other))

    def __rsub__(self, other):
        return add(other, mul(-1, self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return mul(self, power(_coerce(other), -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __neg__(self):
        return mul(-1, self)

    def __pow__(self, exponent):
        if isinstance(exponent, Const):
            exponent = exponent.value
        return power(self, exponent)

    def __str__(self) -> str:
        return to_string(self)

    def __repr__(self) -> str:
        return f"Expr({to_string(self)!r})"


class Const(Expr):
    __slots__ = ("value", "_float")

    def __init__(self, *a, **k):
        raise TypeError("use cartanlab.expr.const()")


class Symbol(Expr):
    __slots__ = ("name",)

    def __init__(self, *a, **k):
        raise TypeError("use cartanlab.expr.symbol()")


class Sum(Expr):
    __slots__ = ("args",)

    def __init__(self, *a, **k):
        raise TypeError("use cartanlab.expr.add()")

    def children(self) -> tuple:
        return self.args


class Product(Expr):
    __slots__ = ("args",)

    def __init__(self, *a, **k):
        raise TypeError("use cartanlab.expr.mul()")

    def children(self) -> tuple:
        return self.args


class Power(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, *a, **k):
        raise TypeError("use cartanlab.expr.power()")

    def children(self) -> tuple:
        return (self.base,)


class Func(Expr):
    __slots__ = ("tag", "arg")

    def __init__(self, *a, **k):
        raise TypeError("use cartanlab.expr.func()")

    def children(self) -> tuple:
        return (self.arg,)


def _intern(key: tuple, build) -> Expr:
    obj = _TABLE.get(key)
    if obj is not None:
        return obj
    with _LOCK:
        obj = _TABLE.get(key)
        if obj is None:
            obj = build()
            _TABLE[key] = obj
    return obj


def const(value) -> Const:
    """A rational constant.  Floats are rejected."""
    if isinstance(value, Const):
        return value
    if isinstance(value, bool) or not isinstance(value, (int, Fraction, Rational)):
        raise TypeError(f"expression constants must be rational, got {value!r}")
    v = Fraction(value)
    key = ("c", v)

    def build():
        obj = object.__new__(Const)
        obj.value = v
        obj._float = float(v)
        obj._finish(_digest(b"c", str(v).encode()), (_RANK_CONST, v), frozenset())
        return obj

    return _intern(key, build)


def symbol(name: str) -> Symbol:
    if isinstance(name, Symbol):
        return name
    if not isinstance(name, str) or not name or not (name[0].isalpha() and name.isalnum()) \
            or not name.isascii():
        raise ValueError(f"invalid symbol name {name!r}")
    key = ("s", name)

    def build():
        obj = object.__new__(Symbol)
        obj.name = name
        obj._finish(_digest(b"s", name.encode()), (_RANK_SYMBOL, name), frozenset((name,)))
        return obj

    return _intern(key, build)


def symbols(names: str | Iterable[str]) -> tuple:
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(symbol(n) for n in names)


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)
HALF = Fraction(1, 2)


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return symbol(x)
    return const(x)


def _free_union(args: Sequence[Expr]) -> frozenset:
    if len(args) == 1:
        return args[0]._free
    out = set()
    for a in args:
        out |= a._free
    return frozenset(out)


def _sort_key(e: Expr):
    return e._sk


def _make_sum(terms: tuple) -> Expr:
    key = ("+", terms)

    def build():
        obj = object.__new__(Sum)
        obj.args = terms
        d = _digest(b"+", *(t._digest for t in terms))
        obj._finish(d, (_RANK_SUM, d), _free_union(terms))
        return obj

    return _intern(key, build)


def _make_product(factors: tuple) -> Expr:
    key = ("*", factors)

    def build():
        obj = object.__new__(Product)
        obj.args = factors
        d = _digest(b"*", *(f._digest for f in factors))
        obj._finish(d, (_RANK_PRODUCT, d), _free_union(factors))
        return obj

    return _intern(key, build)


def _make_power(base: Expr, exp: Fraction) -> Expr:
    key = ("^", base, exp)

    def build():
        obj = object.__new__(Power)
        obj.base = base
        obj.exp = exp
        d = _digest(b"^", base._digest, str(exp).encode())
        obj._finish(d, (_RANK_POWER, d), base._free)
        return obj

    return _intern(key, build)


def _make_func(tag: str, arg: Expr) -> Expr:
    key = ("f", tag, arg)

    def build():
        obj = object.__new__(Func)
        obj.tag = tag
        obj.arg = arg
        d = _digest(b"f", tag.encode(), arg._digest)
        obj._finish(d, (_RANK_FUNC, d), arg._free)
        return obj

    return _intern(key, build)


def _split_coeff(e: Expr) -> tuple:
    """(rational coefficient, coefficient-free rest) of a non-constant term."""
    cs = e._cs
    if cs is None:
        if isinstance(e, Product) and isinstance(e.args[0], Const):
            rest = e.args[1:]
            cs = (e.args[0].value, rest[0] if len(rest) == 1 else _make_product(rest))
        else:
            cs = (Fraction(1), e)
        e._cs = cs
    return cs


def _scaled(rest: Expr, c: Fraction) -> Expr:
    if c == 1:
        return rest
    if isinstance(rest, Product):
        return _make_product((const(c),) + rest.args)
    return _make_product((const(c), rest))


def add(*args) -> Expr:
    """Canonical sum: flattened, constants folded, like terms collected."""
    total = Fraction(0)
    coeffs: dict = {}
    # (term, scale) pairs; a rational multiple of a sum is distributed so that
    # x and -x always cancel term by term
    work = [(_coerce(a), Fraction(1)) for a in args]
    while work:
        t, scale = work.pop()
        if isinstance(t, Const):
            total += scale * t.value
            continue
        if isinstance(t, Sum):
            work.extend((u, scale) for u in t.args)
            continue
        c, rest = _split_coeff(t)
        if isinstance(rest, Sum):
            work.extend((u, scale * c) for u in rest.args)
            continue
        prev = coeffs.get(rest)
        coeffs[rest] = scale * c if prev is None else prev + scale * c
    terms = [_scaled(rest, c) for rest, c in coeffs.items() if c != 0]
    if total != 0:
        terms.append(const(total))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    terms.sort(key=_sort_key)
    return _make_sum(tuple(terms))


def mul(*args) -> Expr:
    """Canonical product: flattened, constants folded, equal bases combined."""
    coeff = Fraction(1)
    powers: dict = {}
    work = [_coerce(a) for a in args]
    while work:
        a = work.pop()
        if isinstance(a, Const):
            if a.value == 0:
                return ZERO
            coeff *= a.value
        elif isinstance(a, Product):
            work.extend(a.args)
        elif isinstance(a, Power):
            powers[a.base] = powers.get(a.base, 0) + a.exp
        else:
            powers[a] = powers.get(a, 0) + 1
    factors = []
    again = []
    for base, e in powers.items():
        if e == 0:
            continue
        f = power(base, e)
        if isinstance(f, Const):
            if f.value == 0:
                return ZERO
            coeff *= f.value
        elif isinstance(f, Product):
            again.append(f)
        else:
            factors.append(f)
    if again:
        return mul(const(coeff), *factors, *again)
    if not factors:
        return const(coeff)
    factors.sort(key=_sort_key)
    if len(factors) == 1 and isinstance(factors[0], Sum) and coeff != 1:
        # c*(x + y) has a single canonical form, the distributed sum
        return add(*(mul(coeff, t) for t in factors[0].args))
    if coeff == 1:
        if len(factors) == 1:
            return factors[0]
        return _make_product(tuple(factors))
    return _make_product((const(coeff),) + tuple(factors))


def _exact_root(v: Fraction, q: int):
    if v < 0:
        return None

    def iroot(n: int):
        r = round(n ** (1.0 / q))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** q == n:
                return cand
        return None

    num = iroot(v.numerator)
    den = iroot(v.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


def power(base, exponent) -> Expr:
    """``base ** exponent`` for a rational exponent.

    A non-integer exponent implies a nonnegative base (that is how
    evaluation treats it), which is what licenses ``(x^a)^b -> x^(ab)``.
    """
    base = _coerce(base)
    if isinstance(exponent, Const):
        exponent = exponent.value
    if isinstance(exponent, float) or not isinstance(exponent, (int, Fraction, Rational)):
        raise TypeError(f"exponents must be rational, got {exponent!r}")
    e = Fraction(exponent)
    if e == 0:
        return ONE
    if e == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        if v == 1:
            return ONE
        if e.denominator == 1:
            if v == 0 and e < 0:
                raise DomainError("zero raised to a negative power")
            return const(v ** int(e))
        if v == 0:
            if e < 0:
                raise DomainError("zero raised to a negative power")
            return ZERO
        root = _exact_root(v, e.denominator)
        if root is not None:
            return const(root ** e.numerator)
        return _make_power(base, e)
    if isinstance(base, Power):
        if e.denominator == 1 or base.exp.denominator != 1:
            return power(base.base, base.exp * e)
        return _make_power(base, e)
    if isinstance(base, Product) and e.denominator == 1:
        return mul(*(power(f, e) for f in base.args))
    return _make_power(base, e)


def func(tag: str, arg) -> Expr:
    arg = _coerce(arg)
    if tag == "sqrt":
        return power(arg, HALF)
    if tag not in ("sin", "cos", "cot"):
        raise ValueError(f"unknown function {tag!r}")
    if arg is ZERO:
        if tag == "sin":
            return ZERO
        if tag == "cos":
            return ONE
    return _make_func(tag, arg)


def sqrt(x) -> Expr:
    return power(x, HALF)


def sin(x) -> Expr:
    return func("sin", x)


def cos(x) -> Expr:
    return func("cos", x)


def cot(x) -> Expr:
    return func("cot", x)


# --------------------------------------------------------------------------
# printing

def _const_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _atom_str(e: Expr) -> str:
    """String for use as a factor or power base."""
    if isinstance(e, Const):
        s = _const_str(e.value)
        return s if e.value.denominator == 1 and e.value >= 0 else f"({s})"
    if isinstance(e, (Symbol, Func)):
        return to_string(e)
    return f"({to_string(e)})"


def _exp_str(v: Fraction) -> str:
    if v.denominator == 1 and v > 0:
        return str(v.numerator)
    return f"({_const_str(v)})"


def _product_str(coeff: Fraction, factors: Sequence[Expr]) -> str:
    num, den = [], []
    for f in factors:
        if isinstance(f, Power) and f.exp < 0:
            den.append(f.base if f.exp == -1 else _make_power(f.base, -f.exp))
        else:
            num.append(f)

    def fac(f: Expr) -> str:
        if isinstance(f, Power):
            return f"{_atom_str(f.base)}^{_exp_str(f.exp)}"
        return _atom_str(f)

    head = []
    if coeff != 1 or not num:
        c = coeff
        if c.denominator != 1:
            head.append(f"({_const_str(c)})")
        else:
            head.append(_const_str(c) if c >= 0 else f"({_const_str(c)})")
    s = "*".join(head + [fac(f) for f in num])
    for f in den:
        s += "/" + fac(f)
    return s


def to_string(e: Expr) -> str:
    """Render in the parser's grammar; ``parse(to_string(e)) is e``."""
    if isinstance(e, Const):
        return _const_str(e.value)
    if isinstance(e, Symbol):
        return e.name
    if isinstance(e, Func):
        return f"{e.tag}({to_string(e.arg)})"
    if isinstance(e, Power):
        if e.exp < 0:
            return _product_str(Fraction(1), (e,))
        return f"{_atom_str(e.base)}^{_exp_str(e.exp)}"
    if isinstance(e, Product):
        c, rest = _split_coeff(e)
        factors = rest.args if isinstance(rest, Product) else (rest,)
        if c < 0:
            return "-" + _product_str(-c, factors)
        return _product_str(c, factors)
    # Sum
    parts = []
    for i, t in enumerate(e.args):
        if isinstance(t, Const):
            c, body = t.value, None
        else:
            c, body = _split_coeff(t)
        neg = c < 0
        mag = -c if neg else c
        if body is None:
            s = _const_str(mag)
        else:
            factors = body.args if isinstance(body, Product) else (body,)
            s = _product_str(mag, factors)
        if i == 0:
            parts.append("-" + s if neg else s)
        else:
            parts.append((" - " if neg else " + ") + s)
    return "".join(parts)


# --------------------------------------------------------------------------
# parsing

_OPS = "+-*/^()"


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and (text[j] == "." or text[j].isalpha()):
                raise ExprSyntaxError("malformed number", j, text)
            yield ("num", text[i:j], i)
            i = j
        elif ch.isascii() and ch.isalpha():
            j = i
            while j < n and text[j].isascii() and text[j].isalnum():
                j += 1
            yield ("id", text[i:j], i)
            i = j
        elif ch in _OPS:
            yield ("op", ch, i)
            i += 1
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", i, text)
    yield ("end", "", n)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = list(_tokenize(text))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}", off, self.text)

    def parse(self) -> Expr:
        e = self.sum()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", off, self.text)
        return e

    def sum(self) -> Expr:
        terms = [self.term()]
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                t = self.term()
                terms.append(t if val == "+" else mul(-1, t))
            else:
                return add(*terms)

    def term(self) -> Expr:
        factors = [self.unary()]
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                f = self.unary()
                if val == "/":
                    if f is ZERO:
                        raise ExprSyntaxError("division by zero", off, self.text)
                    f = power(f, -1)
                factors.append(f)
            else:
                return mul(*factors)

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            e = self.unary()
            return e if val == "+" else mul(-1, e)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.take()
            exponent = self.unary()
            if not isinstance(exponent, Const):
                raise ExprSyntaxError("exponent must be a rational constant", off, self.text)
            try:
                return power(base, exponent.value)
            except DomainError as exc:
                raise ExprSyntaxError(str(exc), off, self.text) from None
        return base

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return const(int(val))
        if kind == "id":
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                if val not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {val!r}", off, self.text)
                self.take()
                arg = self.sum()
                self.expect(")")
                return func(val, arg)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} needs an argument", off, self.text)
            return symbol(val)
        if kind == "op" and val == "(":
            e = self.sum()
            self.expect(")")
            return e
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off, self.text)
        raise ExprSyntaxError(f"unexpected {val!r}", off, self.text)


def parse(text: str) -> Expr:
    """Parse an expression string.

    Grammar: identifiers ``[a-zA-Z][a-zA-Z0-9]*``, integer literals (``p/q``
    is an ordinary division and folds to a rational), operators ``+ - * / ^``
    with ``^`` binding tightest and right-associative, unary minus, the
    functions ``sin cos cot sqrt`` and parentheses.  Exponents must reduce to
    rational constants.  The result is in constructor-canonical form.
    """
    if not isinstance(text, str):
        raise TypeError("parse() expects a string")
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# differentiation

def diff(e: Expr, s) -> Expr:
    """Exact partial derivative with respect to symbol ``s`` (memoized)."""
    name = s.name if isinstance(s, Symbol) else s
    if not isinstance(name, str):
        raise TypeError("diff() needs a symbol")
    return _diff(_coerce(e), name)


def _diff(e: Expr, name: str) -> Expr:
    if name not in e._free:
        return ZERO
    cache = e._dcache
    if cache is None:
        cache = e._dcache = {}
    else:
        r = cache.get(name)
        if r is not None:
            return r
    if isinstance(e, Symbol):
        r = ONE
    elif isinstance(e, Sum):
        r = add(*[_diff(a, name) for a in e.args])
    elif isinstance(e, Product):
        terms = []
        args = e.args
        for i, a in enumerate(args):
            da = _diff(a, name)
            if da is ZERO:
                continue
            terms.append(mul(da, *args[:i], *args[i + 1:]))
        r = add(*terms)
    elif isinstance(e, Power):
        r = mul(const(e.exp), power(e.base, e.exp - 1), _diff(e.base, name))
    elif isinstance(e, Func):
        du = _diff(e.arg, name)
        if e.tag == "sin":
            r = mul(_make_func("cos", e.arg), du)
        elif e.tag == "cos":
            r = mul(MINUS_ONE, _make_func("sin", e.arg), du)
        else:
            r = mul(MINUS_ONE, power(_make_func("sin", e.arg), -2), du)
    else:  # pragma: no cover
        raise TypeError(type(e))
    cache[name] = r
    return r


# --------------------------------------------------------------------------
# substitution

def subs(e: Expr, mapping: Mapping) -> Expr:
    """Replace symbols by expressions (or rationals)."""
    repl = {(k.name if isinstance(k, Symbol) else k): _coerce(v) for k, v in mapping.items()}
    memo: dict = {}

    def go(x: Expr) -> Expr:
        if not (x._free & repl.keys()):
            return x
        r = memo.get(x)
        if r is not None:
            return r
        if isinstance(x, Symbol):
            r = repl[x.name]
        elif isinstance(x, Sum):
            r = add(*[go(a) for a in x.args])
        elif isinstance(x, Product):
            r = mul(*[go(a) for a in x.args])
        elif isinstance(x, Power):
            r = power(go(x.base), x.exp)
        else:
            r = func(x.tag, go(x.arg))
        memo[x] = r
        return r

    return go(_coerce(e))


def count_nodes(e: Expr) -> int:
    """Number of distinct nodes in the expression DAG."""
    seen = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        stack.extend(x.children())
    return len(seen)


# --------------------------------------------------------------------------
# numeric evaluation

def _apply(node: Expr, memo: dict, env: Mapping, strict: bool):
    if isinstance(node, Const):
        return node._float
    if isinstance(node, Symbol):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundSymbolError(node.name) from None
    if isinstance(node, Sum):
        args = node.args
        acc = memo[id(args[0])]
        for a in args[1:]:
            acc = acc + memo[id(a)]
        return acc
    if isinstance(node, Product):
        args = node.args
        acc = memo[id(args[0])]
        for a in args[1:]:
            acc = acc * memo[id(a)]
        return acc
    if isinstance(node, Power):
        b = memo[id(node.base)]
        e = node.exp
        if strict:
            if e < 0 and np.any(b == 0):
                raise DomainError(f"division by zero in {to_string(node)}")
            if e.denominator != 1 and np.any(b < 0):
                raise DomainError(f"negative base in {to_string(node)}")
        if e.denominator == 1:
            k = int(e)
            if k == -1:
                return 1.0 / b
            if k == 2:
                return b * b
            return np.power(b, float(k)) if isinstance(b, np.ndarray) else float(b) ** k
        if e == HALF:
            return np.sqrt(b)
        if e == -HALF:
            return 1.0 / np.sqrt(b)
        return np.power(b, float(e))
    # Func
    u = memo[id(node.arg)]
    if node.tag == "sin":
        return np.sin(u)
    if node.tag == "cos":
        return np.cos(u)
    s = np.sin(u)
    if strict and np.any(s == 0):
        raise DomainError(f"cot singular in {to_string(node)}")
    return np.cos(u) / s


def _eval_dag(roots: Sequence[Expr], env: Mapping, strict: bool) -> list:
    memo: dict = {}
    for root in roots:
        stack = [root]
        while stack:
            node = stack[-1]
            if id(node) in memo:
                stack.pop()
                continue
            pending = [c for c in node.children() if id(c) not in memo]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            memo[id(node)] = _apply(node, memo, env, strict)
    return [memo[id(r)] for r in roots]


def _env(binding: Mapping) -> dict:
    env = {}
    for k, v in binding.items():
        name = k.name if isinstance(k, Symbol) else k
        env[name] = v if isinstance(v, np.ndarray) else float(v)
    return env


def evaluate(e: Expr, binding: Mapping):
    """Evaluate at a binding of symbol names to numbers (or numpy arrays).

    Raises :class:`UnboundSymbolError` for a free symbol missing from the
    binding and :class:`DomainError` at singular points (zero denominators,
    negative bases of fractional powers, poles of ``cot``).
    """
    env = _env(binding)
    with np.errstate(all="ignore"):
        (val,) = _eval_dag([_coerce(e)], env, strict=True)
    if isinstance(val, np.ndarray):
        if not np.all(np.isfinite(val)):
            raise DomainError(f"non-finite value for {to_string(e)}")
        return val
    val = float(val)
    if not math.isfinite(val):
        raise DomainError(f"non-finite value for {to_string(e)}")
    return val


def evaluate_many(exprs: Sequence[Expr], binding: Mapping, strict: bool = False) -> list:
    """Evaluate several expressions sharing one memo.

    With ``strict=False`` singular points yield ``nan``/``inf`` instead of
    raising; this is what the sampling zero test relies on.
    """
    env = _env(binding)
    with np.errstate(all="ignore"):
        return _eval_dag([_coerce(x) for x in exprs], env, strict=strict)


def compile_scalar(exprs: Sequence[Expr], names: Sequence[str]):
    """Compile expressions into a plain-float function of ``names``.

    The generated function takes the values positionally and returns a
    tuple.  Shared subexpressions are computed once.  Singular points raise
    :class:`DomainError`.  Meant for inner loops such as ODE right-hand sides,
    where walking the DAG per call would dominate.
    """
    roots = [_coerce(x) for x in exprs]
    names = list(names)
    lines = []
    var: dict = {}
    for i, nm in enumerate(names):
        var[id(symbol(nm))] = f"a{i}"

    def ref(node: Expr) -> str:
        return var[id(node)]

    def emit(node: Expr) -> None:
        if isinstance(node, Const):
            code = repr(node._float)
        elif isinstance(node, Symbol):
            raise UnboundSymbolError(node.name)
        elif isinstance(node, Sum):
            code = " + ".join(ref(a) for a in node.args)
        elif isinstance(node, Product):
            code = " * ".join(ref(a) for a in node.args)
        elif isinstance(node, Power):
            b, e = ref(node.base), node.exp
            if e == HALF:
                code = f"_sqrt({b})"
            elif e == -HALF:
                code = f"1.0 / _sqrt({b})"
            elif e.denominator == 1:
                code = f"{b} ** {int(e)}" if e > 0 else f"1.0 / {b} ** {-int(e)}"
            else:
                code = f"_pow({b}, {float(e)!r})"
        else:
            u = ref(node.arg)
            code = {"sin": f"_sin({u})", "cos": f"_cos({u})",
                    "cot": f"_cos({u}) / _sin({u})"}[node.tag]
        v = f"t{len(var)}"
        var[id(node)] = v
        lines.append(f"    {v} = {code}")

    for root in roots:
        stack = [root]
        while stack:
            node = stack[-1]
            if id(node) in var:
                stack.pop()
                continue
            pending = [c for c in node.children() if id(c) not in var]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            emit(node)
    args = ", ".join(f"a{i}" for i in range(len(names)))
    out = ", ".join(ref(r) for r in roots)
    src = f"def _f({args}):\n" + "\n".join(lines + [f"    return ({out}{',' if roots else ''})"])
    scope = {"_sqrt": math.sqrt, "_pow": math.pow, "_sin": math.sin, "_cos": math.cos}
    exec(compile(src, "<cartanlab.expr>", "exec"), scope)
    raw = scope["_f"]

    def call(*values):
        try:
            return raw(*(float(v) for v in values))
        except (ZeroDivisionError, ValueError) as exc:
            raise DomainError(f"singular point {values}: {exc}") from None

    call.source = src
    return call


# --------------------------------------------------------------------------
# simplification

DEFAULT_TERM_BUDGET = 4000


def _rewrite_cot(e: Expr, memo: dict) -> Expr:
    r = memo.get(e)
    if r is not None:
        return r
    if isinstance(e, (Const, Symbol)):
        r = e
    elif isinstance(e, Sum):
        r = add(*[_rewrite_cot(a, memo) for a in e.args])
    elif isinstance(e, Product):
        r = mul(*[_rewrite_cot(a, memo) for a in e.args])
    elif isinstance(e, Power):
        r = power(_rewrite_cot(e.base, memo), e.exp)
    else:
        u = _rewrite_cot(e.arg, memo)
        if e.tag == "cot":
            r = mul(_make_func("cos", u), power(_make_func("sin", u), -1))
        else:
            r = func(e.tag, u)
    memo[e] = r
    return r


def _is_polynomial_factor(f: Expr) -> bool:
    """Factors that must be multiplied out by the expander."""
    return isinstance(f, Sum) or (isinstance(f, Power) and isinstance(f.base, Sum)
                                  and f.exp.denominator == 1 and f.exp > 0)


def _is_sin_power(f: Expr) -> bool:
    return (isinstance(f, Power) and isinstance(f.base, Func) and f.base.tag == "sin"
            and f.exp.denominator == 1 and f.exp >= 2)


class _Expander:
    def __init__(self, pyth: bool, budget: int):
        self.pyth = pyth
        self.budget = budget
        self.memo: dict = {}

    @staticmethod
    def terms(e: Expr) -> tuple:
        return e.args if isinstance(e, Sum) else (e,)

    def check(self, n: int) -> None:
        if n > self.budget:
            raise _BudgetExceeded

    def needs_work(self, f: Expr) -> bool:
        return _is_polynomial_factor(f) or (self.pyth and _is_sin_power(f))

    def dirty(self, t: Expr) -> bool:
        if isinstance(t, Product):
            return any(self.needs_work(f) for f in t.args)
        return self.needs_work(t)

    def multiply(self, polys: Sequence[Expr]) -> Expr:
        acc: Sequence[Expr] = (ONE,)
        for p in polys:
            nxt = []
            for a in acc:
                for b in self.terms(p):
                    t = mul(a, b)
                    if self.dirty(t):
                        t = self.expand(t)
                    nxt.extend(self.terms(t))
            self.check(len(nxt))
            acc = self.terms(add(*nxt))
        return add(*acc)

    def expand(self, e: Expr) -> Expr:
        r = self.memo.get(e)
        if r is not None:
            return r
        if isinstance(e, (Const, Symbol)):
            r = e
        elif isinstance(e, Func):
            r = func(e.tag, self.expand(e.arg))
        elif isinstance(e, Sum):
            parts = [self.expand(a) for a in e.args]
            self.check(sum(len(self.terms(p)) for p in parts))
            r = add(*parts)
        elif isinstance(e, Power):
            b = self.expand(e.base)
            k = e.exp
            if isinstance(b, Sum) and k.denominator == 1 and k > 0:
                r = self.multiply([b] * int(k))
            elif self.pyth and isinstance(b, Func) and b.tag == "sin" and k.denominator == 1 and k >= 2:
                one_minus = add(ONE, mul(MINUS_ONE, power(_make_func("cos", b.arg), 2)))
                r = self.multiply([power(b, int(k) % 2)] + [one_minus] * (int(k) // 2))
            else:
                r = power(b, k)
                if r is not e and self.dirty(r):
                    r = self.expand(r)
        else:
            p = mul(*[self.expand(a) for a in e.args])
            if not isinstance(p, Product):
                r = p if p is e else self.expand(p)
            elif self.dirty(p):
                r = self.multiply([self.expand(f) if self.needs_work(f) else f for f in p.args])
            else:
                r = p
        self.memo[e] = r
        return r


def _expand(e: Expr, pyth: bool, budget: int) -> Expr:
    return _Expander(pyth, budget).expand(e)


def _n_terms(e: Expr) -> int:
    return len(e.args) if isinstance(e, Sum) else (0 if e is ZERO else 1)


def _together_numerator(x: Expr, budget: int) -> Expr:
    """Numerator of an expanded sum after clearing every denominator."""
    if not isinstance(x, Sum):
        return x
    need: dict = {}
    for t in x.args:
        factors = t.args if isinstance(t, Product) else (t,)
        for f in factors:
            if isinstance(f, Power) and f.exp < 0:
                need[f.base] = max(need.get(f.base, Fraction(0)), -f.exp)
    if not need:
        return x
    clear = [power(b, k) for b, k in need.items()]
    return _expand(add(*[mul(t, *clear) for t in x.args]), True, budget)


def simplify(e: Expr, budget: int = DEFAULT_TERM_BUDGET) -> Expr:
    """Bounded rewrite to a canonical expanded form.

    Applies ``cot -> cos/sin``, multiplies out products and positive integer
    powers of sums, collects like terms, folds ``sin^2 + cos^2`` and clears
    denominators to detect cancellation.  When expansion would exceed
    ``budget`` terms the rewritten but unexpanded expression is returned.
    """
    e = _rewrite_cot(_coerce(e), {})
    try:
        plain = _expand(e, False, budget)
    except _BudgetExceeded:
        return e
    if plain is ZERO:
        return plain
    try:
        trig = _expand(plain, True, budget)
        if trig is ZERO or _together_numerator(trig, budget) is ZERO:
            return ZERO
    except _BudgetExceeded:
        return plain
    return trig if _n_terms(trig) < _n_terms(plain) else plain


def _symbolic_zero(e: Expr, budget: int) -> bool:
    try:
        return simplify(e, budget) is ZERO
    except (DomainError, RecursionError):
        return False


# --------------------------------------------------------------------------
# zero testing

@dataclass(frozen=True)
class Verdict:
    """Outcome of an identity check."""

    status: str  # zero | nonzero | inconclusive
    method: str  # symbolic | numeric
    max_abs_residual: float
    samples_used: int
    tolerance: float = 1e-9
    seed: int | None = None
    points: tuple = ()

    @property
    def is_zero(self) -> bool:
        return self.status == "zero"

    def __bool__(self) -> bool:
        return self.status == "zero"

    def to_dict(self, with_points: bool = True) -> dict:
        d = {
            "status": self.status,
            "method": self.method,
            "max_abs_residual": self.max_abs_residual,
            "samples_used": self.samples_used,
            "tolerance": self.tolerance,
            "seed": self.seed,
        }
        if with_points:
            d["points"] = [list(p) for p in self.points]
        return d

    @staticmethod
    def combine(verdicts: Sequence["Verdict"]) -> "Verdict":
        """Worst-case merge of several verdicts."""
        if not verdicts:
            return Verdict("zero", "symbolic", 0.0, 0)
        order = {"zero": 0, "inconclusive": 1, "nonzero": 2}
        status = max((v.status for v in verdicts), key=order.__getitem__)
        method = "numeric" if any(v.method == "numeric" for v in verdicts) else "symbolic"
        numeric = [v for v in verdicts if v.method == "numeric"]
        ref = numeric[0] if numeric else verdicts[0]
        return Verdict(status, method, max(v.max_abs_residual for v in verdicts),
                       max(v.samples_used for v in verdicts), ref.tolerance, ref.seed, ref.points)


@dataclass(frozen=True)
class SamplingPolicy:
    """How :func:`is_zero` samples when rewriting does not decide.

    ``box`` maps coordinate names to open intervals, ``params`` fixes
    parameter values, and ``constraints`` are ``(expr, lo, hi)`` triples a
    sample must satisfy strictly (e.g. ``3 < r < 10`` in Cartesian charts).
    """

    box: Mapping[str, tuple] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)
    constraints: tuple = ()
    tolerance: float = 1e-9
    sample_count: int = 20
    seed: int = 42
    symbolic: bool = True
    symbolic_budget: int = 400
    symbolic_max_nodes: int = 600

    def replace(self, **changes) -> "SamplingPolicy":
        from dataclasses import replace
        return replace(self, **changes)


def _candidates(policy: SamplingPolicy, rng: np.random.Generator, n: int) -> dict:
    names = sorted(policy.box)
    pts = {}
    for name in names:
        lo, hi = policy.box[name]
        pts[name] = rng.uniform(float(lo), float(hi), size=n)
    if policy.constraints:
        env = dict(pts)
        env.update({k: float(v) for k, v in policy.params.items()})
        keep = np.ones(n, dtype=bool)
        for expr, lo, hi in policy.constraints:
            (val,) = evaluate_many([expr], env)
            val = np.broadcast_to(np.asarray(val, dtype=float), (n,))
            keep &= np.isfinite(val) & (val > lo) & (val < hi)
        pts = {k: v[keep] for k, v in pts.items()}
    return pts


def sample_points(policy: SamplingPolicy, exprs: Sequence[Expr] = (), max_batches: int = 64):
    """Draw ``policy.sample_count`` points where every expression is finite.

    Returns ``(binding, points)``: a binding of numpy arrays (coordinates and
    parameters) and the list of coordinate tuples in sorted-name order.
    """
    for name, (lo, hi) in policy.box.items():
        if not lo < hi:
            raise SamplingError(f"empty sampling interval for {name}: ({lo}, {hi})")
    rng = np.random.default_rng(policy.seed)
    names = sorted(policy.box)
    want = policy.sample_count
    got = {k: [] for k in names}
    have = 0
    batch = max(4 * want, 16)
    for _ in range(max_batches):
        cand = _candidates(policy, rng, batch)
        m = len(cand[names[0]]) if names else batch
        if m == 0:
            continue
        env = dict(cand)
        env.update({k: float(v) for k, v in policy.params.items()})
        ok = np.ones(m, dtype=bool)
        if exprs:
            for val in evaluate_many(exprs, env):
                val = np.broadcast_to(np.asarray(val, dtype=float), (m,))
                ok &= np.isfinite(val)
        idx = np.nonzero(ok)[0][: want - have]
        for k in names:
            got[k].extend(cand[k][idx].tolist())
        have += len(idx)
        if have >= want:
            break
    if have < want:
        raise SamplingError("sampling box is empty or singular for the tested expressions")
    binding = {k: np.asarray(v) for k, v in got.items()}
    binding.update({k: np.full(want, float(v)) for k, v in policy.params.items()})
    points = tuple(tuple(float(binding[k][i]) for k in names) for i in range(want))
    return binding, points


def is_zero(e: Expr, policy: SamplingPolicy | None = None) -> Verdict:
    """Decide whether ``e`` vanishes identically on the policy's domain."""
    return is_zero_all([e], policy)


def is_zero_all(exprs: Iterable[Expr], policy: SamplingPolicy | None = None) -> Verdict:
    """Joint zero test of several expressions on one set of sample points."""
    policy = policy or SamplingPolicy()
    exprs = [_coerce(x) for x in exprs]
    exprs = [x for x in exprs if x is not ZERO]
    if not exprs:
        return Verdict("zero", "symbolic", 0.0, 0, policy.tolerance, policy.seed)
    if policy.symbolic:
        small = all(count_nodes(x) <= policy.symbolic_max_nodes for x in exprs)
        if small and all(_symbolic_zero(x, policy.symbolic_budget) for x in exprs):
            return Verdict("zero", "symbolic", 0.0, 0, policy.tolerance, policy.seed)
    binding, points = sample_points(policy, exprs)
    n = policy.sample_count
    resid = np.zeros(n)
    for val in evaluate_many(exprs, binding):
        val = np.broadcast_to(np.abs(np.asarray(val, dtype=float)), (n,))
        resid = np.maximum(resid, val)
    worst = float(resid.max())
    tol = policy.tolerance
    if worst < tol:
        status = "zero"
    elif worst > 10 * tol:
        status = "nonzero"
    else:
        status = "inconclusive"
    return Verdict(status, "numeric", worst, n, tol, policy.seed, points)
