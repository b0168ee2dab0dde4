"""Graded exterior algebra over an orthonormal coframe.

A :class:`MultiForm` stores its components in the frame basis
``theta^{a1} ^ ... ^ theta^{ar}`` (strictly increasing indices, 0-based).  The
coframe ``theta^a = theta^a_mu dx^mu`` and a diagonal signature ``eta`` fix the
metric ``g = eta_ab theta^a theta^b`` and the positive orientation
``tau = theta^0 ^ ... ^ theta^{n-1}``.

The exterior derivative is implemented twice.  The frame route uses the
directional derivatives ``e_a(f)`` and ``d theta^a = -1/2 c^a_kl theta^k ^ theta^l``;
the coordinate route converts to ``dx`` components with minors of the
coframe matrix, differentiates there and converts back with minors of the
inverse.  They share nothing except the coframe matrix, so agreement between
them is a meaningful check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .expr import Expr, SamplingPolicy

__all__ = [
    "Chart", "Coframe", "MultiForm", "CoframeMismatchError", "SingularCoframeError",
    "wedge", "scalar_product", "contract", "left_contract", "right_contract", "reversion",
    "hodge", "hodge_inverse", "exterior_d", "coderivative", "determinant",
    "to_coordinate", "from_coordinate", "merge_indices", "random_form", "basis_indices",
]


class CoframeMismatchError(ValueError):
    pass


class SingularCoframeError(ValueError):
    pass


def basis_indices(n: int, r: int) -> list:
    """All strictly increasing index tuples of length r from range(n)."""
    return list(itertools.combinations(range(n), r))


def merge_indices(a: tuple, b: tuple):
    """Sign and sorted union of two increasing tuples, or ``None`` if they overlap."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    if set(a) & set(b):
        return None
    inversions = sum(1 for i in a for j in b if i > j)
    return (-1 if inversions % 2 else 1), tuple(sorted(a + b))


def determinant(m: Sequence[Sequence[Expr]]) -> Expr:
    n = len(m)
    return _Minors(m).get(tuple(range(n)), tuple(range(n)))


class _Minors:
    """Memoized Laplace expansion of minors det(M[rows, cols])."""

    def __init__(self, m):
        self.m = m
        self.memo: dict = {}

    def get(self, rows: tuple, cols: tuple) -> Expr:
        if not rows:
            return ex.ONE
        key = (rows, cols)
        r = self.memo.get(key)
        if r is not None:
            return r
        if len(rows) == 1:
            r = self.m[rows[0]][cols[0]]
        else:
            head = rows[0]
            terms = []
            for k, c in enumerate(cols):
                entry = self.m[head][c]
                if entry is ex.ZERO:
                    continue
                sub = self.get(rows[1:], cols[:k] + cols[k + 1:])
                if sub is ex.ZERO:
                    continue
                terms.append(ex.mul(-1, entry, sub) if k % 2 else ex.mul(entry, sub))
            r = ex.add(*terms)
        self.memo[key] = r
        return r


# --------------------------------------------------------------------------
# charts and coframes

@dataclass(frozen=True)
class Chart:
    """Coordinate system with a sampling domain.

    ``box`` gives an open interval per coordinate.  ``constraints`` are extra
    ``(expr, lo, hi)`` conditions, e.g. a radius window that keeps Cartesian
    samples away from a horizon.
    """

    name: str
    coords: tuple
    box: tuple
    constraints: tuple = ()
    extent: tuple | None = None
    periods: tuple | None = None

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "box", tuple(tuple(float(v) for v in b) for b in self.box))
        inf = float("inf")
        extent = self.extent or tuple((-inf, inf) for _ in coords)
        object.__setattr__(self, "extent", tuple(tuple(float(v) for v in b) for b in extent))
        periods = self.periods or tuple(0.0 for _ in coords)
        object.__setattr__(self, "periods", tuple(float(p) for p in periods))
        if len(self.extent) != len(coords) or len(self.periods) != len(coords):
            raise ValueError("extent and periods need one entry per coordinate")
        if not 2 <= len(coords) <= 4:
            raise ValueError("charts have dimension 2, 3 or 4")
        if len(set(coords)) != len(coords):
            raise ValueError("coordinate names must be distinct")
        if len(self.box) != len(coords):
            raise ValueError("one sampling interval per coordinate")
        for name, (lo, hi) in zip(coords, self.box):
            if not lo < hi:
                raise ValueError(f"empty interval for {name}")
            ex.symbol(name)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def symbols(self) -> tuple:
        return tuple(ex.symbol(c) for c in self.coords)

    def policy(self, params: Mapping[str, float] | None = None, **kw) -> SamplingPolicy:
        return SamplingPolicy(box=dict(zip(self.coords, self.box)), params=dict(params or {}),
                              constraints=tuple(self.constraints), **kw)

    def contains(self, point: Sequence[float], params: Mapping[str, float] | None = None) -> bool:
        """Whether a point lies in the closed extent and satisfies the constraints."""
        for x, (lo, hi) in zip(point, self.extent):
            if not lo <= x <= hi:
                return False
        if self.constraints:
            env = dict(zip(self.coords, (float(x) for x in point)))
            env.update(params or {})
            for e, lo, hi in self.constraints:
                v = ex.evaluate_many([e], env)[0]
                if not lo < v < hi:
                    return False
        return True

    def displacement(self, a: Sequence[float], b: Sequence[float]) -> tuple:
        """``b - a`` with periodic coordinates reduced to the nearest image."""
        out = []
        for x, y, per in zip(a, b, self.periods):
            d = float(y) - float(x)
            if per:
                d -= per * round(d / per)
            out.append(d)
        return tuple(out)


class Coframe:
    """Orthonormal coframe ``theta^a = theta[a][mu] dx^mu`` on a chart."""

    def __init__(self, chart: Chart, theta: Sequence[Sequence], signature: Sequence[int],
                 params: Mapping[str, float] | None = None, name: str | None = None):
        n = chart.dim
        rows = [[ex._coerce(v) for v in row] for row in theta]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"coframe matrix must be {n}x{n}")
        sig = tuple(int(s) for s in signature)
        if len(sig) != n or any(s not in (1, -1) for s in sig):
            raise ValueError("signature must be a vector of +1/-1")
        self.chart = chart
        self.theta = tuple(tuple(r) for r in rows)
        self.eta = sig
        self.params = dict(params or {})
        self.name = name or chart.name
        allowed = set(chart.coords) | set(self.params)
        for row in self.theta:
            for v in row:
                extra = v.free_symbols - allowed
                if extra:
                    raise ValueError(f"coframe uses undeclared symbols {sorted(extra)}")

    def __repr__(self) -> str:
        return f"Coframe({self.name!r}, n={self.dim})"

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def coords(self) -> tuple:
        return self.chart.coords

    @property
    def sign(self) -> int:
        """sgn(det g)."""
        s = 1
        for e in self.eta:
            s *= e
        return s

    def policy(self, params: Mapping[str, float] | None = None, **kw) -> SamplingPolicy:
        p = dict(self.params)
        p.update(params or {})
        return self.chart.policy(p, **kw)

    # algebraic data ---------------------------------------------------------
    @cached_property
    def det(self) -> Expr:
        return determinant(self.theta)

    @cached_property
    def frame(self) -> tuple:
        """Dual frame components ``e_a^mu`` as ``frame[a][mu]``."""
        n = self.dim
        if self.det is ex.ZERO:
            raise SingularCoframeError("coframe determinant vanishes identically")
        diagonal = all(self.theta[a][m] is ex.ZERO for a in range(n) for m in range(n) if a != m)
        if diagonal:
            return tuple(tuple(ex.power(self.theta[a][a], -1) if a == m else ex.ZERO
                               for m in range(n)) for a in range(n))
        minors = _Minors(self.theta)
        inv_det = ex.power(self.det, -1)
        out = []
        for a in range(n):
            row = []
            for mu in range(n):
                # (Theta^{-1})[mu][a] = cofactor(a, mu) / det
                rows = tuple(i for i in range(n) if i != a)
                cols = tuple(j for j in range(n) if j != mu)
                cof = minors.get(rows, cols)
                if (a + mu) % 2:
                    cof = ex.mul(-1, cof)
                row.append(ex.mul(cof, inv_det))
            out.append(tuple(row))
        return tuple(out)

    @cached_property
    def metric(self) -> tuple:
        """``g[mu][nu] = eta_ab theta^a_mu theta^b_nu``."""
        n = self.dim
        return tuple(tuple(ex.add(*[ex.mul(self.eta[a], self.theta[a][m], self.theta[a][v])
                                    for a in range(n)]) for v in range(n)) for m in range(n))

    @cached_property
    def inverse_metric(self) -> tuple:
        n = self.dim
        e = self.frame
        return tuple(tuple(ex.add(*[ex.mul(self.eta[a], e[a][m], e[a][v]) for a in range(n)])
                           for v in range(n)) for m in range(n))

    def frame_derivative(self, a: int, f: Expr) -> Expr:
        """``e_a(f) = e_a^mu d_mu f``."""
        row = self.frame[a]
        return ex.add(*[ex.mul(row[m], ex.diff(f, c)) for m, c in enumerate(self.coords)
                        if row[m] is not ex.ZERO])

    @cached_property
    def structure_coefficients(self) -> tuple:
        """``c[k][a][b]`` with ``[e_a, e_b] = c^k_ab e_k``, from Lie brackets."""
        n = self.dim
        e = self.frame
        c = [[[ex.ZERO] * n for _ in range(n)] for _ in range(n)]
        for a in range(n):
            for b in range(a + 1, n):
                bracket = [ex.add(self.frame_derivative(a, e[b][m]),
                                  ex.mul(-1, self.frame_derivative(b, e[a][m]))) for m in range(n)]
                for k in range(n):
                    val = ex.add(*[ex.mul(self.theta[k][m], bracket[m]) for m in range(n)])
                    c[k][a][b] = val
                    c[k][b][a] = ex.mul(-1, val)
        return tuple(tuple(tuple(r) for r in plane) for plane in c)

    @cached_property
    def dtheta(self) -> tuple:
        """``d theta^a = -sum_{k<l} c^a_kl theta^k ^ theta^l`` (frame route)."""
        c = self.structure_coefficients
        out = []
        for a in range(self.dim):
            comps = {}
            for k, l in basis_indices(self.dim, 2):
                v = ex.mul(-1, c[a][k][l])
                if v is not ex.ZERO:
                    comps[(k, l)] = v
            out.append(MultiForm(self, comps))
        return tuple(out)

    # constructors -------------------------------------------------------------
    def basis(self, *indices: int) -> "MultiForm":
        """``theta^{i1} ^ ... ^ theta^{ir}`` for any index order."""
        idx = tuple(indices)
        if len(set(idx)) != len(idx):
            return MultiForm(self, {})
        if any(not 0 <= i < self.dim for i in idx):
            raise IndexError(f"frame index out of range: {idx}")
        sign = _perm_sign(idx)
        return MultiForm(self, {tuple(sorted(idx)): ex.const(sign)})

    def lower(self, a: int) -> "MultiForm":
        """``theta_a = eta_aa theta^a``."""
        return MultiForm(self, {(a,): ex.const(self.eta[a])})

    def scalar(self, value) -> "MultiForm":
        return MultiForm(self, {(): ex._coerce(value)})

    def one(self) -> "MultiForm":
        return self.scalar(1)

    def zero(self) -> "MultiForm":
        return MultiForm(self, {})

    def volume(self) -> "MultiForm":
        return MultiForm(self, {tuple(range(self.dim)): ex.ONE})

    def form(self, comps: Mapping) -> "MultiForm":
        out = self.zero()
        for idx, v in comps.items():
            out = out + self.basis(*idx) * v
        return out


def _perm_sign(idx: Sequence[int]) -> int:
    inv = sum(1 for i in range(len(idx)) for j in range(i + 1, len(idx)) if idx[i] > idx[j])
    return -1 if inv % 2 else 1


# --------------------------------------------------------------------------
# multiforms

class MultiForm:
    """Possibly nonhomogeneous form with frame-basis components.

    ``comps`` maps strictly increasing index tuples to nonzero :class:`Expr`.
    Instances are treated as immutable.
    """

    __slots__ = ("coframe", "comps", "_coord", "_star_of")

    def __init__(self, coframe: Coframe, comps: Mapping | None = None):
        self.coframe = coframe
        clean = {}
        for idx, v in (comps or {}).items():
            v = ex._coerce(v)
            if v is ex.ZERO:
                continue
            clean[tuple(idx)] = v
        self.comps = clean
        # exact coordinate components when known (lets d o d cancel exactly)
        self._coord = None
        # when set, hodge(self) is exactly this form
        self._star_of = None

    @property
    def dim(self) -> int:
        return self.coframe.dim

    def __getitem__(self, idx) -> Expr:
        if isinstance(idx, int):
            idx = (idx,)
        idx = tuple(idx)
        if list(idx) == sorted(set(idx)):
            return self.comps.get(idx, ex.ZERO)
        if len(set(idx)) != len(idx):
            return ex.ZERO
        v = self.comps.get(tuple(sorted(idx)), ex.ZERO)
        return v if _perm_sign(idx) == 1 else ex.mul(-1, v)

    @property
    def grades(self) -> list:
        return sorted({len(i) for i in self.comps})

    @property
    def grade(self) -> int:
        """Grade of a homogeneous form (0 for the zero form)."""
        g = self.grades
        if len(g) > 1:
            raise ValueError(f"form is not homogeneous (grades {g})")
        return g[0] if g else 0

    def part(self, r: int) -> "MultiForm":
        return MultiForm(self.coframe, {i: v for i, v in self.comps.items() if len(i) == r})

    def is_structurally_zero(self) -> bool:
        return not self.comps

    def map(self, fn) -> "MultiForm":
        return MultiForm(self.coframe, {i: fn(v) for i, v in self.comps.items()})

    def simplify(self) -> "MultiForm":
        return self.map(ex.simplify)

    def _check(self, other: "MultiForm") -> None:
        if other.coframe is not self.coframe:
            raise CoframeMismatchError("forms live on different coframes")

    def __add__(self, other: "MultiForm") -> "MultiForm":
        if not isinstance(other, MultiForm):
            return self + self.coframe.scalar(other)
        self._check(other)
        out = dict(self.comps)
        for i, v in other.comps.items():
            prev = out.get(i)
            out[i] = v if prev is None else ex.add(prev, v)
        return MultiForm(self.coframe, out)

    __radd__ = __add__

    def __neg__(self) -> "MultiForm":
        return self * -1

    def __sub__(self, other: "MultiForm") -> "MultiForm":
        return self + (-other)

    def __mul__(self, scalar) -> "MultiForm":
        if isinstance(scalar, MultiForm):
            return wedge(self, scalar)
        s = ex._coerce(scalar)
        out = MultiForm(self.coframe, {i: ex.mul(s, v) for i, v in self.comps.items()})
        if isinstance(s, ex.Const):
            if self._coord is not None:
                out._coord = {i: ex.mul(s, v) for i, v in self._coord.items()}
            if self._star_of is not None:
                out._star_of = self._star_of * s
        return out

    __rmul__ = __mul__

    def __xor__(self, other: "MultiForm") -> "MultiForm":
        return wedge(self, other)

    def __eq__(self, other) -> bool:
        return (isinstance(other, MultiForm) and other.coframe is self.coframe
                and other.comps == self.comps)

    __hash__ = None

    def __repr__(self) -> str:
        if not self.comps:
            return "0"
        parts = []
        for idx in sorted(self.comps, key=lambda i: (len(i), i)):
            basis = "^".join(f"th{i}" for i in idx) or "1"
            parts.append(f"({ex.to_string(self.comps[idx])})*{basis}")
        return " + ".join(parts)


# --------------------------------------------------------------------------
# algebra

def wedge(*forms: MultiForm) -> MultiForm:
    """Exterior product of one or more forms."""
    if not forms:
        raise TypeError("wedge() needs at least one form")
    acc = forms[0]
    for f in forms[1:]:
        acc._check(f)
        n = acc.dim
        out: dict = {}
        for i, a in acc.comps.items():
            for j, b in f.comps.items():
                if len(i) + len(j) > n:
                    continue
                m = merge_indices(i, j)
                if m is None:
                    continue
                sign, k = m
                term = ex.mul(sign, a, b)
                out.setdefault(k, []).append(term)
        acc = MultiForm(acc.coframe, {k: ex.add(*v) for k, v in out.items()})
    return acc


def _eta_of(cf: Coframe, idx: tuple) -> int:
    s = 1
    for i in idx:
        s *= cf.eta[i]
    return s


def scalar_product(a: MultiForm, b: MultiForm) -> Expr:
    """Metric scalar product; different grades are orthogonal.

    For basis blades the Gram determinant ``det(theta^{ai} . theta^{bj})`` of
    a diagonal ``eta`` is ``prod eta^{aa}`` on equal index sets and 0 otherwise.
    """
    a._check(b)
    terms = [ex.mul(_eta_of(a.coframe, i), v, b.comps[i]) for i, v in a.comps.items()
             if i in b.comps]
    return ex.add(*terms)


def reversion(a: MultiForm) -> MultiForm:
    return MultiForm(a.coframe, {i: (v if (len(i) * (len(i) - 1) // 2) % 2 == 0 else ex.mul(-1, v))
                                 for i, v in a.comps.items()})


def _vector_left(cf: Coframe, k: int, y: MultiForm) -> MultiForm:
    """theta^k left-contracted into y."""
    out = {}
    for j, v in y.comps.items():
        if k not in j:
            continue
        pos = j.index(k)
        sign = cf.eta[k] * (-1 if pos % 2 else 1)
        out[j[:pos] + j[pos + 1:]] = ex.mul(sign, v)
    return MultiForm(cf, out)


def _vector_right(cf: Coframe, y: MultiForm, k: int) -> MultiForm:
    """y right-contracted by theta^k."""
    out = {}
    for j, v in y.comps.items():
        if k not in j:
            continue
        pos = j.index(k)
        sign = cf.eta[k] * (-1 if (len(j) - 1 - pos) % 2 else 1)
        out[j[:pos] + j[pos + 1:]] = ex.mul(sign, v)
    return MultiForm(cf, out)


def left_contract(x: MultiForm, y: MultiForm) -> MultiForm:
    """``x _| y`` defined by ``(x _| y) . z = y . (rev(x) ^ z)``."""
    x._check(y)
    cf = x.coframe
    out = cf.zero()
    for i, coeff in x.comps.items():
        cur = y
        for k in reversed(i):
            cur = _vector_left(cf, k, cur)
            if not cur.comps:
                break
        if cur.comps:
            out = out + cur * coeff
    return out


def right_contract(x: MultiForm, y: MultiForm) -> MultiForm:
    """``x |_ y`` defined by ``(x |_ y) . z = x . (z ^ rev(y))``."""
    x._check(y)
    cf = x.coframe
    out = cf.zero()
    for j, coeff in y.comps.items():
        cur = x
        for k in j:
            cur = _vector_right(cf, cur, k)
            if not cur.comps:
                break
        if cur.comps:
            out = out + cur * coeff
    return out


def contract(x: MultiForm, y: MultiForm, side: str = "left") -> MultiForm:
    if side == "left":
        return left_contract(x, y)
    if side == "right":
        return right_contract(x, y)
    raise ValueError("side must be 'left' or 'right'")


def _complement(n: int, idx: tuple) -> tuple:
    return tuple(i for i in range(n) if i not in idx)


def _hodge_sign(cf: Coframe, idx: tuple) -> int:
    """Coefficient s with ``*theta^I = s theta^{I^c}``.

    Taking A = B = theta^I in ``A ^ *B = (A . B) tau`` gives
    ``s * sign(I, I^c) = theta^I . theta^I``; other basis A contribute nothing.
    """
    n = cf.dim
    comp = _complement(n, idx)
    wedge_sign, _ = merge_indices(idx, comp)
    return _eta_of(cf, idx) * wedge_sign


def hodge(a: MultiForm) -> MultiForm:
    """Hodge star, applied grade by grade."""
    if a._star_of is not None:
        return a._star_of
    cf = a.coframe
    n = cf.dim
    return MultiForm(cf, {_complement(n, i): ex.mul(_hodge_sign(cf, i), v)
                          for i, v in a.comps.items()})


def hodge_inverse(a: MultiForm) -> MultiForm:
    """``*^{-1} = (-1)^{r(n-r)} sgn(g) *`` on each grade."""
    cf = a.coframe
    n = cf.dim
    out = {}
    for i, v in a.comps.items():
        r = len(i)
        s = cf.sign * (-1 if (r * (n - r)) % 2 else 1) * _hodge_sign(cf, i)
        out[_complement(n, i)] = ex.mul(s, v)
    res = MultiForm(cf, out)
    res._star_of = a
    return res


# --------------------------------------------------------------------------
# basis changes and exterior derivatives

def _change_basis(comps: Mapping, m: Sequence[Sequence[Expr]], n: int) -> dict:
    """Re-express ``sum_I c_I beta^I`` where ``beta^i = sum_j m[i][j] gamma^j``."""
    minors = _Minors(m)
    out: dict = {}
    for idx, v in comps.items():
        r = len(idx)
        if r == 0:
            out.setdefault((), []).append(v)
            continue
        for jdx in itertools.combinations(range(n), r):
            d = minors.get(idx, jdx)
            if d is ex.ZERO:
                continue
            out.setdefault(jdx, []).append(ex.mul(v, d))
    res = {}
    for k, terms in out.items():
        s = ex.add(*terms)
        if s is not ex.ZERO:
            res[k] = s
    return res


def to_coordinate(a: MultiForm) -> dict:
    """Components in the ``dx^{mu1} ^ ... ^ dx^{mur}`` basis."""
    if a._coord is not None:
        return dict(a._coord)
    return _change_basis(a.comps, a.coframe.theta, a.dim)


def from_coordinate(cf: Coframe, comps: Mapping) -> MultiForm:
    """Frame-basis form from ``dx`` components (``dx^mu = e_a^mu theta^a``)."""
    e = cf.frame
    n = cf.dim
    m = tuple(tuple(e[a][mu] for a in range(n)) for mu in range(n))
    out = MultiForm(cf, _change_basis(comps, m, n))
    out._coord = {tuple(k): ex._coerce(v) for k, v in comps.items() if ex._coerce(v) is not ex.ZERO}
    return out


def _coordinate_d(comps: Mapping, coords: Sequence[str]) -> dict:
    n = len(coords)
    out: dict = {}
    for idx, v in comps.items():
        for mu, c in enumerate(coords):
            if mu in idx:
                continue
            dv = ex.diff(v, c)
            if dv is ex.ZERO:
                continue
            sign, k = merge_indices((mu,), idx)
            out.setdefault(k, []).append(ex.mul(sign, dv))
    res = {k: ex.add(*t) for k, t in out.items() if len(k) <= n}
    return {k: v for k, v in res.items() if v is not ex.ZERO}


def _frame_d(a: MultiForm) -> MultiForm:
    cf = a.coframe
    n = cf.dim
    dth = cf.dtheta
    out = cf.zero()
    acc: dict = {}
    for idx, v in a.comps.items():
        # d(v) ^ theta^I
        for k in range(n):
            if k in idx:
                continue
            dv = cf.frame_derivative(k, v)
            if dv is ex.ZERO:
                continue
            sign, key = merge_indices((k,), idx)
            acc.setdefault(key, []).append(ex.mul(sign, dv))
        # v d(theta^I) with the graded Leibniz rule
        for pos, i in enumerate(idx):
            if not dth[i].comps:
                continue
            left = idx[:pos]
            right = idx[pos + 1:]
            piece = wedge(MultiForm(cf, {left: ex.const(-1 if pos % 2 else 1)}), dth[i],
                          MultiForm(cf, {right: v}))
            for key, w in piece.comps.items():
                acc.setdefault(key, []).append(w)
    out = MultiForm(cf, {k: ex.add(*t) for k, t in acc.items()})
    return out


def exterior_d(a: MultiForm, route: str = "frame") -> MultiForm:
    """Exterior derivative by the ``"frame"`` or ``"coordinate"`` route."""
    if route == "frame":
        return _frame_d(a)
    if route == "coordinate":
        cf = a.coframe
        return from_coordinate(cf, _coordinate_d(to_coordinate(a), cf.coords))
    raise ValueError("route must be 'frame' or 'coordinate'")


def coderivative(a: MultiForm, route: str = "frame") -> MultiForm:
    """``delta A = (-1)^r *^{-1} d * A`` grade by grade."""
    cf = a.coframe
    parts = []
    single = len(a.grades) == 1
    for r in a.grades:
        part = hodge_inverse(exterior_d(hodge(a if single else a.part(r)), route))
        parts.append(part if r % 2 == 0 else part * -1)
    if len(parts) == 1:
        # keeps the link to d*A so that a second coderivative cancels structurally
        return parts[0]
    out = cf.zero()
    for p in parts:
        out = out + p
    return out


# --------------------------------------------------------------------------
# random test forms

def random_form(cf: Coframe, grade: int, rng: np.random.Generator, terms: int = 2) -> MultiForm:
    """Form with small random polynomial/trigonometric coefficients in the chart coordinates."""
    syms = cf.chart.symbols
    comps = {}
    for idx in basis_indices(cf.dim, grade):
        pieces = []
        for _ in range(terms):
            c = Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
            if c == 0:
                continue
            s = syms[int(rng.integers(len(syms)))]
            t = syms[int(rng.integers(len(syms)))]
            kind = int(rng.integers(3))
            if kind == 0:
                mono = ex.mul(s, t)
            elif kind == 1:
                mono = ex.sin(s)
            else:
                mono = ex.power(s, int(rng.integers(1, 4)))
            pieces.append(ex.mul(c, mono))
        pieces.append(ex.const(int(rng.integers(-3, 4))))
        comps[idx] = ex.add(*pieces)
    return MultiForm(cf, comps)
