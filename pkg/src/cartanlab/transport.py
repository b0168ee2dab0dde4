"""Curves, geodesics, parallel transport, holonomy and the quadrilateral torsion estimator.

Vectors are carried in frame components ``V^a`` and the transport equation is

    dV^a/ds = -omega^a_{cb} u^c V^b,      u^c = theta^c_mu dx^mu/ds,

integrated with the classical fixed-step fourth-order Runge-Kutta scheme.  A
connection whose frame coefficients are all structurally zero (a teleparallel
connection of its own coframe) is handled exactly: the components are copied.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .forms import Chart, Coframe
from .frames import Connection

__all__ = [
    "Curve", "TransportResult", "HolonomyResult", "QuadrilateralEstimate",
    "DomainExitError", "LoopNotClosedError",
    "geodesic", "geodesic_transport", "parallel_transport", "nunes_transport", "holonomy",
    "quadrilateral_torsion_estimate", "rk4", "default_steps",
    "STEPS_PER_TURN", "LOOP_TOLERANCE", "POLE_MARGIN",
]

STEPS_PER_TURN = 4096
LOOP_TOLERANCE = 1e-10
POLE_MARGIN = 0.05
MIN_STEPS = 16


class DomainExitError(ValueError):
    """A curve or trajectory left the chart's extent or constraints."""

    def __init__(self, s: float, point: Sequence[float]):
        self.s = float(s)
        self.point = tuple(float(x) for x in point)
        super().__init__(f"left the chart at s = {self.s:.17g}, point {self.point}")


class LoopNotClosedError(ValueError):
    pass


def default_steps(length: float) -> int:
    return max(MIN_STEPS, math.ceil(STEPS_PER_TURN * abs(length) / (2 * math.pi)))


def rk4(f: Callable, y0: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Classical RK4 on a fixed grid; returns the solution at every grid point."""
    out = np.empty((len(grid),) + np.shape(y0))
    y = np.array(y0, dtype=float)
    out[0] = y
    for i in range(len(grid) - 1):
        s, h = grid[i], grid[i + 1] - grid[i]
        k1 = f(s, y)
        k2 = f(s + h / 2, y + h / 2 * k1)
        k3 = f(s + h / 2, y + h / 2 * k2)
        k4 = f(s + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
    return out


# ----------------------------------------------------------------------------
# curves

@dataclass(frozen=True)
class _Segment:
    s0: float
    s1: float
    position: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class Curve:
    """A parametrized path in a chart, made of one or more smooth segments.

    Build with :meth:`from_exprs`, :meth:`polyline` or :meth:`latitude`;
    :func:`geodesic` returns a sampled curve.
    """

    chart: Chart
    segments: tuple
    description: Mapping = field(default_factory=dict)
    params: Mapping = field(default_factory=dict)
    samples: Mapping | None = None

    @property
    def interval(self) -> tuple:
        return self.segments[0].s0, self.segments[-1].s1

    def _segment(self, s: float) -> _Segment:
        for seg in self.segments:
            if s <= seg.s1:
                return seg
        return self.segments[-1]

    def position(self, s: float) -> np.ndarray:
        return self._segment(s).position(s)

    def velocity(self, s: float) -> np.ndarray:
        return self._segment(s).velocity(s)

    def closure_defect(self) -> float:
        s0, s1 = self.interval
        d = self.chart.displacement(self.position(s0), self.position(s1))
        return max(abs(x) for x in d)

    @property
    def closed(self) -> bool:
        return self.closure_defect() <= LOOP_TOLERANCE

    def grid(self, steps: int | None = None) -> list:
        """Per-segment parameter grids with ``steps`` distributed by length."""
        s0, s1 = self.interval
        total = s1 - s0
        steps = steps or default_steps(total)
        grids = []
        for seg in self.segments:
            k = max(1, round(steps * (seg.s1 - seg.s0) / total))
            grids.append(np.linspace(seg.s0, seg.s1, k + 1))
        return grids

    def check_inside(self, steps: int | None = None) -> None:
        for g, seg in zip(self.grid(steps), self.segments):
            for s in g:
                x = seg.position(s)
                if not self.chart.contains(x, self.params):
                    raise DomainExitError(s, x)

    # constructors -----------------------------------------------------------
    @classmethod
    def from_exprs(cls, chart: Chart, exprs: Sequence, interval: tuple = (0.0, 1.0),
                   parameter: str = "s", params: Mapping | None = None) -> "Curve":
        """Coordinates given as expressions (or strings) in ``parameter``."""
        if len(exprs) != chart.dim:
            raise ValueError(f"need {chart.dim} coordinate expressions")
        xs = [ex.parse(e) if isinstance(e, str) else ex._coerce(e) for e in exprs]
        params = dict(params or {})
        names = [parameter] + sorted(params)
        extra = set().union(*(x.free_symbols for x in xs)) - set(names) - {"pi"}
        if extra:
            raise ValueError(f"curve uses unknown symbols {sorted(extra)}")
        names.append("pi")
        vals = [params[k] for k in sorted(params)] + [math.pi]
        pos = ex.compile_scalar(xs, names)
        vel = ex.compile_scalar([ex.diff(x, parameter) for x in xs], names)
        seg = _Segment(float(interval[0]), float(interval[1]),
                       lambda s: np.array(pos(s, *vals)), lambda s: np.array(vel(s, *vals)))
        desc = {"kind": "expressions", "parameter": parameter,
                "coordinates": [ex.to_string(x) for x in xs],
                "interval": [float(interval[0]), float(interval[1])]}
        return cls(chart, (seg,), desc, params)

    @classmethod
    def polyline(cls, chart: Chart, points: Sequence[Sequence[float]],
                 params: Mapping | None = None) -> "Curve":
        """Straight coordinate segments; segment ``i`` has parameter range ``[i, i + 1]``."""
        pts = [np.array(p, dtype=float) for p in points]
        if len(pts) < 2 or any(len(p) != chart.dim for p in pts):
            raise ValueError(f"a polyline needs at least two {chart.dim}-dimensional points")
        segs = []
        for i, (a, b) in enumerate(zip(pts, pts[1:])):
            step = np.array(chart.displacement(a, b))
            segs.append(_Segment(float(i), float(i + 1),
                                 lambda s, a=a, step=step, i=i: a + (s - i) * step,
                                 lambda s, step=step: step.copy()))
        desc = {"kind": "polyline", "points": [[float(v) for v in p] for p in pts]}
        return cls(chart, tuple(segs), desc, dict(params or {}))

    @classmethod
    def latitude(cls, chart: Chart, polar: float, start: float = 0.0, turns: float = 1.0) -> "Curve":
        """The circle ``x0 = polar`` traversed in ``x1`` (a 2-dimensional polar chart)."""
        if chart.dim != 2:
            raise ValueError("latitude circles need a 2-dimensional chart")
        end = start + 2 * math.pi * turns
        seg = _Segment(start, end, lambda s: np.array([polar, s]), lambda s: np.array([0.0, 1.0]))
        desc = {"kind": "latitude", "polar": float(polar), "start": float(start), "turns": float(turns)}
        return cls(chart, (seg,), desc)


# ----------------------------------------------------------------------------
# numeric view of a connection

class _Numeric:
    """Compiled frame, coframe, metric and connection coefficients."""

    def __init__(self, conn: Connection):
        cf = conn.coframe
        if cf is None:
            raise ValueError("transport needs a connection with an attached coframe")
        self.cf: Coframe = cf
        self.conn = conn
        self.n = n = cf.dim
        self.eta = np.array(cf.eta, dtype=float)
        names = list(cf.coords) + sorted(cf.params)
        self.pvals = [float(cf.params[k]) for k in sorted(cf.params)]
        w = conn.frame_coefficients
        self.frame_parallel = all(w[a][k][b] is ex.ZERO
                                  for a in range(n) for k in range(n) for b in range(n))
        flat = [v for row in cf.theta for v in row] + [v for row in cf.frame for v in row]
        self._basis = ex.compile_scalar(flat, names)
        self._omega = ex.compile_scalar([w[a][k][b] for a in range(n) for k in range(n)
                                         for b in range(n)], names)
        self._gamma = None
        self._names = names

    def basis(self, x):
        vals = self._basis(*x, *self.pvals)
        n = self.n
        th = np.array(vals[: n * n]).reshape(n, n)
        e = np.array(vals[n * n:]).reshape(n, n)
        return th, e

    def omega(self, x) -> np.ndarray:
        return np.array(self._omega(*x, *self.pvals)).reshape(self.n, self.n, self.n)

    def gamma(self, x) -> np.ndarray:
        if self._gamma is None:
            g = self.conn.coordinate_coefficients
            n = self.n
            self._gamma = ex.compile_scalar([g[r][m][v] for r in range(n) for m in range(n)
                                             for v in range(n)], self._names)
        return np.array(self._gamma(*x, *self.pvals)).reshape(self.n, self.n, self.n)

    def metric(self, x) -> np.ndarray:
        th, _ = self.basis(x)
        return th.T @ np.diag(self.eta) @ th

    def frame_of(self, x, vec) -> np.ndarray:
        th, _ = self.basis(x)
        return th @ vec

    def coords_of(self, x, comps) -> np.ndarray:
        _, e = self.basis(x)
        return np.asarray(comps) @ e


# ----------------------------------------------------------------------------
# transport

@dataclass(eq=False)
class TransportResult:
    """Sampled transport of a vector along a curve, in frame components."""

    s: np.ndarray
    x: np.ndarray
    V: np.ndarray
    tangent: np.ndarray
    eta: np.ndarray
    metadata: dict
    coordinate_components: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.V[-1]

    @property
    def norm(self) -> np.ndarray:
        """``g(V, V)`` at every sample."""
        return np.einsum("a,ia,ia->i", self.eta, self.V, self.V)

    @property
    def tangent_product(self) -> np.ndarray:
        """``g(gamma*, V)`` at every sample."""
        return np.einsum("a,ia,ia->i", self.eta, self.tangent, self.V)

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - self.norm[0])))

    @property
    def tangent_product_drift(self) -> float:
        t = self.tangent_product
        return float(np.max(np.abs(t - t[0])))

    def rows(self) -> list:
        n = self.V.shape[1]
        header = (["s"] + [f"x{i}" for i in range(n)] + [f"V{a}" for a in range(n)]
                  + ["g_VV", "g_tV"])
        body = [[self.s[i], *self.x[i], *self.V[i], self.norm[i], self.tangent_product[i]]
                for i in range(len(self.s))]
        return [header] + body

    def write_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(rows[0])
            for r in rows[1:]:
                w.writerow([f"{float(v):.17g}" for v in r])


def _transport_rhs(num: _Numeric, seg: _Segment):
    def f(s, V):
        x = seg.position(s)
        th, _ = num.basis(x)
        u = th @ seg.velocity(s)
        A = np.einsum("akb,k->ab", num.omega(x), u)
        return -A @ V
    return f


def _run(num: _Numeric, curve: Curve, state0: np.ndarray, steps: int | None):
    """Integrate the transport equation, returning (s, x, states, tangents, method)."""
    grids = curve.grid(steps)
    ss, xs, Vs, us = [], [], [], []
    state = np.array(state0, dtype=float)
    for k, (g, seg) in enumerate(zip(grids, curve.segments)):
        for s in g:
            x = seg.position(s)
            if not curve.chart.contains(x, curve.params):
                raise DomainExitError(s, x)
        if num.frame_parallel:
            sol = np.broadcast_to(state, (len(g),) + state.shape).copy()
        else:
            sol = rk4(_transport_rhs(num, seg), state, g)
        start = 0 if k == 0 else 1
        for i in range(start, len(g)):
            x = seg.position(g[i])
            th, _ = num.basis(x)
            ss.append(g[i])
            xs.append(x)
            Vs.append(sol[i])
            us.append(th @ seg.velocity(g[i]))
        state = sol[-1]
    method = "exact" if num.frame_parallel else "rk4"
    return np.array(ss), np.array(xs), np.array(Vs), np.array(us), method


def parallel_transport(conn: Connection, curve: Curve, v0: Sequence[float], steps: int | None = None,
                       components: str = "frame") -> TransportResult:
    """Solve ``D_{gamma*} V = 0`` along ``curve`` from ``V(s0) = v0``.

    ``components`` says whether ``v0`` is given in frame or coordinate
    components; the result is always in frame components (coordinate
    components are attached as well).
    """
    num = _Numeric(conn)
    v0 = np.array(v0, dtype=float)
    if v0.shape != (num.n,):
        raise ValueError(f"v0 needs {num.n} components")
    if components == "coordinate":
        v0 = num.frame_of(curve.position(curve.interval[0]), v0)
    elif components != "frame":
        raise ValueError("components must be 'frame' or 'coordinate'")
    s, x, V, u, method = _run(num, curve, v0, steps)
    coord = np.array([num.coords_of(xi, Vi) for xi, Vi in zip(x, V)])
    meta = {"connection": conn.kind, "coframe": conn.coframe.name, "method": method,
            "steps": len(s) - 1, "step_size": float(np.max(np.diff(s))) if len(s) > 1 else 0.0,
            "curve": dict(curve.description), "v0": [float(v) for v in v0]}
    return TransportResult(s, x, V, u, num.eta, meta, coord)


def nunes_transport(curve: Curve, v0: Sequence[float], coframe: Coframe | None = None,
                    steps: int | None = None) -> TransportResult:
    """Transport keeping the angle with the latitude direction fixed.

    This is parallel transport for the connection that makes the sphere's
    orthonormal frame parallel, so frame components do not change.  The
    curve must keep a distance ``POLE_MARGIN`` from both poles.
    """
    from .frames import teleparallel_connection
    from .models import load_model

    cf = coframe if coframe is not None else load_model("sphere-unit").coframe
    if cf.dim != 2:
        raise ValueError("Nunes transport lives on the 2-sphere")
    for g, seg in zip(curve.grid(steps), curve.segments):
        for s in g:
            x = seg.position(s)
            if not POLE_MARGIN <= x[0] <= math.pi - POLE_MARGIN:
                raise DomainExitError(s, x)
    res = parallel_transport(teleparallel_connection(cf), curve, v0, steps)
    res.metadata["connection"] = "nunes"
    return res


def geodesic(conn: Connection, start: Sequence[float], velocity: Sequence[float],
             interval: tuple = (0.0, 1.0), steps: int | None = None) -> Curve:
    """Integrate ``D_{c*} c* = 0`` from ``start`` with coordinate velocity ``velocity``.

    The result is a sampled :class:`Curve` (cubic Hermite between samples)
    whose ``samples`` hold ``s``, ``x``, ``v`` and ``g(c*, c*)``.
    """
    num = _Numeric(conn)
    n = num.n
    s0, s1 = float(interval[0]), float(interval[1])
    steps = steps or default_steps(s1 - s0)
    if steps < MIN_STEPS:
        raise ValueError(f"geodesics need at least {MIN_STEPS} steps")
    chart = conn.coframe.chart
    params = dict(conn.coframe.params)
    y = np.concatenate([np.array(start, float), np.array(velocity, float)])
    if not chart.contains(y[:n], params):
        raise DomainExitError(s0, y[:n])

    def f(s, y):
        x, v = y[:n], y[n:]
        return np.concatenate([v, -np.einsum("rmv,m,v->r", num.gamma(x), v, v)])

    grid = np.linspace(s0, s1, steps + 1)
    ys = np.empty((steps + 1, 2 * n))
    ys[0] = y
    for i in range(steps):
        # one step at a time so a domain exit is caught where it happens
        ys[i + 1] = rk4(f, ys[i], grid[i:i + 2])[-1]
        if not np.all(np.isfinite(ys[i + 1])) or not chart.contains(ys[i + 1, :n], params):
            raise DomainExitError(grid[i + 1], ys[i + 1, :n])
    xs, vs = ys[:, :n], ys[:, n:]
    speed = np.array([v @ num.metric(x) @ v for x, v in zip(xs, vs)])
    segs = []
    for i in range(steps):
        a, b, h = grid[i], grid[i + 1], grid[i + 1] - grid[i]
        x0, x1, v0, v1 = xs[i], xs[i + 1], vs[i], vs[i + 1]

        def pos(s, a=a, h=h, x0=x0, x1=x1, v0=v0, v1=v1):
            t = (s - a) / h
            return ((2 * t**3 - 3 * t**2 + 1) * x0 + (t**3 - 2 * t**2 + t) * h * v0
                    + (-2 * t**3 + 3 * t**2) * x1 + (t**3 - t**2) * h * v1)

        def vel(s, a=a, h=h, x0=x0, x1=x1, v0=v0, v1=v1):
            t = (s - a) / h
            return ((6 * t**2 - 6 * t) * (x0 - x1) / h + (3 * t**2 - 4 * t + 1) * v0
                    + (3 * t**2 - 2 * t) * v1)

        segs.append(_Segment(a, b, pos, vel))
    desc = {"kind": "geodesic", "connection": conn.kind, "start": [float(v) for v in start],
            "velocity": [float(v) for v in velocity], "interval": [s0, s1], "steps": steps,
            "speed_drift": float(np.max(np.abs(speed - speed[0])))}
    return Curve(chart, tuple(segs), desc, params,
                 samples={"s": grid, "x": xs, "v": vs, "speed": speed})


def geodesic_transport(conn: Connection, start: Sequence[float], velocity: Sequence[float],
                       v0: Sequence[float], interval: tuple = (0.0, 1.0),
                       steps: int | None = None) -> TransportResult:
    """Integrate a geodesic and transport ``v0`` (frame components) along it in one system.

    Carrying the exact tangent makes ``g(gamma*, V)`` a clean test of the
    integrator, free of interpolation error.
    """
    num = _Numeric(conn)
    n = num.n
    s0, s1 = float(interval[0]), float(interval[1])
    steps = steps or default_steps(s1 - s0)
    if steps < MIN_STEPS:
        raise ValueError(f"geodesics need at least {MIN_STEPS} steps")
    chart = conn.coframe.chart
    params = dict(conn.coframe.params)

    def f(s, y):
        x, v, V = y[:n], y[n:2 * n], y[2 * n:]
        th, _ = num.basis(x)
        A = np.einsum("akb,k->ab", num.omega(x), th @ v)
        return np.concatenate([v, -np.einsum("rmv,m,v->r", num.gamma(x), v, v), -A @ V])

    grid = np.linspace(s0, s1, steps + 1)
    ys = np.empty((steps + 1, 3 * n))
    ys[0] = np.concatenate([np.array(start, float), np.array(velocity, float), np.array(v0, float)])
    if not chart.contains(ys[0, :n], params):
        raise DomainExitError(s0, ys[0, :n])
    for i in range(steps):
        ys[i + 1] = rk4(f, ys[i], grid[i:i + 2])[-1]
        if not np.all(np.isfinite(ys[i + 1])) or not chart.contains(ys[i + 1, :n], params):
            raise DomainExitError(grid[i + 1], ys[i + 1, :n])
    xs, vs, Vs = ys[:, :n], ys[:, n:2 * n], ys[:, 2 * n:]
    us = np.array([num.basis(x)[0] @ v for x, v in zip(xs, vs)])
    coord = np.array([num.coords_of(x, V) for x, V in zip(xs, Vs)])
    meta = {"connection": conn.kind, "coframe": conn.coframe.name, "method": "rk4",
            "steps": steps, "step_size": (s1 - s0) / steps,
            "curve": {"kind": "geodesic", "start": [float(v) for v in start],
                      "velocity": [float(v) for v in velocity], "interval": [s0, s1]},
            "v0": [float(v) for v in v0]}
    return TransportResult(grid, xs, Vs, us, num.eta, meta, coord)


# ----------------------------------------------------------------------------
# holonomy

@dataclass(eq=False)
class HolonomyResult:
    matrix: np.ndarray
    angle: float | None
    metadata: dict

    @property
    def identity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - np.eye(len(self.matrix)))))


def holonomy(conn: Connection, loop: Curve, steps: int | None = None) -> HolonomyResult:
    """Linear map on frame components from transport around a closed loop.

    For a 2-dimensional Riemannian frame the rotation angle (from ``e_1``
    toward ``e_2``, reduced to ``[0, 2 pi)``) is reported as well.
    """
    defect = loop.closure_defect()
    if defect > LOOP_TOLERANCE:
        raise LoopNotClosedError(f"loop endpoints differ by {defect:.3g} "
                                 f"(tolerance {LOOP_TOLERANCE:g})")
    num = _Numeric(conn)
    n = num.n
    _, _, M, _, method = _run(num, loop, np.eye(n), steps)
    mat = M[-1]
    angle = None
    if n == 2 and np.all(num.eta > 0):
        angle = math.atan2(mat[1, 0], mat[0, 0]) % (2 * math.pi)
    meta = {"connection": conn.kind, "coframe": conn.coframe.name, "method": method,
            "steps": len(M) - 1, "curve": dict(loop.description), "closure_defect": defect}
    return HolonomyResult(mat, angle, meta)


# ----------------------------------------------------------------------------
# finite quadrilateral

@dataclass(eq=False)
class QuadrilateralEstimate:
    """Closure gap of a coordinate quadrilateral and the torsion it estimates.

    ``gap`` is the coordinate vector ``r1 - r2`` between the tips reached via
    ``p s r`` and via ``p q r``; ``estimate = gap / (delta0 * delta1)``
    approximates ``T^rho(d_axis0, d_axis1)``, whose exact value is ``exact``.
    """

    point: tuple
    axes: tuple
    deltas: tuple
    gap: np.ndarray
    gap_norm: float
    estimate: np.ndarray
    exact: np.ndarray
    metadata: dict

    def component(self, rho: int) -> float:
        return float(self.estimate[rho])

    @property
    def error(self) -> np.ndarray:
        return self.estimate - self.exact


def quadrilateral_torsion_estimate(conn: Connection, p: Sequence[float], delta0: float,
                                   delta1: float, axes: tuple = (0, 1),
                                   steps: int = 64) -> QuadrilateralEstimate:
    """Transport each edge vector of a small coordinate quadrilateral along the other edge.

    With ``X = delta0 d_i`` and ``Y = delta1 d_j`` at ``p``, ``X`` is carried
    to ``s = p + Y`` and ``Y`` to ``q = p + X``; the tips ``s + X'`` and
    ``q + Y'`` differ by a gap of order ``delta0 delta1`` that measures torsion.
    """
    num = _Numeric(conn)
    n = num.n
    i, j = axes
    chart = conn.coframe.chart
    p = np.array(p, dtype=float)
    X = np.zeros(n)
    X[i] = delta0
    Y = np.zeros(n)
    Y[j] = delta1
    q, s_pt = p + X, p + Y
    params = dict(conn.coframe.params)
    for pt in (p, q, s_pt, p + X + Y):
        if not chart.contains(pt, params):
            raise DomainExitError(0.0, pt)
    along_y = parallel_transport(conn, Curve.polyline(chart, [p, s_pt], params), X, steps,
                                 components="coordinate")
    along_x = parallel_transport(conn, Curve.polyline(chart, [p, q], params), Y, steps,
                                 components="coordinate")
    r1 = s_pt + along_y.coordinate_components[-1]
    r2 = q + along_x.coordinate_components[-1]
    gap = np.array(chart.displacement(r2, r1))
    g = num.metric(p)
    gam = num.gamma(p)
    exact = gam[:, i, j] - gam[:, j, i]
    meta = {"connection": conn.kind, "coframe": conn.coframe.name, "steps": steps,
            "method": along_x.metadata["method"]}
    return QuadrilateralEstimate(tuple(p), (i, j), (float(delta0), float(delta1)), gap,
                                 float(math.sqrt(abs(gap @ g @ gap))),
                                 gap / (delta0 * delta1), exact, meta)
