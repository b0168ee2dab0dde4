"""Connections, torsion, curvature, Einstein forms, nonmetricity and strain.

Index conventions (0-based everywhere):

* frame connection coefficients ``omega[a][k][b]``: ``D_{e_k} e_b = omega^a_kb e_a``;
  the connection 1-forms are ``omega^a_b = omega^a_kb theta^k``.
* coordinate coefficients ``gamma[rho][mu][nu]``: ``D_{d_mu} d_nu = Gamma^rho_mu_nu d_rho``.
* torsion ``Theta^a = d theta^a + omega^a_b ^ theta^b = 1/2 T^a_bc theta^b ^ theta^c``,
  i.e. ``T(u, v) = D_u v - D_v u - [u, v]``.
* curvature ``R^a_b = d omega^a_b + omega^a_c ^ omega^c_b = 1/2 R^a_bcd theta^c ^ theta^d``.
* Ricci ``R_bd = R^a_bad`` (contraction of the upper index with the first
  2-form slot) and scalar ``R = eta^bd R_bd``; the unit sphere has ``R = +2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from . import expr as ex
from .expr import Expr, SamplingPolicy, Verdict, is_zero_all
from .forms import (Coframe, MultiForm, basis_indices, exterior_d, hodge, left_contract,
                    wedge, _Minors)

__all__ = [
    "Connection", "CurvatureData", "NonmetricityData", "DimensionError", "ChartMismatchError",
    "structure_coefficients", "structure_equation_residual", "levi_civita_connection",
    "teleparallel_connection", "frame_connection", "coordinate_connection", "christoffel",
    "christoffel_from_metric", "flat_connection", "cartan_curvature", "ricci_1forms",
    "einstein_3forms", "einstein_tensor", "coordinate_riemann", "coordinate_ricci",
    "frame_ricci_in_coordinates", "levi_civita_antisymmetry", "levi_civita_forms",
    "lower_first", "nonmetricity", "strain_tensor", "inverse_matrix",
]


class DimensionError(ValueError):
    pass


class ChartMismatchError(ValueError):
    pass


def _zeros3(n: int) -> list:
    return [[[ex.ZERO] * n for _ in range(n)] for _ in range(n)]


def _freeze(t):
    if isinstance(t, (list, tuple)):
        return tuple(_freeze(x) for x in t)
    return t


def inverse_matrix(m: Sequence[Sequence[Expr]]) -> tuple:
    """Exact inverse via adjugate and determinant."""
    n = len(m)
    minors = _Minors(m)
    full = tuple(range(n))
    det = minors.get(full, full)
    if det is ex.ZERO:
        raise ValueError("matrix is singular")
    inv_det = ex.power(det, -1)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            cof = minors.get(tuple(r for r in full if r != j), tuple(c for c in full if c != i))
            row.append(ex.mul(-1 if (i + j) % 2 else 1, cof, inv_det))
        out.append(tuple(row))
    return tuple(out)


# --------------------------------------------------------------------------
# structure coefficients

def structure_coefficients(cf: Coframe) -> tuple:
    """``c[k][a][b]`` with ``[e_a, e_b] = c^k_ab e_k`` (from Lie brackets of the frame)."""
    return cf.structure_coefficients


def structure_equation_residual(cf: Coframe) -> list:
    """Components of ``d theta^a + 1/2 c^a_kl theta^k ^ theta^l`` with d taken in coordinates."""
    out = []
    for a in range(cf.dim):
        lhs = exterior_d(cf.basis(a), route="coordinate")
        diff = lhs - cf.dtheta[a]
        out.extend(diff.comps.values())
    return out


# --------------------------------------------------------------------------
# connections

@dataclass(frozen=True, eq=False)
class Connection:
    """A linear connection given by frame or coordinate coefficients.

    ``kind`` is one of ``levi_civita``, ``teleparallel``, ``frame`` or
    ``coordinate``.  Missing representations are derived on demand when a
    coframe is attached.  Flags such as torsion-freeness are computed as
    :class:`Verdict` objects, never stored as assumptions.
    """

    kind: str
    coords: tuple
    coframe: Coframe | None = None
    omega: tuple | None = None
    gamma: tuple | None = None

    @property
    def dim(self) -> int:
        return len(self.coords)

    @cached_property
    def frame_coefficients(self) -> tuple:
        if self.omega is not None:
            return self.omega
        cf = self._need_coframe()
        n = self.dim
        th, e, g = cf.theta, cf.frame, self.gamma
        out = _zeros3(n)
        for k in range(n):
            for b in range(n):
                # D_{e_k} e_b in coordinates
                vec = []
                for rho in range(n):
                    terms = [ex.mul(e[k][mu], ex.diff(e[b][rho], cf.coords[mu])) for mu in range(n)
                             if e[k][mu] is not ex.ZERO]
                    for mu in range(n):
                        if e[k][mu] is ex.ZERO:
                            continue
                        for nu in range(n):
                            if g[rho][mu][nu] is ex.ZERO or e[b][nu] is ex.ZERO:
                                continue
                            terms.append(ex.mul(e[k][mu], e[b][nu], g[rho][mu][nu]))
                    vec.append(ex.add(*terms))
                for a in range(n):
                    out[a][k][b] = ex.add(*[ex.mul(th[a][rho], vec[rho]) for rho in range(n)])
        return _freeze(out)

    @cached_property
    def coordinate_coefficients(self) -> tuple:
        if self.gamma is not None:
            return self.gamma
        cf = self._need_coframe()
        n = self.dim
        th, e, w = cf.theta, cf.frame, self.omega
        out = _zeros3(n)
        for mu in range(n):
            for nu in range(n):
                # D_{d_mu} d_nu expressed in the frame: components along e_a
                comp = []
                for a in range(n):
                    terms = [ex.diff(th[a][nu], cf.coords[mu])]
                    for k in range(n):
                        if th[k][mu] is ex.ZERO:
                            continue
                        for b in range(n):
                            if th[b][nu] is ex.ZERO or w[a][k][b] is ex.ZERO:
                                continue
                            terms.append(ex.mul(th[k][mu], th[b][nu], w[a][k][b]))
                    comp.append(ex.add(*terms))
                for rho in range(n):
                    out[rho][mu][nu] = ex.add(*[ex.mul(e[a][rho], comp[a]) for a in range(n)])
        return _freeze(out)

    @cached_property
    def forms(self) -> tuple:
        """Connection 1-forms ``omega^a_b`` as ``forms[a][b]``."""
        cf = self._need_coframe()
        n = self.dim
        w = self.frame_coefficients
        return tuple(tuple(MultiForm(cf, {(k,): w[a][k][b] for k in range(n)}) for b in range(n))
                     for a in range(n))

    def _need_coframe(self) -> Coframe:
        if self.coframe is None:
            raise ValueError("this operation needs a coframe attached to the connection")
        return self.coframe

    # computed flags -----------------------------------------------------------
    def torsion_residuals(self) -> list:
        g = self.coordinate_coefficients
        n = self.dim
        return [ex.add(g[r][m][v], ex.mul(-1, g[r][v][m]))
                for r in range(n) for m in range(n) for v in range(m + 1, n)]

    def torsion_free(self, policy: SamplingPolicy) -> Verdict:
        return is_zero_all(self.torsion_residuals(), policy)

    def metric_compatible(self, policy: SamplingPolicy, metric: Sequence | None = None) -> Verdict:
        """``D g = 0`` for ``metric`` (default: the coframe metric)."""
        if metric is None:
            metric = self._need_coframe().metric
        q = nonmetricity(self, metric)
        return is_zero_all([v for plane in q.Q for row in plane for v in row], policy)


def frame_connection(cf: Coframe, omega: Sequence, kind: str = "frame") -> Connection:
    return Connection(kind, cf.coords, cf, omega=_freeze(omega))


def coordinate_connection(gamma: Sequence, coords: Sequence[str], coframe: Coframe | None = None,
                          kind: str = "coordinate") -> Connection:
    return Connection(kind, tuple(coords), coframe, gamma=_freeze(gamma))


def teleparallel_connection(cf: Coframe) -> Connection:
    """The connection making the coframe parallel: all frame coefficients vanish."""
    n = cf.dim
    return Connection("teleparallel", cf.coords, cf, omega=_freeze(_zeros3(n)))


def flat_connection(coords: Sequence[str], coframe: Coframe | None = None) -> Connection:
    """Connection with vanishing coefficients in the given chart."""
    n = len(coords)
    return coordinate_connection(_zeros3(n), coords, coframe)


def levi_civita_forms(cf: Coframe) -> tuple:
    """``omega^{cd} = 1/2 [th^d _| d th^c - th^c _| d th^d + th^c _| (th^d _| d th_a) th^a]``.

    Every ordered pair (c, d) is evaluated from the formula; antisymmetry is
    a property to check, not an input.
    """
    n = cf.dim
    dth = [exterior_d(cf.basis(a)) for a in range(n)]
    dth_low = [dth[a] * cf.eta[a] for a in range(n)]
    th = [cf.basis(a) for a in range(n)]
    upper = [[None] * n for _ in range(n)]
    for c in range(n):
        for d in range(n):
            acc = left_contract(th[d], dth[c]) - left_contract(th[c], dth[d])
            for a in range(n):
                s = left_contract(th[c], left_contract(th[d], dth_low[a]))
                if s.comps:
                    acc = acc + wedge(s, th[a])
            upper[c][d] = acc * ex.const(ex.HALF)
    return tuple(tuple(r) for r in upper)


def levi_civita_connection(cf: Coframe) -> Connection:
    n = cf.dim
    upper = levi_civita_forms(cf)
    omega = _zeros3(n)
    for a in range(n):
        for b in range(n):
            w = upper[a][b] * cf.eta[b]
            for k in range(n):
                omega[a][k][b] = w[(k,)]
    conn = Connection("levi_civita", cf.coords, cf, omega=_freeze(omega))
    object.__setattr__(conn, "_upper_forms", upper)
    return conn


def levi_civita_antisymmetry(conn: Connection) -> list:
    """Residuals ``omega^{cd} + omega^{dc}`` (zero for a metric connection in an orthonormal frame)."""
    upper = getattr(conn, "_upper_forms", None)
    cf = conn._need_coframe()
    n = cf.dim
    if upper is None:
        w = conn.frame_coefficients
        upper = [[MultiForm(cf, {(k,): ex.mul(cf.eta[d], w[c][k][d]) for k in range(n)})
                  for d in range(n)] for c in range(n)]
    out = []
    for c in range(n):
        for d in range(c, n):
            out.extend((upper[c][d] + upper[d][c]).comps.values())
    return out


def christoffel_from_metric(g: Sequence[Sequence[Expr]], coords: Sequence[str],
                            ginv: Sequence[Sequence[Expr]] | None = None,
                            coframe: Coframe | None = None) -> Connection:
    """Coordinate Levi-Civita coefficients of a metric."""
    n = len(coords)
    if ginv is None:
        ginv = inverse_matrix(g)
    dg = [[[ex.diff(g[a][b], c) for c in coords] for b in range(n)] for a in range(n)]
    low = _zeros3(n)  # low[s][m][v] = Gamma_{s, m v}
    for s in range(n):
        for m in range(n):
            for v in range(m, n):
                val = ex.mul(ex.HALF, ex.add(dg[v][s][m], dg[m][s][v], ex.mul(-1, dg[m][v][s])))
                low[s][m][v] = low[s][v][m] = val
    gamma = _zeros3(n)
    for r in range(n):
        for m in range(n):
            for v in range(m, n):
                val = ex.add(*[ex.mul(ginv[r][s], low[s][m][v]) for s in range(n)
                               if ginv[r][s] is not ex.ZERO])
                gamma[r][m][v] = gamma[r][v][m] = val
    return coordinate_connection(gamma, coords, coframe)


def christoffel(cf: Coframe) -> Connection:
    """Christoffel symbols of the coframe metric."""
    return christoffel_from_metric(cf.metric, cf.coords, cf.inverse_metric, cf)


# --------------------------------------------------------------------------
# curvature

@dataclass(frozen=True, eq=False)
class CurvatureData:
    torsion: tuple        # Theta^a
    curvature: tuple      # R^a_b as curvature[a][b]
    torsion_components: tuple  # T[a][b][c]
    riemann: tuple        # R[a][b][c][d]
    ricci: tuple          # R_ac (both indices down)
    scalar: Expr

    def nonzero_riemann(self) -> dict:
        n = len(self.riemann)
        return {(a, b, c, d): self.riemann[a][b][c][d] for a in range(n) for b in range(n)
                for c in range(n) for d in range(n) if self.riemann[a][b][c][d] is not ex.ZERO}

    def ricci_symmetry_residuals(self) -> list:
        n = len(self.ricci)
        return [ex.add(self.ricci[a][c], ex.mul(-1, self.ricci[c][a]))
                for a in range(n) for c in range(a + 1, n)]


def _two_form_components(form: MultiForm, n: int) -> list:
    out = [[ex.ZERO] * n for _ in range(n)]
    for c, d in basis_indices(n, 2):
        v = form[(c, d)]
        out[c][d] = v
        out[d][c] = ex.mul(-1, v)
    return out


def cartan_curvature(conn: Connection, d_route: str = "frame") -> CurvatureData:
    """Torsion and curvature 2-forms from Cartan's structure equations."""
    cf = conn._need_coframe()
    n = cf.dim
    w = conn.forms
    th = [cf.basis(a) for a in range(n)]
    torsion = []
    for a in range(n):
        t = exterior_d(th[a], d_route)
        for b in range(n):
            if w[a][b].comps:
                t = t + wedge(w[a][b], th[b])
        torsion.append(t)
    curv = []
    for a in range(n):
        row = []
        for b in range(n):
            r = exterior_d(w[a][b], d_route)
            for c in range(n):
                if w[a][c].comps and w[c][b].comps:
                    r = r + wedge(w[a][c], w[c][b])
            row.append(r)
        curv.append(tuple(row))
    tcomp = tuple(_freeze(_two_form_components(torsion[a], n)) for a in range(n))
    riem = tuple(tuple(_freeze(_two_form_components(curv[a][b], n)) for b in range(n))
                 for a in range(n))
    ricci = tuple(tuple(ex.add(*[riem[a][b][a][d] for a in range(n)]) for d in range(n))
                  for b in range(n))
    scalar = ex.add(*[ex.mul(cf.eta[b], ricci[b][b]) for b in range(n)])
    return CurvatureData(tuple(torsion), tuple(curv), tcomp, riem, ricci, scalar)


def ricci_1forms(cf: Coframe, curv: CurvatureData) -> list:
    """``R^d = R^d_a theta^a`` with ``R^d_a = eta^dd R_da``."""
    n = cf.dim
    return [MultiForm(cf, {(a,): ex.mul(cf.eta[d], curv.ricci[d][a]) for a in range(n)})
            for d in range(n)]


def _need4(cf: Coframe) -> None:
    if cf.dim != 4:
        raise DimensionError(f"needs a 4-dimensional coframe, got n={cf.dim}")


def einstein_tensor(cf: Coframe, curv: CurvatureData | None = None) -> tuple:
    """Mixed components ``G^d_a = R^d_a - 1/2 R delta^d_a``."""
    _need4(cf)
    curv = curv or cartan_curvature(levi_civita_connection(cf))
    n = cf.dim
    half_r = ex.mul(ex.HALF, curv.scalar)
    return tuple(tuple(ex.add(ex.mul(cf.eta[d], curv.ricci[d][a]),
                              ex.mul(-1, half_r) if a == d else ex.ZERO) for a in range(n))
                 for d in range(n))


def einstein_3forms(cf: Coframe, curv: CurvatureData | None = None) -> list:
    """``*G^d = *(R^d - 1/2 R theta^d)``."""
    _need4(cf)
    curv = curv or cartan_curvature(levi_civita_connection(cf))
    g = einstein_tensor(cf, curv)
    return [hodge(MultiForm(cf, {(a,): g[d][a] for a in range(cf.dim)})) for d in range(cf.dim)]


# --------------------------------------------------------------------------
# coordinate oracle

def coordinate_riemann(gamma: Sequence, coords: Sequence[str]) -> tuple:
    """``R^r_{s m v} = d_m G^r_{v s} - d_v G^r_{m s} + G^r_{m l} G^l_{v s} - G^r_{v l} G^l_{m s}``."""
    n = len(coords)
    out = [[[[ex.ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for r in range(n):
        for s in range(n):
            for m in range(n):
                for v in range(m + 1, n):
                    terms = [ex.diff(gamma[r][v][s], coords[m]),
                             ex.mul(-1, ex.diff(gamma[r][m][s], coords[v]))]
                    for l in range(n):
                        terms.append(ex.mul(gamma[r][m][l], gamma[l][v][s]))
                        terms.append(ex.mul(-1, gamma[r][v][l], gamma[l][m][s]))
                    val = ex.add(*terms)
                    out[r][s][m][v] = val
                    out[r][s][v][m] = ex.mul(-1, val)
    return _freeze(out)


def coordinate_ricci(gamma: Sequence, coords: Sequence[str]) -> tuple:
    """``Ric_{s v} = R^r_{s r v}`` from the coordinate Riemann tensor."""
    riem = coordinate_riemann(gamma, coords)
    n = len(coords)
    return tuple(tuple(ex.add(*[riem[r][s][r][v] for r in range(n)]) for v in range(n))
                 for s in range(n))


def frame_ricci_in_coordinates(cf: Coframe, curv: CurvatureData) -> tuple:
    """``Ric_{mu nu} = theta^a_mu theta^c_nu R_ac``."""
    n = cf.dim
    th = cf.theta
    return tuple(tuple(ex.add(*[ex.mul(th[a][m], th[c][v], curv.ricci[a][c])
                                for a in range(n) for c in range(n)
                                if th[a][m] is not ex.ZERO and th[c][v] is not ex.ZERO])
                       for v in range(n)) for m in range(n))


# --------------------------------------------------------------------------
# nonmetricity and strain

@dataclass(frozen=True, eq=False)
class NonmetricityData:
    Q: tuple   # Q[mu][alpha][beta]
    S: tuple | None = None  # S[rho][alpha][beta]

    def symmetry_residuals(self) -> list:
        n = len(self.Q)
        return [ex.add(self.Q[m][a][b], ex.mul(-1, self.Q[m][b][a]))
                for m in range(n) for a in range(n) for b in range(a + 1, n)]


def nonmetricity(conn: Connection, metric: Sequence[Sequence[Expr]],
                 metric_coords: Sequence[str] | None = None) -> NonmetricityData:
    """``Q_{mu a b} = d_mu g_ab - G^l_{mu a} g_lb - G^l_{mu b} g_al``."""
    if metric_coords is not None and tuple(metric_coords) != conn.coords:
        raise ChartMismatchError(f"connection chart {conn.coords} differs from metric chart "
                                 f"{tuple(metric_coords)}")
    n = conn.dim
    gam = conn.coordinate_coefficients
    q = _zeros3(n)
    for m in range(n):
        for a in range(n):
            for b in range(a, n):
                terms = [ex.diff(metric[a][b], conn.coords[m])]
                for l in range(n):
                    if gam[l][m][a] is not ex.ZERO:
                        terms.append(ex.mul(-1, gam[l][m][a], metric[l][b]))
                    if gam[l][m][b] is not ex.ZERO:
                        terms.append(ex.mul(-1, gam[l][m][b], metric[a][l]))
                q[m][a][b] = q[m][b][a] = ex.add(*terms)
    return NonmetricityData(_freeze(q))


def strain_tensor(q: NonmetricityData, ginv: Sequence[Sequence[Expr]]) -> tuple:
    """``S^r_{ab} = g^{rs} (Q_{ab s} + Q_{b s a} - Q_{s ab})``."""
    Q = q.Q
    n = len(Q)
    low = _zeros3(n)  # S_{s a b}
    for s in range(n):
        for a in range(n):
            for b in range(n):
                low[s][a][b] = ex.add(Q[a][b][s], Q[b][s][a], ex.mul(-1, Q[s][a][b]))
    out = _zeros3(n)
    for r in range(n):
        for a in range(n):
            for b in range(n):
                out[r][a][b] = ex.add(*[ex.mul(ginv[r][s], low[s][a][b]) for s in range(n)
                                        if ginv[r][s] is not ex.ZERO])
    return _freeze(out)


def lower_first(table: Sequence, metric: Sequence[Sequence[Expr]]) -> tuple:
    """``X_{s ab} = g_{s r} X^r_{ab}``."""
    n = len(table)
    return _freeze([[[ex.add(*[ex.mul(metric[s][r], table[r][a][b]) for r in range(n)
                               if metric[s][r] is not ex.ZERO])
                      for b in range(n)] for a in range(n)] for s in range(n)])
