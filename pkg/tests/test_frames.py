import math

import numpy as np
import pytest
import sympy as sp

from cartanlab import expr as ex
from cartanlab.frames import (DimensionError, cartan_curvature, christoffel_from_metric,
                              einstein_tensor, frame_ricci_in_coordinates, levi_civita_connection,
                              nonmetricity, teleparallel_connection)

from .conftest import sample, to_sympy


class SympyOracle:
    """Textbook coordinate formulas fed by sympy's exact metric derivatives.

    Inversion and index contractions happen numerically per point, so the
    oracle shares nothing with the frame route and stays fast in Cartesian charts.
    """

    def __init__(self, m):
        self.names = list(m.coordinates) + sorted(m.coframe.params)
        syms = [sp.Symbol(k, real=True) for k in self.names]
        x = syms[:m.dim]
        n = m.dim
        g = [[to_sympy(m.metric[i][j], self.names) for j in range(n)] for i in range(n)]
        dg = [[[sp.diff(g[i][j], x[k]) for k in range(n)] for j in range(n)] for i in range(n)]
        ddg = [[[[sp.diff(dg[i][j][k], x[l]) for l in range(n)] for k in range(n)]
                for j in range(n)] for i in range(n)]
        self.n = n
        self._f = sp.lambdify(syms, [g, dg, ddg], "math")

    def point(self, values):
        g, dg, ddg = (np.array(a, dtype=float) for a in self._f(*values))
        ginv = np.linalg.inv(g)
        # lowered symbols  G_{s m v} = (d_m g_sv + d_v g_sm - d_s g_mv) / 2
        low = 0.5 * (np.einsum("svm->smv", dg) + np.einsum("smv->smv", dg)
                     - np.einsum("mvs->smv", dg))
        gamma = np.einsum("rs,smv->rmv", ginv, low)
        dlow = 0.5 * (np.einsum("svmk->smvk", ddg) + np.einsum("smvk->smvk", ddg)
                      - np.einsum("mvsk->smvk", ddg))
        dginv = -np.einsum("ra,abk,bs->rsk", ginv, dg, ginv)
        dgamma = np.einsum("rsk,smv->rmvk", dginv, low) + np.einsum("rs,smvk->rmvk", ginv, dlow)
        ricci = (np.einsum("rmvr->mv", dgamma) - np.einsum("rmrv->mv", dgamma)
                 + np.einsum("rrl,lmv->mv", gamma, gamma) - np.einsum("rvl,lmr->mv", gamma, gamma))
        return gamma, ricci, float(np.einsum("mv,mv->", ginv, ricci))

    def over(self, binding):
        cols = [np.broadcast_to(np.asarray(binding[k], dtype=float),
                                np.shape(binding[self.names[0]])) for k in self.names]
        return [self.point(v) for v in zip(*cols)]


def same(a, b):
    return ex.simplify(ex.add(a, ex.mul(-1, b))) is ex.ZERO


def mine(e, binding):
    return np.broadcast_to(np.asarray(ex.evaluate(e, binding), dtype=float),
                           np.shape(next(iter(binding.values()))))


@pytest.mark.parametrize("name", ["sphere-unit", "schwarzschild-spherical", "conformal-test",
                                  "schwarzschild-cartesian"])
def test_christoffels_match_sympy(name, model):
    m = model(name)
    binding, _ = sample(m)
    want = np.array([p[0] for p in SympyOracle(m).over(binding)])
    n = m.dim
    for route in (levi_civita_connection(m.coframe),
                  christoffel_from_metric(m.metric, m.coordinates, coframe=m.coframe)):
        G = route.coordinate_coefficients
        got = np.stack([np.stack([np.stack([mine(G[r][a][b], binding) for b in range(n)], -1)
                                  for a in range(n)], -2) for r in range(n)], -3)
        assert np.allclose(got, want, atol=1e-10, rtol=1e-10)


@pytest.mark.parametrize("name", ["sphere-unit", "schwarzschild-spherical", "conformal-test",
                                  "schwarzschild-cartesian"])
def test_ricci_and_scalar_match_sympy(name, model):
    m = model(name)
    binding, _ = sample(m)
    want = SympyOracle(m).over(binding)
    cd = cartan_curvature(levi_civita_connection(m.coframe))
    ric = frame_ricci_in_coordinates(m.coframe, cd)
    for i in range(m.dim):
        for j in range(m.dim):
            assert np.allclose(mine(ric[i][j], binding), [w[1][i, j] for w in want], atol=1e-9)
    assert np.allclose(mine(cd.scalar, binding), [w[2] for w in want], atol=1e-9)


def test_conformal_scalar_closed_form(model):
    m = model("conformal-test")
    binding, _ = sample(m, count=25)
    x1 = np.asarray(binding["x1"], dtype=float)
    got = [w[2] for w in SympyOracle(m).over(binding)]
    assert np.allclose(got, -6 * np.sin(x1) / (2 + np.sin(x1)) ** 3, atol=1e-10)


def test_sphere_frame_coefficients_and_curvature(model):
    m = model("sphere-unit")
    lc = levi_civita_connection(m.coframe)
    w = lc.frame_coefficients
    assert same(w[1][1][0], ex.parse("cot(th)"))
    assert same(w[0][1][1], ex.parse("-cot(th)"))
    cd = cartan_curvature(lc)
    riem = cd.nonzero_riemann()
    binding, _ = sample(m)
    for v in riem.values():
        assert np.allclose(np.abs(mine(v, binding)), 1.0)
    assert ex.simplify(cd.scalar) is ex.const(2)


def test_teleparallel_connection_is_flat_and_metric(model):
    for name in ("sphere-unit", "schwarzschild-spherical"):
        cf = model(name).coframe
        tp = teleparallel_connection(cf)
        cd = cartan_curvature(tp)
        assert all(f.is_structurally_zero() for row in cd.curvature for f in row)
        assert tp.metric_compatible(cf.policy()).status == "zero"


def test_nunes_torsion_on_the_sphere(model):
    cd = cartan_curvature(teleparallel_connection(model("sphere-unit").coframe))
    T = cd.torsion_components
    assert same(T[1][0][1], ex.parse("cot(th)"))
    assert same(T[1][1][0], ex.parse("-cot(th)"))
    others = [T[a][b][c] for a in range(2) for b in range(2) for c in range(2)
              if (a, b, c) not in ((1, 0, 1), (1, 1, 0))]
    assert all(v is ex.ZERO for v in others)


def test_ricci_symmetric_and_bianchi_free_einstein(model):
    m = model("conformal-test")
    cd = cartan_curvature(levi_civita_connection(m.coframe))
    pol = m.coframe.policy()
    assert ex.is_zero_all(cd.ricci_symmetry_residuals(), pol).status == "zero"
    G = einstein_tensor(m.coframe, cd)
    assert ex.is_zero_all([G[a][b] for a in range(4) for b in range(4)], pol).status == "nonzero"


def test_cartesian_nonmetricity_components(model):
    m = model("schwarzschild-cartesian")
    bg = christoffel_from_metric(m.background_metric, m.coordinates, coframe=m.coframe)
    Q = nonmetricity(bg, m.metric, m.coordinates).Q
    r3 = ex.parse("(x1^2+x2^2+x3^2)^(3/2)")
    want = ex.mul(2, ex.parse("m*x1"), ex.power(r3, -1))
    pol = m.coframe.policy()
    assert ex.is_zero(ex.add(Q[1][0][0], ex.mul(-1, want)), pol).status == "zero"
    assert Q[0][1][0] is ex.ZERO and Q[0][0][1] is ex.ZERO


def test_einstein_tensor_needs_four_dimensions(model):
    with pytest.raises(DimensionError):
        einstein_tensor(model("sphere-unit").coframe)


def test_strain_relation_holds_with_minus_sign(model):
    """L = Gamma - S/2 for the strain tensor S = g^(rs)(Q_abs + Q_bsa - Q_sab)."""
    from cartanlab.frames import strain_tensor
    for name in ("schwarzschild-cartesian", "schwarzschild-spherical"):
        m = model(name)
        bg = christoffel_from_metric(m.background_metric, m.coordinates, coframe=m.coframe)
        q = nonmetricity(bg, m.metric, m.coordinates)
        S = strain_tensor(q, m.coframe.inverse_metric)
        G = christoffel_from_metric(m.metric, m.coordinates, coframe=m.coframe).coordinate_coefficients
        L = bg.coordinate_coefficients
        res = [ex.add(L[r][a][b], ex.mul(-1, G[r][a][b]), ex.mul(ex.HALF, S[r][a][b]))
               for r in range(4) for a in range(4) for b in range(4)]
        assert ex.is_zero_all(res, m.coframe.policy()).status == "zero"
    m = model("schwarzschild-cartesian")
    G = christoffel_from_metric(m.metric, m.coordinates, coframe=m.coframe).coordinate_coefficients
    lowered = ex.add(*[ex.mul(m.metric[1][r], G[r][0][0]) for r in range(4)])
    mx = ex.parse("m*x1/(x1^2+x2^2+x3^2)^(3/2)")
    assert ex.is_zero(ex.add(lowered, mx), m.coframe.policy()).status == "zero"
