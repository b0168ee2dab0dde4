import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartanlab.frames import levi_civita_connection, teleparallel_connection
from cartanlab.models import load_model
from cartanlab.transport import (Curve, DomainExitError, LoopNotClosedError, geodesic,
                                 geodesic_transport, holonomy, nunes_transport, parallel_transport,
                                 quadrilateral_torsion_estimate, rk4)


@pytest.fixture(scope="module")
def sphere(model):
    m = model("sphere-unit")
    return m, levi_civita_connection(m.coframe), teleparallel_connection(m.coframe)


def latitude_oracle(polar, phi, v0):
    """Closed-form solution of dV0/dphi = c V1, dV1/dphi = -c V0 with c = cos(polar)."""
    a = math.cos(polar) * np.asarray(phi)
    return np.stack([np.cos(a) * v0[0] + np.sin(a) * v0[1],
                     -np.sin(a) * v0[0] + np.cos(a) * v0[1]], -1)


def test_rk4_is_fourth_order():
    def err(k):
        grid = np.linspace(0, 1, k + 1)
        y = rk4(lambda s, y: y, np.array([1.0]), grid)
        return abs(y[-1, 0] - math.e)

    assert 14 < err(20) / err(40) < 18


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, math.pi - 0.2), st.floats(-1, 1), st.floats(-1, 1))
def test_latitude_transport_matches_closed_form(polar, a, b):
    m = load_model("sphere-unit")
    lc = levi_civita_connection(m.coframe)
    r = parallel_transport(lc, Curve.latitude(m.chart, polar), [a, b], 2048)
    assert np.allclose(r.V, latitude_oracle(polar, r.s, (a, b)), atol=1e-10)


@pytest.mark.parametrize("polar", [math.pi / 3, 1.0, 0.3, 2.5])
def test_holonomy_angle_closed_form(sphere, polar):
    m, lc, _ = sphere
    h = holonomy(lc, Curve.latitude(m.chart, polar), 4096)
    want = (2 * math.pi * (1 - math.cos(polar))) % (2 * math.pi)
    d = abs(h.angle - want) % (2 * math.pi)
    assert min(d, 2 * math.pi - d) < 1e-6


def test_holonomy_converges_at_fourth_order(sphere):
    m, lc, _ = sphere
    loop = Curve.latitude(m.chart, 1.0)
    want = 2 * math.pi * (1 - math.cos(1.0))
    e1 = abs(holonomy(lc, loop, 64).angle - want)
    e2 = abs(holonomy(lc, loop, 128).angle - want)
    assert 12 < e1 / e2 < 20


def test_norm_conserved_over_ten_thousand_steps(model):
    for name, pts, v0 in [
        ("sphere-unit", [[1.0, 0.0], [1.3, 0.8], [0.7, 1.9]], [0.6, -0.8]),
        ("schwarzschild-spherical", [[0, 4, 1.0, 0], [1, 5, 1.2, 0.5], [2, 6, 1.1, 1.0]],
         [1.2, 0.3, 0.2, 0.1]),
    ]:
        m = model(name)
        lc = levi_civita_connection(m.coframe)
        r = parallel_transport(lc, Curve.polyline(m.chart, pts, m.coframe.params), v0, 10_000)
        assert r.metadata["steps"] == 10_000
        assert r.norm_drift < 1e-9


def test_nunes_transport_is_exact(sphere):
    m, _, tp = sphere
    curve = Curve.polyline(m.chart, [[1.0, 0.0], [1.4, 1.0], [0.5, 2.0]])
    r = nunes_transport(curve, [0.3, 0.7])
    assert r.metadata["connection"] == "nunes"
    assert np.array_equal(r.V, np.tile([0.3, 0.7], (len(r.s), 1)))
    h = holonomy(tp, Curve.latitude(m.chart, 0.8), 512)
    assert np.array_equal(h.matrix, np.eye(2))


def test_nunes_transport_refuses_the_poles(sphere):
    m, _, _ = sphere
    with pytest.raises(DomainExitError):
        nunes_transport(Curve.latitude(m.chart, 0.01), [1, 0])


def test_domain_exit_reports_parameter(sphere):
    m, lc, _ = sphere
    with pytest.raises(DomainExitError) as info:
        parallel_transport(lc, Curve.polyline(m.chart, [[1.0, 0.0], [4.0, 0.0]]), [1, 0], 300)
    assert 0 < info.value.s < 1
    assert info.value.point[0] > math.pi - 0.05 - 1e-12


def test_open_loop_rejected(sphere):
    m, lc, _ = sphere
    with pytest.raises(LoopNotClosedError):
        holonomy(lc, Curve.polyline(m.chart, [[1.0, 0.0], [1.2, 0.5]]), 64)


def test_periodic_coordinate_closes_loops(sphere):
    m, _, _ = sphere
    assert Curve.latitude(m.chart, 1.2).closed
    assert Curve.latitude(m.chart, 1.2, turns=0.5).closed is False


def test_equator_is_a_geodesic(sphere):
    m, lc, _ = sphere
    c = geodesic(lc, [math.pi / 2, 0.0], [0.0, 1.0], (0.0, 3.0), 600)
    xs = np.asarray(c.samples["x"])
    assert np.allclose(xs[:, 0], math.pi / 2, atol=1e-12)
    assert np.allclose(xs[-1, 1], 3.0, atol=1e-10)


def test_geodesic_transport_conserves_both_products(sphere):
    m, lc, _ = sphere
    r = geodesic_transport(lc, [1.0, 0.2], [0.3, 0.9], [0.5, -0.4], (0.0, 2.0), 2000)
    assert r.norm_drift < 1e-9
    assert r.tangent_product_drift < 1e-9


def test_coordinate_components_round_trip(sphere):
    m, lc, _ = sphere
    curve = Curve.polyline(m.chart, [[1.0, 0.0], [1.1, 0.3]])
    a = parallel_transport(lc, curve, [0.2, 0.5], 100, components="coordinate")
    assert np.allclose(a.coordinate_components[0], [0.2, 0.5])
    b = parallel_transport(lc, curve, a.V[0], 100)
    assert np.allclose(a.V, b.V)


def test_trace_csv_aligned(sphere, tmp_path):
    m, lc, _ = sphere
    r = parallel_transport(lc, Curve.latitude(m.chart, 1.0), [1, 0], 64)
    path = tmp_path / "trace.csv"
    r.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["s", "x0", "x1", "V0", "V1", "g_VV", "g_tV"]
    assert len(rows) == len(r.s) + 1 == 66
    assert float(rows[-1][0]) == r.s[-1]


def test_quadrilateral_recovers_nunes_torsion(sphere):
    m, lc, tp = sphere
    p = [math.pi / 3, 1.0]
    errs = []
    for d in (0.02, 0.01):
        q = quadrilateral_torsion_estimate(tp, p, d, d)
        assert math.isclose(abs(q.exact[1]), 1 / math.tan(math.pi / 3), rel_tol=1e-12)
        errs.append(abs(q.error[1]))
    assert 1.6 <= errs[0] / errs[1] <= 2.4
    q = quadrilateral_torsion_estimate(lc, p, 0.01, 0.01)
    assert np.allclose(q.exact, 0, atol=1e-12)
    assert np.max(np.abs(q.estimate)) < 0.05


def test_curve_from_expressions(sphere):
    m, lc, _ = sphere
    c = Curve.from_exprs(m.chart, ["1", "2*pi*s"], (0, 1))
    assert c.closed
    h = holonomy(lc, c, 2048)
    assert abs(h.angle - 2 * math.pi * (1 - math.cos(1))) < 1e-6
    with pytest.raises(ValueError):
        Curve.from_exprs(m.chart, ["u", "s"])
