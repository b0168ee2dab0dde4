"""Named verification checks over a model, and their canonical reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import __version__
from . import expr as ex
from .dynamics import (ADOPTED_VARIANT, MatterSource, conservation_check, equivalence_check,
                       field_equation_residual, lagrangian_decomposition_check)
from .expr import Verdict, is_zero, is_zero_all
from .frames import (DimensionError, cartan_curvature, christoffel_from_metric, coordinate_ricci,
                     coordinate_riemann, einstein_3forms, einstein_tensor,
                     frame_ricci_in_coordinates, levi_civita_antisymmetry, levi_civita_connection,
                     nonmetricity, strain_tensor, teleparallel_connection)
from .models import ModelDefinition, load_model
from .transport import (Curve, DomainExitError, geodesic_transport, holonomy, parallel_transport,
                        quadrilateral_torsion_estimate)

__all__ = ["CHECKS", "REPORT_SCHEMA", "CheckError", "CheckItem", "CheckOptions", "Report",
           "run_check", "emit_report", "canonical_json", "numeric_verdict"]

REPORT_SCHEMA = "cartanlab-report/1"
CHECKS = ("curvature", "torsion", "nonmetricity", "strain", "einstein", "field-equations",
          "equivalence", "lagrangian-decomposition", "conservation", "transport", "holonomy",
          "quad-torsion")

DRIFT_TOLERANCE = 1e-9
HOLONOMY_TOLERANCE = 1e-6
RATE_WINDOW = (1.6, 2.4)
_MAX_PRINT_NODES = 200


class CheckError(ValueError):
    pass


@dataclass(frozen=True)
class CheckOptions:
    seed: int = 42
    samples: int = 20
    tol: float = 1e-9
    params: Mapping = field(default_factory=dict)
    random_forms: int = 100
    steps: int | None = None


@dataclass
class CheckItem:
    """One verdict inside a report.  ``expect`` is ``zero``, ``nonzero`` or
    ``None`` for purely informational entries."""

    name: str
    verdict: Verdict
    expect: str | None = "zero"
    required: bool = True

    @property
    def passed(self) -> bool | None:
        if self.expect is None:
            return None
        return self.verdict.status == self.expect

    def to_dict(self) -> dict:
        return {"name": self.name, "expect": self.expect, "required": self.required,
                "passed": self.passed, "verdict": self.verdict.to_dict()}


@dataclass
class Report:
    command: str
    model: ModelDefinition
    options: CheckOptions
    items: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    conventions: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items if i.required and i.expect is not None)

    def item(self, name: str) -> CheckItem:
        for i in self.items:
            if i.name == name:
                return i
        raise KeyError(name)

    def to_dict(self) -> dict:
        m = self.model
        return {
            "schema": REPORT_SCHEMA,
            "version": __version__,
            "command": self.command,
            "model": {"name": m.name, "parameters": dict(m.coframe.params),
                      "coordinates": list(m.coordinates), "signature": list(m.signature)},
            "options": {"seed": self.options.seed, "samples": self.options.samples,
                        "tol": self.options.tol},
            "conventions": self.conventions,
            "checks": [i.to_dict() for i in sorted(self.items, key=lambda i: i.name)],
            "values": self.values,
            "notes": list(self.notes),
            "passed": self.passed,
        }


# ----------------------------------------------------------------------------
# serialization

def _encode(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            out.append("null")
        else:
            text = format(x, ".17g")
            # keep floats recognisable as floats (1.0 not 1, -0.0 not -0)
            out.append(text if any(c in text for c in ".e") else text + ".0")
    elif isinstance(obj, str):
        import json
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, Mapping):
        out.append("{")
        for k, key in enumerate(sorted(obj, key=str)):
            if k:
                out.append(", ")
            _encode(str(key), out)
            out.append(": ")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for k, v in enumerate(obj):
            if k:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    """JSON with sorted keys and floats at 17 significant digits (non-finite as null)."""
    out: list = []
    _encode(obj, out)
    return "".join(out)


def emit_report(report: Report | dict, fmt: str = "json") -> bytes:
    data = report.to_dict() if isinstance(report, Report) else report
    if fmt == "json":
        return (canonical_json(data) + "\n").encode()
    if fmt == "csv-summary":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "status", "expect", "passed", "required", "method",
                    "max_abs_residual", "samples_used"])
        for c in data.get("checks", []):
            v = c["verdict"]
            res = v["max_abs_residual"]
            w.writerow([c["name"], v["status"], c["expect"] or "", c["passed"], c["required"],
                        v["method"], format(float(res), ".17g") if res is not None else "",
                        v["samples_used"]])
        return buf.getvalue().encode()
    raise CheckError(f"unknown format {fmt!r}; use json or csv-summary")


# ----------------------------------------------------------------------------
# helpers

def numeric_verdict(residual: float, tol: float, samples: int = 0, seed: int | None = None) -> Verdict:
    """Verdict for a scalar measured residual (drifts, angle errors)."""
    r = float(residual)
    if not math.isfinite(r):
        return Verdict("inconclusive", "numeric", r, samples, tol, seed)
    return Verdict("zero" if r <= tol else "nonzero", "numeric", r, samples, tol, seed)


def _structural(exprs) -> Verdict:
    left = [e for e in exprs if e is not ex.ZERO]
    return Verdict("zero" if not left else "nonzero", "symbolic",
                   0.0 if not left else float("nan"), 0)


def _show(e: ex.Expr) -> str:
    n = ex.count_nodes(e)
    if n > _MAX_PRINT_NODES:
        return f"<expression with {n} nodes>"
    s = ex.simplify(e) if n < 80 else e
    return ex.to_string(s)


def _diffs(a, b) -> list:
    return [ex.add(x, ex.mul(-1, y)) for x, y in zip(a, b)]


def _flat3(t) -> list:
    n = len(t)
    return [t[i][j][k] for i in range(n) for j in range(n) for k in range(n)]


def _table3(prefix: str, t) -> dict:
    n = len(t)
    return {f"{prefix}[{i}][{j}][{k}]": t[i][j][k]
            for i in range(n) for j in range(n) for k in range(n)}


def _conventions(model: ModelDefinition) -> dict:
    return {
        "signature": list(model.signature),
        "orientation": "theta^0 ^ ... ^ theta^(n-1) is positive",
        "frame_connection": "D_{e_k} e_b = omega^a_{kb} e_a",
        "coordinate_connection": "D_{d_mu} d_nu = Gamma^rho_{mu nu} d_rho",
        "torsion": "Theta^a = d theta^a + omega^a_b ^ theta^b = 1/2 T^a_{bc} theta^b ^ theta^c",
        "curvature": "R^a_b = d omega^a_b + omega^a_c ^ omega^c_b; R_bd = R^a_{bad}; "
                     "unit sphere scalar curvature +2",
        "nonmetricity": "Q_{mu ab} = (D g)_{mu ab} for the background connection",
        "source_sign": "field equations d*S_d + *t_d = -*T_d with *T_d the source 3-form; "
                       "the physical matter energy-momentum 3-form is -*T_d",
        "t_variant": ADOPTED_VARIANT,
    }


def _policy(model: ModelDefinition, opts: CheckOptions):
    return model.coframe.policy(tolerance=opts.tol, sample_count=opts.samples, seed=opts.seed)


def _expectations(report: Report, check: str, quantities: Mapping, policy) -> None:
    table = report.model.expectations.get(check, {})
    for key in sorted(table):
        if key not in quantities:
            raise CheckError(f"model {report.model.name}: unknown {check} quantity {key!r}")
        q = quantities[key]
        v = is_zero(ex.add(q, ex.mul(-1, table[key])), policy)
        report.items.append(CheckItem(f"expect:{key}", v))
        report.values[key] = {"computed": _show(q), "expected": ex.to_string(table[key])}


def _need4(model: ModelDefinition, check: str) -> None:
    if model.dim != 4:
        raise DimensionError(f"{check} needs a 4-dimensional model; {model.name} has n={model.dim}")


# ----------------------------------------------------------------------------
# the checks

def _curvature(report: Report, policy) -> None:
    cf = report.model.coframe
    n = cf.dim
    lc = levi_civita_connection(cf)
    cd = cartan_curvature(lc)
    oracle = christoffel_from_metric(cf.metric, cf.coords, cf.inverse_metric, cf)
    items = report.items
    items.append(CheckItem("torsion_free", is_zero_all(
        [v for T in cd.torsion for v in T.comps.values()], policy)))
    items.append(CheckItem("omega_antisymmetry", is_zero_all(levi_civita_antisymmetry(lc), policy)))
    items.append(CheckItem("christoffel_routes", is_zero_all(
        _diffs(_flat3(lc.coordinate_coefficients), _flat3(oracle.coordinate_coefficients)), policy)))
    ric_c = coordinate_ricci(oracle.coordinate_coefficients, cf.coords)
    ric_f = frame_ricci_in_coordinates(cf, cd)
    items.append(CheckItem("ricci_oracle", is_zero_all(
        [ex.add(ric_c[i][j], ex.mul(-1, ric_f[i][j])) for i in range(n) for j in range(n)], policy)))
    items.append(CheckItem("ricci_symmetry", is_zero_all(cd.ricci_symmetry_residuals(), policy)))
    cd2 = cartan_curvature(lc, "coordinate")
    items.append(CheckItem("curvature_routes", is_zero_all(
        [ex.add(cd.riemann[a][b][c][d], ex.mul(-1, cd2.riemann[a][b][c][d]))
         for a in range(n) for b in range(n) for c in range(n) for d in range(n)], policy)))
    tp = cartan_curvature(teleparallel_connection(cf))
    items.append(CheckItem("teleparallel_curvature_structural",
                           _structural([v for row in tp.curvature for f in row
                                        for v in f.comps.values()])))
    q = {"scalar": cd.scalar}
    q.update(_table3("christoffel", oracle.coordinate_coefficients))
    q.update(_table3("omega", lc.frame_coefficients))
    for a in range(n):
        for b in range(n):
            q[f"ricci[{a}][{b}]"] = cd.ricci[a][b]
    riem = cd.nonzero_riemann()
    for (a, b, c, d), v in riem.items():
        q[f"riemann[{a}][{b}][{c}][{d}]"] = v
    report.values["scalar"] = _show(cd.scalar)
    report.values["nonzero_riemann_components"] = len(riem)
    _expectations(report, "curvature", q, policy)


def _torsion(report: Report, policy) -> None:
    cf = report.model.coframe
    tp = teleparallel_connection(cf)
    cd = cartan_curvature(tp)
    items = report.items
    items.append(CheckItem("teleparallel_curvature_structural",
                           _structural([v for row in cd.curvature for f in row
                                        for v in f.comps.values()])))
    items.append(CheckItem("teleparallel_metric_compatible", tp.metric_compatible(policy)))
    items.append(CheckItem("levi_civita_torsion_free",
                           levi_civita_connection(cf).torsion_free(policy)))
    g = tp.coordinate_coefficients
    n = cf.dim
    coord = [[[ex.add(g[r][m][v], ex.mul(-1, g[r][v][m])) for v in range(n)] for m in range(n)]
             for r in range(n)]
    q = _table3("torsion", cd.torsion_components)
    q.update(_table3("torsion_coord", coord))
    report.values["nonzero_torsion"] = {k: _show(v) for k, v in sorted(q.items())
                                        if k.startswith("torsion[") and v is not ex.ZERO}
    _expectations(report, "torsion", q, policy)


def _background(model: ModelDefinition):
    conn = christoffel_from_metric(model.background_metric, model.coordinates,
                                   coframe=model.coframe)
    return conn


def _nonmetricity(report: Report, policy) -> None:
    model = report.model
    bg = _background(model)
    n = model.dim
    flat = coordinate_riemann(bg.coordinate_coefficients, model.coordinates)
    report.items.append(CheckItem("background_flat", is_zero_all(
        [flat[a][b][c][d] for a in range(n) for b in range(n) for c in range(n) for d in range(n)],
        policy)))
    q = nonmetricity(bg, model.metric, model.coordinates)
    report.items.append(CheckItem("symmetry", is_zero_all(q.symmetry_residuals(), policy)))
    report.items.append(CheckItem("nonmetricity_zero", is_zero_all(_flat3(q.Q), policy),
                                  expect=None, required=False))
    _expectations(report, "nonmetricity", _table3("Q", q.Q), policy)


def _strain(report: Report, policy) -> None:
    model = report.model
    cf = model.coframe
    n = model.dim
    bg = _background(model)
    Q = nonmetricity(bg, model.metric, model.coordinates)
    S = strain_tensor(Q, cf.inverse_metric)
    gamma = christoffel_from_metric(model.metric, model.coordinates, cf.inverse_metric, cf)
    L, G = bg.coordinate_coefficients, gamma.coordinate_coefficients
    half = ex.HALF
    printed = [ex.add(L[r][a][b], ex.mul(-1, G[r][a][b]), ex.mul(-half, S[r][a][b]))
               for r in range(n) for a in range(n) for b in range(n)]
    flipped = [ex.add(L[r][a][b], ex.mul(-1, G[r][a][b]), ex.mul(half, S[r][a][b]))
               for r in range(n) for a in range(n) for b in range(n)]
    report.items.append(CheckItem("relation_L_eq_Gamma_plus_half_S", is_zero_all(printed, policy)))
    report.items.append(CheckItem("relation_L_eq_Gamma_minus_half_S", is_zero_all(flipped, policy),
                                  expect=None, required=False))
    g = model.metric
    low = lambda t: [[[ex.add(*[ex.mul(g[s][r], t[r][a][b]) for r in range(n)])  # noqa: E731
                       for b in range(n)] for a in range(n)] for s in range(n)]
    G_low, S_low = low(G), low(S)
    q = {}
    q.update(_table3("g_gamma", G_low))
    q.update(_table3("minus_half_S", [[[ex.mul(-half, S_low[s][a][b]) for b in range(n)]
                                       for a in range(n)] for s in range(n)]))
    q.update(_table3("half_Q", [[[ex.mul(half, Q.Q[m][a][b]) for b in range(n)]
                                 for a in range(n)] for m in range(n)]))
    report.notes.append("relation_L_eq_Gamma_minus_half_S is the same relation with the opposite "
                        "sign of the strain term, reported for diagnosis only")
    _expectations(report, "strain", q, policy)


def _einstein(report: Report, policy) -> None:
    model = report.model
    _need4(model, "einstein")
    cf = model.coframe
    n = cf.dim
    cd = cartan_curvature(levi_civita_connection(cf))
    G = einstein_tensor(cf, cd)
    src = model.matter_source()
    T = src.tensor if src.tensor is not None else [[ex.ZERO] * n for _ in range(n)]
    report.items.append(CheckItem("einstein_minus_source", is_zero_all(
        [ex.add(G[d][a], ex.mul(-1, ex._coerce(T[d][a]))) for d in range(n) for a in range(n)],
        policy)))
    oracle = christoffel_from_metric(cf.metric, cf.coords, cf.inverse_metric, cf)
    ric_c = coordinate_ricci(oracle.coordinate_coefficients, cf.coords)
    ric_f = frame_ricci_in_coordinates(cf, cd)
    report.items.append(CheckItem("ricci_oracle", is_zero_all(
        [ex.add(ric_c[i][j], ex.mul(-1, ric_f[i][j])) for i in range(n) for j in range(n)], policy)))
    forms = einstein_3forms(cf, cd)
    ok = all(len(i) == 3 for f in forms for i in f.comps)
    report.items.append(CheckItem("grade_einstein_forms",
                                  Verdict("zero" if ok else "nonzero", "symbolic", 0.0, 0)))
    vacuum = src.is_vacuum
    report.items.append(CheckItem("ricci_zero", is_zero_all(
        [cd.ricci[a][b] for a in range(n) for b in range(n)], policy),
        expect="zero" if vacuum else None, required=vacuum))
    report.items.append(CheckItem("ricci_oracle_zero", is_zero_all(
        [ric_c[i][j] for i in range(n) for j in range(n)], policy),
        expect="zero" if vacuum else None, required=vacuum))
    report.values["vacuum"] = vacuum
    report.values["source"] = ("einstein" if model.source == "einstein"
                               else "table" if model.source is not None else "vacuum")


def _field_equations(report: Report, policy) -> None:
    model = report.model
    _need4(model, "field-equations")
    cf = model.coframe
    n = cf.dim
    src = model.matter_source()
    rep = field_equation_residual(cf, src, policy)
    for k, v in rep.verdicts.items():
        report.items.append(CheckItem(k, v))
    # linearity in the source: adding a constant source shifts the residual by its 3-forms
    extra = MatterSource(tuple(tuple(ex.const(d + 1) if a == d else ex.ZERO for a in range(n))
                               for d in range(n)))
    base = src.star_forms(cf)
    shifted = MatterSource(tuple(tuple(ex.add(ex._coerce(src.tensor[d][a]), extra.tensor[d][a])
                                       for a in range(n)) for d in range(n))
                           if src.tensor is not None else extra.tensor)
    rep2 = field_equation_residual(cf, shifted, policy)
    worst = max(v.max_abs_residual for k, v in rep2.verdicts.items() if k.startswith("residual"))
    report.items.append(CheckItem("shifted_source_residual_nonzero",
                                  numeric_verdict(worst, policy.tolerance), expect="nonzero"))
    diffs = []
    for d, (a, b) in enumerate(zip(shifted.star_forms(cf), base)):
        diffs.extend((a - b - extra.star_forms(cf)[d]).comps.values())
    report.items.append(CheckItem("source_linearity", is_zero_all(diffs, policy)))
    report.conventions.update(rep.conventions)


def _equivalence(report: Report, policy) -> None:
    model = report.model
    _need4(model, "equivalence")
    rep = equivalence_check(model.coframe, policy)
    for k, v in rep.verdicts.items():
        report.items.append(CheckItem(k, v))
    for name, v in rep.notes:
        if isinstance(v, Verdict):
            report.items.append(CheckItem(f"info:{name}", v, expect=None, required=False))
        else:
            report.notes.append(f"{name}: {v}")
    report.values["adopted_t_variant"] = rep.variant
    report.conventions.update(rep.conventions)


def _decomposition(report: Report, policy) -> None:
    model = report.model
    _need4(model, "lagrangian-decomposition")
    out = lagrangian_decomposition_check(model.coframe, policy)
    for k, v in out.items():
        info = k.endswith("_zero")
        report.items.append(CheckItem(f"info:{k}" if info else k, v,
                                      expect=None if info else "zero", required=not info))


def _conservation(report: Report, policy) -> None:
    model = report.model
    _need4(model, "conservation")
    out = conservation_check(model.coframe, model.matter_source(), policy,
                             random_forms=report.options.random_forms, seed=report.options.seed)
    for k, v in out.items():
        report.items.append(CheckItem(k, v))


def _sample_start(model: ModelDefinition, opts: CheckOptions):
    """A deterministic start point and direction with a short segment inside the chart."""
    policy = _policy(model, opts).replace(sample_count=8)
    _, pts = ex.sample_points(policy, [])
    rng = np.random.default_rng(opts.seed)
    widths = np.array([hi - lo for lo, hi in model.chart.box])
    for p in pts:
        p = np.array(p)
        direction = rng.normal(size=model.dim)
        step = 0.1 * widths * direction / np.linalg.norm(direction)
        ok = all(model.chart.contains(p + t * step, model.coframe.params)
                 for t in np.linspace(0, 2, 21))
        if ok:
            return p, step
    raise CheckError(f"no sample start point with room for a transport segment in {model.name}")


def _transport(report: Report, policy) -> None:
    model = report.model
    opts = report.options
    cf = model.coframe
    lc = levi_civita_connection(cf)
    tp = teleparallel_connection(cf)
    p, step = _sample_start(model, opts)
    curve = Curve.polyline(model.chart, [p, p + step, p + 2 * step + 0.5 * np.roll(step, 1)],
                           cf.params)
    v0 = np.linspace(1.0, 0.5, model.dim)
    steps = opts.steps or 10_000
    r = parallel_transport(lc, curve, v0, steps)
    report.items.append(CheckItem("lc_norm_drift",
                                  numeric_verdict(r.norm_drift, DRIFT_TOLERANCE, r.metadata["steps"])))
    t = parallel_transport(tp, curve, v0, steps)
    const = float(np.max(np.abs(t.V - t.V[0])))
    report.items.append(CheckItem("teleparallel_components_constant", numeric_verdict(const, 0.0)))
    report.items.append(CheckItem("teleparallel_norm_drift", numeric_verdict(t.norm_drift, 0.0)))
    g = geodesic_transport(lc, p, step, v0, (0.0, 1.0), steps)
    report.items.append(CheckItem("geodesic_tangent_product_drift",
                                  numeric_verdict(g.tangent_product_drift, DRIFT_TOLERANCE, steps)))
    report.items.append(CheckItem("geodesic_norm_drift",
                                  numeric_verdict(g.norm_drift, DRIFT_TOLERANCE, steps)))
    report.values.update({
        "curve": curve.description, "v0": list(v0), "steps": r.metadata["steps"],
        "lc_final": list(r.final), "teleparallel_final": list(t.final),
        "geodesic_final_point": list(g.x[-1]),
    })


def _latitude_chart(model: ModelDefinition) -> bool:
    return model.dim == 2 and model.chart.periods[1] > 0 and model.signature == (1, 1)


def _holonomy(report: Report, policy) -> None:
    model = report.model
    cf = model.coframe
    opts = report.options
    lc = levi_civita_connection(cf)
    tp = teleparallel_connection(cf)
    if _latitude_chart(model):
        steps = opts.steps or 4096
        for polar in (math.pi / 3, 1.0, 0.3):
            loop = Curve.latitude(model.chart, polar)
            want = (2 * math.pi * (1 - math.cos(polar))) % (2 * math.pi)

            def err(h):
                d = abs(h.angle - want) % (2 * math.pi)
                return min(d, 2 * math.pi - d)

            h = holonomy(lc, loop, steps)
            tag = f"{polar:.6f}"
            report.items.append(CheckItem(f"lc_latitude_angle[{tag}]",
                                          numeric_verdict(err(h), HOLONOMY_TOLERANCE, steps)))
            coarse, fine = err(holonomy(lc, loop, 64)), err(holonomy(lc, loop, 128))
            ratio = coarse / fine if fine > 0 else math.inf
            report.items.append(CheckItem(f"lc_step_halving_ratio[{tag}]",
                                          Verdict("zero" if ratio >= 8 else "nonzero", "numeric",
                                                  max(0.0, 8 - ratio), 2, 8.0)))
            hn = holonomy(tp, loop, steps)
            report.items.append(CheckItem(f"nunes_identity[{tag}]",
                                          numeric_verdict(hn.identity_defect, 0.0)))
            report.values[f"angle[{tag}]"] = {"computed": h.angle, "closed_form": want,
                                              "halving_ratio": ratio}
        return
    p, step = _sample_start(model, opts)
    other = np.roll(step, 1)
    loop = Curve.polyline(model.chart, [p, p + step, p + step + other, p + other, p], cf.params)
    steps = opts.steps or 4096
    ht = holonomy(tp, loop, steps)
    report.items.append(CheckItem("teleparallel_identity", numeric_verdict(ht.identity_defect, 0.0)))
    flat = not cartan_curvature(lc).nonzero_riemann()
    hl = holonomy(lc, loop, steps)
    report.items.append(CheckItem("lc_identity", numeric_verdict(hl.identity_defect, HOLONOMY_TOLERANCE),
                                  expect="zero" if flat else None, required=flat))
    report.values["loop"] = loop.description
    report.values["lc_matrix"] = hl.matrix.tolist()


def _rate_item(name: str, errors: list) -> CheckItem:
    e1, e2 = errors[-2], errors[-1]
    if e1 < 1e-13 and e2 < 1e-13:
        return CheckItem(name, Verdict("zero", "numeric", 0.0, len(errors), 0.0))
    ratio = e1 / e2 if e2 > 0 else math.inf
    lo, hi = RATE_WINDOW
    inside = lo <= ratio <= hi
    miss = 0.0 if inside else min(abs(ratio - lo), abs(ratio - hi))
    return CheckItem(name, Verdict("zero" if inside else "nonzero", "numeric", miss, len(errors)))


def _quad(report: Report, policy) -> None:
    model = report.model
    cf = model.coframe
    if _latitude_chart(model):
        p = np.array([math.pi / 3, 1.0])
    else:
        p, _ = _sample_start(model, report.options)
    deltas = (0.02, 0.01, 0.005)
    out = {}
    for label, conn in (("teleparallel", teleparallel_connection(cf)),
                        ("levi_civita", levi_civita_connection(cf))):
        ests = [quadrilateral_torsion_estimate(conn, p, d, d) for d in deltas]
        errors = [float(np.max(np.abs(e.error))) for e in ests]
        report.items.append(_rate_item(f"{label}_first_order_rate", errors))
        # Richardson extrapolation removes the first-order term
        extrap = 2 * ests[-1].estimate - ests[-2].estimate
        report.items.append(CheckItem(f"{label}_extrapolated_limit", numeric_verdict(
            float(np.max(np.abs(extrap - ests[-1].exact))), 1e-3)))
        out[label] = {"estimates": [e.estimate.tolist() for e in ests], "exact": ests[0].exact.tolist(),
                      "errors": errors, "gap_norms": [e.gap_norm for e in ests]}
    if _latitude_chart(model):
        ests = out["teleparallel"]
        ratios = [g / (math.cos(p[0]) * d * d) for g, d in zip(ests["gap_norms"], deltas)]
        out["gap_over_cos_theta_area"] = ratios
        report.items.append(CheckItem("gap_norm_cos_theta", numeric_verdict(abs(ratios[-1] - 1), 0.02)))
    report.values.update({"point": p.tolist(), "deltas": list(deltas), **out})


_DISPATCH: dict[str, Callable] = {
    "curvature": _curvature, "torsion": _torsion, "nonmetricity": _nonmetricity,
    "strain": _strain, "einstein": _einstein, "field-equations": _field_equations,
    "equivalence": _equivalence, "lagrangian-decomposition": _decomposition,
    "conservation": _conservation, "transport": _transport, "holonomy": _holonomy,
    "quad-torsion": _quad,
}


def run_check(model: ModelDefinition | str, check: str, options: CheckOptions | None = None) -> Report:
    """Run one named check and collect its verdicts into a :class:`Report`."""
    options = options or CheckOptions()
    if check not in _DISPATCH:
        raise CheckError(f"unknown check {check!r}; choose from {', '.join(CHECKS)}")
    if isinstance(model, str):
        model = load_model(model, options.params or None)
    elif options.params:
        model = model.with_parameters(options.params)
    report = Report(check, model, options, conventions=_conventions(model))
    try:
        _DISPATCH[check](report, _policy(model, options))
    except DomainExitError as exc:
        raise CheckError(str(exc)) from exc
    return report
