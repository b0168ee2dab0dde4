"""Model definitions: JSON files with expression strings, plus the shipped registry."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from . import expr as ex
from .forms import Chart, Coframe, determinant

__all__ = ["ModelDefinition", "ModelError", "load_model", "registry_names", "parse_model",
           "factorize_metric", "MODEL_SCHEMA"]

MODEL_SCHEMA = "cartanlab-model/1"
_PROBES = 5


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModelDefinition:
    name: str
    coordinates: tuple
    domain: Mapping
    signature: tuple
    parameters: Mapping
    coframe_text: tuple | None = None
    metric_text: tuple | None = None
    constraints: tuple = ()
    description: str = ""
    source_text: tuple | str | None = None
    extent_text: Mapping | None = None
    periods_text: Mapping | None = None
    background_text: tuple | None = None
    expectations_text: Mapping | None = None

    # parsed data, filled by parse_model
    chart: Chart = field(default=None, repr=False)
    coframe: Coframe = field(default=None, repr=False)
    metric: tuple = field(default=None, repr=False)
    source: tuple | str | None = field(default=None, repr=False)
    background_metric: tuple = field(default=None, repr=False)
    expectations: Mapping = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    def to_dict(self) -> dict:
        d = {
            "schema": MODEL_SCHEMA,
            "name": self.name,
            "description": self.description,
            "coordinates": list(self.coordinates),
            "domain": {k: list(v) for k, v in self.domain.items()},
            "signature": list(self.signature),
            "parameters": dict(self.parameters),
        }
        if self.constraints:
            d["constraints"] = [{"expr": e, "min": lo, "max": hi} for e, lo, hi in self.constraints]
        if self.coframe_text is not None:
            d["coframe"] = [list(r) for r in self.coframe_text]
        if self.metric_text is not None:
            d["metric"] = [list(r) for r in self.metric_text]
        if isinstance(self.source_text, str):
            d["source"] = self.source_text
        elif self.source_text is not None:
            d["source"] = [list(r) for r in self.source_text]
        if self.background_text is not None:
            d["background_metric"] = [list(r) for r in self.background_text]
        if self.expectations_text is not None:
            d["expectations"] = {k: dict(v) for k, v in self.expectations_text.items()}
        if self.extent_text is not None:
            d["extent"] = {k: list(v) for k, v in self.extent_text.items()}
        if self.periods_text is not None:
            d["periods"] = dict(self.periods_text)
        return d

    def __eq__(self, other) -> bool:
        return isinstance(other, ModelDefinition) and self.to_dict() == other.to_dict()

    __hash__ = None

    def matter_source(self):
        """The declared source as a :class:`~cartanlab.dynamics.MatterSource` (vacuum if none)."""
        from .dynamics import MatterSource
        if self.source is None:
            return MatterSource.vacuum()
        if self.source == "einstein":
            return MatterSource.from_einstein(self.coframe)
        return MatterSource(self.source)

    def with_parameters(self, params: Mapping[str, float]) -> "ModelDefinition":
        unknown = set(params) - set(self.parameters)
        if unknown:
            raise ModelError(f"model {self.name} has no parameters {sorted(unknown)}")
        d = self.to_dict()
        d["parameters"].update({k: float(v) for k, v in params.items()})
        return parse_model(d)


def _parse_field(text: str, where: str) -> ex.Expr:
    if not isinstance(text, str):
        raise ModelError(f"{where}: expected an expression string, got {text!r}")
    try:
        return ex.parse(text)
    except ex.ExprSyntaxError as exc:
        raise ModelError(f"{where}: {exc} in {text!r}") from exc


def _matrix(rows, n: int, where: str) -> tuple:
    if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n
                                                           for r in rows):
        raise ModelError(f"{where} must be a {n}x{n} array of strings")
    return tuple(tuple(_parse_field(t, f"{where}[{i}][{j}]") for j, t in enumerate(r))
                 for i, r in enumerate(rows))


def _number(value, where: str) -> float:
    """A JSON number or a constant expression string such as ``"pi - 1/20"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    e = _parse_field(value, where)
    if e.free_symbols - {"pi"}:
        raise ModelError(f"{where}: expected a constant, got {value!r}")
    return ex.evaluate(e, {"pi": math.pi})


def factorize_metric(metric: tuple, policy: ex.SamplingPolicy) -> tuple:
    """Symbolic LDL^T factorization of a metric into an orthonormal coframe.

    Returns ``(theta, signature)`` with ``theta[a][mu] = sqrt(|D_a|) L[mu][a]``.
    The sign of each pivot is read off at sample points and must be constant.
    """
    n = len(metric)
    L = [[ex.ONE if i == j else ex.ZERO for j in range(n)] for i in range(n)]
    D = []
    for j in range(n):
        dj = ex.add(metric[j][j], *[ex.mul(-1, ex.power(L[j][k], 2), D[k]) for k in range(j)])
        if dj is ex.ZERO:
            raise ModelError("metric factorization hit a zero pivot")
        D.append(dj)
        inv = ex.power(dj, -1)
        for i in range(j + 1, n):
            num = ex.add(metric[i][j], *[ex.mul(-1, L[i][k], L[j][k], D[k]) for k in range(j)])
            L[i][j] = ex.mul(num, inv)
    binding, _ = ex.sample_points(policy, D)
    signs = []
    for j, dj in enumerate(D):
        vals = np.broadcast_to(np.asarray(ex.evaluate_many([dj], binding)[0], dtype=float),
                               (policy.sample_count,))
        if np.all(vals > 0):
            signs.append(1)
        elif np.all(vals < 0):
            signs.append(-1)
        else:
            raise ModelError(f"metric pivot {j} changes sign on the domain")
    theta = tuple(tuple(ex.mul(ex.sqrt(ex.mul(signs[a], D[a])), L[mu][a]) if mu >= a else ex.ZERO
                        for mu in range(n)) for a in range(n))
    return theta, tuple(signs)


def parse_model(doc: Mapping) -> ModelDefinition:
    """Validate a model document (already decoded from JSON)."""
    if not isinstance(doc, Mapping):
        raise ModelError("model document must be a JSON object")
    schema = doc.get("schema", MODEL_SCHEMA)
    if schema != MODEL_SCHEMA:
        raise ModelError(f"unsupported model schema {schema!r}")
    try:
        name = str(doc["name"])
        coords = tuple(doc["coordinates"])
        domain = {k: tuple(float(x) for x in v) for k, v in doc["domain"].items()}
        signature = tuple(int(s) for s in doc["signature"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed model document: {exc}") from exc
    params = {k: float(v) for k, v in doc.get("parameters", {}).items()}
    n = len(coords)
    if set(domain) != set(coords):
        raise ModelError("domain must give one interval per coordinate")
    if "coframe" not in doc and "metric" not in doc:
        raise ModelError("model needs a coframe or a metric")
    constraints_text = tuple((c["expr"], float(c["min"]), float(c["max"]))
                             for c in doc.get("constraints", []))
    extent_text = doc.get("extent")
    periods_text = doc.get("periods")
    inf = float("inf")
    extent = None
    if extent_text is not None:
        if set(extent_text) - set(coords):
            raise ModelError("extent names unknown coordinates")
        extent = tuple(tuple(_number(v, f"extent.{c}") for v in extent_text[c])
                       if c in extent_text else (-inf, inf) for c in coords)
    periods = None
    if periods_text is not None:
        if set(periods_text) - set(coords):
            raise ModelError("periods name unknown coordinates")
        periods = tuple(_number(periods_text[c], f"periods.{c}") if c in periods_text else 0.0
                        for c in coords)
    try:
        chart = Chart(name, coords, tuple(domain[c] for c in coords),
                      tuple((_parse_field(e, "constraint"), lo, hi) for e, lo, hi in constraints_text),
                      extent=extent, periods=periods)
    except ValueError as exc:
        raise ModelError(str(exc)) from exc
    for p in params:
        if p in coords:
            raise ModelError(f"parameter {p!r} clashes with a coordinate")
    allowed = set(coords) | set(params)
    policy = chart.policy(params, sample_count=_PROBES, seed=0)

    metric = None
    if "metric" in doc:
        metric = _matrix(doc["metric"], n, "metric")
        for i in range(n):
            for j in range(i + 1, n):
                if metric[i][j] is not metric[j][i]:
                    raise ModelError(f"metric is not symmetric at ({i}, {j})")
    if "coframe" in doc:
        theta = _matrix(doc["coframe"], n, "coframe")
        sig = signature
    else:
        theta, sig = factorize_metric(metric, policy)
        if sig != signature:
            raise ModelError(f"metric factorizes with signature {sig}, declared {signature}")
    for row in theta:
        for v in row:
            extra = v.free_symbols - allowed
            if extra:
                raise ModelError(f"undeclared symbols {sorted(extra)}")
    try:
        cf = Coframe(chart, theta, sig, params, name=name)
    except ValueError as exc:
        raise ModelError(str(exc)) from exc
    # invertibility probe
    try:
        binding, _ = ex.sample_points(policy, [cf.det])
    except ex.SamplingError as exc:
        raise ModelError(f"coframe or domain unusable: {exc}") from exc
    det = np.broadcast_to(np.asarray(ex.evaluate_many([cf.det], binding)[0], dtype=float),
                          (_PROBES,))
    if np.any(np.abs(det) < 1e-12):
        raise ModelError("coframe is not invertible at a probe point")
    if metric is not None and "coframe" in doc:
        diffs = [ex.add(cf.metric[i][j], ex.mul(-1, metric[i][j]))
                 for i in range(n) for j in range(n)]
        if not ex.is_zero_all(diffs, policy.replace(tolerance=1e-9)).is_zero:
            raise ModelError("coframe does not reproduce the declared metric")
    source = doc.get("source")
    if isinstance(source, str):
        if source != "einstein":
            raise ModelError("source must be a matrix of strings or the word 'einstein'")
    elif source is not None:
        source = _matrix(source, n, "source")
    if "background_metric" in doc:
        background = _matrix(doc["background_metric"], n, "background_metric")
    else:
        background = tuple(tuple(ex.const(signature[i]) if i == j else ex.ZERO for j in range(n))
                           for i in range(n))
    expectations = {}
    for check, table in doc.get("expectations", {}).items():
        if not isinstance(table, Mapping):
            raise ModelError(f"expectations.{check} must map quantity names to expressions")
        expectations[check] = {}
        for key, text in table.items():
            e = _parse_field(text, f"expectations.{check}.{key}")
            extra = e.free_symbols - allowed
            if extra:
                raise ModelError(f"expectations.{check}.{key}: undeclared symbols {sorted(extra)}")
            expectations[check][key] = e
    for row in (source if isinstance(source, tuple) else ()) + background:
        for v in row:
            extra = v.free_symbols - allowed
            if extra:
                raise ModelError(f"undeclared symbols {sorted(extra)}")
    return ModelDefinition(
        name=name, coordinates=coords, domain=domain, signature=signature, parameters=params,
        coframe_text=tuple(tuple(r) for r in doc["coframe"]) if "coframe" in doc else None,
        metric_text=tuple(tuple(r) for r in doc["metric"]) if "metric" in doc else None,
        constraints=constraints_text, description=str(doc.get("description", "")),
        source_text=(doc["source"] if isinstance(doc.get("source"), str)
                     else tuple(tuple(r) for r in doc["source"]) if "source" in doc else None),
        background_text=(tuple(tuple(r) for r in doc["background_metric"])
                         if "background_metric" in doc else None),
        expectations_text=({k: dict(v) for k, v in doc["expectations"].items()}
                           if doc.get("expectations") else None),
        background_metric=background, expectations=expectations,
        extent_text={k: tuple(v) for k, v in extent_text.items()} if extent_text else None,
        periods_text=dict(periods_text) if periods_text else None,
        chart=chart, coframe=cf, metric=metric if metric is not None else cf.metric, source=source,
    )


def registry_names() -> list:
    files = resources.files("cartanlab").joinpath("data")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


_CACHE: dict = {}


def load_model(ref: str | Path, params: Mapping[str, float] | None = None) -> ModelDefinition:
    """Load a registered model by name or a model file by path."""
    ref = str(ref)
    if ref in registry_names():
        text = resources.files("cartanlab").joinpath("data").joinpath(f"{ref}.json").read_text()
    else:
        path = Path(ref)
        if not path.is_file():
            raise ModelError(f"unknown model {ref!r} (not registered and no such file)")
        text = path.read_text()
    key = (text, tuple(sorted((params or {}).items())))
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON in {ref}: line {exc.lineno} column {exc.colno}") from exc
    model = parse_model(doc)
    if params:
        model = model.with_parameters(params)
    _CACHE[key] = model
    return model
