"""Command line entry point: ``cartanlab <check> --model ...``, ``models`` and ``transport``."""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import expr as ex
from .checks import CHECKS, CheckError, CheckOptions, canonical_json, emit_report, run_check
from .frames import DimensionError, levi_civita_connection, teleparallel_connection
from .models import ModelError, load_model, registry_names
from .transport import (Curve, DomainExitError, LoopNotClosedError, geodesic_transport,
                        parallel_transport)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


def _float(text: str) -> float:
    """A number given either as a float literal or as a constant expression such as ``pi/3``."""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        e = ex.parse(text)
        return float(ex.evaluate(e, {"pi": math.pi}))
    except Exception as exc:
        raise UsageError(f"not a number: {text!r} ({exc})") from None


def _params(pairs) -> dict:
    out = {}
    for p in pairs or ():
        name, eq, value = p.partition("=")
        if not eq or not name.strip():
            raise UsageError(f"--param expects name=value, got {p!r}")
        out[name.strip()] = _float(value.strip())
    return out


def _default_seed() -> int:
    env = os.environ.get("CARTANLAB_SEED")
    if env is None:
        return 42
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"CARTANLAB_SEED must be an integer, got {env!r}") from None


def _vector(text: str) -> list:
    return [_float(t) for t in text.split(",")]


def parse_path(text: str, model) -> tuple:
    """Turn a path string into ``(kind, curve or geodesic arguments)``.

    ``latitude:<polar>[:turns]``, ``polyline:x,y;x,y;...``,
    ``curve:<expr>,<expr>@<s0>:<s1>`` and ``geodesic:<x>:<v>:<length>``.
    """
    kind, _, rest = text.partition(":")
    chart, params = model.chart, model.coframe.params
    if kind == "latitude":
        bits = rest.split(":")
        polar = _float(bits[0])
        turns = _float(bits[1]) if len(bits) > 1 else 1.0
        return "curve", Curve.latitude(chart, polar, turns=turns)
    if kind == "polyline":
        pts = [_vector(p) for p in rest.split(";") if p.strip()]
        if len(pts) < 2:
            raise UsageError("a polyline needs at least two points")
        return "curve", Curve.polyline(chart, pts, params)
    if kind == "curve":
        body, at, span = rest.partition("@")
        s0, s1 = (_float(t) for t in span.split(":")) if at else (0.0, 1.0)
        return "curve", Curve.from_exprs(chart, body.split(","), (s0, s1), params=params)
    if kind == "geodesic":
        bits = rest.split(":")
        if len(bits) != 3:
            raise UsageError("geodesic path is geodesic:<x>:<v>:<length>")
        return "geodesic", (_vector(bits[0]), _vector(bits[1]), _float(bits[2]))
    raise UsageError(f"unknown path kind {kind!r}; use latitude, polyline, curve or geodesic")


def _write(data: bytes, out: str | None) -> None:
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _transport(args, seed: int) -> int:
    model = load_model(args.model, _params(args.param))
    if args.path is None:
        opts = CheckOptions(seed=seed, samples=args.samples, tol=args.tol, steps=args.steps)
        report = run_check(model, "transport", opts)
        _write(emit_report(report, args.format), args.out)
        return EXIT_OK if report.passed else EXIT_FAILED
    conn = (levi_civita_connection if args.connection == "lc" else teleparallel_connection)(model.coframe)
    kind, obj = parse_path(args.path, model)
    v0 = _vector(args.v0) if args.v0 else [1.0] + [0.0] * (model.dim - 1)
    if len(v0) != model.dim:
        raise UsageError(f"--v0 needs {model.dim} components")
    if kind == "curve":
        result = parallel_transport(conn, obj, v0, args.steps)
    else:
        x, v, length = obj
        result = geodesic_transport(conn, x, v, v0, (0.0, length), args.steps)
    if args.trace:
        result.write_csv(args.trace)
    summary = {
        "schema": "cartanlab-transport/1",
        "model": model.name,
        "connection": args.connection,
        "path": args.path,
        "v0": v0,
        "final": [float(c) for c in result.final],
        "norm_drift": result.norm_drift,
        "tangent_product_drift": result.tangent_product_drift,
        "metadata": result.metadata,
    }
    _write((canonical_json(summary) + "\n").encode(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cartanlab",
                                description="Coframe geometry checks for registered spacetime models.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("models", help="list the registered models")

    def common(sp):
        sp.add_argument("--model", required=True, help="registry name or path to a model JSON file")
        sp.add_argument("--param", action="append", metavar="NAME=VALUE", help="override a parameter")
        sp.add_argument("--samples", type=int, default=20)
        sp.add_argument("--seed", type=int, default=None, help="sampling seed (default 42 or CARTANLAB_SEED)")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--format", choices=("json", "csv-summary"), default="json")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--steps", type=int, default=None, help="integration steps")

    for name in CHECKS:
        sp = sub.add_parser(name, help=f"run the {name} check")
        common(sp)
        if name == "transport":
            sp.add_argument("--connection", choices=("lc", "nunes"), default="lc")
            sp.add_argument("--path", help="latitude:, polyline:, curve: or geodesic: path")
            sp.add_argument("--trace", help="CSV file for the per-step trace")
            sp.add_argument("--v0", help="initial frame components, comma separated")
        if name == "conservation":
            sp.add_argument("--random-forms", type=int, default=100)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "models":
            for name in registry_names():
                m = load_model(name)
                print(f"{name}\tn={m.dim}\t{','.join(m.coordinates)}")
            return EXIT_OK
        seed = args.seed if args.seed is not None else _default_seed()
        if args.samples < 1:
            raise UsageError("--samples must be positive")
        if args.command == "transport":
            return _transport(args, seed)
        opts = CheckOptions(seed=seed, samples=args.samples, tol=args.tol,
                            random_forms=getattr(args, "random_forms", 100), steps=args.steps)
        report = run_check(load_model(args.model, _params(args.param)), args.command, opts)
        _write(emit_report(report, args.format), args.out)
        return EXIT_OK if report.passed else EXIT_FAILED
    except (UsageError, ModelError, CheckError, DimensionError, DomainExitError,
            LoopNotClosedError, OSError) as exc:
        print(f"cartanlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
