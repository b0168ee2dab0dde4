import math

import pytest
import sympy as sp

from cartanlab import expr as ex
from cartanlab.forms import Chart, Coframe
from cartanlab.models import load_model

SYMPY_FUNCS = {"sin": sp.sin, "cos": sp.cos, "cot": sp.cot, "sqrt": sp.sqrt}


def to_sympy(e: ex.Expr, names=()):
    """Independent re-reading of an expression by sympy, via its printed form."""
    local = dict(SYMPY_FUNCS)
    local.update({n: sp.Symbol(n, real=True) for n in names})
    return sp.sympify(ex.to_string(e).replace("^", "**"), locals=local)


def flat_coframe(n: int, signature) -> Coframe:
    coords = tuple(f"y{i}" for i in range(n))
    chart = Chart("flat", coords, tuple((-1.0, 1.0) for _ in coords))
    eye = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    return Coframe(chart, eye, signature)


@pytest.fixture(scope="session")
def model():
    cache = {}

    def get(name, **params):
        key = (name, tuple(sorted(params.items())))
        if key not in cache:
            cache[key] = load_model(name, params or None)
        return cache[key]

    return get


def sample(model_def, count=6, seed=3):
    policy = model_def.coframe.policy(sample_count=count, seed=seed)
    binding, pts = ex.sample_points(policy, [])
    return binding, pts


PI = math.pi
