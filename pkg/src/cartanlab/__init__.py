"""Coframe exterior calculus, teleparallel field equations and their verification."""

from .expr import (DomainError, Expr, ExprSyntaxError, SamplingPolicy, Verdict, diff, evaluate,
                   is_zero, is_zero_all, parse, simplify)
from .forms import Chart, Coframe, MultiForm

__version__ = "0.1.0"

__all__ = [
    "Expr", "parse", "diff", "simplify", "evaluate", "is_zero", "is_zero_all", "Verdict",
    "SamplingPolicy", "ExprSyntaxError", "DomainError", "Chart", "Coframe", "MultiForm",
    "__version__",
]
