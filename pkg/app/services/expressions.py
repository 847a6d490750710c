"""
Field expressions for conformal factors and magnetic profiles.

Expressions are written in a small grammar: numbers, the constant ``pi``,
the chart coordinates ``u`` and ``v``, the operators ``+ - * /``, parentheses
and the functions ``sin``, ``cos`` and ``exp``. They are parsed with sympy,
differentiated exactly and compiled to numpy callables that broadcast over
arrays of chart points.
"""

import logging
import re
from typing import Optional

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from app.utils.geometry_exceptions import ExpressionError

logger = logging.getLogger(__name__)

U, V = sp.symbols('u v', real=True)

ALLOWED_NAMES = {
    'u': U,
    'v': V,
    'pi': sp.pi,
    'sin': sp.sin,
    'cos': sp.cos,
    'exp': sp.exp,
}

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/()])"
    r")"
)


def _validate_tokens(text: str) -> None:
    """Reject anything outside the grammar before sympy sees it."""
    position = 0
    depth = 0
    stripped = text.rstrip()
    while position < len(stripped):
        match = _TOKEN.match(stripped, position)
        if not match or match.end() == position:
            raise ExpressionError(f"Unexpected character {stripped[position:].strip()[:1]!r} in {text!r}")
        name = match.group('name')
        op = match.group('op')
        if name is not None and name not in ALLOWED_NAMES:
            raise ExpressionError(f"Unknown name {name!r} in {text!r}")
        if op == '**':
            raise ExpressionError(f"Operator '**' is not part of the grammar in {text!r}")
        if op == '(':
            depth += 1
        elif op == ')':
            depth -= 1
            if depth < 0:
                raise ExpressionError(f"Unbalanced parentheses in {text!r}")
        position = match.end()
    if depth != 0:
        raise ExpressionError(f"Unbalanced parentheses in {text!r}")


def parse_expression(text: str) -> sp.Expr:
    """Parse a grammar expression into a sympy expression in ``u`` and ``v``."""
    if text is None or not str(text).strip():
        raise ExpressionError("Empty expression")
    text = str(text)
    _validate_tokens(text)
    try:
        expr = parse_expr(text, local_dict=dict(ALLOWED_NAMES),
                          transformations=standard_transformations, evaluate=True)
    except (SyntaxError, TypeError, ValueError, sp.SympifyError) as e:
        raise ExpressionError(f"Cannot parse {text!r}: {e}")
    expr = sp.sympify(expr)
    if not expr.free_symbols <= {U, V}:
        raise ExpressionError(f"Expression {text!r} uses symbols other than u, v")
    return expr


def _broadcasting(fn, expr: sp.Expr):
    """Wrap a lambdified scalar so constant expressions still return full arrays."""
    if expr.free_symbols:
        return lambda u, v: np.asarray(fn(u, v), dtype=float) + np.zeros(np.broadcast(u, v).shape)
    constant = float(expr)
    return lambda u, v: np.full(np.broadcast(u, v).shape, constant)


class ScalarField:
    """
    A smooth scalar function of the chart point with exact first and second derivatives.

    Attributes:
        source (str): The text the field was parsed from (or a description).
        expr (sympy.Expr): The symbolic expression in ``u`` and ``v``.
    """

    def __init__(self, expr: sp.Expr, source: Optional[str] = None):
        self.expr = sp.sympify(expr)
        self.source = source if source is not None else str(self.expr)
        grad = [sp.diff(self.expr, s) for s in (U, V)]
        hess = [[sp.diff(g, s) for s in (U, V)] for g in grad]
        self._value = _broadcasting(sp.lambdify((U, V), self.expr, 'numpy'), self.expr)
        self._grad = [_broadcasting(sp.lambdify((U, V), g, 'numpy'), g) for g in grad]
        self._hess = [[_broadcasting(sp.lambdify((U, V), h, 'numpy'), h) for h in row] for row in hess]

    @classmethod
    def parse(cls, text: str) -> 'ScalarField':
        return cls(parse_expression(text), source=str(text).strip())

    @classmethod
    def constant(cls, value: float) -> 'ScalarField':
        return cls(sp.Float(value) if value != int(value) else sp.Integer(int(value)), source=repr(float(value)))

    @property
    def is_constant(self) -> bool:
        return not self.expr.free_symbols

    def value(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self._value(points[..., 0], points[..., 1])

    def gradient(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        u, v = points[..., 0], points[..., 1]
        return np.stack([g(u, v) for g in self._grad], axis=-1)

    def hessian(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        u, v = points[..., 0], points[..., 1]
        rows = [np.stack([h(u, v) for h in row], axis=-1) for row in self._hess]
        return np.stack(rows, axis=-2)

    def __repr__(self) -> str:
        return f"ScalarField({self.source!r})"
