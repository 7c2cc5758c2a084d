"""Real-valued function descriptors on R^{2n} = C^n.

A descriptor is evaluated on an array of points with shape ``(..., 2n)``,
coordinates ordered (x_1, y_1, ..., x_n, y_n). Catalog functions and the
inline targets of the CLI are ``Expression`` descriptors written in a small
arithmetic language::

    variables   x1, y1, ..., xn, yn, r2 (= ‖z‖²), pi, e
    operators   + - * / ** and unary minus
    calls       abs sqrt exp log sin cos min max

Expressions are parsed with :mod:`ast` against a whitelist and compiled to
numpy closures; nothing is ever passed to ``eval``.
"""

from __future__ import annotations

import ast
import logging
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from psh_extension_lab.errors import LabError

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

_VARIABLE = re.compile(r"^([xy])([1-9][0-9]*)$")

_UNARY_CALLS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}


class ExpressionError(LabError, ValueError):
    """Raised when an expression uses syntax or names outside the language."""

    def __init__(self, expression: str, detail: str):
        self.expression = expression
        self.detail = detail
        super().__init__(f"Invalid expression {expression!r}: {detail}")


class FunctionDescriptor(ABC):
    """A real function of the 2n real coordinates."""

    @abstractmethod
    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at ``points`` of shape (..., 2n); returns shape (...)."""

    @property
    @abstractmethod
    def min_n(self) -> int:
        """Smallest complex dimension the descriptor can be evaluated in."""

    @abstractmethod
    def describe(self) -> str:
        """Human-readable form, echoed into reports."""

    def translate(self, shift) -> "FunctionDescriptor":
        """Return x ↦ self(x − shift)."""
        return Translated(self, tuple(float(s) for s in np.asarray(shift, dtype=float)))

    def __add__(self, other: "FunctionDescriptor | float") -> "FunctionDescriptor":
        return LinearCombination.of(self, 1.0, other, 1.0)

    def __radd__(self, other: float) -> "FunctionDescriptor":
        return LinearCombination.of(self, 1.0, other, 1.0)

    def __sub__(self, other: "FunctionDescriptor | float") -> "FunctionDescriptor":
        return LinearCombination.of(self, 1.0, other, -1.0)

    def __rsub__(self, other: float) -> "FunctionDescriptor":
        return LinearCombination.of(self, -1.0, other, 1.0)

    def __mul__(self, scale: float) -> "FunctionDescriptor":
        return LinearCombination(terms=((float(scale), self),), constant=0.0)

    __rmul__ = __mul__

    def __neg__(self) -> "FunctionDescriptor":
        return self * -1.0


@dataclass(frozen=True, eq=False)
class Expression(FunctionDescriptor):
    """Descriptor parsed from the expression language."""

    text: str

    def __post_init__(self):
        # Compile eagerly so bad input fails at construction time.
        _ = self._compiled

    @cached_property
    def _parsed(self) -> tuple[Evaluator, int]:
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as e:
            raise ExpressionError(self.text, f"syntax error: {e.msg}") from e
        compiler = _Compiler(self.text)
        evaluator = compiler.compile(tree.body)
        return evaluator, max(compiler.max_index, 1)

    @property
    def _compiled(self) -> Evaluator:
        return self._parsed[0]

    @property
    def min_n(self) -> int:
        return self._parsed[1]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.shape[-1] < 2 * self.min_n:
            raise ExpressionError(
                self.text,
                f"needs n >= {self.min_n} but points have {points.shape[-1]} coordinates",
            )
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self._compiled(points)
        return np.broadcast_to(np.asarray(out, dtype=float), points.shape[:-1]).copy()

    def describe(self) -> str:
        return self.text


@dataclass(frozen=True, eq=False)
class Constant(FunctionDescriptor):
    value: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.full(points.shape[:-1], float(self.value))

    @property
    def min_n(self) -> int:
        return 1

    def describe(self) -> str:
        return repr(float(self.value))


@dataclass(frozen=True, eq=False)
class LinearCombination(FunctionDescriptor):
    """Σ coefficient·descriptor + constant."""

    terms: tuple[tuple[float, FunctionDescriptor], ...]
    constant: float = 0.0

    @classmethod
    def of(
        cls,
        left: FunctionDescriptor | float,
        a: float,
        right: FunctionDescriptor | float,
        b: float,
    ) -> "LinearCombination":
        terms: list[tuple[float, FunctionDescriptor]] = []
        constant = 0.0
        for part, coefficient in ((left, a), (right, b)):
            if isinstance(part, FunctionDescriptor):
                terms.append((float(coefficient), part))
            else:
                constant += float(coefficient) * float(part)
        return cls(terms=tuple(terms), constant=constant)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        total = np.full(points.shape[:-1], self.constant)
        for coefficient, descriptor in self.terms:
            total = total + coefficient * descriptor(points)
        return total

    @property
    def min_n(self) -> int:
        return max((d.min_n for _, d in self.terms), default=1)

    def describe(self) -> str:
        parts = [f"{c!r}*({d.describe()})" for c, d in self.terms]
        if self.constant or not parts:
            parts.append(repr(self.constant))
        return " + ".join(parts)


@dataclass(frozen=True, eq=False)
class Translated(FunctionDescriptor):
    inner: FunctionDescriptor
    shift: tuple[float, ...]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.inner(points - np.asarray(self.shift))

    @property
    def min_n(self) -> int:
        return max(self.inner.min_n, len(self.shift) // 2)

    def describe(self) -> str:
        return f"({self.inner.describe()}) at z - {list(self.shift)}"


def norm_squared_about(center) -> FunctionDescriptor:
    """‖z − center‖² as a descriptor."""
    center = np.asarray(center, dtype=float)
    base = Expression("r2")
    if not np.any(center):
        return base
    return base.translate(center)


class _Compiler:
    """Turns a whitelisted expression AST into a numpy closure."""

    def __init__(self, text: str):
        self.text = text
        self.max_index = 0

    def fail(self, detail: str) -> ExpressionError:
        return ExpressionError(self.text, detail)

    def compile(self, node: ast.AST) -> Evaluator:
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise self.fail(f"unsupported literal {node.value!r}")
            value = float(node.value)
            return lambda p: value

        if isinstance(node, ast.Name):
            return self._name(node.id)

        if isinstance(node, ast.UnaryOp):
            operand = self.compile(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda p: -operand(p)
            if isinstance(node.op, ast.UAdd):
                return operand
            raise self.fail("only unary + and - are allowed")

        if isinstance(node, ast.BinOp):
            left = self.compile(node.left)
            right = self.compile(node.right)
            op = node.op
            if isinstance(op, ast.Add):
                return lambda p: left(p) + right(p)
            if isinstance(op, ast.Sub):
                return lambda p: left(p) - right(p)
            if isinstance(op, ast.Mult):
                return lambda p: left(p) * right(p)
            if isinstance(op, ast.Div):
                return lambda p: left(p) / right(p)
            if isinstance(op, ast.Pow):
                return lambda p: np.power(left(p), right(p))
            raise self.fail(f"operator {type(op).__name__} is not allowed")

        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.keywords:
                raise self.fail("only plain calls of whitelisted functions are allowed")
            name = node.func.id
            if name not in _UNARY_CALLS and name not in ("min", "max"):
                raise self.fail(f"unknown function {name!r}")
            args = [self.compile(a) for a in node.args]
            if name in _UNARY_CALLS:
                if len(args) != 1:
                    raise self.fail(f"{name}() takes exactly one argument")
                fn, (arg,) = _UNARY_CALLS[name], args
                return lambda p: fn(arg(p))
            if len(args) < 2:
                raise self.fail(f"{name}() needs at least two arguments")
            reduce = np.minimum if name == "min" else np.maximum

            def reduced(p, args=args, reduce=reduce):
                out = args[0](p)
                for arg in args[1:]:
                    out = reduce(out, arg(p))
                return out

            return reduced

        raise self.fail(f"{type(node).__name__} is not part of the expression language")

    def _name(self, name: str) -> Evaluator:
        if name in _CONSTANTS:
            value = _CONSTANTS[name]
            return lambda p: value
        if name == "r2":
            return lambda p: np.sum(p * p, axis=-1)
        match = _VARIABLE.match(name)
        if not match:
            raise self.fail(f"unknown name {name!r}")
        axis, index = match.group(1), int(match.group(2))
        self.max_index = max(self.max_index, index)
        column = 2 * (index - 1) + (0 if axis == "x" else 1)
        return lambda p: p[..., column]
