"""Expression DAG nodes over R^d.

Nodes mirror the calculus rules implemented in :mod:`codiff.calculus`:
smooth leaves and smooth outer functions, weighted sums, pointwise max/min,
products, reciprocals, and affine norms ||Ax + b||.  Expressions are
immutable and serialize to a JSON tree keyed by node kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np


class DomainError(ValueError):
    """Evaluation left a node's domain (e.g. reciprocal of zero)."""

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


# ---------------------------------------------------------------------------
# smooth scalar library: name -> (value, derivative), exact derivatives only
# ---------------------------------------------------------------------------

SMOOTH_SCALAR_LIBRARY: dict[str, Tuple[Callable[[float], float], Callable[[float], float]]] = {
    "sin": (math.sin, math.cos),
    "cos": (math.cos, lambda y: -math.sin(y)),
    "exp": (math.exp, math.exp),
    "sinh": (math.sinh, math.cosh),
    "cosh": (math.cosh, math.sinh),
    "tanh": (math.tanh, lambda y: 1.0 / math.cosh(y) ** 2),
    "square": (lambda y: y * y, lambda y: 2.0 * y),
    "cube": (lambda y: y * y * y, lambda y: 3.0 * y * y),
}


@dataclass(frozen=True)
class QuadraticForm:
    """G(y) = constant + <linear, y> + 0.5 y^T quad y with exact gradient."""

    constant: float
    linear: np.ndarray
    quad: np.ndarray

    def __post_init__(self):
        lin = np.atleast_1d(np.asarray(self.linear, dtype=float))
        q = np.atleast_2d(np.asarray(self.quad, dtype=float))
        lin.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "quad", q)
        if q.shape != (lin.shape[0], lin.shape[0]):
            raise ValueError("quadratic form shape mismatch")

    @property
    def arity(self) -> int:
        return self.linear.shape[0]

    def value(self, y: np.ndarray) -> float:
        return self.constant + float(self.linear @ y) + 0.5 * float(y @ self.quad @ y)

    def gradient(self, y: np.ndarray) -> np.ndarray:
        return self.linear + self.quad @ y


# ---------------------------------------------------------------------------
# node types
# ---------------------------------------------------------------------------


class Expression:
    """Base class; concrete nodes are frozen dataclasses below."""

    __slots__ = ()


@dataclass(frozen=True)
class Variable(Expression):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("variable index must be >= 0")


@dataclass(frozen=True)
class Constant(Expression):
    value: float


@dataclass(frozen=True)
class Affine(Expression):
    """constant + <gradient, x>."""

    constant: float
    gradient: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gradient, dtype=float))
        g.setflags(write=False)
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "constant", float(self.constant))


@dataclass(frozen=True)
class SmoothScalar(Expression):
    """A named smooth function of one child, from SMOOTH_SCALAR_LIBRARY."""

    name: str
    child: Expression

    def __post_init__(self):
        if self.name not in SMOOTH_SCALAR_LIBRARY:
            raise ValueError(f"unknown smooth scalar '{self.name}'")

    def fun(self, y: float) -> float:
        return SMOOTH_SCALAR_LIBRARY[self.name][0](y)

    def deriv(self, y: float) -> float:
        return SMOOTH_SCALAR_LIBRARY[self.name][1](y)


@dataclass(frozen=True)
class SmoothMulti(Expression):
    """A smooth outer function G applied to several children.

    Only quadratic forms are shipped; that is what the benchmark problems
    need, and it keeps serialization total.
    """

    form: QuadraticForm
    children: Tuple[Expression, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) != self.form.arity:
            raise ValueError("SmoothMulti arity mismatch")


@dataclass(frozen=True)
class Sum(Expression):
    weights: Tuple[float, ...]
    children: Tuple[Expression, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.weights) != len(self.children) or not self.children:
            raise ValueError("Sum needs matching nonempty weights and children")


@dataclass(frozen=True)
class Max(Expression):
    children: Tuple[Expression, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError("Max needs at least one child")


@dataclass(frozen=True)
class Min(Expression):
    children: Tuple[Expression, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError("Min needs at least one child")


@dataclass(frozen=True)
class Product(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Reciprocal(Expression):
    """1/child; the child must not vanish on the evaluation domain."""

    child: Expression


@dataclass(frozen=True)
class AffineNorm(Expression):
    """||matrix @ x + offset||_2 as a leaf over the ambient variables."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        b = np.atleast_1d(np.asarray(self.offset, dtype=float))
        m.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)
        if m.shape[0] != b.shape[0]:
            raise ValueError("AffineNorm matrix/offset shape mismatch")


def infer_dimension(expr: Expression) -> int:
    """Smallest ambient dimension consistent with the expression's leaves."""
    d = 0
    stack = [expr]
    seen = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Variable):
            d = max(d, node.index + 1)
        elif isinstance(node, Affine):
            d = max(d, node.gradient.shape[0])
        elif isinstance(node, AffineNorm):
            d = max(d, node.matrix.shape[1])
        elif isinstance(node, (SmoothScalar, Reciprocal)):
            stack.append(node.child)
        elif isinstance(node, (SmoothMulti, Sum, Max, Min)):
            stack.extend(node.children)
        elif isinstance(node, Product):
            stack.extend((node.left, node.right))
    return d


# ---------------------------------------------------------------------------
# JSON serialization (round-trip)
# ---------------------------------------------------------------------------


def to_json_obj(expr: Expression) -> dict:
    if isinstance(expr, Variable):
        return {"kind": "variable", "index": expr.index}
    if isinstance(expr, Constant):
        return {"kind": "constant", "value": expr.value}
    if isinstance(expr, Affine):
        return {"kind": "affine", "constant": expr.constant, "gradient": expr.gradient.tolist()}
    if isinstance(expr, SmoothScalar):
        return {"kind": "smooth_scalar", "name": expr.name, "child": to_json_obj(expr.child)}
    if isinstance(expr, SmoothMulti):
        return {
            "kind": "smooth_multi",
            "form": {
                "constant": expr.form.constant,
                "linear": expr.form.linear.tolist(),
                "quad": expr.form.quad.tolist(),
            },
            "children": [to_json_obj(c) for c in expr.children],
        }
    if isinstance(expr, Sum):
        return {
            "kind": "sum",
            "weights": list(expr.weights),
            "children": [to_json_obj(c) for c in expr.children],
        }
    if isinstance(expr, Max):
        return {"kind": "max", "children": [to_json_obj(c) for c in expr.children]}
    if isinstance(expr, Min):
        return {"kind": "min", "children": [to_json_obj(c) for c in expr.children]}
    if isinstance(expr, Product):
        return {"kind": "product", "left": to_json_obj(expr.left), "right": to_json_obj(expr.right)}
    if isinstance(expr, Reciprocal):
        return {"kind": "reciprocal", "child": to_json_obj(expr.child)}
    if isinstance(expr, AffineNorm):
        return {"kind": "affine_norm", "matrix": expr.matrix.tolist(), "offset": expr.offset.tolist()}
    raise TypeError(f"cannot serialize expression node {type(expr).__name__}")


def from_json_obj(obj: dict) -> Expression:
    kind = obj["kind"]
    if kind == "variable":
        return Variable(obj["index"])
    if kind == "constant":
        return Constant(obj["value"])
    if kind == "affine":
        return Affine(obj["constant"], np.asarray(obj["gradient"]))
    if kind == "smooth_scalar":
        return SmoothScalar(obj["name"], from_json_obj(obj["child"]))
    if kind == "smooth_multi":
        form = QuadraticForm(
            obj["form"]["constant"], np.asarray(obj["form"]["linear"]), np.asarray(obj["form"]["quad"])
        )
        return SmoothMulti(form, tuple(from_json_obj(c) for c in obj["children"]))
    if kind == "sum":
        return Sum(tuple(obj["weights"]), tuple(from_json_obj(c) for c in obj["children"]))
    if kind == "max":
        return Max(tuple(from_json_obj(c) for c in obj["children"]))
    if kind == "min":
        return Min(tuple(from_json_obj(c) for c in obj["children"]))
    if kind == "product":
        return Product(from_json_obj(obj["left"]), from_json_obj(obj["right"]))
    if kind == "reciprocal":
        return Reciprocal(from_json_obj(obj["child"]))
    if kind == "affine_norm":
        return AffineNorm(np.asarray(obj["matrix"]), np.asarray(obj["offset"]))
    raise ValueError(f"unknown expression kind '{kind}'")
