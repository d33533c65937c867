"""Random expression generator for the calculus property suites.

Produces expressions of bounded depth over a small ambient dimension, with
coefficients kept modest so that values, derivatives, and curvatures stay
within comfortable floating-point range on the sampling box [-1, 1]^d.
"""

from __future__ import annotations

import numpy as np

from .expressions import (
    Affine,
    AffineNorm,
    Constant,
    Expression,
    Max,
    Min,
    Product,
    QuadraticForm,
    Reciprocal,
    SmoothMulti,
    SmoothScalar,
    Sum,
    Variable,
)

_SMOOTH_NAMES = ("sin", "cos", "exp", "sinh", "cosh", "tanh", "square", "cube")


def _leaf(rng: np.random.Generator, dim: int) -> Expression:
    kind = rng.integers(0, 3)
    if kind == 0:
        return Variable(int(rng.integers(0, dim)))
    if kind == 1:
        return Constant(float(rng.uniform(-1.5, 1.5)))
    return Affine(float(rng.uniform(-1.0, 1.0)), rng.uniform(-1.5, 1.5, size=dim))


def _quadratic(rng: np.random.Generator, dim: int, children) -> SmoothMulti:
    m = len(children)
    a = rng.uniform(-0.8, 0.8, size=(m, m))
    quad = 0.5 * (a + a.T)
    form = QuadraticForm(float(rng.uniform(-1.0, 1.0)), rng.uniform(-1.0, 1.0, size=m), quad)
    return SmoothMulti(form, tuple(children))


def _safe_reciprocal(rng: np.random.Generator, dim: int) -> Expression:
    # 1 / (c + 0.5 y^T I y) with c >= 1.5 never vanishes
    m = int(rng.integers(1, dim + 1))
    children = tuple(Variable(i) for i in range(m))
    form = QuadraticForm(float(rng.uniform(1.5, 3.0)), np.zeros(m), np.eye(m))
    return Reciprocal(SmoothMulti(form, children))


def random_expression(rng: np.random.Generator, dim: int, depth: int = 4) -> Expression:
    """One random expression of depth at most ``depth`` over R^dim.

    The top-level call draws a target depth up to the bound; max/min nodes
    branch pairwise so that the exact max/min calculus (whose generator
    counts multiply across children) stays within the evaluation budget.
    """
    depth = int(rng.integers(2, depth + 1)) if depth >= 2 else depth
    return _random_node(rng, dim, depth)


def _random_node(rng: np.random.Generator, dim: int, depth: int) -> Expression:
    if depth <= 0:
        return _leaf(rng, dim)
    kind = rng.choice(
        ["max", "min", "sum", "product", "smooth_scalar", "quadratic", "affine_norm", "reciprocal", "leaf"],
        p=[0.17, 0.17, 0.16, 0.06, 0.12, 0.09, 0.09, 0.05, 0.09],
    )
    if kind == "leaf":
        return _leaf(rng, dim)
    if kind in ("max", "min"):
        children = (_random_node(rng, dim, depth - 1), _random_node(rng, dim, depth - 1))
        return Max(children) if kind == "max" else Min(children)
    if kind == "sum":
        n = int(rng.integers(2, 4))
        weights = tuple(float(w) for w in rng.uniform(-1.5, 1.5, size=n))
        return Sum(weights, tuple(_random_node(rng, dim, depth - 1) for _ in range(n)))
    if kind == "product":
        # one factor kept shallow so hull sizes do not multiply unchecked
        return Product(
            _random_node(rng, dim, depth - 1), _random_node(rng, dim, min(depth - 1, 1))
        )
    if kind == "smooth_scalar":
        name = str(rng.choice(_SMOOTH_NAMES))
        child = _random_node(rng, dim, depth - 1)
        if name in ("exp", "sinh", "cosh"):
            child = Sum((0.5,), (child,))  # damp the argument
        return SmoothScalar(name, child)
    if kind == "quadratic":
        n = int(rng.integers(1, 3))
        children = tuple(_random_node(rng, dim, depth - 1) for _ in range(n))
        return _quadratic(rng, dim, children)
    if kind == "affine_norm":
        k = int(rng.integers(1, dim + 1))
        return AffineNorm(rng.uniform(-1.0, 1.0, size=(k, dim)), rng.uniform(-1.0, 1.0, size=k))
    return _safe_reciprocal(rng, dim)


def random_piecewise_affine(rng: np.random.Generator, dim: int, depth: int = 3) -> Expression:
    """Max/Min/Sum over affine leaves only; its d.c. model is exact."""
    if depth <= 0:
        return Affine(float(rng.uniform(-1.0, 1.0)), rng.uniform(-1.5, 1.5, size=dim))
    kind = rng.choice(["max", "min", "sum"])
    n = int(rng.integers(2, 4))
    children = tuple(random_piecewise_affine(rng, dim, depth - 1) for _ in range(n))
    if kind == "max":
        return Max(children)
    if kind == "min":
        return Min(children)
    weights = tuple(float(w) for w in rng.uniform(-1.0, 1.0, size=n))
    return Sum(weights, children)
