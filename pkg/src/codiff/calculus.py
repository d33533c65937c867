"""Evaluation of an expression together with a normalized codifferential.

``evaluate`` propagates (value, codifferential) through the DAG; the
returned pair of generator sets induces the exact first-order d.c. model

    f(x + y) ~ f(x) + max_(a,v) (a + <v, y>) + min_(b,w) (b + <w, y>).

``evaluate_value`` is the value-only fast path used inside line searches.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .core import (
    Codifferential,
    GeneratorSet,
    OffsetPair,
    extract_quasidifferential,
    minkowski_sum,
    normalize,
    scale,
)
from .expressions import (
    Affine,
    AffineNorm,
    Constant,
    DomainError,
    Expression,
    Max,
    Min,
    Product,
    Reciprocal,
    SmoothMulti,
    SmoothScalar,
    Sum,
    Variable,
)


@dataclass(frozen=True)
class EvalOutput:
    value: float
    cd: Codifferential


@dataclass(frozen=True)
class ApproximationProbe:
    """Arguments of the model-residual measure: base point, step, radius."""

    alpha: float
    delta_x: np.ndarray
    x: np.ndarray
    radius: float = np.inf

    def __post_init__(self):
        dx = np.atleast_1d(np.asarray(self.delta_x, dtype=float))
        xx = np.atleast_1d(np.asarray(self.x, dtype=float))
        dx.setflags(write=False)
        xx.setflags(write=False)
        object.__setattr__(self, "delta_x", dx)
        object.__setattr__(self, "x", xx)
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if np.linalg.norm(dx) > self.radius * (1 + 1e-12):
            raise ValueError("||delta_x|| must not exceed the probe radius")


def _zero_cd(d: int) -> Codifferential:
    z = GeneratorSet(np.zeros((1, d + 1)), dedup_tol=None)
    return Codifferential(z, z)


def _smooth_cd(grad: np.ndarray) -> Codifferential:
    d = grad.shape[0]
    hypo = GeneratorSet(np.concatenate(([0.0], grad))[None, :], dedup_tol=None)
    hyper = GeneratorSet(np.zeros((1, d + 1)), dedup_tol=None)
    return Codifferential(hypo, hyper)


def _is_zero_singleton(g: GeneratorSet) -> bool:
    return len(g) == 1 and float(np.abs(g.rows).max()) == 0.0


def _combine(cds, coeffs, d):
    """Sum of coeff_i * cd_i, skipping exact zeros."""
    parts = [scale(c, cd) for c, cd in zip(coeffs, cds) if c != 0.0]
    if not parts:
        return _zero_cd(d)
    hypo = reduce(minkowski_sum, (p.hypo for p in parts))
    hyper = reduce(minkowski_sum, (p.hyper for p in parts))
    return normalize(Codifferential(hypo, hyper))


def _rebalance_for_max(cd: Codifferential) -> Codifferential:
    """Move a singleton hyperdifferential into the hypodifferential.

    [A, {(0, w)}] and [A + {(0, w)}, {0}] describe the same d.c. model; the
    second form keeps the max rule free of cross terms, which is what makes a
    max of smooth pieces come out as one generator per piece.
    """
    if len(cd.hyper) == 1 and not _is_zero_singleton(cd.hyper):
        w = cd.hyper[0]
        return Codifferential(cd.hypo.shift(w), _zero_cd(cd.dim).hyper)
    return cd


def _rebalance_for_min(cd: Codifferential) -> Codifferential:
    if len(cd.hypo) == 1 and not _is_zero_singleton(cd.hypo):
        v = cd.hypo[0]
        return Codifferential(_zero_cd(cd.dim).hypo, cd.hyper.shift(v))
    return cd


def _max_rule(values, cds, d):
    f = max(values)
    balanced = [_rebalance_for_max(cd) for cd in cds]
    hyper = reduce(minkowski_sum, (b.hyper for b in balanced))
    blocks = []
    for i, b in enumerate(balanced):
        block = b.hypo.shift_offset(values[i] - f)
        for j, other in enumerate(balanced):
            if j != i and not _is_zero_singleton(other.hyper):
                block = minkowski_sum(block, other.hyper.negate())
        blocks.append(block.rows)
    hypo = GeneratorSet(np.vstack(blocks))
    return f, normalize(Codifferential(hypo, hyper))


def _min_rule(values, cds, d):
    f = min(values)
    balanced = [_rebalance_for_min(cd) for cd in cds]
    hypo = reduce(minkowski_sum, (b.hypo for b in balanced))
    blocks = []
    for i, b in enumerate(balanced):
        block = b.hyper.shift_offset(values[i] - f)
        for j, other in enumerate(balanced):
            if j != i and not _is_zero_singleton(other.hypo):
                block = minkowski_sum(block, other.hypo.negate())
        blocks.append(block.rows)
    hyper = GeneratorSet(np.vstack(blocks))
    return f, normalize(Codifferential(hypo, hyper))


def _affine_norm_cd(node: AffineNorm, x: np.ndarray):
    """Finite generator hypodifferential for ||Ax + b||.

    The exact hypodifferential is the continuum {(<v, r> - ||r||, A^T v)} over
    the unit ball; we keep the two antipodal supports of the residual
    direction plus the +-e_i image axes, and at r = 0 just the axes.
    """
    r = node.matrix @ x + node.offset
    k = r.shape[0]
    nrm = float(np.linalg.norm(r))
    eye = np.eye(k)
    if nrm > 0.0:
        dirs = np.vstack([r / nrm, -r / nrm, eye, -eye])
    else:
        dirs = np.vstack([eye, -eye])
    offsets = dirs @ r - nrm
    vectors = dirs @ node.matrix
    hypo = GeneratorSet(np.column_stack([offsets, vectors]))
    d = node.matrix.shape[1]
    cd = normalize(Codifferential(hypo, _zero_cd(d).hyper))
    return nrm, cd


def _eval(node: Expression, x: np.ndarray, memo: dict):
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    d = x.shape[0]

    if isinstance(node, Variable):
        if node.index >= d:
            raise DomainError(f"variable index {node.index} out of range", node)
        g = np.zeros(d)
        g[node.index] = 1.0
        out = (float(x[node.index]), _smooth_cd(g))
    elif isinstance(node, Constant):
        out = (float(node.value), _zero_cd(d))
    elif isinstance(node, Affine):
        out = (node.constant + float(node.gradient @ x), _smooth_cd(node.gradient))
    elif isinstance(node, SmoothScalar):
        val, cd = _eval(node.child, x, memo)
        out = (node.fun(val), scale(node.deriv(val), cd))
    elif isinstance(node, SmoothMulti):
        pairs = [_eval(c, x, memo) for c in node.children]
        y = np.array([p[0] for p in pairs])
        coeffs = node.form.gradient(y)
        out = (node.form.value(y), _combine([p[1] for p in pairs], coeffs, d))
    elif isinstance(node, Sum):
        pairs = [_eval(c, x, memo) for c in node.children]
        value = float(sum(w * p[0] for w, p in zip(node.weights, pairs)))
        out = (value, _combine([p[1] for p in pairs], node.weights, d))
    elif isinstance(node, Max):
        pairs = [_eval(c, x, memo) for c in node.children]
        out = _max_rule([p[0] for p in pairs], [p[1] for p in pairs], d)
    elif isinstance(node, Min):
        pairs = [_eval(c, x, memo) for c in node.children]
        out = _min_rule([p[0] for p in pairs], [p[1] for p in pairs], d)
    elif isinstance(node, Product):
        v1, cd1 = _eval(node.left, x, memo)
        v2, cd2 = _eval(node.right, x, memo)
        out = (v1 * v2, _combine([cd1, cd2], [v2, v1], d))
    elif isinstance(node, Reciprocal):
        val, cd = _eval(node.child, x, memo)
        if val == 0.0:
            raise DomainError("reciprocal of zero", node)
        out = (1.0 / val, scale(-1.0 / (val * val), cd))
    elif isinstance(node, AffineNorm):
        out = _affine_norm_cd(node, x)
    else:
        raise TypeError(f"unknown expression node {type(node).__name__}")

    memo[key] = out
    return out


def evaluate(expr: Expression, x) -> EvalOutput:
    """Value and normalized codifferential of ``expr`` at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation point must be finite")
    value, cd = _eval(expr, x, {})
    return EvalOutput(value, cd)


def _value(node: Expression, x: np.ndarray, memo: dict) -> float:
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit

    if isinstance(node, Variable):
        out = float(x[node.index])
    elif isinstance(node, Constant):
        out = float(node.value)
    elif isinstance(node, Affine):
        out = node.constant + float(node.gradient @ x)
    elif isinstance(node, SmoothScalar):
        out = node.fun(_value(node.child, x, memo))
    elif isinstance(node, SmoothMulti):
        y = np.array([_value(c, x, memo) for c in node.children])
        out = node.form.value(y)
    elif isinstance(node, Sum):
        out = float(sum(w * _value(c, x, memo) for w, c in zip(node.weights, node.children)))
    elif isinstance(node, Max):
        out = max(_value(c, x, memo) for c in node.children)
    elif isinstance(node, Min):
        out = min(_value(c, x, memo) for c in node.children)
    elif isinstance(node, Product):
        out = _value(node.left, x, memo) * _value(node.right, x, memo)
    elif isinstance(node, Reciprocal):
        val = _value(node.child, x, memo)
        if val == 0.0:
            raise DomainError("reciprocal of zero", node)
        out = 1.0 / val
    elif isinstance(node, AffineNorm):
        out = float(np.linalg.norm(node.matrix @ x + node.offset))
    else:
        raise TypeError(f"unknown expression node {type(node).__name__}")

    memo[key] = out
    return out


def evaluate_value(expr: Expression, x) -> float:
    """f(x) without codifferential propagation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _value(expr, x, {})


def model_parts(cd: Codifferential, y) -> tuple[float, float]:
    """(max part, min part) of the d.c. model at displacement y."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    phi = float(np.max(cd.hypo.offsets + cd.hypo.vectors @ y))
    psi = float(np.min(cd.hyper.offsets + cd.hyper.vectors @ y))
    return phi, psi


def approximation_error(expr: Expression, probe: ApproximationProbe) -> float:
    """Signed residual of the codifferential model, scaled by 1/alpha."""
    base = evaluate(expr, probe.x)
    step = probe.alpha * probe.delta_x
    ahead = evaluate_value(expr, probe.x + step)
    phi, psi = model_parts(base.cd, step)
    return (ahead - base.value - phi - psi) / probe.alpha


def directional_derivative(cd: Codifferential, h) -> float:
    """f'(x, h) from the quasidifferential slice of a normalized cd."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    lower, upper = extract_quasidifferential(cd)
    return float(np.max(lower @ h) + np.min(upper @ h))
