"""Benchmark problem constructors and the problem registry.

Includes the 2-D worked example with its known generator sets at the origin,
max-plus-min instances with curvature bounds, Haar-point instances for the
quadratic-rate experiment, a two-minima landscape for the jump-over
behavior, and clustering objectives (sum of min of squared distances).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .calculus import evaluate, evaluate_value
from .expressions import (
    Affine,
    Expression,
    Max,
    Min,
    QuadraticForm,
    SmoothMulti,
    SmoothScalar,
    Sum,
    Variable,
)
from .solvers import McdConfig, is_inf_stationary, qrmcd_solve
from .subsolvers import SimplexWeights, WholeSpace, min_norm_point
from .core import GeneratorSet


@dataclass(frozen=True)
class Problem:
    """An expression plus the metadata the harness and oracles need."""

    name: str
    expr: Expression
    dimension: int
    known_minimum: Optional[Tuple[np.ndarray, float]] = None
    default_box: Tuple[np.ndarray, np.ndarray] = None
    bounded_below: bool = True

    def __post_init__(self):
        if self.default_box is None:
            lo = -2.0 * np.ones(self.dimension)
            hi = 2.0 * np.ones(self.dimension)
            object.__setattr__(self, "default_box", (lo, hi))
        if self.known_minimum is not None:
            x, f = self.known_minimum
            x = np.atleast_1d(np.asarray(x, dtype=float))
            object.__setattr__(self, "known_minimum", (x, float(f)))

    def value(self, x) -> float:
        return evaluate_value(self.expr, x)


def _vars(d: int) -> Tuple[Variable, ...]:
    return tuple(Variable(i) for i in range(d))


def _quadratic_expr(constant, linear, quad) -> SmoothMulti:
    form = QuadraticForm(constant, linear, quad)
    return SmoothMulti(form, _vars(form.arity))


# ---------------------------------------------------------------------------
# named problems
# ---------------------------------------------------------------------------


def abs_x() -> Problem:
    expr = Max((Affine(0.0, [1.0]), Affine(0.0, [-1.0])))
    return Problem("abs_x", expr, 1, known_minimum=(np.zeros(1), 0.0))


def paper_example_2d() -> Problem:
    """max{x1+x2, x1^2+x2^2-1} + min{x1^3+x2^3, -2x1-x2+1, -x1-2x2+2}.

    Unbounded below (it decreases like -2t^3 along the negative diagonal),
    so it is excluded from unconstrained solver sweeps; over a box it is a
    legitimate constrained benchmark.
    """
    quad = _quadratic_expr(-1.0, [0.0, 0.0], 2.0 * np.eye(2))
    cubes = Sum((1.0, 1.0), (SmoothScalar("cube", Variable(0)), SmoothScalar("cube", Variable(1))))
    expr = Sum(
        (1.0, 1.0),
        (
            Max((Affine(0.0, [1.0, 1.0]), quad)),
            Min((cubes, Affine(1.0, [-2.0, -1.0]), Affine(2.0, [-1.0, -2.0]))),
        ),
    )
    return Problem("paper_example_2d", expr, 2, bounded_below=False)


def two_minima_1d() -> Problem:
    """min{0.5 + (x-1)^2, 2 (x-3)^2}: shallow local minimum at 1 (value 0.5),
    global minimum at 3 (value 0).  With a unit step cap, descent-only
    candidates settle in the shallow basin while the positive-offset
    candidate jumps across."""
    u1 = _quadratic_expr(1.5, [-2.0], [[2.0]])
    u2 = _quadratic_expr(18.0, [-12.0], [[4.0]])
    expr = Min((u1, u2))
    return Problem(
        "two_minima_1d",
        expr,
        1,
        known_minimum=(np.array([3.0]), 0.0),
        default_box=(np.array([0.0]), np.array([4.0])),
    )


# step cap under which the two-minima contrast is realized (the shallow
# basin's descent reach stays short of the crossing at x ~ 2.085)
TWO_MINIMA_ALPHA_STAR = 1.0


# ---------------------------------------------------------------------------
# Haar instances
# ---------------------------------------------------------------------------

# gradients of the active pieces at the Haar point 0
_HAAR_VECTORS = {
    1: [np.array([1.0]), np.array([-1.0])],
    2: [np.array([2.0, 0.0]), np.array([-1.0, 2.0]), np.array([-1.0, -2.0])],
    3: [
        np.array([1.0, 1.0, 1.0]),
        np.array([1.0, -1.0, -1.0]),
        np.array([-1.0, 1.0, -1.0]),
        np.array([-1.0, -1.0, 1.0]),
    ],
}

# distinct per-piece curvatures; identical curvatures would make the
# regularized step land on the minimizer in one iteration, leaving no
# asymptotics to measure
_HAAR_CURVATURES = {
    1: (1.0, 33.0),
    2: (1.0, 13.0, 25.0),
    3: (1.0, 9.0, 17.0, 25.0),
}


@dataclass(frozen=True)
class HaarCertificate:
    """Clause-by-clause verdicts of the Haar-point definition."""

    active_count: int
    gradients: np.ndarray
    multipliers: Optional[SimplexWeights]
    stationary: bool
    count_is_dim_plus_one: bool
    affinely_independent: bool
    multipliers_positive: bool

    @property
    def valid(self) -> bool:
        return (
            self.stationary
            and self.count_is_dim_plus_one
            and self.affinely_independent
            and self.multipliers_positive
        )


def haar_instance(d: int) -> Tuple[Problem, HaarCertificate]:
    """max_i(<c_i, x> + kappa_i ||x||^2) with d+1 active pieces at 0.

    The origin is interior to conv{c_i} with affinely independent c_i, so 0
    is a Haar point; the curvature spread across pieces gives the method a
    genuinely quadratic tail there.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if d in _HAAR_VECTORS:
        cs = _HAAR_VECTORS[d]
        kappas = _HAAR_CURVATURES[d]
    else:
        cs = [np.eye(d)[i] for i in range(d)] + [-np.ones(d)]
        kappas = tuple(1.0 + 4.0 * i for i in range(d + 1))
    pieces = tuple(
        _quadratic_expr(0.0, c, 2.0 * k * np.eye(d)) for c, k in zip(cs, kappas)
    )
    expr = Max(pieces)
    problem = Problem(
        f"haar_d{d}",
        expr,
        d,
        known_minimum=(np.zeros(d), 0.0),
        default_box=(-np.ones(d), np.ones(d)),
    )
    return problem, check_haar(problem, np.zeros(d))


def check_haar(problem: Problem, x_star, tol: float = 1e-8) -> HaarCertificate:
    """Verify the four Haar-point clauses for a pure max-of-smooth problem."""
    if not isinstance(problem.expr, Max):
        raise ValueError("check_haar expects a pure max-of-smooth problem")
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    d = problem.dimension
    values = []
    grads = []
    for piece in problem.expr.children:
        out = evaluate(piece, x_star)
        if len(out.cd.hypo) != 1 or len(out.cd.hyper) != 1:
            raise ValueError("check_haar expects smooth pieces")
        values.append(out.value)
        # a smooth piece may sit in hypo or hyper form; the gradient is the
        # sum of the two singleton vectors either way
        grads.append(out.cd.hypo.vectors[0] + out.cd.hyper.vectors[0])
    values = np.array(values)
    f = float(values.max())
    active = np.flatnonzero(values >= f - tol)
    gradients = np.array([grads[i] for i in active])

    # clause 1: 0 in conv{active gradients}
    pairs = GeneratorSet(np.column_stack([np.zeros(len(active)), gradients]))
    res = min_norm_point(pairs)
    stationary = res.point.norm_sq() <= tol

    count_ok = len(active) == d + 1

    independent = False
    multipliers = None
    positive = False
    if count_ok:
        diffs = gradients[1:] - gradients[0]
        sv = np.linalg.svd(diffs, compute_uv=False)
        independent = bool(sv.min() > tol) if sv.size else False
        if independent:
            system = np.vstack([gradients.T, np.ones(len(active))])
            rhs = np.concatenate([np.zeros(d), [1.0]])
            alpha = np.linalg.solve(system, rhs)
            positive = bool(np.all(alpha > tol))
            if positive:
                multipliers = SimplexWeights(alpha)
    return HaarCertificate(
        active_count=len(active),
        gradients=gradients,
        multipliers=multipliers,
        stationary=stationary,
        count_is_dim_plus_one=count_ok,
        affinely_independent=independent,
        multipliers_positive=positive,
    )


# ---------------------------------------------------------------------------
# max-plus-min family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticPiece:
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

    def to_expression(self) -> SmoothMulti:
        return _quadratic_expr(self.constant, self.linear, self.quad)


GroupSpec = Union[int, Tuple[QuadraticPiece, ...]]


@dataclass(frozen=True)
class MaxPlusMinSpec:
    """Shape of sum_k max_i g_ki + sum_l min_j u_lj with curvature bounds.

    Groups are either explicit piece tuples or integer sizes to be sampled;
    every piece Hessian must have spectrum within [m, M].
    """

    dimension: int
    max_groups: Tuple[GroupSpec, ...] = ()
    min_groups: Tuple[GroupSpec, ...] = ()
    m: float = 1.0
    M: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "max_groups", tuple(self.max_groups))
        object.__setattr__(self, "min_groups", tuple(self.min_groups))
        if self.m > self.M:
            raise ValueError("need m <= M")
        for group in self.max_groups + self.min_groups:
            if isinstance(group, int):
                if group < 1:
                    raise ValueError("group sizes must be >= 1")
            elif len(group) == 0:
                raise ValueError("explicit groups must be nonempty")
        if not self.max_groups and not self.min_groups:
            raise ValueError("spec needs at least one group")


def _sample_piece(rng: np.random.Generator, d: int, m: float, M: float) -> QuadraticPiece:
    eigs = rng.uniform(m, M, size=d)
    basis, _ = np.linalg.qr(rng.normal(size=(d, d)))
    quad = basis @ np.diag(eigs) @ basis.T
    quad = 0.5 * (quad + quad.T)
    linear = rng.uniform(-2.0, 2.0, size=d)
    constant = rng.uniform(-1.0, 1.0)
    return QuadraticPiece(constant, linear, quad)


def _materialize_groups(groups, rng, d, m, M):
    out = []
    for group in groups:
        if isinstance(group, int):
            out.append(tuple(_sample_piece(rng, d, m, M) for _ in range(group)))
        else:
            out.append(tuple(group))
    return out


def _branch_minimum(max_groups, min_pieces, d) -> Tuple[np.ndarray, float]:
    """Global minimum of one strongly convex branch (fixed min choices)."""
    terms = [Max(tuple(p.to_expression() for p in g)) for g in max_groups]
    terms += [p.to_expression() for p in min_pieces]
    branch = Sum(tuple(1.0 for _ in terms), tuple(terms))
    cfg = McdConfig(stop_tol=1e-18, max_iter=400)
    trace = qrmcd_solve(branch, np.zeros(d), WholeSpace(), cfg)
    return trace.final_x, trace.final_f


def build_max_plus_min(spec: MaxPlusMinSpec, seed: int) -> Problem:
    """Instance of the max-plus-min family, reproducible from the seed.

    The known minimum is exact up to solver tolerance: with strongly convex
    pieces the objective is the pointwise minimum over min-branch choices of
    strongly convex functions, so enumerating the branches and minimizing
    each one yields the global minimum.
    """
    rng = np.random.default_rng(seed)
    d = spec.dimension
    max_groups = _materialize_groups(spec.max_groups, rng, d, spec.m, spec.M)
    min_groups = _materialize_groups(spec.min_groups, rng, d, spec.m, spec.M)

    terms = [Max(tuple(p.to_expression() for p in g)) for g in max_groups]
    terms += [Min(tuple(p.to_expression() for p in g)) for g in min_groups]
    expr = Sum(tuple(1.0 for _ in terms), tuple(terms)) if len(terms) > 1 else terms[0]

    known = None
    if spec.m > 0:
        best = None
        choices = [range(len(g)) for g in min_groups]
        combos = [[]]
        for group_range in choices:
            combos = [c + [j] for c in combos for j in group_range]
        for combo in combos:
            picked = [min_groups[l][j] for l, j in enumerate(combo)]
            x_star, f_star = _branch_minimum(max_groups, picked, d)
            if best is None or f_star < best[1]:
                best = (x_star, f_star)
        known = best

    return Problem(
        f"max_plus_min_s{seed}",
        expr,
        d,
        known_minimum=known,
        default_box=(-3.0 * np.ones(d), 3.0 * np.ones(d)),
    )


LINEAR_RATE_SPEC = MaxPlusMinSpec(dimension=2, max_groups=(2,), min_groups=(2,), m=1.0, M=4.0)


def instance_hessians(spec: MaxPlusMinSpec, seed: int) -> list:
    """The sampled piece Hessians, for the curvature-sandwich check."""
    rng = np.random.default_rng(seed)
    d = spec.dimension
    groups = _materialize_groups(spec.max_groups, rng, d, spec.m, spec.M)
    groups += _materialize_groups(spec.min_groups, rng, d, spec.m, spec.M)
    return [p.quad for g in groups for p in g]


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


def clustering_instance(points: Sequence, k: int) -> Problem:
    """F(c_1..c_k) = sum_p min_j ||c_j - a_p||^2 over stacked center blocks."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and np.asarray(points).ndim == 1:
        pts = np.asarray(points, dtype=float)[:, None]
    n_pts, pdim = pts.shape
    if k < 1 or n_pts == 0:
        raise ValueError("need k >= 1 and at least one point")
    d = k * pdim

    def piece(p_idx: int, j: int) -> SmoothMulti:
        a = pts[p_idx]
        form = QuadraticForm(float(a @ a), -2.0 * a, 2.0 * np.eye(pdim))
        children = tuple(Variable(j * pdim + t) for t in range(pdim))
        return SmoothMulti(form, children)

    terms = []
    for p_idx in range(n_pts):
        if k == 1:
            terms.append(piece(p_idx, 0))
        else:
            terms.append(Min(tuple(piece(p_idx, j) for j in range(k))))
    expr = Sum(tuple(1.0 for _ in terms), tuple(terms)) if len(terms) > 1 else terms[0]

    known = _clustering_known_minimum(pts, k)
    span = float(pts.max() - pts.min()) if pts.size else 1.0
    lo = np.tile(pts.min(axis=0) - 0.5 * span, k)
    hi = np.tile(pts.max(axis=0) + 0.5 * span, k)
    return Problem(f"clustering_{n_pts}pts_k{k}", expr, d, known_minimum=known, default_box=(lo, hi))


def _clustering_known_minimum(pts: np.ndarray, k: int):
    n_pts = pts.shape[0]
    if k**n_pts > 200_000:
        return None
    best = None
    assignments = np.zeros(n_pts, dtype=int)
    while True:
        centers = np.zeros((k, pts.shape[1]))
        ok = True
        for j in range(k):
            members = pts[assignments == j]
            if members.shape[0] == 0:
                ok = k > n_pts  # empty clusters only tolerable when k > n
                if not ok:
                    break
                centers[j] = pts[0]
            else:
                centers[j] = members.mean(axis=0)
        if ok:
            cost = float(
                sum(np.min(np.sum((centers - p) ** 2, axis=1)) for p in pts)
            )
            if best is None or cost < best[1]:
                best = (centers.reshape(-1).copy(), cost)
        # next assignment
        i = 0
        while i < n_pts:
            assignments[i] += 1
            if assignments[i] < k:
                break
            assignments[i] = 0
            i += 1
        if i == n_pts:
            break
    return best


def load_points_csv(path: str) -> np.ndarray:
    """One point per row, comma-separated coordinates."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row:
                rows.append([float(c) for c in row])
    return np.asarray(rows)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


def _make_max_plus_min(**params) -> Problem:
    seed = int(params.pop("seed", 0))
    spec = MaxPlusMinSpec(
        dimension=int(params.pop("d", LINEAR_RATE_SPEC.dimension)),
        max_groups=tuple(params.pop("max_groups", LINEAR_RATE_SPEC.max_groups)),
        min_groups=tuple(params.pop("min_groups", LINEAR_RATE_SPEC.min_groups)),
        m=float(params.pop("m", LINEAR_RATE_SPEC.m)),
        M=float(params.pop("M", LINEAR_RATE_SPEC.M)),
    )
    if params:
        raise ValueError(f"unknown max_plus_min parameters: {sorted(params)}")
    return build_max_plus_min(spec, seed)


def _make_clustering(**params) -> Problem:
    pts = params.pop("points", [0.0, 1.0, 9.0, 10.0])
    if isinstance(pts, str):
        pts = load_points_csv(pts)
    k = int(params.pop("k", 2))
    if params:
        raise ValueError(f"unknown clustering parameters: {sorted(params)}")
    return clustering_instance(pts, k)


_REGISTRY = {
    "abs_x": lambda **p: abs_x(),
    "paper_example_2d": lambda **p: paper_example_2d(),
    "two_minima_1d": lambda **p: two_minima_1d(),
    "haar_d1": lambda **p: haar_instance(1)[0],
    "haar_d2": lambda **p: haar_instance(2)[0],
    "haar_d3": lambda **p: haar_instance(3)[0],
    "max_plus_min": _make_max_plus_min,
    "clustering_4pts": lambda **p: _make_clustering(),
    "clustering": _make_clustering,
}

# names swept by the convergence property suite (parameterless constructions)
BENCHMARK_NAMES = (
    "abs_x",
    "paper_example_2d",
    "two_minima_1d",
    "haar_d1",
    "haar_d2",
    "haar_d3",
    "max_plus_min",
    "clustering_4pts",
)

_CACHE: dict = {}


def registered_names() -> Tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def get_problem(name: str, **params) -> Problem:
    if name not in _REGISTRY:
        raise KeyError(f"unknown problem '{name}'")
    key = (name, tuple(sorted((k, repr(v)) for k, v in params.items())))
    if key not in _CACHE:
        _CACHE[key] = _REGISTRY[name](**params)
    return _CACHE[key]
