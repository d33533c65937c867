"""Independent brute-force oracles for the subproblem solvers.

These deliberately avoid the iterative algorithms they check:

* ``min_norm_oracle``: exact nearest point of a hull by enumerating faces
  and solving each equality-constrained least-norm system.
* ``simplex_grid_min_norm``: literal grid search over simplex weights.
* ``phi_grid_oracle``: grid search over the step variable with recursive
  refinement; sound for the strongly convex regularized model.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

from .core import GeneratorSet
from .subsolvers import Box, FeasibleSet, WholeSpace, contains, project


def min_norm_oracle(g: GeneratorSet) -> np.ndarray:
    """Exact min-norm point of conv(g) by face enumeration.

    For each subset S of generators, the nearest affine-combination point is
    the solution of the KKT system on that face; candidates with nonnegative
    barycentric coordinates are feasible, and the best feasible candidate
    over all faces is the hull minimizer.
    """
    rows = g.rows
    n = rows.shape[0]
    best = None
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            sub = rows[list(subset)]
            gram = sub @ sub.T
            k = len(subset)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = gram
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            lam = sol[:k]
            if np.any(lam < -1e-9):
                continue
            point = sub.T @ np.maximum(lam, 0.0) / max(np.maximum(lam, 0.0).sum(), 1e-300)
            norm_sq = float(point @ point)
            if best is None or norm_sq < best[0]:
                best = (norm_sq, point)
    return best[1]


def simplex_grid_min_norm(g: GeneratorSet, step: float = 1e-2) -> np.ndarray:
    """Literal simplex-grid minimizer of ||sum lam_i g_i||; small sets only."""
    rows = g.rows
    n = rows.shape[0]
    ticks = int(round(1.0 / step))
    best = None

    def rec(prefix, remaining):
        nonlocal best
        if len(prefix) == n - 1:
            lam = np.array(prefix + [remaining]) / ticks
            point = rows.T @ lam
            val = float(point @ point)
            if best is None or val < best[0]:
                best = (val, point)
            return
        for t in range(remaining + 1):
            rec(prefix + [t], remaining - t)

    rec([], ticks)
    return best[1]


def phi_value(g: GeneratorSet, h: np.ndarray) -> float:
    return float(np.max(g.offsets + g.vectors @ h)) + 0.5 * float(h @ h)


def phi_enumeration_oracle(g: GeneratorSet, a_set, x) -> tuple[np.ndarray, float]:
    """Exact minimizer of the regularized model over whole space or a box.

    Enumerates every (active generator face, clamped coordinate pattern)
    pair and solves the corresponding equal-value linear system; each
    feasible solution is scored by direct evaluation, so the reported
    minimum is attained by the true optimizer's own pattern.
    """
    x = np.asarray(x, dtype=float)
    offsets = g.offsets
    vectors = g.vectors
    n, d = vectors.shape
    if isinstance(a_set, WholeSpace):
        patterns = [(("free",) * d, np.zeros(d))]
    elif isinstance(a_set, Box):
        lo = a_set.lower - x
        hi = a_set.upper - x
        patterns = []
        for combo in product(("free", "lo", "hi"), repeat=d):
            fixed = np.zeros(d)
            for i, tag in enumerate(combo):
                if tag == "lo":
                    fixed[i] = lo[i]
                elif tag == "hi":
                    fixed[i] = hi[i]
            patterns.append((combo, fixed))
    else:
        raise TypeError("enumeration oracle supports whole space and boxes")

    candidates = [np.zeros(d)]
    if isinstance(a_set, Box):
        candidates[0] = np.clip(np.zeros(d), a_set.lower - x, a_set.upper - x)
    for combo, fixed in patterns:
        free = [i for i, tag in enumerate(combo) if tag == "free"]
        vf = vectors[:, free]
        for size in range(1, n + 1):
            for subset in combinations(range(n), size):
                idx = list(subset)
                k = len(idx)
                # unknowns: lam (k), t; equations: equal values on the face
                # with h_free = -(V_S^T lam)_free, plus sum(lam) = 1
                mat = np.zeros((k + 1, k + 1))
                rhs = np.zeros(k + 1)
                base = offsets[idx] + vectors[idx] @ fixed
                mat[:k, :k] = -(vectors[idx][:, free] @ vf[idx].T) if free else 0.0
                mat[:k, k] = -1.0
                rhs[:k] = -base
                mat[k, :k] = 1.0
                try:
                    sol = np.linalg.solve(mat, np.concatenate([rhs[:k], [1.0]]))
                except np.linalg.LinAlgError:
                    continue
                lam = sol[:k]
                if np.any(lam < -1e-9):
                    continue
                h = fixed.copy()
                if free:
                    h[free] = -(vf[idx].T @ lam)
                if isinstance(a_set, Box):
                    if np.any(h < lo - 1e-9) or np.any(h > hi + 1e-9):
                        continue
                    h = np.clip(h, lo, hi)
                candidates.append(h)
    best = None
    for h in candidates:
        val = phi_value(g, h)
        if best is None or val < best[1]:
            best = (h, val)
    return best


def phi_grid_oracle(
    g: GeneratorSet,
    a_set: FeasibleSet,
    x: np.ndarray,
    half_width: float,
    coarse: int = 13,
    levels: int = 6,
) -> tuple[np.ndarray, float]:
    """Grid minimizer of the regularized model over the shifted feasible set.

    Coarse grid over a box around 0, then recursive refinement around the
    incumbent.  The objective is 1-strongly convex, so the minimizer cannot
    hide far from the best grid node and window refinement is sound.
    """
    x = np.asarray(x, dtype=float)
    d = g.dim
    center = np.zeros(d)
    width = half_width
    best = None
    for _ in range(levels):
        axes = [np.linspace(center[i] - width, center[i] + width, coarse) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        if not isinstance(a_set, WholeSpace):
            feasible = np.array([contains(a_set, x + p, 1e-12) for p in pts])
            if not feasible.any():
                pts = np.array([project(a_set, x + p) - x for p in pts])
            else:
                pts = pts[feasible]
        vals = np.max(g.offsets[None, :] + pts @ g.vectors.T, axis=1) + 0.5 * np.sum(pts**2, axis=1)
        idx = int(np.argmin(vals))
        if best is None or vals[idx] < best[1]:
            best = (pts[idx], float(vals[idx]))
        center = best[0]
        width = 3.0 * (2.0 * width / (coarse - 1))
    return best
