"""Convex subproblems of the descent methods.

* ``min_norm_point``: nearest point of a generator hull to the origin in
  (a, v) space, by the Mitchell-Demyanov-Malozemov exchange iteration on
  simplex weights.
* ``solve_phi_subproblem``: minimize max_i(a_i + <v_i, h>) + ||h||^2 / 2 over
  a shifted feasible set, via its concave dual over the simplex maximized by
  away-step Frank-Wolfe; the inner minimizer for fixed weights is a single
  projection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import GeneratorSet, OffsetPair


@dataclass(frozen=True)
class WholeSpace:
    pass


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must satisfy lower <= upper componentwise")


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")


FeasibleSet = Union[WholeSpace, Box, Ball]


def project(a_set: FeasibleSet, p) -> np.ndarray:
    """Euclidean projection onto the feasible set."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if isinstance(a_set, WholeSpace):
        return p
    if isinstance(a_set, Box):
        return np.clip(p, a_set.lower, a_set.upper)
    if isinstance(a_set, Ball):
        diff = p - a_set.center
        nrm = float(np.linalg.norm(diff))
        if nrm <= a_set.radius:
            return p
        return a_set.center + diff * (a_set.radius / nrm)
    raise TypeError(f"unknown feasible set {type(a_set).__name__}")


def contains(a_set: FeasibleSet, p, tol: float = 1e-9) -> bool:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return float(np.linalg.norm(p - project(a_set, p))) <= tol


def max_feasible_step(a_set: FeasibleSet, x, h, cap: float) -> float:
    """Largest alpha <= cap with x + alpha h inside the set (x feasible)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if isinstance(a_set, WholeSpace) or not np.any(h):
        return cap
    if isinstance(a_set, Box):
        alpha = cap
        for hi, xi, lo_i, up_i in zip(h, x, a_set.lower, a_set.upper):
            if hi > 0:
                alpha = min(alpha, (up_i - xi) / hi)
            elif hi < 0:
                alpha = min(alpha, (lo_i - xi) / hi)
        return max(0.0, alpha)
    if isinstance(a_set, Ball):
        # solve ||x - c + alpha h|| = r for the positive root
        diff = x - a_set.center
        hh = float(h @ h)
        dh = float(diff @ h)
        dd = float(diff @ diff) - a_set.radius**2
        disc = dh * dh - hh * dd
        if disc <= 0:
            return 0.0
        root = (-dh + np.sqrt(disc)) / hh
        return float(np.clip(root, 0.0, cap))
    raise TypeError(f"unknown feasible set {type(a_set).__name__}")


def feasible_set_to_json_obj(a_set: FeasibleSet) -> dict:
    if isinstance(a_set, WholeSpace):
        return {"kind": "whole_space"}
    if isinstance(a_set, Box):
        return {"kind": "box", "lower": a_set.lower.tolist(), "upper": a_set.upper.tolist()}
    if isinstance(a_set, Ball):
        return {"kind": "ball", "center": a_set.center.tolist(), "radius": a_set.radius}
    raise TypeError(f"unknown feasible set {type(a_set).__name__}")


def feasible_set_from_json_obj(obj: dict) -> FeasibleSet:
    kind = obj["kind"]
    if kind == "whole_space":
        return WholeSpace()
    if kind == "box":
        return Box(np.asarray(obj["lower"]), np.asarray(obj["upper"]))
    if kind == "ball":
        return Ball(np.asarray(obj["center"]), obj["radius"])
    raise ValueError(f"unknown feasible set kind '{kind}'")


@dataclass(frozen=True)
class SimplexWeights:
    """Nonnegative weights over generators summing to one."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if np.any(v < -1e-10) or abs(float(v.sum()) - 1.0) > 1e-10:
            raise ValueError("weights must be nonnegative and sum to 1")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SubsolverConfig:
    tol: float = 1e-10
    max_iter: Optional[int] = None  # None -> 10 * (n_generators + dim)^2

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def resolved_max_iter(self, n: int, d: int) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return 10 * (n + d) ** 2


@dataclass(frozen=True)
class MinNormResult:
    point: OffsetPair
    weights: SimplexWeights
    converged: bool
    iterations: int


def min_norm_point(g: GeneratorSet, cfg: SubsolverConfig = SubsolverConfig()) -> MinNormResult:
    """Nearest point of conv(g) to the origin in (a, v) space.

    Exchange iteration on the simplex parametrization: mass moves from the
    support generator with the largest inner product against the current
    point toward the globally smallest one, with an exact step.  Terminates
    on the optimality certificate min_j <g_j, u> >= ||u||^2 - tol.  Ties are
    broken by lowest index, so the result is deterministic in the generator
    ordering.
    """
    rows = g.rows
    n = rows.shape[0]
    lam = np.zeros(n)
    lam[int(np.argmin(np.einsum("ij,ij->i", rows, rows)))] = 1.0
    u = rows.T @ lam

    converged = False
    iterations = 0
    max_iter = cfg.resolved_max_iter(n, g.dim)
    for iterations in range(1, max_iter + 1):
        dots = rows @ u
        norm_sq = float(u @ u)
        s = int(np.argmin(dots))
        if dots[s] >= norm_sq - cfg.tol:
            converged = True
            break
        support = np.flatnonzero(lam > 0.0)
        t = support[int(np.argmax(dots[support]))]
        direction = rows[s] - rows[t]
        denom = float(direction @ direction)
        if denom <= 0.0:
            break
        theta = float(np.clip(-(u @ direction) / (lam[t] * denom), 0.0, 1.0))
        moved = theta * lam[t]
        lam[t] -= moved
        lam[s] += moved
        if iterations % 64 == 0:
            u = rows.T @ lam  # refresh against drift
        else:
            u = u + moved * direction

    lam = np.maximum(lam, 0.0)
    lam /= lam.sum()
    lam = _min_norm_face_polish(rows, lam, cfg.tol)
    u = rows.T @ lam
    if not converged:
        dots = rows @ u
        converged = bool(np.min(dots) >= float(u @ u) - cfg.tol)
    return MinNormResult(
        point=OffsetPair(u[0], u[1:]),
        weights=SimplexWeights(lam),
        converged=converged,
        iterations=iterations,
    )


def _solve_face(rows: np.ndarray, idx) -> Optional[np.ndarray]:
    """Affine least-norm weights on one face (sum-to-one, sign-free)."""
    k = len(idx)
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = rows[idx] @ rows[idx].T
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        return np.linalg.solve(kkt, rhs)[:k]
    except np.linalg.LinAlgError:
        return None


def _min_norm_face_polish(rows: np.ndarray, lam: np.ndarray, tol: float) -> np.ndarray:
    """Finish the exchange iteration with exact solves on candidate faces.

    Major cycle: solve the equality-constrained least-norm system on the
    current support and pull in any generator still violating the optimality
    certificate.  Minor cycle: when the face solution leaves the simplex,
    step toward it until the first weight vanishes and drop that generator.
    Returns the best simplex point seen; never worse than the input.
    """
    n = rows.shape[0]
    cur = lam.copy()
    best = lam
    best_norm = float(np.sum((rows.T @ lam) ** 2))
    support = set(np.flatnonzero(cur > 1e-14).tolist())
    for _ in range(4 * n):
        idx = sorted(support)
        lam_face = _solve_face(rows, idx)
        if lam_face is None:
            return best
        if np.all(lam_face >= -1e-12):
            cand = np.zeros(n)
            cand[idx] = np.maximum(lam_face, 0.0)
            cand /= cand.sum()
            u = rows.T @ cand
            norm_sq = float(u @ u)
            if norm_sq <= best_norm + 1e-15:
                best, best_norm = cand, norm_sq
            cur = cand
            dots = rows @ u
            worst = int(np.argmin(dots))
            if dots[worst] < norm_sq - tol and worst not in support:
                support.add(worst)
                continue
            return best
        # minor cycle toward the face solution until a weight hits zero
        cur_face = cur[idx]
        delta = lam_face - cur_face
        shrinking = delta < 0
        if not shrinking.any():
            return best
        theta = float(np.min(cur_face[shrinking] / -delta[shrinking]))
        theta = min(max(theta, 0.0), 1.0)
        stepped = cur_face + theta * delta
        cur = np.zeros(n)
        cur[idx] = np.maximum(stepped, 0.0)
        total = cur.sum()
        if total <= 0:
            return best
        cur /= total
        support = set(np.flatnonzero(cur > 1e-14).tolist())
        if not support:
            return best
    return best


@dataclass(frozen=True)
class PhiResult:
    h: np.ndarray
    weights: SimplexWeights
    phi: float
    gap: float
    converged: bool
    iterations: int


def _phi_primal(offsets, vectors, h) -> float:
    return float(np.max(offsets + vectors @ h)) + 0.5 * float(h @ h)


def _face_polish(offsets, vectors, lam, tol):
    """Active-set refinement of the dual on the identified support.

    Whole-space case only: there the dual is the concave quadratic
    q(lam) = a.lam - ||V^T lam||^2 / 2, and solving the KKT system on the
    support face gives the exact optimum once the face is right.  Inactive
    generators whose gradient beats the face value are pulled in.
    """
    n = offsets.shape[0]
    support = set(np.flatnonzero(lam > 1e-14).tolist())
    for _ in range(2 * n):
        idx = sorted(support)
        gram = vectors[idx] @ vectors[idx].T
        k = len(idx)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = gram
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([offsets[idx], [1.0]])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            return lam
        lam_face = sol[:k]
        if np.any(lam_face < -1e-12):
            return lam
        cand = np.zeros(n)
        cand[idx] = np.maximum(lam_face, 0.0)
        cand /= cand.sum()
        vbar = vectors.T @ cand
        grads = offsets - vectors @ vbar
        face_val = float(grads[idx[0]]) if idx else 0.0
        worst = int(np.argmax(grads))
        if grads[worst] > face_val + tol and worst not in support:
            support.add(worst)
            lam = cand
            continue
        return cand
    return lam


def solve_phi_subproblem(
    g_shifted: GeneratorSet,
    a_set: FeasibleSet,
    x,
    cfg: SubsolverConfig = SubsolverConfig(),
    debug_path: Optional[str] = None,
) -> PhiResult:
    """Minimize max_i(a_i + <v_i, h>) + ||h||^2/2 over h in (feasible set - x).

    For simplex weights lam the inner minimizer is
    h(lam) = Proj_{A - x}(-sum lam_i v_i); the concave dual is maximized by
    away-step Frank-Wolfe with the primal-dual gap as stopping criterion.
    The caller shifts the generator set by its hyperdifferential candidate z.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not contains(a_set, x):
        raise ValueError("reference point must belong to the feasible set")
    offsets = g_shifted.offsets
    vectors = g_shifted.vectors
    n = len(g_shifted)
    whole = isinstance(a_set, WholeSpace)

    shifted_set: FeasibleSet
    if isinstance(a_set, Box):
        shifted_set = Box(a_set.lower - x, a_set.upper - x)
    elif isinstance(a_set, Ball):
        shifted_set = Ball(a_set.center - x, a_set.radius)
    else:
        shifted_set = a_set

    def h_of(lam):
        return project(shifted_set, -(vectors.T @ lam))

    def dual_value(lam, h):
        vbar = vectors.T @ lam
        return float(offsets @ lam) + float(vbar @ h) + 0.5 * float(h @ h)

    lam = np.zeros(n)
    lam[int(np.argmax(offsets))] = 1.0

    trace = []
    best = None  # (phi, lam, h)
    converged = False
    gap = np.inf
    iterations = 0
    max_iter = cfg.resolved_max_iter(n, g_shifted.dim)
    for iterations in range(1, max_iter + 1):
        h = h_of(lam)
        grads = offsets + vectors @ h
        primal = float(np.max(grads)) + 0.5 * float(h @ h)
        if best is None or primal < best[0]:
            best = (primal, lam.copy(), h)
        gap = float(np.max(grads) - grads @ lam)
        if debug_path is not None:
            trace.append({"iter": iterations, "primal": primal, "gap": gap})
        if gap <= cfg.tol:
            converged = True
            break

        s = int(np.argmax(grads))
        support = np.flatnonzero(lam > 0.0)
        t = support[int(np.argmin(grads[support]))]
        gap_fw = float(grads[s] - grads @ lam)
        gap_away = float(grads @ lam - grads[t])
        if gap_fw >= gap_away:
            direction = -lam.copy()
            direction[s] += 1.0
            theta_max = 1.0
        else:
            direction = lam.copy()
            direction[t] -= 1.0
            denom = 1.0 - lam[t]
            if denom <= 0.0:
                break
            theta_max = lam[t] / denom

        if whole:
            dv = vectors.T @ direction
            denom = float(dv @ dv)
            if denom <= 0.0:
                theta = theta_max
            else:
                vbar = vectors.T @ lam
                theta = float(np.clip((offsets @ direction - vbar @ dv) / denom, 0.0, theta_max))
        else:
            # bisection on the concave dual's directional derivative
            def slope(th):
                ht = h_of(lam + th * direction)
                return float(direction @ (offsets + vectors @ ht))

            lo, hi = 0.0, theta_max
            if slope(hi) >= 0.0:
                theta = theta_max
            else:
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if slope(mid) > 0.0:
                        lo = mid
                    else:
                        hi = mid
                theta = 0.5 * (lo + hi)

        if theta <= 0.0:
            break
        lam = lam + theta * direction
        lam = np.maximum(lam, 0.0)
        lam /= lam.sum()

    if whole:
        lam_polished = _face_polish(offsets, vectors, lam, cfg.tol)
        h_p = h_of(lam_polished)
        grads_p = offsets + vectors @ h_p
        primal_p = float(np.max(grads_p)) + 0.5 * float(h_p @ h_p)
        gap_p = float(np.max(grads_p) - grads_p @ lam_polished)
        if primal_p <= best[0] + 1e-15 or gap_p < gap:
            best = (primal_p, lam_polished, h_p)
            gap = min(gap, gap_p)
            if gap <= cfg.tol:
                converged = True

    phi, lam, h = best
    if debug_path is not None:
        with open(debug_path, "w") as fh:
            json.dump(trace, fh)
    return PhiResult(
        h=h,
        weights=SimplexWeights(lam),
        phi=phi,
        gap=gap,
        converged=converged,
        iterations=iterations,
    )
