"""The descent methods and their stationarity measures.

Both methods share the outer shape: truncate the codifferential at the
current point, solve one convex subproblem per hyperdifferential candidate z,
line-search every resulting direction, and keep the best achieved value.

* ``mcd_solve``: direction -v(z) from the min-norm point of the shifted
  truncated hypodifferential hull.
* ``qrmcd_solve``: direction h(z) from the quadratically regularized
  max-of-affine model over a convex feasible set; iterates stay feasible.

``omega``/``omega2`` are the corresponding non-stationarity measures: the
worst squared subproblem answer over zero-offset hyperdifferential
candidates.
"""

from __future__ import annotations

import csv
import enum
import json
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .calculus import evaluate, evaluate_value
from .core import OFFSET_TOL, Codifferential, OffsetPair, truncate_hyper, truncate_hypo
from .expressions import DomainError, Expression
from .linesearch import LineSearchError, line_search_armijo, line_search_scan
from .subsolvers import (
    FeasibleSet,
    SimplexWeights,
    SubsolverConfig,
    WholeSpace,
    contains,
    max_feasible_step,
    min_norm_point,
    solve_phi_subproblem,
)

# Finite stand-in for an unbounded step interval: the scan needs a compact
# interval, so alpha_star = inf is capped here.
ALPHA_STAR_CAP = 1e6

Schedule = Union[float, Sequence[float], Callable[[int], float]]


class ScheduleWarning(UserWarning):
    """A truncation schedule decays to zero, voiding the convergence theory."""


class Termination(enum.Enum):
    STATIONARY = "StationaryWithinTol"
    MAX_ITER = "MaxIter"
    LINE_SEARCH_STALL = "LineSearchStall"


@dataclass(frozen=True)
class ExactScan:
    grid_points: int = 64
    refine_iters: int = 40

    def __post_init__(self):
        if self.grid_points < 8:
            raise ValueError("grid_points must be >= 8")


@dataclass(frozen=True)
class Armijo:
    sigma: float = 0.1
    gamma: float = 0.5
    k_max: int = 60

    def __post_init__(self):
        if not (0 < self.sigma < 1 and 0 < self.gamma < 1):
            raise ValueError("sigma and gamma must lie in (0, 1)")


def _schedule_value(s: Schedule, n: int) -> float:
    if callable(s):
        return float(s(n))
    if isinstance(s, (int, float)):
        return float(s)
    return float(s[min(n, len(s) - 1)])


def _warn_on_vanishing(s: Schedule, name: str):
    tail = None
    if isinstance(s, (int, float)):
        tail = float(s)
    elif isinstance(s, Sequence):
        tail = float(s[-1])
    if tail is not None and tail <= 0.0:
        warnings.warn(
            f"{name} schedule decays to {tail}; the global-convergence "
            "theory needs liminf > 0",
            ScheduleWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class McdConfig:
    nu: Schedule = np.inf
    mu: Schedule = np.inf
    alpha_star: float = 10.0
    max_iter: int = 10_000
    stop_tol: float = 1e-8
    line_search: Union[ExactScan, Armijo] = field(default_factory=ExactScan)
    subsolver: SubsolverConfig = field(default_factory=SubsolverConfig)

    def __post_init__(self):
        if not self.alpha_star > 0:
            raise ValueError("alpha_star must be positive")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        _warn_on_vanishing(self.nu, "nu")
        _warn_on_vanishing(self.mu, "mu")

    @property
    def capped_alpha_star(self) -> float:
        return min(self.alpha_star, ALPHA_STAR_CAP)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    x: np.ndarray
    f_value: float
    n_candidates: int
    chosen_z_index: int  # -1 when the iterate did not move
    chosen_z: Optional[OffsetPair]
    direction: Optional[np.ndarray]
    step: float
    omega: float
    time_ms: float


@dataclass(frozen=True)
class Trace:
    records: List[IterationRecord]
    reason: Termination

    @property
    def final_f(self) -> float:
        return self.records[-1].f_value

    @property
    def final_x(self) -> np.ndarray:
        return self.records[-1].x

    @property
    def final_omega(self) -> float:
        return self.records[-1].omega

    def f_values(self) -> np.ndarray:
        return np.array([r.f_value for r in self.records])

    def omega_values(self) -> np.ndarray:
        return np.array([r.omega for r in self.records])

    CSV_COLUMNS = ("iter", "f", "omega", "step", "n_candidates", "chosen_z_index", "time_ms")

    def write_csv(self, path: str):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_COLUMNS)
            for r in self.records:
                writer.writerow(
                    [r.iteration, repr(r.f_value), repr(r.omega), repr(r.step),
                     r.n_candidates, r.chosen_z_index, repr(r.time_ms)]
                )

    def to_json_obj(self) -> dict:
        return {
            "reason": self.reason.value,
            "records": [
                {
                    "iter": r.iteration,
                    "x": r.x.tolist(),
                    "f": r.f_value,
                    "omega": r.omega,
                    "step": r.step,
                    "n_candidates": r.n_candidates,
                    "chosen_z_index": r.chosen_z_index,
                    "chosen_z": None
                    if r.chosen_z is None
                    else [r.chosen_z.offset, r.chosen_z.vector.tolist()],
                    "direction": None if r.direction is None else r.direction.tolist(),
                    "time_ms": r.time_ms,
                }
                for r in self.records
            ],
        }

    def write_json(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh, indent=1)


@dataclass(frozen=True)
class StationarityReport:
    omega: float
    worst_z: Optional[OffsetPair]
    is_stationary: bool


def _value_or_inf(expr: Expression, x: np.ndarray) -> float:
    try:
        v = evaluate_value(expr, x)
    except DomainError:
        return np.inf
    return v if np.isfinite(v) else np.inf


def _zero_offset(z: OffsetPair) -> bool:
    return abs(z.offset) <= OFFSET_TOL


def _search_step(expr, x, direction, f0, norm_sq, zero_offset, cfg: McdConfig):
    """One line search along `direction`; returns (alpha, achieved) or None."""
    cap = cfg.capped_alpha_star

    def fline(alpha: float) -> float:
        return _value_or_inf(expr, x + alpha * direction)

    if isinstance(cfg.line_search, Armijo) and zero_offset and norm_sq > 0:
        ls = cfg.line_search
        alpha, val, stalled = line_search_armijo(
            fline, f0, norm_sq, ls.sigma, ls.gamma, ls.k_max
        )
        if stalled:
            return None
        return alpha, val
    ls = cfg.line_search if isinstance(cfg.line_search, ExactScan) else ExactScan()
    try:
        return line_search_scan(fline, cap, ls.grid_points, ls.refine_iters)
    except LineSearchError:
        return None


def mcd_solve(problem: Expression, x0, cfg: McdConfig = McdConfig()) -> Trace:
    """Descent over the whole space by truncated-codifferential candidates."""
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    records: List[IterationRecord] = []
    reason = Termination.MAX_ITER

    for n in range(cfg.max_iter):
        t0 = time.perf_counter()
        out = evaluate(problem, x)
        f0 = out.value
        nu_n = _schedule_value(cfg.nu, n)
        mu_n = _schedule_value(cfg.mu, n)
        hypo = truncate_hypo(out.cd, nu_n)
        hyper = truncate_hyper(out.cd, mu_n)

        candidates = []
        omega_val = 0.0
        for j, z in enumerate(hyper):
            res = min_norm_point(hypo.shift(z), cfg.subsolver)
            candidates.append((j, z, res.point))
            if _zero_offset(z):
                omega_val = max(omega_val, res.point.norm_sq())

        elapsed = (time.perf_counter() - t0) * 1e3
        if omega_val <= cfg.stop_tol:
            records.append(IterationRecord(n, x, f0, len(hyper), -1, None, None, 0.0, omega_val, elapsed))
            reason = Termination.STATIONARY
            break

        best = None  # (achieved, alpha, j, z, u)
        for j, z, u in candidates:
            v = u.vector
            if not np.any(v):
                continue
            found = _search_step(problem, x, -v, f0, u.norm_sq(), _zero_offset(z), cfg)
            if found is None:
                continue
            alpha, achieved = found
            if best is None or achieved < best[0]:
                best = (achieved, alpha, j, z, u)

        elapsed = (time.perf_counter() - t0) * 1e3
        if best is None or best[0] >= f0:
            records.append(IterationRecord(n, x, f0, len(hyper), -1, None, None, 0.0, omega_val, elapsed))
            reason = Termination.LINE_SEARCH_STALL
            break

        achieved, alpha, j, z, u = best
        direction = -u.vector
        records.append(
            IterationRecord(n, x, f0, len(hyper), j, z, direction, alpha, omega_val, elapsed)
        )
        x = x + alpha * direction

    return Trace(records, reason)


def qrmcd_solve(
    problem: Expression,
    x0,
    a_set: FeasibleSet = WholeSpace(),
    cfg: McdConfig = McdConfig(),
) -> Trace:
    """Quadratically regularized variant over a convex feasible set."""
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if not contains(a_set, x):
        raise ValueError("x0 must belong to the feasible set")
    records: List[IterationRecord] = []
    reason = Termination.MAX_ITER

    for n in range(cfg.max_iter):
        t0 = time.perf_counter()
        out = evaluate(problem, x)
        f0 = out.value
        nu_n = _schedule_value(cfg.nu, n)
        mu_n = _schedule_value(cfg.mu, n)
        hypo = truncate_hypo(out.cd, nu_n)
        hyper = truncate_hyper(out.cd, mu_n)

        candidates = []
        omega2_val = 0.0
        for j, z in enumerate(hyper):
            res = solve_phi_subproblem(hypo.shift(z), a_set, x, cfg.subsolver)
            candidates.append((j, z, res.h))
            if _zero_offset(z):
                omega2_val = max(omega2_val, float(res.h @ res.h))

        elapsed = (time.perf_counter() - t0) * 1e3
        if omega2_val <= cfg.stop_tol:
            records.append(IterationRecord(n, x, f0, len(hyper), -1, None, None, 0.0, omega2_val, elapsed))
            reason = Termination.STATIONARY
            break

        best = None
        for j, z, h in candidates:
            if not np.any(h):
                continue
            cap = max_feasible_step(a_set, x, h, cfg.capped_alpha_star)
            if cap <= 0.0:
                continue
            norm_sq = float(h @ h)
            found = _search_step_capped(problem, x, h, f0, norm_sq, _zero_offset(z), cfg, cap)
            if found is None:
                continue
            alpha, achieved = found
            if best is None or achieved < best[0]:
                best = (achieved, alpha, j, z, h)

        elapsed = (time.perf_counter() - t0) * 1e3
        if best is None or best[0] >= f0:
            records.append(IterationRecord(n, x, f0, len(hyper), -1, None, None, 0.0, omega2_val, elapsed))
            reason = Termination.LINE_SEARCH_STALL
            break

        achieved, alpha, j, z, h = best
        records.append(IterationRecord(n, x, f0, len(hyper), j, z, h, alpha, omega2_val, elapsed))
        x = x + alpha * h

    return Trace(records, reason)


def _search_step_capped(expr, x, direction, f0, norm_sq, zero_offset, cfg: McdConfig, cap):
    def fline(alpha: float) -> float:
        return _value_or_inf(expr, x + alpha * direction)

    if isinstance(cfg.line_search, Armijo) and zero_offset and norm_sq > 0:
        ls = cfg.line_search
        # backtracking starts at 1, which is feasible since direction is in A - x
        alpha, val, stalled = line_search_armijo(fline, f0, norm_sq, ls.sigma, ls.gamma, ls.k_max)
        if stalled:
            return None
        return alpha, val
    ls = cfg.line_search if isinstance(cfg.line_search, ExactScan) else ExactScan()
    try:
        return line_search_scan(fline, cap, ls.grid_points, ls.refine_iters)
    except LineSearchError:
        return None


def omega(
    problem: Expression,
    x,
    nu: float = np.inf,
    cfg: SubsolverConfig = SubsolverConfig(),
) -> StationarityReport:
    """Worst squared min-norm point over zero-offset hyper candidates.

    Zero iff the point satisfies the unconstrained first-order condition;
    checking generators suffices because after normalization the zero-offset
    generators contain every extreme point of the zero-offset face.
    """
    out = evaluate(problem, x)
    hypo = truncate_hypo(out.cd, nu)
    worst = None
    value = 0.0
    for z in out.cd.hyper:
        if not _zero_offset(z):
            continue
        res = min_norm_point(hypo.shift(z), cfg)
        nsq = res.point.norm_sq()
        if worst is None or nsq > value:
            value, worst = nsq, z
    return StationarityReport(value, worst, value <= _STATIONARITY_TOL)


def omega2(
    problem: Expression,
    x,
    a_set: FeasibleSet = WholeSpace(),
    nu: float = np.inf,
    cfg: SubsolverConfig = SubsolverConfig(),
) -> StationarityReport:
    """Worst squared regularized-subproblem step over zero-offset candidates."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not contains(a_set, x):
        raise ValueError("x must belong to the feasible set")
    out = evaluate(problem, x)
    hypo = truncate_hypo(out.cd, nu)
    worst = None
    value = 0.0
    for z in out.cd.hyper:
        if not _zero_offset(z):
            continue
        res = solve_phi_subproblem(hypo.shift(z), a_set, x, cfg)
        nsq = float(res.h @ res.h)
        if worst is None or nsq > value:
            value, worst = nsq, z
    return StationarityReport(value, worst, value <= _STATIONARITY_TOL)


_STATIONARITY_TOL = 1e-8


def is_inf_stationary(problem: Expression, x, tol: float = _STATIONARITY_TOL, nu: float = np.inf) -> bool:
    """First-order condition over generators at threshold tol on omega."""
    report = omega(problem, x, nu)
    return report.omega <= tol
