"""Step-size rules: global grid scan with golden-section refinement, and the
backtracking sufficient-decrease rule for zero-offset candidates.

The scan is the workhorse: search directions arising from positive-offset
hyperdifferential candidates need not be descent directions, so the step must
come from minimizing over the whole interval rather than from backtracking.
"""

from __future__ import annotations

import math
from typing import Callable, Tuple

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class LineSearchError(RuntimeError):
    """No finite function value anywhere on the scan grid."""


def line_search_scan(
    fval: Callable[[float], float],
    alpha_star: float,
    grid_points: int = 64,
    refine_iters: int = 40,
) -> Tuple[float, float]:
    """Minimize fval over [0, alpha_star]: uniform grid, then golden section
    around the best grid cell.  Returns (alpha, value); the value never
    exceeds the best grid value.  Non-finite evaluations are skipped.
    """
    if not (alpha_star > 0) or math.isinf(alpha_star):
        raise ValueError("alpha_star must be positive and finite")
    if grid_points < 8:
        raise ValueError("grid_points must be >= 8")

    step = alpha_star / (grid_points - 1)
    best_alpha = None
    best_val = math.inf
    values = [math.inf] * grid_points
    for i in range(grid_points):
        a = i * step
        v = fval(a)
        if math.isfinite(v):
            values[i] = v
            if v < best_val:
                best_val, best_alpha = v, a
    if best_alpha is None:
        raise LineSearchError("function non-finite on the entire grid")

    i = int(round(best_alpha / step))
    lo = max(0.0, (i - 1) * step)
    hi = min(alpha_star, (i + 1) * step)

    # golden section on [lo, hi], tracking the best point seen anywhere
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = fval(c), fval(d)
    for val, a in ((fc, c), (fd, d)):
        if math.isfinite(val) and val < best_val:
            best_val, best_alpha = val, a
    for _ in range(refine_iters):
        if not math.isfinite(fc):
            fc = math.inf
        if not math.isfinite(fd):
            fd = math.inf
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = fval(c)
            if math.isfinite(fc) and fc < best_val:
                best_val, best_alpha = fc, c
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = fval(d)
            if math.isfinite(fd) and fd < best_val:
                best_val, best_alpha = fd, d
    return best_alpha, best_val


def line_search_armijo(
    fval: Callable[[float], float],
    f0: float,
    norm_sq: float,
    sigma: float,
    gamma: float,
    k_max: int = 60,
) -> Tuple[float, float, bool]:
    """Largest gamma^k with fval(gamma^k) - f0 <= -sigma gamma^k norm_sq.

    Returns (alpha, value, stalled).  Stalls (alpha = 0) when no k <= k_max
    qualifies; for zero-offset candidates at nonstationary points a
    qualifying step exists, so a stall signals numerical exhaustion.
    """
    if not (0.0 < sigma < 1.0 and 0.0 < gamma < 1.0):
        raise ValueError("sigma and gamma must lie in (0, 1)")
    alpha = 1.0
    for _ in range(k_max + 1):
        v = fval(alpha)
        if math.isfinite(v) and v - f0 <= -sigma * alpha * norm_sq:
            return alpha, v, False
        alpha *= gamma
    return 0.0, f0, True
