"""Reusable property checks for the calculus layer.

Shared by the unit tests and the acceptance suite so that both assert the
same statements at the same tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import (
    ApproximationProbe,
    approximation_error,
    directional_derivative,
    evaluate,
    evaluate_value,
    model_parts,
)
from .expressions import Expression

DECAY_FACTOR = 0.75 + 1e-12
DECAY_ABS_SLACK = 1e-12
# ladder 2^-3 .. 2^-12; deep enough that a sign change of the signed
# residual at moderate alpha still leaves >= 3 asymptotic pairs
DECAY_EXPONENTS = tuple(range(3, 13))
MIN_TAIL_PAIRS = 3

FD_ALPHAS = (1e-2, 1e-3, 1e-4)
FD_TOL = 1e-2


@dataclass(frozen=True)
class DecayResult:
    passed: bool
    magnitudes: tuple
    tail_start: int


def fd_consistency_residual(expr: Expression, x, h) -> tuple[float, float]:
    """(residual at alpha=1e-4, allowed bound) for the derivative check.

    The bound scales with an empirical curvature estimate taken from the
    drift of the difference quotients across the alpha ladder.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    out = evaluate(expr, x)
    dd = directional_derivative(out.cd, h)
    quotients = [
        (evaluate_value(expr, x + a * h) - out.value) / a for a in FD_ALPHAS
    ]
    curvature = 1.0 + abs(quotients[0] - quotients[-1]) / (FD_ALPHAS[0] - FD_ALPHAS[-1])
    residual = abs(quotients[-1] - dd)
    bound = FD_TOL * (1.0 + float(h @ h)) * curvature
    return residual, bound


def check_fd_consistency(expr: Expression, x, h) -> bool:
    residual, bound = fd_consistency_residual(expr, x, h)
    return residual <= bound


def _noise_floor(expr: Expression, base_value: float, cd, x, h, alpha: float) -> float:
    """Rounding-level magnitude for the residual measure at step alpha."""
    ahead = evaluate_value(expr, x + alpha * h)
    phi, psi = model_parts(cd, alpha * h)
    scale = 1.0 + abs(base_value) + abs(ahead) + abs(phi) + abs(psi)
    return 64.0 * np.finfo(float).eps * scale / alpha


def check_epsilon_decay(expr: Expression, x, h) -> DecayResult:
    """Half-alpha decay of |eps| on the asymptotic tail of the ladder.

    A consecutive pair passes if the magnitude drops by the required factor
    or if both values sit at the rounding floor; the check passes when every
    pair from some start index on passes, with at least MIN_TAIL_PAIRS of
    them.  The signed residual may cross zero once at moderate alpha, which
    is why the tail, not the whole ladder, carries the requirement.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    out = evaluate(expr, x)
    mags = []
    floors = []
    for k in DECAY_EXPONENTS:
        alpha = 2.0**-k
        probe = ApproximationProbe(alpha, h, x, max(1.0, float(np.linalg.norm(h))))
        mags.append(abs(approximation_error(expr, probe)))
        floors.append(_noise_floor(expr, out.value, out.cd, x, h, alpha))

    def pair_ok(j: int) -> bool:
        if mags[j + 1] <= DECAY_FACTOR * mags[j] + DECAY_ABS_SLACK:
            return True
        return mags[j] <= floors[j] and mags[j + 1] <= floors[j + 1]

    n_pairs = len(mags) - 1
    for j0 in range(n_pairs - MIN_TAIL_PAIRS + 1):
        if all(pair_ok(j) for j in range(j0, n_pairs)):
            return DecayResult(True, tuple(mags), j0)
    return DecayResult(False, tuple(mags), -1)


def piecewise_affine_exact(expr: Expression, x, h, alphas=(1.0, 0.25, 2.0**-5, 2.0**-10)) -> bool:
    """The induced model of a piecewise affine expression is exact."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    for alpha in alphas:
        probe = ApproximationProbe(alpha, h, x, max(1.0, float(np.linalg.norm(h))))
        if abs(approximation_error(expr, probe)) > 1e-10:
            return False
    return True
