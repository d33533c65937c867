"""Empirical convergence-rate estimation from solver traces.

Fits the error sequence e_n = f(x_n) - f* on a tail window: the geometric
ratio estimate (with a bootstrap interval) distinguishes a linear rate, and
the log-log regression slope of e_{n+1} against e_n estimates the order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

WINDOW_SIZE = 10
MIN_WINDOW = 5
BOOTSTRAP_RESAMPLES = 200

QUADRATIC_P = 1.8
LINEAR_P_RANGE = (0.8, 1.3)
LINEAR_C_MAX = 0.98


@dataclass(frozen=True)
class RateReport:
    c_hat: float
    c_interval: Tuple[float, float]
    p_hat: float
    window: int
    verdict: str  # linear | superlinear | quadratic | inconclusive


def _clean_errors(f_values: np.ndarray, f_star: float) -> np.ndarray:
    """Errors above the noise floor, truncated where decrease stops.

    Traces are nonincreasing in f, so the first non-strict decrease marks the
    numerical floor; everything from there on is rattle, not rate.
    """
    errors = f_values - f_star
    floor = 10.0 * np.finfo(float).eps * abs(f_star)
    clean = []
    prev = np.inf
    for e in errors:
        if e <= floor or e >= prev * (1.0 - 1e-12):
            break
        clean.append(e)
        prev = e
    return np.asarray(clean)


def rate_fit(trace_or_f_values, f_star: float) -> RateReport:
    """Estimate the tail convergence rate against the optimal value f_star.

    Accepts a Trace or a plain sequence of objective values; fits the last
    ten clean errors.  Fewer than five clean records yields the verdict
    "inconclusive" rather than an error.
    """
    if hasattr(trace_or_f_values, "f_values"):
        f_values = trace_or_f_values.f_values()
    else:
        f_values = np.asarray(list(trace_or_f_values), dtype=float)
    clean = _clean_errors(f_values, float(f_star))

    if clean.size < MIN_WINDOW:
        return RateReport(1.0, (1.0, 1.0), 1.0, int(clean.size), "inconclusive")

    window = clean[-WINDOW_SIZE:]
    logs = np.log(window)
    ratios = logs[1:] - logs[:-1]

    c_hat = float(np.exp(ratios.mean()))
    rng = np.random.default_rng(0)
    samples = np.exp(
        rng.choice(ratios, size=(BOOTSTRAP_RESAMPLES, ratios.size), replace=True).mean(axis=1)
    )
    c_lo, c_hi = (float(v) for v in np.percentile(samples, [2.5, 97.5]))

    x = logs[:-1]
    y = logs[1:]
    var = float(((x - x.mean()) ** 2).sum())
    if var == 0.0:
        p_hat = 1.0
    else:
        p_hat = float(((x - x.mean()) * (y - y.mean())).sum() / var)

    if p_hat >= QUADRATIC_P:
        verdict = "quadratic"
    elif p_hat > LINEAR_P_RANGE[1]:
        verdict = "superlinear"
    elif c_hat <= LINEAR_C_MAX and LINEAR_P_RANGE[0] <= p_hat <= LINEAR_P_RANGE[1]:
        verdict = "linear"
    else:
        verdict = "inconclusive"
    return RateReport(c_hat, (c_lo, c_hi), p_hat, int(window.size), verdict)
