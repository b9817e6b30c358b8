"""Derivative-free maximization helpers for filter optimization.

Thin wrappers around a simplex search (with seeded restarts and an evaluation
budget) and a 1-D golden-section search.  Deterministic under the seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import BudgetExhausted


@dataclass(frozen=True)
class OptimumResult:
    x: np.ndarray
    value: float
    evaluations: int
    restarts_used: int


def simplex_maximize(func, x0, bounds=None, budget: int = 200,
                     restarts: int = 2, seed: int = 0,
                     xatol: float = 1e-3, fatol: float = 1e-5) -> OptimumResult:
    """Nelder-Mead maximization of ``func`` with seeded restart jitter.

    Bounds are enforced by clipping inside the objective wrapper (adequate for
    the smooth single-basin landscapes here).  Raises BudgetExhausted with the
    best point attached when the budget runs out before any simplex converges.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    rng = np.random.default_rng(seed)
    evals = 0
    best_x, best_v = None, -np.inf
    converged = False

    def wrapped(x):
        nonlocal evals, best_x, best_v
        if bounds is not None:
            x = np.clip(x, [b[0] for b in bounds], [b[1] for b in bounds])
        evals += 1
        v = func(x if len(x) > 1 else float(x[0]))
        if v > best_v:
            best_v, best_x = v, np.array(x, dtype=float)
        return -v

    used = 0
    for attempt in range(restarts + 1):
        used = attempt
        remaining = budget - evals
        if remaining <= len(x0) + 1:
            break
        start = x0 if attempt == 0 else best_x + rng.normal(
            scale=0.1 * (1.0 + np.abs(best_x)), size=x0.shape)
        if bounds is not None:
            start = np.clip(start, [b[0] for b in bounds], [b[1] for b in bounds])
        res = minimize(wrapped, start, method="Nelder-Mead",
                       options=dict(maxfev=remaining, xatol=xatol, fatol=fatol,
                                    adaptive=len(x0) > 2))
        if res.status == 0:
            converged = True
    if not converged:
        raise BudgetExhausted(f"budget {budget} exhausted",
                              best=OptimumResult(best_x, best_v, evals, used))
    return OptimumResult(x=best_x, value=best_v, evaluations=evals,
                         restarts_used=used)


def golden_maximize(func, lo: float, hi: float, xtol: float = 5e-3):
    """Golden-section maximum of a unimodal function on [lo, hi]."""
    ratio = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = func(c), func(d)
    evals = 2
    while (b - a) > xtol * max(1.0, abs(a) + abs(b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = func(d)
        evals += 1
    x = 0.5 * (a + b)
    return x, max(fc, fd), evals
