"""Closed-form halfspace projections and prox steps, plus a brute-force oracle.

The brute-force minimizer exists only to validate the closed forms in tests;
it never runs inside the optimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ZERO_GRAD_SQ = 1e-24  # ||a||^2 below this is treated as a zero gradient


class InfeasibleConstraint(ValueError):
    """Linearized constraint cannot be satisfied (zero gradient, positive gap)."""


class OracleError(RuntimeError):
    """Brute-force minimizer failed to converge within its iteration cap."""


def positive_part(x: float) -> float:
    return x if x > 0 else 0.0


@dataclass(frozen=True)
class HalfspaceSlackInstance:
    """Projection of (w0, s0) onto {a.(w - w0) + c <= s} in a weighted norm."""

    a: np.ndarray
    c: float
    w0: np.ndarray
    s0: float
    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.a.shape != self.w0.shape:
            raise ValueError("a and w0 must have equal dimension")


def halfspace_project(a: np.ndarray, c: float, w0: np.ndarray) -> np.ndarray:
    """Project w0 onto {w : a.(w - w0) + c <= 0}.

    Returns w0 untouched when already feasible (c <= 0); raises
    InfeasibleConstraint when a == 0 and c > 0.
    """
    cp = positive_part(c)
    if cp == 0.0:
        return w0.copy()
    a_sq = float(a @ a)
    if a_sq < ZERO_GRAD_SQ:
        raise InfeasibleConstraint("zero gradient with positive constraint gap")
    return w0 - (cp / a_sq) * a


def halfspace_project_slack(inst: HalfspaceSlackInstance) -> tuple[np.ndarray, float]:
    """Project (w0, s0) onto {a.(w - w0) + c <= s}, slack weighted by delta.

    Always feasible: the slack absorbs the constraint when a == 0.
    """
    a_sq = float(inst.a @ inst.a)
    gap = positive_part(inst.c - inst.s0)
    step = gap / (1.0 + inst.delta * a_sq)
    w = inst.w0 - inst.delta * step * inst.a
    s = inst.s0 + step
    return w, s


def max_linear_prox(y0: np.ndarray, a: np.ndarray, c: float, beta: float) -> np.ndarray:
    """Prox of the hinge of a linear function: argmin (c + a.(y-y0))_+ + ||y-y0||^2/(2 beta).

    The step coefficient is min{beta, (c)_+ / ||a||^2}, with (c)_+/0 read as
    +inf when c > 0 and 0 when c <= 0.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    cp = positive_part(c)
    if cp == 0.0:
        return y0.copy()
    a_sq = float(a @ a)
    coef = beta if a_sq < ZERO_GRAD_SQ else min(beta, cp / a_sq)
    return y0 - coef * a


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    """Minimize a unimodal 1-D function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    # iteration cap guards against tol below the representable interval width
    for _ in range(300):
        if b - a <= tol:
            break
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _numeric_minimize(objective, start: np.ndarray, tol: float):
    from scipy.optimize import minimize

    best_x, best_f = None, math.inf
    for x0 in (start, start + 0.7):
        res = minimize(
            objective,
            x0,
            method="Powell",
            options={"xtol": tol, "ftol": tol, "maxiter": 5000, "maxfev": 20000},
        )
        if math.isfinite(res.fun) and res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
        if best_x is not None and res.success:
            break  # convex objective: one successful solve is enough
    if best_x is None or abs(best_f) > 1e50:
        raise OracleError("numeric minimization failed (objective may be unbounded)")
    return best_x, best_f


def brute_force_minimize(
    objective,
    start: np.ndarray,
    tol: float = 1e-10,
    constraint: tuple[np.ndarray, float] | None = None,
) -> tuple[np.ndarray, float]:
    """Numerically minimize a convex black-box function on R^k (k <= 6).

    `constraint`, if given, is (coef, rhs) meaning coef . y <= rhs.  The
    constrained minimum is found by comparing the unconstrained minimum (if
    feasible) with the minimum on the boundary hyperplane, obtained by
    eliminating the largest-coefficient variable.
    """
    start = np.asarray(start, dtype=float)
    if start.size > 6:
        raise ValueError("oracle limited to k <= 6")

    if constraint is None:
        return _numeric_minimize(objective, start, tol)

    coef, rhs = constraint
    coef = np.asarray(coef, dtype=float)
    try:
        y_free, f_free = _numeric_minimize(objective, start, tol)
        if float(coef @ y_free) <= rhs + 1e-9:
            return y_free, f_free
    except OracleError:
        pass  # unconstrained problem may be unbounded; boundary may still work

    k = int(np.argmax(np.abs(coef)))
    if abs(coef[k]) < 1e-30:
        raise OracleError("degenerate constraint")
    free = [j for j in range(start.size) if j != k]

    def lift(z: np.ndarray) -> np.ndarray:
        y = np.empty(start.size)
        y[free] = z
        y[k] = (rhs - coef[free] @ z) / coef[k]
        return y

    if free:
        z0 = start[free]
        z_best, f_best = _numeric_minimize(lambda z: objective(lift(z)), z0, tol)
        y = lift(z_best)
    else:
        y = lift(np.empty(0))
        f_best = objective(y)
    return y, f_best
