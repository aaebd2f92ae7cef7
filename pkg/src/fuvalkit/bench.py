"""Reference solving, convergence-bound evaluation, grid-search sensitivity
experiments, and CSV export."""

from __future__ import annotations

import concurrent.futures
import csv
import enum
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .optimizers import (
    GD,
    SGD,
    ConfigurationError,
    Fuval,
    FuvalFullBatch,
    FuvalParams,
    MethodSpec,
    ProxLinearAppC,
    RunConfig,
    ScalingScheme,
    Trace,
    Weighting,
    averaged_iterate,
    constant,
    resolve_scaling,
    run,
)
from .problems import Problem, objective, objective_grad, per_sample_values, sample_constants

TRACE_HEADER = ["t", "sample", "tau", "f", "subopt", "grad_sq", "stepsize"]
SENSITIVITY_HEADER = ["method", "scheme", "eta", "subopt_mean", "subopt_median", "diverged", "seconds"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class ReferenceSolution:
    """High-precision solve supplying w*, f*, and the per-sample optima."""

    w_star: np.ndarray
    f_star: float
    per_sample_f_star: np.ndarray
    grad_norm_at_solution: float
    sigma: float
    tol: float
    converged: bool = True


@dataclass(frozen=True)
class RateConstants:
    """Constants entering the convergence-bound right-hand sides."""

    l_max: float
    g_max: float | None
    g_sq_sum: float | None
    n: int
    gamma: float = 1.0
    c_penalty: float = 1.0

    @property
    def theta(self) -> float:
        return self.n / (self.n + 2.0 * self.gamma**2)

    def model_lipschitz(self, lam: float, delta: float, lipschitz: np.ndarray) -> float:
        """RMS Lipschitz constant of the linearized penalty models."""
        m = 1.0 + self.c_penalty * np.sqrt((lam / delta) * lipschitz**2 + 1.0)
        return float(np.sqrt(np.mean(m**2)))


def reference_solve(
    problem: Problem,
    tol: float = 1e-10,
    max_iters: int = 200_000,
    w0: np.ndarray | None = None,
) -> ReferenceSolution:
    """Full-batch gradient descent with backtracking line search until the
    gradient norm drops below tol.  Returns the best iterate flagged
    not-converged when the iteration cap is hit."""
    w = np.zeros(problem.dim) if w0 is None else w0.astype(float).copy()
    f = objective(problem, w)
    step = 1.0
    armijo = 0.5e-4
    for _ in range(max_iters):
        g = objective_grad(problem, w)
        g_norm = float(np.linalg.norm(g))
        if g_norm <= tol:
            break
        g_sq = g_norm * g_norm
        # backtracking halving with a little growth to recover long steps
        step = min(step * 2.0, 1e8)
        while True:
            f_new = objective(problem, w - step * g)
            if f_new <= f - armijo * step * g_sq or step < 1e-18:
                break
            step *= 0.5
        w = w - step * g
        f = f_new
    else:
        g_norm = float(np.linalg.norm(objective_grad(problem, w)))
        per_sample = per_sample_values(problem, w)
        consts = sample_constants(problem)
        return ReferenceSolution(
            w_star=w,
            f_star=f,
            per_sample_f_star=per_sample,
            grad_norm_at_solution=g_norm,
            sigma=f - float(np.mean(consts.inf_fi)),
            tol=tol,
            converged=False,
        )

    per_sample = per_sample_values(problem, w)
    consts = sample_constants(problem)
    return ReferenceSolution(
        w_star=w,
        f_star=f,
        per_sample_f_star=per_sample,
        grad_norm_at_solution=g_norm,
        sigma=f - float(np.mean(consts.inf_fi)),
        tol=tol,
        converged=True,
    )


# ---------------------------------------------------------------------------
# bound evaluation


class BoundKind(enum.Enum):
    SPS_PLUS_LIPSCHITZ = "sps_plus_lipschitz"  # G / sqrt(T) * ||w0 - w*||
    SPS_PLUS_SMOOTH = "sps_plus_smooth"  # 2 L / T * ||w0 - w*||^2
    FUVAL_SGD = "fuval_sgd"  # smooth convex rate with noise radius
    PROX_LINEAR = "prox_linear"  # inv-sqrt schedule rate


@dataclass(frozen=True)
class BoundReport:
    kind: BoundKind
    lhs: float
    rhs: float
    satisfied: bool
    note: str = ""


def evaluate_bounds(
    trace: Trace,
    reference: ReferenceSolution,
    constants: RateConstants,
    which: BoundKind,
    problem: Problem | None = None,
    w0: np.ndarray | None = None,
    lam: float | None = None,
    delta: float | None = None,
    s0: np.ndarray | None = None,
) -> BoundReport:
    """Compare a trace's empirical suboptimality against a proven bound."""
    T = int(trace.eval_t[-1])
    w_init = np.zeros(reference.w_star.shape) if w0 is None else w0
    dist0_sq = float(np.sum((w_init - reference.w_star) ** 2))

    if which is BoundKind.SPS_PLUS_LIPSCHITZ:
        if constants.g_max is None:
            return BoundReport(which, math.nan, math.nan, False, "G unavailable for this loss")
        lhs = float(np.nanmin(trace.subopt[1:]))
        rhs = constants.g_max * math.sqrt(dist0_sq) / math.sqrt(T)
        return BoundReport(which, lhs, rhs, lhs <= rhs)

    if which is BoundKind.SPS_PLUS_SMOOTH:
        lhs = float(np.nanmin(trace.subopt))
        rhs = 2.0 * constants.l_max * dist0_sq / T
        return BoundReport(which, lhs, rhs, lhs <= rhs)

    if which is BoundKind.FUVAL_SGD:
        if lam is None or delta is None or s0 is None or problem is None:
            raise ConfigurationError("fuval_sgd bound needs lam, delta, s0, and the problem")
        gamma = constants.gamma
        lam_L = lam * constants.l_max
        if not (0 < gamma < 1) or lam_L >= 0.5:
            return BoundReport(which, math.nan, math.nan, False, "hypotheses violated")
        s_star = reference.per_sample_f_star
        init = dist0_sq / lam + float(np.sum((s0 - s_star) ** 2)) / delta
        rhs = init / (2.0 * gamma * (1.0 - gamma) * (1.0 - lam_L) * T)
        rhs += reference.sigma * (gamma + lam_L * (1.0 - gamma)) / ((1.0 - gamma) * (1.0 - lam_L))
        w_bar = averaged_iterate(trace, Weighting.UNIFORM)
        lhs = objective(problem, w_bar) - reference.f_star
        return BoundReport(which, lhs, rhs, lhs <= rhs)

    # PROX_LINEAR
    if lam is None or delta is None or s0 is None or problem is None:
        raise ConfigurationError("prox_linear bound needs lam, delta, s0, and the problem")
    if constants.g_max is None:
        return BoundReport(which, math.nan, math.nan, False, "G unavailable for this loss")
    lipschitz = sample_constants(problem).lipschitz
    m_bar = constants.model_lipschitz(lam, delta, lipschitz)
    s_star = reference.per_sample_f_star
    init = dist0_sq / lam + float(np.sum((s0 - s_star) ** 2)) / delta
    rhs = init / (4.0 * (math.sqrt(T + 2) - 1.0))
    rhs += m_bar**2 * math.sqrt(lam * delta) * (1.0 + math.log(T + 1)) / (2.0 * math.sqrt(T + 2) - 2.0)
    w_bar = averaged_iterate(trace, Weighting.LAMBDA_WEIGHTED)
    lhs = objective(problem, w_bar) - reference.f_star
    return BoundReport(which, lhs, rhs, lhs <= rhs)


def rate_fit_slope(ts: np.ndarray, values: np.ndarray, floor: float = 1e-18) -> float:
    """Least-squares slope of log(value) against log(t)."""
    mask = ts > 0
    x = np.log(ts[mask].astype(float))
    y = np.log(np.maximum(values[mask], floor))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def min_so_far(values: np.ndarray) -> np.ndarray:
    return np.minimum.accumulate(values)


# ---------------------------------------------------------------------------
# grid search


@dataclass(frozen=True)
class SensitivityRow:
    method: str
    scheme: str
    eta: float
    subopt_mean: float
    subopt_median: float
    diverged: bool
    seconds: float


@dataclass
class SensitivityTable:
    rows: list[SensitivityRow] = field(default_factory=list)

    def best(self, method: str | None = None) -> float:
        vals = [
            r.subopt_mean
            for r in self.rows
            if not r.diverged and (method is None or r.method == method)
        ]
        return min(vals) if vals else math.inf


@dataclass(frozen=True)
class GridCell:
    method_family: str  # gd | sgd | fuval | fuval-full
    scheme: ScalingScheme | None
    eta: float


def _scheme_name(scheme: ScalingScheme | None) -> str:
    return scheme.value if scheme is not None else "-"


def build_method(
    family: str,
    eta: float,
    scheme: ScalingScheme | None,
    problem: Problem,
    w0: np.ndarray,
    gamma: float = 1.0,
    c_penalty: float = math.inf,
) -> MethodSpec:
    """Instantiate a method from a grid cell, resolving the scaling scheme."""
    if family == "gd":
        return GD(step=eta)
    if family == "sgd":
        return SGD(step=eta)
    if family in ("fuval", "fuval-full"):
        lam, delta = resolve_scaling(
            scheme if scheme is not None else ScalingScheme.NAIVE, eta, problem, w0
        )
        params = FuvalParams(
            lambda_schedule=constant(lam),
            delta_schedule=constant(delta),
            gamma=gamma,
            c_penalty=c_penalty,
        )
        return Fuval(params) if family == "fuval" else FuvalFullBatch(params)
    raise ConfigurationError(f"unknown method family {family!r}")


def _run_cell(args) -> tuple[GridCell, float, float, bool, float]:
    problem, reference, cell, iterations, epochs, seeds, eval_every = args
    w0 = np.zeros(problem.dim)
    finals = []
    t_start = time.perf_counter()
    diverged = False
    for seed in seeds:
        try:
            method = build_method(cell.method_family, cell.eta, cell.scheme, problem, w0)
        except ConfigurationError:
            diverged = True
            break
        trace = run(
            problem,
            method,
            RunConfig(
                iterations=iterations,
                epochs=epochs,
                seed=seed,
                reference=reference,
                eval_every=eval_every,
            ),
        )
        if trace.diverged or not math.isfinite(trace.final_subopt()):
            diverged = True
            break
        finals.append(trace.final_subopt())
    seconds = time.perf_counter() - t_start
    if diverged:
        return cell, math.inf, math.inf, True, seconds
    return cell, float(np.mean(finals)), float(np.median(finals)), False, seconds


def grid_search(
    problem: Problem,
    reference: ReferenceSolution,
    families: list[str],
    schemes: list[ScalingScheme],
    eta_grid: np.ndarray,
    iterations: int | None = None,
    epochs: int | None = None,
    seeds: list[int] | None = None,
    eval_every: int = 1_000_000,
    jobs: int = 1,
) -> SensitivityTable:
    """Sensitivity sweep: one row per (method, scheme, eta).

    GD and SGD have no scaling scheme; the slack-learning families get one
    row per scheme.  Divergence is recorded as an infinite row, never raised.
    """
    etas = np.asarray(eta_grid, dtype=float)
    if etas.size == 0:
        raise ConfigurationError("eta grid must be nonempty")
    if np.unique(etas).size != etas.size:
        raise ConfigurationError("duplicate eta in grid")
    seeds = seeds or [0]

    cells = []
    for family in families:
        cell_schemes = [None] if family in ("gd", "sgd") else schemes
        for scheme in cell_schemes:
            for eta in np.sort(etas):
                cells.append(GridCell(family, scheme, float(eta)))

    args = [(problem, reference, c, iterations, epochs, seeds, eval_every) for c in cells]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, args))
    else:
        results = [_run_cell(a) for a in args]

    results.sort(key=lambda r: (r[0].method_family, _scheme_name(r[0].scheme), r[0].eta))
    table = SensitivityTable()
    for cell, mean, median, diverged, seconds in results:
        table.rows.append(
            SensitivityRow(
                method=cell.method_family,
                scheme=_scheme_name(cell.scheme),
                eta=cell.eta,
                subopt_mean=mean,
                subopt_median=median,
                diverged=diverged,
                seconds=seconds,
            )
        )
    return table


# ---------------------------------------------------------------------------
# CSV export


def trace_csv(trace: Trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for k in range(trace.eval_t.size):
        writer.writerow(
            [
                int(trace.eval_t[k]),
                int(trace.sample[k]),
                _fmt(trace.tau[k]),
                _fmt(trace.f[k]),
                _fmt(trace.subopt[k]),
                _fmt(trace.grad_sq[k]),
                _fmt(trace.stepsize[k]),
            ]
        )
    return buf.getvalue()


def sensitivity_csv(table: SensitivityTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SENSITIVITY_HEADER)
    for r in table.rows:
        writer.writerow(
            [
                r.method,
                r.scheme,
                _fmt(r.eta),
                _fmt(r.subopt_mean),
                _fmt(r.subopt_median),
                int(r.diverged),
                _fmt(r.seconds),
            ]
        )
    return buf.getvalue()


def meta_sidecar(meta: dict) -> str:
    keys = [
        "seed",
        "T",
        "gamma",
        "c",
        "lambda_base",
        "delta_base",
        "scheme",
        "reference_f_star",
        "reference_tol",
    ]
    lines = []
    for key in keys:
        if key in meta:
            value = meta[key]
            lines.append(f"{key}={_fmt(value) if isinstance(value, float) else value}")
    for key, value in meta.items():
        if key not in keys:
            lines.append(f"{key}={_fmt(value) if isinstance(value, float) else value}")
    return "\n".join(lines) + "\n"


def export_csv(obj: Trace | SensitivityTable, path) -> None:
    """Write a trace or sensitivity table (and a .meta sidecar for traces)."""
    from pathlib import Path

    path = Path(path)
    try:
        if isinstance(obj, Trace):
            path.write_text(trace_csv(obj))
            path.with_suffix(".meta").write_text(meta_sidecar(obj.meta))
        else:
            path.write_text(sensitivity_csv(obj))
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc
