"""Finite-sum objectives: sparse examples, per-sample loss oracles, and constants.

All oracles are pure functions of (problem, i, w) and safe for concurrent
read-only use.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ContractViolation(ValueError):
    """Raised when an oracle is called with arguments violating its contract."""


class LossKind(enum.Enum):
    LOGISTIC = "logistic"
    LEAST_SQUARES = "least_squares"


@dataclass(frozen=True)
class SparseExample:
    """One row of the dataset: a label and a sparse feature vector.

    Feature indices are 1-based (LIBSVM convention) and strictly increasing.
    """

    label: float
    indices: np.ndarray  # int64, 1-based, strictly increasing
    values: np.ndarray  # float64, same length as indices
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape:
            raise ContractViolation("indices and values must have equal length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 1):
            raise ContractViolation("feature indices must be >= 1 and strictly increasing")
        if self.dim < 1 or (idx.size and idx[-1] > self.dim):
            raise ContractViolation("feature index exceeds declared dimension")
        if not np.all(np.isfinite(val)) or not math.isfinite(self.label):
            raise ContractViolation("labels and feature values must be finite")

    def dot(self, w: np.ndarray) -> float:
        if self.indices.size == 0:
            return 0.0
        return float(self.values @ w[self.indices - 1])

    def norm_sq(self) -> float:
        return float(self.values @ self.values)

    def dense(self) -> np.ndarray:
        x = np.zeros(self.dim)
        x[self.indices - 1] = self.values
        return x


@dataclass(frozen=True)
class Problem:
    """Finite-sum objective: the mean of per-sample losses over the examples."""

    examples: list[SparseExample]
    loss_kind: LossKind
    dim: int = field(default=0)

    def __post_init__(self):
        if not self.examples:
            raise ContractViolation("a problem needs at least one example")
        d = self.dim or max(e.dim for e in self.examples)
        object.__setattr__(self, "dim", d)
        for e in self.examples:
            if e.dim != d:
                raise ContractViolation("all examples must share the problem dimension")

    @property
    def n(self) -> int:
        return len(self.examples)


@dataclass(frozen=True)
class SampleConstants:
    """Per-sample Lipschitz/smoothness constants and per-sample infima."""

    lipschitz: np.ndarray | None  # G_i, None when unavailable (least squares)
    smoothness: np.ndarray  # L_i
    g_max: float | None
    l_max: float
    inf_fi: np.ndarray

    @property
    def g_sq_sum(self) -> float | None:
        if self.lipschitz is None:
            return None
        return float(np.sum(self.lipschitz**2))


def _log1pexp(z: float) -> float:
    # max(z,0) + log1p(exp(-|z|)) avoids overflow for |z| > ~30
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _check_args(problem: Problem, i: int, w: np.ndarray) -> SparseExample:
    if not (1 <= i <= problem.n):
        raise ContractViolation(f"sample index {i} out of range [1, {problem.n}]")
    if w.shape != (problem.dim,):
        raise ContractViolation(f"w has shape {w.shape}, expected ({problem.dim},)")
    return problem.examples[i - 1]


def loss_value(problem: Problem, i: int, w: np.ndarray) -> float:
    """Value of the i-th loss term at w (i is 1-based)."""
    ex = _check_args(problem, i, w)
    z = ex.dot(w)
    if problem.loss_kind is LossKind.LOGISTIC:
        return _log1pexp(-ex.label * z)
    return 0.5 * (z - ex.label) ** 2


def loss_grad(problem: Problem, i: int, w: np.ndarray) -> np.ndarray:
    """Dense gradient of the i-th loss term at w."""
    ex = _check_args(problem, i, w)
    z = ex.dot(w)
    if problem.loss_kind is LossKind.LOGISTIC:
        coef = -ex.label * _sigmoid(-ex.label * z)
    else:
        coef = z - ex.label
    g = np.zeros(problem.dim)
    if ex.indices.size:
        g[ex.indices - 1] = coef * ex.values
    return g


def loss_grad_coef(problem: Problem, i: int, w: np.ndarray) -> float:
    """Scalar c such that grad f_i(w) = c * x_i. Used by the run loop."""
    ex = _check_args(problem, i, w)
    z = ex.dot(w)
    if problem.loss_kind is LossKind.LOGISTIC:
        return -ex.label * _sigmoid(-ex.label * z)
    return z - ex.label


def dense_data(problem: Problem) -> tuple[np.ndarray, np.ndarray]:
    """Dense (X, y) view of the examples, cached on the problem."""
    cached = getattr(problem, "_dense_xy", None)
    if cached is None:
        x = np.zeros((problem.n, problem.dim))
        for row, ex in enumerate(problem.examples):
            if ex.indices.size:
                x[row, ex.indices - 1] = ex.values
        y = np.array([ex.label for ex in problem.examples])
        cached = (x, y)
        object.__setattr__(problem, "_dense_xy", cached)
    return cached


def per_sample_values(problem: Problem, w: np.ndarray) -> np.ndarray:
    """All n loss values at w in one vectorized pass."""
    x, y = dense_data(problem)
    z = x @ w
    if problem.loss_kind is LossKind.LOGISTIC:
        m = -y * z
        return np.maximum(m, 0.0) + np.log1p(np.exp(-np.abs(m)))
    return 0.5 * (z - y) ** 2


def objective(problem: Problem, w: np.ndarray) -> float:
    """Mean of per-sample loss values."""
    return float(np.mean(per_sample_values(problem, w)))


def objective_grad(problem: Problem, w: np.ndarray) -> np.ndarray:
    """Mean of per-sample gradients."""
    x, y = dense_data(problem)
    z = x @ w
    if problem.loss_kind is LossKind.LOGISTIC:
        m = -y * z
        sig = np.where(m >= 0, 1.0 / (1.0 + np.exp(-np.abs(m))), 0.0)
        neg = m < 0
        e = np.exp(m[neg]) if np.any(neg) else None
        if e is not None:
            sig[neg] = e / (1.0 + e)
        coef = -y * sig
    else:
        coef = z - y
    return (x.T @ coef) / problem.n


def sample_constants(problem: Problem) -> SampleConstants:
    """Per-sample Lipschitz and smoothness constants for the built-in losses.

    Logistic: G_i = ||x_i||, L_i = ||x_i||^2 / 4.  Least squares is not
    Lipschitz so G_i is unavailable; L_i = ||x_i||^2.  Both losses have
    per-sample infimum 0.
    """
    norms_sq = np.array([e.norm_sq() for e in problem.examples])
    inf_fi = np.zeros(problem.n)
    if problem.loss_kind is LossKind.LOGISTIC:
        lip = np.sqrt(norms_sq)
        smooth = norms_sq / 4.0
        return SampleConstants(
            lipschitz=lip,
            smoothness=smooth,
            g_max=float(np.max(lip)),
            l_max=float(np.max(smooth)),
            inf_fi=inf_fi,
        )
    return SampleConstants(
        lipschitz=None,
        smoothness=norms_sq,
        g_max=None,
        l_max=float(np.max(norms_sq)),
        inf_fi=inf_fi,
    )
