"""Class templates: uniform averages and optimally weighted averages.

A template summarizes one class as a convex combination of its training
images.  The weighted variant minimizes the total squared reconstruction
error

    E(w) = sum_i || a_i - sum_j w_j a_j ||^2

over the simplex {w : sum w_i = 1, w_i >= eps}, where a_i are the
vectorized training images.  The objective is a convex quadratic with
linear constraints, so projected gradient descent with an exact
sorting-based simplex projection reaches the same KKT point a general
SQP solver would.  Uniform weights zero the gradient identically
(grad E = 2 G (N w - 1) with G = A^T A), so the optimized template
coincides with the plain average up to round-off; the solver is kept
honest by explicit KKT residual checks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConvergenceError

logger = logging.getLogger(__name__)

# Lower bound for the inequality constraint w_i >= WEIGHT_EPSILON.
WEIGHT_EPSILON = 1e-10
# Tolerance on |sum(w) - 1| for a vector to count as valid weights.
WEIGHT_SUM_TOL = 1e-9

_POWER_ITERATIONS = 50
_MAX_ITERATIONS = 10_000
_STEP_TOLERANCE = 1e-10
_KKT_TOLERANCE = 1e-7


@dataclass
class ClassTemplate:
    """Per-class template matrix plus the weights that produced it."""

    label: str
    matrix: np.ndarray
    weights: np.ndarray
    method: str  # "uniform" or "optimized"


def _stack(images: Sequence) -> np.ndarray:
    if len(images) == 0:
        raise ValueError("need at least one image")
    arrays = [np.asarray(im, dtype=np.float64) for im in images]
    shape = arrays[0].shape
    if len(shape) != 2:
        raise ValueError("images must be 2-D matrices")
    for arr in arrays[1:]:
        if arr.shape != shape:
            raise ValueError(f"image dimension mismatch: {arr.shape} vs {shape}")
    return np.stack(arrays)


def check_weights(weights, n: int | None = None) -> np.ndarray:
    """Validate simplex feasibility of a weight vector and return it."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or (n is not None and w.size != n):
        raise ValueError(f"expected a length-{n} weight vector, got shape {w.shape}")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    if w.min() < WEIGHT_EPSILON:
        raise ValueError(f"weight {w.min()!r} below lower bound {WEIGHT_EPSILON}")
    return w


def project_to_weight_simplex(point, lower: float = WEIGHT_EPSILON) -> np.ndarray:
    """Euclidean projection onto {w : sum(w) = 1, w_i >= lower}.

    Shifts by the lower bound, projects onto the scaled standard simplex
    with the classic sort/threshold rule, and shifts back.
    """
    v = np.asarray(point, dtype=np.float64)
    n = v.size
    budget = 1.0 - n * lower
    if budget < 0.0:
        raise ValueError(f"lower bound {lower} infeasible for dimension {n}")
    shifted = v - lower
    u = np.sort(shifted)[::-1]
    cumulative = np.cumsum(u) - budget
    positions = np.arange(1, n + 1)
    support = np.nonzero(u - cumulative / positions > 0.0)[0]
    if support.size == 0:
        # Degenerate budget: everything sits at the lower bound.
        return np.full(n, lower)
    rho = support[-1]
    theta = cumulative[rho] / (rho + 1.0)
    return np.maximum(shifted - theta, 0.0) + lower


def reconstruction_error(images: Sequence, weights) -> float:
    """E(w): total squared error of every image against the weighted template."""
    stacked = _stack(images)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (stacked.shape[0],):
        raise ValueError("one weight per image required")
    template = np.tensordot(w, stacked, axes=1)
    diff = stacked - template
    return float((diff * diff).sum())


def reconstruction_gradient(images: Sequence, weights) -> np.ndarray:
    """Gradient of E at ``weights``: 2 N G w - 2 G 1 with G the Gram matrix."""
    stacked = _stack(images)
    n = stacked.shape[0]
    w = np.asarray(weights, dtype=np.float64)
    columns = stacked.reshape(n, -1).T
    gram = columns.T @ columns
    return 2.0 * (n * (gram @ w) - gram.sum(axis=1))


def _dominant_eigenvalue(sym: np.ndarray, iterations: int = _POWER_ITERATIONS) -> float:
    n = sym.shape[0]
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(iterations):
        y = sym @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
    return float(x @ (sym @ x))


def _kkt_residual(w: np.ndarray, grad: np.ndarray, lower: float) -> float:
    # Stationarity with multiplier estimates: grad_i = lambda on free
    # coordinates, grad_i >= lambda where the lower bound is active.
    active = w <= lower + 1e-12
    free = ~active
    primal = abs(float(w.sum()) - 1.0)
    bound = max(0.0, lower - float(w.min()))
    if free.any():
        lam = float(grad[free].mean())
        stationarity = float(np.max(np.abs(grad[free] - lam)))
    else:
        lam = float(grad.min())
        stationarity = 0.0
    complementarity = float(max(0.0, np.max(lam - grad[active]))) if active.any() else 0.0
    return max(stationarity, complementarity, primal, bound)


def optimize_weights(
    images: Sequence,
    max_iterations: int = _MAX_ITERATIONS,
    step_tolerance: float = _STEP_TOLERANCE,
    kkt_tolerance: float = _KKT_TOLERANCE,
) -> np.ndarray:
    """Minimize E(w) over the weight simplex, starting from uniform weights.

    Projected gradient descent with step 1/L, where L = 2 N lmax(G) is the
    gradient's Lipschitz constant and lmax is estimated by power iteration.
    Stops once the infinity-norm step drops below ``step_tolerance``;
    raises :class:`ConvergenceError` (carrying the final KKT residual) if
    the iteration cap is hit first or the converged iterate fails the KKT
    check.
    """
    stacked = _stack(images)
    n = stacked.shape[0]
    uniform = np.full(n, 1.0 / n)
    if n == 1:
        return np.array([1.0])
    columns = stacked.reshape(n, -1).T
    gram = columns.T @ columns
    gram_row_sums = gram.sum(axis=1)  # G @ ones
    lipschitz = 2.0 * n * _dominant_eigenvalue(gram)
    if lipschitz <= 0.0:
        # Zero Gram matrix: E is constant and uniform weights are optimal.
        return uniform
    step = 1.0 / lipschitz

    w = uniform
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        grad = 2.0 * (n * (gram @ w) - gram_row_sums)
        w_next = project_to_weight_simplex(w - step * grad, WEIGHT_EPSILON)
        delta = float(np.max(np.abs(w_next - w)))
        w = w_next
        if delta < step_tolerance:
            converged = True
            break

    grad = 2.0 * (n * (gram @ w) - gram_row_sums)
    residual = _kkt_residual(w, grad, WEIGHT_EPSILON)
    if not converged:
        raise ConvergenceError(
            f"weight optimization hit the {max_iterations}-iteration cap "
            f"(final KKT residual {residual:.3e})"
        )
    if residual > kkt_tolerance:
        raise ConvergenceError(
            f"weight optimization stalled with KKT residual {residual:.3e} "
            f"> {kkt_tolerance:.0e} after {iterations} iteration(s)"
        )
    logger.debug("weights converged in %d iteration(s), KKT residual %.3e", iterations, residual)
    return w


def uniform_template(images: Sequence, label: str) -> ClassTemplate:
    """Plain average of the training images with weights 1/N."""
    stacked = _stack(images)
    n = stacked.shape[0]
    matrix = np.clip(stacked.mean(axis=0), 0.0, 1.0)
    return ClassTemplate(label, matrix, np.full(n, 1.0 / n), "uniform")


def optimized_template(images: Sequence, label: str) -> ClassTemplate:
    """Weighted average with weights from :func:`optimize_weights`."""
    weights = optimize_weights(images)
    stacked = _stack(images)
    matrix = np.clip(np.tensordot(weights, stacked, axes=1), 0.0, 1.0)
    return ClassTemplate(label, matrix, weights, "optimized")


def make_template(images: Sequence, label: str, method: str) -> ClassTemplate:
    if method == "uniform":
        return uniform_template(images, label)
    if method == "optimized":
        return optimized_template(images, label)
    raise ValueError(f"unknown template method: {method!r}")


def weight_divergence(a, b) -> float:
    """Signed sum of coordinate differences between two weight vectors.

    Identically zero in exact arithmetic whenever both vectors lie on the
    simplex; the float result measures accumulated round-off.  Report it
    together with the max-abs coordinate difference, which is the
    informative closeness measure.
    """
    wa = np.asarray(a, dtype=np.float64)
    wb = np.asarray(b, dtype=np.float64)
    if wa.shape != wb.shape:
        raise ValueError(f"weight length mismatch: {wa.shape} vs {wb.shape}")
    return float(np.sum(wa - wb))
