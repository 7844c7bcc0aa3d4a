"""Riemannian gradient descent on the partitioned subspace manifold."""
import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from psman.errors import ConfigError, RankDeficient, ShapeMismatch
from psman.manifold import (
    PSPoint,
    lift_euclidean_gradient,
    representative,
    retract_qr,
    subspace_distance,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossProblem:
    """A differentiable loss of the n x k representative.

    Both callables receive the representative matrix ``y`` (first k columns of
    the point). ``euclidean_grad`` returns the ambient gradient, shape (n, k);
    the optimizer owns the tangent projection.
    """

    loss: Callable[[np.ndarray], float]
    euclidean_grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OptimizerConfig:
    alpha: float = 1e-2
    max_iters: int = 5000
    tol: float = 1e-8
    backtracking: bool = True
    shrink: float = 0.5
    max_halvings: int = 30
    # sufficient decrease: accept when loss_new <= loss - armijo * alpha * ||delta||^2
    armijo: float = 1e-4

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol >= 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol}")
        if not 0 < self.shrink < 1:
            raise ConfigError(f"shrink must lie in (0, 1), got {self.shrink}")
        if self.max_halvings < 0:
            raise ConfigError(f"max_halvings must be >= 0, got {self.max_halvings}")
        if not 0 <= self.armijo < 1:
            raise ConfigError(f"armijo must lie in [0, 1), got {self.armijo}")


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    STEP_FAILURE = "StepFailure"


@dataclass
class OptimizeReport:
    final: PSPoint
    loss_trace: list = field(default_factory=list)
    grad_norm_trace: list = field(default_factory=list)
    iterations: int = 0
    termination: Termination = Termination.MAX_ITERS

    @property
    def converged(self):
        return self.termination is Termination.CONVERGED


def _step(problem, point, delta, loss, config):
    """Try a retraction step, shrinking alpha until the loss decreases enough.

    Returns ``(candidate, candidate_loss)``; ``candidate`` is None when the
    halving budget runs out, and equal to ``point`` when the surviving step
    is already below the convergence tolerance.
    """
    alpha = config.alpha
    attempts = config.max_halvings + 1 if config.backtracking else 1
    slope = delta.norm() ** 2
    for _ in range(attempts):
        try:
            candidate = retract_qr(point, delta, alpha)
        except RankDeficient:
            alpha *= config.shrink
            continue
        candidate_loss = float(problem.loss(representative(candidate)))
        if not config.backtracking or candidate_loss <= loss - config.armijo * alpha * slope:
            return candidate, candidate_loss
        if subspace_distance(point, candidate) <= config.tol:
            # the step no longer moves the point; round-off decides the sign
            return point, loss
        alpha *= config.shrink
    return None, loss


def minimize(problem, start, config=None, callback=None):
    """Minimize ``problem`` over the manifold of ``start``.

    Each iteration projects the ambient gradient onto the tangent space,
    retracts ``q - alpha * delta`` through a positive-diagonal QR, and stops
    once consecutive iterates are within ``config.tol`` in
    :func:`subspace_distance`.

    Parameters
    ----------
    problem : LossProblem
    start : PSPoint
    config : OptimizerConfig, optional
    callback : callable, optional
        Called as ``callback(iteration, point, loss, grad_norm)`` after every
        accepted step.

    Returns
    -------
    OptimizeReport
    """
    config = config or OptimizerConfig()
    spec = start.spec
    point = start
    loss = float(problem.loss(representative(point)))
    report = OptimizeReport(final=point, loss_trace=[loss])

    for iteration in range(1, config.max_iters + 1):
        grad = np.asarray(problem.euclidean_grad(representative(point)), dtype=np.float64)
        if grad.shape != (spec.n, spec.k):
            raise ShapeMismatch(f"gradient must be {spec.n}x{spec.k}, got {grad.shape}")
        delta = lift_euclidean_gradient(point, grad)
        grad_norm = delta.norm()
        report.grad_norm_trace.append(grad_norm)

        candidate, candidate_loss = _step(problem, point, delta, loss, config)
        report.iterations = iteration
        if candidate is None:
            report.termination = Termination.STEP_FAILURE
            logger.warning("step failure at iteration %d", iteration)
            return report

        moved = subspace_distance(point, candidate)
        point, loss = candidate, candidate_loss
        report.final = point
        report.loss_trace.append(loss)
        if callback is not None:
            callback(iteration, point, loss, grad_norm)
        if moved <= config.tol:
            report.termination = Termination.CONVERGED
            return report

    report.termination = Termination.MAX_ITERS
    return report


def finite_difference_grad(problem, p, h=1e-6):
    """Central-difference gradient of the loss w.r.t. each representative entry.

    ``p`` may be a :class:`PSPoint` or an n x k matrix. The result is the
    ambient gradient, comparable with ``problem.euclidean_grad`` before any
    tangent projection.
    """
    if h <= 0:
        raise ConfigError("h must be > 0")
    y = representative(p) if isinstance(p, PSPoint) else np.array(p, dtype=np.float64)
    grad = np.empty_like(y)
    for idx in np.ndindex(*y.shape):
        orig = y[idx]
        y[idx] = orig + h
        plus = problem.loss(y)
        y[idx] = orig - h
        minus = problem.loss(y)
        y[idx] = orig
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(a, b, scale=None):
    """``||a - b|| / max(||a||, ||b||)``, zero when both vanish.

    Pass ``scale`` to measure against a fixed reference norm instead, e.g. the
    ambient gradient norm when comparing projections that may cancel.
    """
    if scale is None:
        scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / scale)
