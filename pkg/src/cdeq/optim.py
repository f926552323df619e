"""Smooth unconstrained minimization for the filter design stages.

BFGS with a backtracking Armijo line search.  Deterministic, monotone in
cost, and small enough (a few hundred variables per band) that dense
inverse-Hessian updates are fine.  Box-type constraints are handled by
the caller through reparameterization, not here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

CostAndGradient = Callable[[NDArray[np.float64]], tuple[float, NDArray[np.float64]]]


class DivergenceError(RuntimeError):
    """Non-finite cost or gradient; carries the last good iterate."""

    def __init__(self, message: str, last_iterate: NDArray[np.float64]):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8   # infinity norm
    initial_step: float = 1.0
    backtracking_factor: float = 0.5
    sufficient_decrease: float = 1e-4

    def __post_init__(self) -> None:
        if self.max_iterations <= 0 or self.gradient_tolerance <= 0 \
                or self.initial_step <= 0 or self.sufficient_decrease <= 0:
            raise ValueError("all optimizer settings must be positive")
        if not (0.0 < self.backtracking_factor < 1.0):
            raise ValueError("backtracking_factor must lie in (0, 1)")


@dataclass(frozen=True)
class OptimizationReport:
    iterations: int
    initial_cost: float
    final_cost: float
    final_gradient_norm: float
    termination: str

    def __post_init__(self) -> None:
        if self.final_cost > self.initial_cost:
            raise ValueError("final cost must not exceed initial cost")


def minimize(cost_and_gradient: CostAndGradient, x0,
             settings: OptimizerSettings | None = None
             ) -> tuple[NDArray[np.float64], OptimizationReport]:
    """Minimize a smooth function from ``x0``; returns the best iterate.

    The cost sequence is non-increasing by construction: a step is taken
    only when the Armijo sufficient-decrease test passes.  Terminates on
    the gradient tolerance, the iteration cap, or a stalled line search.
    Raises :class:`DivergenceError` if the cost or gradient turns
    non-finite at an accepted point.
    """
    if settings is None:
        settings = OptimizerSettings()
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1:
        raise ValueError("x0 must be a 1-D real vector")
    n = x.size
    cost, grad = _evaluate(cost_and_gradient, x, x)
    initial_cost = cost
    h_inv = np.eye(n)
    termination = "max_iterations"
    iterations = 0
    for iteration in range(settings.max_iterations):
        gnorm = float(np.max(np.abs(grad))) if n else 0.0
        if gnorm <= settings.gradient_tolerance:
            termination = "gradient_tolerance"
            break
        direction = -h_inv @ grad
        slope = float(direction @ grad)
        if slope >= 0.0:  # secant model lost descent; restart from steepest
            h_inv = np.eye(n)
            direction = -grad
            slope = -float(grad @ grad)
        step = settings.initial_step
        accepted = False
        for _ in range(60):
            x_new = x + step * direction
            cost_new, grad_new = cost_and_gradient(x_new)
            if np.isfinite(cost_new) and \
                    cost_new <= cost + settings.sufficient_decrease * step * slope:
                accepted = True
                break
            step *= settings.backtracking_factor
        if not accepted:
            termination = "line_search_failure"
            break
        if not np.all(np.isfinite(grad_new)):
            raise DivergenceError("gradient became non-finite", x)
        s = x_new - x
        y = grad_new - grad
        sy = float(s @ y)
        if sy > 1e-12:
            if iteration == 0:
                h_inv *= sy / float(y @ y)
            rho = 1.0 / sy
            v = np.eye(n) - rho * np.outer(s, y)
            h_inv = v @ h_inv @ v.T + rho * np.outer(s, s)
        x, cost, grad = x_new, float(cost_new), grad_new
        iterations = iteration + 1
    report = OptimizationReport(
        iterations=iterations,
        initial_cost=float(initial_cost),
        final_cost=float(cost),
        final_gradient_norm=float(np.max(np.abs(grad))) if n else 0.0,
        termination=termination,
    )
    return x, report


def _evaluate(fn: CostAndGradient, x, last_good):
    cost, grad = fn(x)
    grad = np.asarray(grad, dtype=float)
    if not np.isfinite(cost) or not np.all(np.isfinite(grad)):
        raise DivergenceError("cost or gradient non-finite at start",
                              np.asarray(last_good, dtype=float))
    return float(cost), grad


def check_gradient(cost_and_gradient: CostAndGradient, x,
                   h: float = 1e-6) -> float:
    """Worst per-coordinate relative error of the analytic gradient
    against central differences with step ``h``."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    _, grad = cost_and_gradient(x)
    grad = np.asarray(grad, dtype=float)
    worst = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        f_plus, _ = cost_and_gradient(x + e)
        f_minus, _ = cost_and_gradient(x - e)
        numeric = (f_plus - f_minus) / (2.0 * h)
        scale = max(abs(numeric), abs(grad[i]), 1e-10)
        worst = max(worst, abs(numeric - grad[i]) / scale)
    return worst
