"""High-accuracy centralized solutions used as ground truth for metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..objectives import LocalObjective, QuadraticFamily, SpectralConstants

__all__ = ["ReferenceSolution", "solve_reference", "stacked_grad_norm"]


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    grad_norm_at_star: float
    iterations: int = 0

    def as_dict(self) -> dict:
        return {
            "f_star": self.f_star,
            "grad_norm_at_star": self.grad_norm_at_star,
            "x_star_norm": float(np.linalg.norm(self.x_star)),
            "iterations": self.iterations,
        }


def stacked_grad_norm(obj: LocalObjective, x: np.ndarray) -> float:
    """Frobenius norm of ``[grad f_1(x), ..., grad f_n(x)]``."""
    return math.sqrt(sum(float(np.sum(obj.gradient(i, x) ** 2)) for i in range(obj.n)))


def solve_reference(
    obj: LocalObjective,
    constants: SpectralConstants,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    x0: np.ndarray | None = None,
) -> ReferenceSolution:
    """Minimize ``f`` centrally with Nesterov's constant-momentum method.

    Stops when ``||grad f(x)|| <= tol (1 + ||x||)``.  The quadratic family
    returns its analytic optimum ``x* = 0``.

    Raises:
        RuntimeError: if ``max_iter`` iterations do not reach ``tol``.
    """
    if isinstance(obj, QuadraticFamily):
        x = np.zeros(obj.d)
        return ReferenceSolution(x, 0.0, 0.0)
    L, mu = constants.L_f, constants.mu_f
    q = math.sqrt(mu / L)
    beta = (1.0 - q) / (1.0 + q)
    x = np.zeros(obj.d) if x0 is None else np.array(x0, dtype=float)
    y = x.copy()
    for it in range(1, max_iter + 1):
        g = obj.grad_f(y)
        x_new = y - g / L
        y = x_new + beta * (x_new - x)
        x = x_new
        if it % 10 == 0:
            gx = obj.grad_f(x)
            if np.linalg.norm(gx) <= tol * (1.0 + np.linalg.norm(x)):
                return ReferenceSolution(x, obj.f(x), stacked_grad_norm(obj, x), it)
    raise RuntimeError(f"reference solve did not reach tol={tol} within {max_iter} iterations")
