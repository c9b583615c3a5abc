"""Consensus subspace, exact projection and gossip averaging.

Parameter matrices are ``d x n`` arrays whose columns are the agents' local
copies.  The consensus subspace holds matrices with identical columns; the
orthogonal projection onto it replaces every column with the column mean.
"""

from __future__ import annotations

import math

import numpy as np

from .topology import MixingSchedule

__all__ = [
    "project_consensus",
    "distance_to_consensus",
    "run_consensus",
    "rounds_needed",
    "DELTA_FLOOR",
]

DELTA_FLOOR = 1e-15


def project_consensus(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=1, keepdims=True)
    return np.repeat(mean, X.shape[1], axis=1)


def distance_to_consensus(X: np.ndarray) -> float:
    """Frobenius distance from ``X`` to the consensus subspace."""
    X = np.asarray(X, dtype=float)
    return float(np.linalg.norm(X - X.mean(axis=1, keepdims=True)))


def run_consensus(
    X0: np.ndarray, s: MixingSchedule, k_start: int, m: int
) -> tuple[np.ndarray, int]:
    """Run ``m`` synchronous gossip rounds ``X <- X W(k)``.

    Rounds use ``W(k_start), ..., W(k_start + m - 1)``.  Returns the final
    matrix and the number of rounds performed.  The column mean of ``X0`` is
    preserved because every ``W(k)`` is doubly stochastic.
    """
    X = np.array(X0, dtype=float)
    if X.ndim != 2 or X.shape[1] != s.n:
        raise ValueError(f"parameter matrix shape {X.shape} does not match schedule with n={s.n}")
    if m < 0:
        raise ValueError(f"number of rounds must be nonnegative, got {m}")
    if k_start < 0:
        raise ValueError(f"k_start must be nonnegative, got {k_start}")
    for k in range(k_start, k_start + m):
        X = X @ s.matrix(k)
    return X, m


def rounds_needed(r0: float, eps: float, delta_hat: float, B: int) -> int:
    """Gossip rounds that shrink a consensus error ``r0`` below ``eps``.

    Returns ``B * ceil(log(r0/eps) / log(1/delta_hat))``: the smallest whole
    number of ``B``-windows whose guaranteed contraction ``delta_hat**windows``
    reaches the target.  Zero when ``r0 <= eps``.
    """
    if not 0.0 < delta_hat < 1.0:
        raise ValueError(f"delta_hat must lie in (0, 1), got {delta_hat}")
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if r0 < 0.0:
        raise ValueError(f"r0 must be nonnegative, got {r0}")
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    if r0 <= eps:
        return 0
    windows = math.log(r0 / eps) / math.log(1.0 / delta_hat)
    # absorb rounding in the log ratio (log(8)/log(2) may land a hair above 3)
    return B * max(0, math.ceil(windows - 1e-9))
