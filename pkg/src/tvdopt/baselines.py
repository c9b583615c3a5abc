"""Gradient-tracking and EXTRA reference methods on the same schedules.

DIGing (Nedic, Olshevsky, Shi 2017)::

    X_{k+1} = X_k W(k) - alpha Y_k
    Y_{k+1} = Y_k W(k) + grad F(X_{k+1}) - grad F(X_k),    Y_0 = grad F(X_0)

EXTRA (Shi, Ling, Wu, Yin 2015), with ``Wt = (I + W)/2``::

    X_1     = X_0 W - alpha grad F(X_0)
    X_{k+2} = X_{k+1} (I + W) - X_k Wt - alpha (grad F(X_{k+1}) - grad F(X_k))

On a time-varying schedule EXTRA step ``k`` mixes with ``W(k)`` and reuses
the mixed matrix ``X_{k-1} W(k-1)`` from the previous step for the ``Wt``
term, so each iteration costs one round.  DIGing costs two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import LocalObjective, SpectralConstants
from .optimizers import Reference, Trajectory, TrajectoryRecorder, _check_dims, _replicate

__all__ = ["TrackerState", "diging", "extra", "diging_default_step", "extra_default_step"]

DIGING_STEP_CONSTANT = 1.0


@dataclass
class TrackerState:
    X: np.ndarray
    G_prev: np.ndarray
    alpha: float
    Y: np.ndarray | None = None


def diging_default_step(constants: SpectralConstants, delta_hat: float, C: float = DIGING_STEP_CONSTANT) -> float:
    """Conservative DIGing step ``mu_hat (1 - delta_hat)^2 / (C L_max^2)``."""
    return constants.mu_hat * (1.0 - delta_hat) ** 2 / (C * constants.L_max**2)


def extra_default_step(constants: SpectralConstants) -> float:
    return 1.0 / (2.0 * constants.L_max)


def diging(
    obj: LocalObjective,
    schedule,
    x0: np.ndarray,
    alpha: float,
    N: int,
    reference: Reference | None = None,
    k_start: int = 0,
    keep_iterates: bool = False,
    method: str = "diging",
    track: list[np.ndarray] | None = None,
) -> Trajectory:
    """Run ``N`` DIGing iterations from the consensual start ``x0``.

    If ``track`` is a list, the tracker ``Y_k`` is appended to it at every
    iteration (including ``k = 0``).
    """
    _check_dims(obj, schedule, x0)
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    rec = TrajectoryRecorder(method, obj, reference, keep_iterates)
    X = _replicate(x0, obj.n)
    G = obj.grad_F(X)
    rec.grads += 1
    state = TrackerState(X=X, G_prev=G, alpha=alpha, Y=G.copy())
    rec.record(state.X)
    if track is not None:
        track.append(state.Y.copy())
    for k in range(k_start, k_start + N):
        W = schedule.matrix(k)
        X_new = state.X @ W - alpha * state.Y
        G_new = obj.grad_F(X_new)
        state.Y = state.Y @ W + G_new - state.G_prev
        state.X, state.G_prev = X_new, G_new
        rec.comms += 2
        rec.grads += 1
        rec.step_info(2)
        rec.record(state.X)
        if track is not None:
            track.append(state.Y.copy())
    return rec.finish(alpha=alpha, N=N, k_start=k_start)


def extra(
    obj: LocalObjective,
    schedule,
    x0: np.ndarray,
    alpha: float,
    N: int,
    reference: Reference | None = None,
    k_start: int = 0,
    keep_iterates: bool = False,
    method: str = "extra",
) -> Trajectory:
    """Run ``N`` EXTRA iterations from the consensual start ``x0``.

    ``alpha = 0`` is accepted and reduces the method to second-order mixing.
    """
    _check_dims(obj, schedule, x0)
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    rec = TrajectoryRecorder(method, obj, reference, keep_iterates)
    X_prev = _replicate(x0, obj.n)
    G_prev = obj.grad_F(X_prev)
    rec.grads += 1
    rec.record(X_prev)
    if N == 0:
        return rec.finish(alpha=alpha, N=N, k_start=k_start)

    mixed_prev = X_prev @ schedule.matrix(k_start)
    X = mixed_prev - alpha * G_prev
    rec.comms += 1
    rec.step_info(1)
    rec.record(X)
    for k in range(k_start + 1, k_start + N):
        G = obj.grad_F(X)
        rec.grads += 1
        mixed = X @ schedule.matrix(k)
        X_next = X + mixed - 0.5 * (X_prev + mixed_prev) - alpha * (G - G_prev)
        X_prev, mixed_prev, G_prev, X = X, mixed, G, X_next
        rec.comms += 1
        rec.step_info(1)
        rec.record(X)
    return rec.finish(alpha=alpha, N=N, k_start=k_start)
