"""Projected gradient methods on the consensus subspace.

Three solvers share one trajectory format:

* :func:`exact_projected_gd` projects exactly (an idealized oracle that
  cannot run on a network);
* :func:`decentralized_projected_gd` replaces the projection by gossip
  rounds, either a fixed number per step or as many as needed to reach a
  squared accuracy ``eps1``;
* :func:`accelerated_projected_gd` adds constant Nesterov momentum on top of
  the inexact projection.

The budget helpers turn a target accuracy into the per-step projection
accuracy, the outer iteration count and the total communication count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol

import numpy as np

from .consensus import DELTA_FLOOR, distance_to_consensus, rounds_needed, run_consensus
from .objectives import LocalObjective, SpectralConstants
from .topology import MixingSchedule, verify_assumption

if TYPE_CHECKING:
    from collections.abc import Iterator

__all__ = [
    "SolverConfig",
    "AccuracyBudget",
    "Trajectory",
    "TrajectoryRecorder",
    "exact_projected_gd",
    "decentralized_projected_gd",
    "accelerated_projected_gd",
    "default_step_size",
    "epsilon1_for_target",
    "contraction_threshold",
    "outer_contraction_factor",
    "outer_iteration_count",
    "communication_budget",
]

MAX_TOPUP_WINDOWS = 100_000


class Reference(Protocol):
    x_star: np.ndarray
    f_star: float


@dataclass(frozen=True)
class SolverConfig:
    """Settings of a projected-gradient run.

    Exactly one of ``rounds`` (fixed gossip rounds per outer step) and
    ``eps1`` (squared projection accuracy per outer step) must be set.
    ``gamma`` defaults to the method's theory step size when None.
    """

    outer_iterations: int
    rounds: int | None = None
    eps1: float | None = None
    gamma: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if (self.rounds is None) == (self.eps1 is None):
            raise ValueError("set exactly one of 'rounds' and 'eps1'")
        if self.rounds is not None and self.rounds < 0:
            raise ValueError(f"rounds must be nonnegative, got {self.rounds}")
        if self.eps1 is not None and self.eps1 <= 0:
            raise ValueError(f"eps1 must be positive, got {self.eps1}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.outer_iterations < 0:
            raise ValueError("outer_iterations must be nonnegative")

    @property
    def inner_mode(self) -> str:
        return "fixed_rounds" if self.rounds is not None else "accuracy_driven"


@dataclass(frozen=True)
class AccuracyBudget:
    eps: float
    eps1: float
    N_outer: int
    m_inner: int
    total_comm: int
    distance_bound: float

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "eps1": self.eps1,
            "N_outer": self.N_outer,
            "m_inner": self.m_inner,
            "total_comm": self.total_comm,
            "distance_bound": self.distance_bound,
        }


@dataclass
class Trajectory:
    """Per-iteration metrics of one solver run.

    Row ``k`` describes the iterate after ``k`` outer steps, so there are
    ``outer_iterations + 1`` rows.  ``comms`` counts gossip rounds (matrix
    mixings) and ``grads`` counts local gradient evaluations per agent, both
    cumulative.  ``inner_rounds`` and ``residual_sq`` have one entry per
    outer step; ``residual_sq`` is the squared consensus error left after the
    projection step.
    """

    method: str
    comms: np.ndarray
    grads: np.ndarray
    fgap: np.ndarray
    dist_sq_to_opt: np.ndarray
    dist_to_consensus: np.ndarray
    r_k: np.ndarray
    inner_rounds: np.ndarray
    residual_sq: np.ndarray
    final: np.ndarray
    iterates: list[np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.comms)

    @property
    def k(self) -> np.ndarray:
        return np.arange(len(self.comms))

    def rows(self) -> Iterator[tuple]:
        for k in range(len(self)):
            yield (
                self.method,
                k,
                int(self.comms[k]),
                int(self.grads[k]),
                float(self.fgap[k]),
                float(self.dist_sq_to_opt[k]),
                float(self.dist_to_consensus[k]),
                float(self.r_k[k]),
            )

    def comms_to_reach(self, fgap_target: float) -> float:
        """Cumulative communications at the first row with ``fgap <= target`` (inf if never)."""
        hits = np.flatnonzero(self.fgap <= fgap_target)
        return float(self.comms[hits[0]]) if hits.size else math.inf


class TrajectoryRecorder:
    """Accumulates metric rows while a solver runs."""

    def __init__(
        self,
        method: str,
        obj: LocalObjective,
        reference: Reference | None = None,
        keep_iterates: bool = False,
    ) -> None:
        self.method = method
        self.obj = obj
        self.reference = reference
        self.keep_iterates = keep_iterates
        self._rows: list[tuple[int, int, float, float, float, float]] = []
        self._inner: list[int] = []
        self._residual: list[float] = []
        self._iterates: list[np.ndarray] = []
        self._last: np.ndarray | None = None
        self.comms = 0
        self.grads = 0

    def record(self, X: np.ndarray) -> None:
        xbar = X.mean(axis=1)
        cons = distance_to_consensus(X)
        if not np.all(np.isfinite(X)):
            raise FloatingPointError(f"{self.method}: iterate became non-finite")
        if self.reference is None:
            fgap = dist_sq = r = math.nan
        else:
            x_star = np.asarray(self.reference.x_star, dtype=float)
            n = X.shape[1]
            fgap = self.obj.f(xbar) - self.reference.f_star
            dist_sq = float(np.sum((X - x_star[:, None]) ** 2))
            r = math.sqrt(n) * float(np.linalg.norm(xbar - x_star))
        self._rows.append((self.comms, self.grads, fgap, dist_sq, cons, r))
        self._last = X.copy()
        if self.keep_iterates:
            self._iterates.append(self._last)

    def step_info(self, inner_rounds: int, residual_sq: float = math.nan) -> None:
        self._inner.append(inner_rounds)
        self._residual.append(residual_sq)

    def finish(self, **params) -> Trajectory:
        cols = list(zip(*self._rows))
        return Trajectory(
            method=self.method,
            comms=np.array(cols[0], dtype=np.int64),
            grads=np.array(cols[1], dtype=np.int64),
            fgap=np.array(cols[2], dtype=float),
            dist_sq_to_opt=np.array(cols[3], dtype=float),
            dist_to_consensus=np.array(cols[4], dtype=float),
            r_k=np.array(cols[5], dtype=float),
            inner_rounds=np.array(self._inner, dtype=np.int64),
            residual_sq=np.array(self._residual, dtype=float),
            final=self._last,
            iterates=self._iterates if self.keep_iterates else None,
            params=params,
        )


def default_step_size(constants: SpectralConstants) -> float:
    """``1/(mu_hat + L_hat) = n/(mu_f + L_f)`` on the stacked objective."""
    return constants.n / (constants.mu_f + constants.L_f)


def _replicate(x0: np.ndarray, n: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1:
        raise ValueError(f"x0 must be a vector, got shape {x0.shape}")
    return np.repeat(x0[:, None], n, axis=1)


def _check_dims(obj: LocalObjective, schedule: MixingSchedule | None, x0: np.ndarray) -> None:
    if np.asarray(x0).shape != (obj.d,):
        raise ValueError(f"x0 has shape {np.asarray(x0).shape}, objective expects ({obj.d},)")
    if schedule is not None and schedule.n != obj.n:
        raise ValueError(f"schedule has n={schedule.n} agents, objective has n={obj.n}")


def exact_projected_gd(
    obj: LocalObjective,
    constants: SpectralConstants,
    x0: np.ndarray,
    N: int,
    gamma: float | None = None,
    reference: Reference | None = None,
    keep_iterates: bool = False,
) -> Trajectory:
    """Projected gradient descent with exact averaging.

    Starting from the consensual matrix with columns ``x0`` the iterates stay
    consensual, and the column ``pi`` follows ``pi <- pi - (gamma/n) grad f(pi)``.
    No gossip is performed, so ``comms`` stays at zero.
    """
    _check_dims(obj, None, x0)
    gamma = default_step_size(constants) if gamma is None else gamma
    rec = TrajectoryRecorder("exact", obj, reference, keep_iterates)
    Pi = _replicate(x0, obj.n)
    rec.record(Pi)
    for _ in range(N):
        G = obj.grad_F(Pi)
        rec.grads += 1
        Pi = Pi - gamma * G.mean(axis=1, keepdims=True)
        rec.step_info(0, 0.0)
        rec.record(Pi)
    return rec.finish(gamma=gamma, N=N)


def _resolve_delta(schedule: MixingSchedule, delta_hat: float | None) -> float:
    if delta_hat is None:
        delta_hat = verify_assumption(schedule).delta_hat
    if delta_hat >= 1.0:
        raise ValueError(f"schedule does not contract (delta_hat={delta_hat})")
    return max(delta_hat, DELTA_FLOOR)


class _InexactProjector:
    """Gossip-based projection that consumes schedule steps monotonically."""

    def __init__(self, schedule: MixingSchedule, cfg: SolverConfig, delta_hat: float | None, k_start: int):
        self.schedule = schedule
        self.cfg = cfg
        self.k = k_start
        self.delta = _resolve_delta(schedule, delta_hat) if cfg.eps1 is not None else delta_hat

    def __call__(self, Y: np.ndarray) -> tuple[np.ndarray, int]:
        s = self.schedule
        if self.cfg.rounds is not None:
            X, used = run_consensus(Y, s, self.k, self.cfg.rounds)
            self.k += used
            return X, used
        target = math.sqrt(self.cfg.eps1)
        m = rounds_needed(distance_to_consensus(Y), target, self.delta, s.B)
        X, used = run_consensus(Y, s, self.k, m)
        self.k += used
        # delta_hat is estimated on a finite horizon, so later windows may mix slower
        topups = 0
        while distance_to_consensus(X) > target:
            if topups >= MAX_TOPUP_WINDOWS:
                raise RuntimeError("gossip failed to reach the projection accuracy")
            X, extra = run_consensus(X, s, self.k, s.B)
            self.k += extra
            used += extra
            topups += 1
        return X, used


def decentralized_projected_gd(
    obj: LocalObjective,
    constants: SpectralConstants,
    schedule: MixingSchedule,
    x0: np.ndarray,
    cfg: SolverConfig,
    reference: Reference | None = None,
    delta_hat: float | None = None,
    k_start: int = 0,
    keep_iterates: bool = False,
    method: str | None = None,
) -> Trajectory:
    """Inexact projected gradient descent over a time-varying network.

    Each outer step takes a local gradient step ``Y = X - gamma grad F(X)``
    and then gossips ``Y`` towards its column mean.  With ``cfg.rounds`` the
    gossip runs a fixed number of rounds; with ``cfg.eps1`` it runs
    :func:`rounds_needed` rounds for the measured consensus error and the
    norm target ``sqrt(eps1)``, topped up window by window if the measured
    error is still above target.  ``delta_hat`` defaults to the estimate of
    :func:`verify_assumption`.  The schedule is never rewound: round indices
    continue across outer steps starting from ``k_start``.
    """
    _check_dims(obj, schedule, x0)
    gamma = default_step_size(constants) if cfg.gamma is None else cfg.gamma
    if method is None:
        method = f"proj-gd-{cfg.rounds}" if cfg.rounds is not None else "proj-gd-eps"
    project = _InexactProjector(schedule, cfg, delta_hat, k_start)
    rec = TrajectoryRecorder(method, obj, reference, keep_iterates)
    X = _replicate(x0, obj.n)
    rec.record(X)
    for _ in range(cfg.outer_iterations):
        Y = X - gamma * obj.grad_F(X)
        rec.grads += 1
        X, used = project(Y)
        rec.comms += used
        rec.step_info(used, distance_to_consensus(X) ** 2)
        rec.record(X)
    return rec.finish(
        gamma=gamma,
        N=cfg.outer_iterations,
        inner_mode=cfg.inner_mode,
        rounds=cfg.rounds,
        eps1=cfg.eps1,
        delta_hat=project.delta,
        B=schedule.B,
        seed=cfg.seed,
    )


def accelerated_projected_gd(
    obj: LocalObjective,
    constants: SpectralConstants,
    schedule: MixingSchedule,
    x0: np.ndarray,
    cfg: SolverConfig,
    reference: Reference | None = None,
    delta_hat: float | None = None,
    k_start: int = 0,
    keep_iterates: bool = False,
    conditioning: str = "restricted",
    method: str = "accelerated",
) -> Trajectory:
    """Inexact projected gradient descent with constant Nesterov momentum.

    Per outer step::

        Y       = X - (1/L) grad F(X)
        Yt_new ~= proj(Y)                     (gossip, as in the plain method)
        X       = Yt_new + beta (Yt_new - Yt)

    with ``beta = (sqrt(kappa) - 1) / (sqrt(kappa) + 1)`` and ``Yt`` starting
    at ``X0``.  ``conditioning="restricted"`` uses the constants of the
    stacked objective on the consensus subspace (``L = L_f/n``,
    ``kappa = L_f/mu_f``); ``"full"`` uses ``L = L_max`` and
    ``kappa = L_max/mu_min``.  ``cfg.gamma`` overrides ``1/L``.  The
    recorded iterates are the projected sequence ``Yt``.
    """
    _check_dims(obj, schedule, x0)
    if conditioning == "restricted":
        L, kappa = constants.L_hat, constants.kappa_f
    elif conditioning == "full":
        L, kappa = constants.L_max, constants.L_max / constants.mu_min
    else:
        raise ValueError(f"unknown conditioning {conditioning!r}")
    if kappa < 1.0:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    step = 1.0 / L if cfg.gamma is None else cfg.gamma
    beta = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
    project = _InexactProjector(schedule, cfg, delta_hat, k_start)
    rec = TrajectoryRecorder(method, obj, reference, keep_iterates)
    X = _replicate(x0, obj.n)
    Yt = X
    rec.record(Yt)
    for _ in range(cfg.outer_iterations):
        Y = X - step * obj.grad_F(X)
        rec.grads += 1
        Yt_new, used = project(Y)
        rec.comms += used
        rec.step_info(used, distance_to_consensus(Yt_new) ** 2)
        X = Yt_new + beta * (Yt_new - Yt)
        Yt = Yt_new
        rec.record(Yt)
    return rec.finish(
        gamma=step,
        beta=beta,
        kappa=kappa,
        conditioning=conditioning,
        N=cfg.outer_iterations,
        inner_mode=cfg.inner_mode,
        rounds=cfg.rounds,
        eps1=cfg.eps1,
        delta_hat=project.delta,
        B=schedule.B,
        seed=cfg.seed,
    )


def epsilon1_for_target(eps: float, n: int, mu_f: float, L_max: float) -> float:
    """Per-step squared projection accuracy ``mu_f^2 eps / (13 n^2 L_max^2)``."""
    if eps <= 0 or n <= 0 or mu_f <= 0 or L_max <= 0:
        raise ValueError("eps, n, mu_f and L_max must all be positive")
    return mu_f**2 * eps / (13.0 * n**2 * L_max**2)


def contraction_threshold(eps1: float, constants: SpectralConstants) -> float:
    """Squared distance ``12 L_max^2 eps1 / mu_hat^2`` above which each step contracts."""
    return 12.0 * constants.L_max**2 * eps1 / constants.mu_hat**2


def outer_contraction_factor(constants: SpectralConstants) -> float:
    """Guaranteed per-step factor ``1 - mu_hat/(8 L_hat)`` on ``r_k^2``."""
    return 1.0 - constants.mu_hat / (8.0 * constants.L_hat)


def outer_iteration_count(eps: float, r0: float, constants: SpectralConstants) -> int:
    """Outer steps after which the squared distance to the optimum is at most ``eps``.

    ``r0`` is ``||Pi_0 - Pi*||``.  Counts steps of the guaranteed contraction
    until ``r0^2`` falls below :func:`contraction_threshold` for the matching
    ``eps1``; iterates stay below the threshold afterwards.
    """
    if eps <= 0 or r0 <= 0:
        raise ValueError("eps and r0 must be positive")
    eps1 = epsilon1_for_target(eps, constants.n, constants.mu_f, constants.L_max)
    target = contraction_threshold(eps1, constants)
    if r0**2 <= target:
        return 0
    steps = math.log(r0**2 / target) / -math.log(outer_contraction_factor(constants))
    return max(0, math.ceil(steps - 1e-9))


def communication_budget(
    eps: float,
    r0: float,
    constants: SpectralConstants,
    B: int,
    delta_hat: float,
    grad_norm_at_star: float,
    gamma: float | None = None,
) -> AccuracyBudget:
    """Worst-case gossip rounds for the accuracy-driven method to reach ``eps``.

    ``r0`` is ``||X_0 - X*||`` (Frobenius).  Every gradient step leaves a
    consensus error of at most
    ``sqrt(eps1) (1 + gamma L_max) + gamma ||grad F(X*)|| + gamma L_max r0``,
    which :func:`rounds_needed` reduces to ``sqrt(eps1)`` in ``m_inner``
    rounds; the total is ``N_outer * m_inner``.  A ``delta_hat`` of 0
    (complete graph) is floored at ``1e-15``.
    """
    gamma = default_step_size(constants) if gamma is None else gamma
    eps1 = epsilon1_for_target(eps, constants.n, constants.mu_f, constants.L_max)
    N = outer_iteration_count(eps, r0, constants)
    bound = (
        math.sqrt(eps1) * (1.0 + gamma * constants.L_max)
        + gamma * grad_norm_at_star
        + gamma * constants.L_max * r0
    )
    m = rounds_needed(bound, math.sqrt(eps1), max(delta_hat, DELTA_FLOOR), B)
    return AccuracyBudget(eps=eps, eps1=eps1, N_outer=N, m_inner=m, total_comm=N * m, distance_bound=bound)
