"""Per-agent objectives and the constants that set step sizes and budgets.

An objective holds ``n`` local functions ``f_i`` on ``R^d``.  The global
function is ``f(x) = sum_i f_i(x)``; the stacked form evaluates ``f_i`` on
column ``i`` of a ``d x n`` matrix.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "LocalObjective",
    "LogisticObjective",
    "QuadraticFamily",
    "SpectralConstants",
    "CoercivityReport",
    "logistic_objective",
    "quadratic_family",
    "estimate_constants",
    "spectral_norm_sq",
    "coercivity_check",
    "coercivity_margin",
]


class LocalObjective:
    """Base class: subclasses define ``n``, ``d``, :meth:`value`, :meth:`gradient`."""

    n: int
    d: int

    def value(self, i: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def f(self, x: np.ndarray) -> float:
        return float(sum(self.value(i, x) for i in range(self.n)))

    def grad_f(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.d)
        for i in range(self.n):
            g += self.gradient(i, x)
        return g

    def F(self, X: np.ndarray) -> float:
        return float(sum(self.value(i, X[:, i]) for i in range(self.n)))

    def grad_F(self, X: np.ndarray) -> np.ndarray:
        """Stacked gradient ``[grad f_1(x_1), ..., grad f_n(x_n)]``."""
        G = np.empty((self.d, self.n))
        for i in range(self.n):
            G[:, i] = self.gradient(i, X[:, i])
        return G


@dataclass(frozen=True)
class SpectralConstants:
    """Strong convexity / smoothness constants of ``f`` and of the ``f_i``.

    ``mu_agents`` and ``L_agents`` hold the per-agent constants ``mu_i`` and
    ``L_i``.  Hatted values are the constants of the stacked objective
    restricted to the consensus subspace.
    """

    mu_f: float
    L_f: float
    mu_agents: tuple[float, ...]
    L_agents: tuple[float, ...]

    def __post_init__(self) -> None:
        if not 0.0 < self.mu_f <= self.L_f:
            raise ValueError(f"need 0 < mu_f <= L_f, got mu_f={self.mu_f}, L_f={self.L_f}")
        if len(self.mu_agents) != len(self.L_agents) or not self.mu_agents:
            raise ValueError("per-agent constant lists must be nonempty and equal length")
        if self.mu_min > self.L_max:
            raise ValueError("mu_min exceeds L_max")

    @property
    def n(self) -> int:
        return len(self.L_agents)

    @property
    def mu_min(self) -> float:
        return min(self.mu_agents)

    @property
    def L_max(self) -> float:
        return max(self.L_agents)

    @property
    def mu_sum(self) -> float:
        return float(np.sum(self.mu_agents))

    @property
    def L_sum(self) -> float:
        return float(np.sum(self.L_agents))

    @property
    def mu_hat(self) -> float:
        return self.mu_f / self.n

    @property
    def L_hat(self) -> float:
        return self.L_f / self.n

    @property
    def kappa_f(self) -> float:
        return self.L_f / self.mu_f

    def as_dict(self) -> dict:
        return {
            "mu_f": self.mu_f,
            "L_f": self.L_f,
            "mu_min": self.mu_min,
            "L_max": self.L_max,
            "mu_hat": self.mu_hat,
            "L_hat": self.L_hat,
            "kappa_f": self.kappa_f,
        }


class QuadraticFamily(LocalObjective):
    """``f_i(x) = x_i^2 / 2 + alpha/(2n) ||x||^2`` on ``R^d`` with ``d >= n``.

    Each agent has a badly conditioned piece while the sum is a multiple of
    the identity when ``d == n``.  The minimizer is ``0`` with value ``0``.
    """

    def __init__(self, n: int, alpha: float, d: int | None = None) -> None:
        d = n if d is None else d
        if n < 1:
            raise ValueError(f"n must be positive, got {n}")
        if d < n:
            raise ValueError(f"dimension d={d} must be at least n={n}")
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.n = n
        self.d = d
        self.alpha = float(alpha)

    def value(self, i: int, x: np.ndarray) -> float:
        return 0.5 * x[i] ** 2 + self.alpha / (2 * self.n) * float(x @ x)

    def gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        g = (self.alpha / self.n) * np.asarray(x, dtype=float)
        g[i] += x[i]
        return g

    def constants(self) -> SpectralConstants:
        a, n = self.alpha, self.n
        # a coordinate outside 0..n-1 only sees the alpha term
        mu_f = 1.0 + a if self.d == n else a
        mu_i = a / n if self.d > 1 else 1.0 + a / n
        return SpectralConstants(
            mu_f=mu_f,
            L_f=1.0 + a,
            mu_agents=(mu_i,) * n,
            L_agents=(1.0 + a / n,) * n,
        )


def quadratic_family(n: int, alpha: float, d: int | None = None) -> QuadraticFamily:
    return QuadraticFamily(n, alpha, d)


class LogisticObjective(LocalObjective):
    """L2-regularized logistic loss split across agents.

    ``f_i(x) = (1/m) sum_{j in shard i} log(1 + exp(-c_j <a_j, x>)) + lam/(2n) ||x||^2``
    where ``m`` is the total sample count, ``c_j`` in {-1, +1} and ``a_j``
    carries a trailing constant-1 bias coordinate.
    """

    def __init__(self, features: Sequence[np.ndarray], labels: Sequence[np.ndarray], lam: float) -> None:
        if lam < 0:
            raise ValueError(f"regularization must be nonnegative, got {lam}")
        if not features or len(features) != len(labels):
            raise ValueError("need one (features, labels) pair per agent")
        self.A = [np.ascontiguousarray(a, dtype=float) for a in features]
        self.c = [np.asarray(c, dtype=float) for c in labels]
        self.n = len(self.A)
        self.d = self.A[0].shape[1]
        for a, c in zip(self.A, self.c):
            if a.ndim != 2 or a.shape[1] != self.d:
                raise ValueError("inconsistent feature dimension across shards")
            if a.shape[0] == 0 or a.shape[0] != c.shape[0]:
                raise ValueError("every shard must be nonempty with one label per row")
            if not np.all(np.abs(c) == 1.0):
                raise ValueError("labels must be mapped to {-1, +1}")
        self.m = sum(a.shape[0] for a in self.A)
        self.lam = float(lam)

    def value(self, i: int, x: np.ndarray) -> float:
        z = self.c[i] * (self.A[i] @ x)
        loss = np.logaddexp(0.0, -z).sum() / self.m
        return float(loss + self.lam / (2 * self.n) * (x @ x))

    def gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        z = self.c[i] * (self.A[i] @ x)
        weights = -self.c[i] * expit(-z)
        return self.A[i].T @ weights / self.m + (self.lam / self.n) * x

    def stacked_features(self) -> np.ndarray:
        return np.vstack(self.A)


def _map_labels(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    values = set(np.unique(raw).tolist())
    if values <= {0.0, 1.0}:
        return np.where(raw > 0, 1.0, -1.0)
    if values <= {-1.0, 1.0}:
        return raw.copy()
    raise ValueError(f"labels must come from {{0, 1}} or {{-1, +1}}, got {sorted(values)}")


def logistic_objective(
    shards: Sequence[tuple[np.ndarray, np.ndarray]],
    lam: float | None = None,
    add_bias: bool = True,
) -> LogisticObjective:
    """Build a :class:`LogisticObjective` from raw per-agent ``(features, labels)``.

    Labels in {0, 1} are mapped to {-1, +1}; a mix of both conventions
    across shards is rejected.  When ``lam`` is None it defaults to
    ``1e-3`` times the smoothness constant of the unregularized loss.
    """
    raw_labels = np.concatenate([np.asarray(c, dtype=float) for _, c in shards])
    mapped = _map_labels(raw_labels)
    features, labels, start = [], [], 0
    for a, c in shards:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if add_bias:
            a = np.hstack([a, np.ones((a.shape[0], 1))])
        features.append(a)
        labels.append(mapped[start : start + len(c)])
        start += len(c)
    if lam is None:
        stacked = np.vstack(features)
        lam = 1e-3 * spectral_norm_sq(stacked) / (4 * stacked.shape[0])
    return LogisticObjective(features, labels, lam)


def spectral_norm_sq(A: np.ndarray) -> float:
    """``sigma_max(A)^2`` from a dense SVD; 0 for an empty matrix."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2)) ** 2


def estimate_constants(obj: LocalObjective) -> SpectralConstants:
    """Certified strong convexity and smoothness constants for built-in families.

    Quadratic family: exact analytic values.  Logistic: the Hessian of the
    loss is bounded by ``A^T A / (4m)``, so ``L_f = lam + sigma_max(A)^2/(4m)``
    and ``L_i = lam/n + sigma_max(A_i)^2/(4m)``; the regularizer supplies
    ``mu_f = lam`` and ``mu_i = lam/n``.
    """
    if isinstance(obj, QuadraticFamily):
        return obj.constants()
    if isinstance(obj, LogisticObjective):
        if obj.lam <= 0:
            raise ValueError("logistic objective needs lam > 0 to be strongly convex")
        scale = 4.0 * obj.m
        L_f = obj.lam + spectral_norm_sq(obj.stacked_features()) / scale
        L_i = tuple(obj.lam / obj.n + spectral_norm_sq(a) / scale for a in obj.A)
        return SpectralConstants(
            mu_f=obj.lam,
            L_f=L_f,
            mu_agents=(obj.lam / obj.n,) * obj.n,
            L_agents=L_i,
        )
    constants = getattr(obj, "constants", None)
    if callable(constants):
        return constants()
    raise TypeError(f"no constant estimator for {type(obj).__name__}")


@dataclass
class CoercivityReport:
    margins: np.ndarray
    tol: float = 1e-9

    @property
    def worst_margin(self) -> float:
        return float(self.margins.min())

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margins >= -self.tol))


def coercivity_margin(obj: LocalObjective, constants: SpectralConstants, x: np.ndarray, y: np.ndarray) -> float:
    """``<g(x)-g(y), x-y> - mu L/(mu+L) ||x-y||^2 - ||g(x)-g(y)||^2/(mu+L)`` for ``g = grad f``.

    Nonnegative whenever ``f`` is ``mu_f``-strongly convex and ``L_f``-smooth.
    """
    mu, L = constants.mu_f, constants.L_f
    dg = obj.grad_f(x) - obj.grad_f(y)
    dx = x - y
    return float(dg @ dx - mu * L / (mu + L) * (dx @ dx) - (dg @ dg) / (mu + L))


def coercivity_check(
    obj: LocalObjective,
    constants: SpectralConstants,
    trials: int = 100,
    seed: int = 0,
    scale: float = 1.0,
) -> CoercivityReport:
    """Evaluate :func:`coercivity_margin` on ``trials`` random Gaussian pairs."""
    rng = np.random.default_rng(seed)
    margins = np.empty(trials)
    for t in range(trials):
        x = scale * rng.standard_normal(obj.d)
        y = scale * rng.standard_normal(obj.d)
        margins[t] = coercivity_margin(obj, constants, x, y)
    return CoercivityReport(margins)
