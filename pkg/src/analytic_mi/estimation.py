"""Dirichlet parameter estimation from Monte-Carlo probability samples.

Minka-style fixed-point iteration

    alpha_k <- Psi^{-1}[ Psi(sum(alpha)) + s_k ]

started from a moment-matching initializer, with near-zero classes pinned to
alpha_k = 0 (a degenerate Dirichlet). The statistic ``s_k`` is either
``log(mean p_k)`` (``StatisticMode.PAPER_LOG_OF_MEAN``) or ``mean(log p_k)``
(``StatisticMode.MEAN_OF_LOGS``, the usual maximum-likelihood statistic).

Note that with ``log(mean p_k)`` the iteration has no finite fixed point:
each sweep grows sum(alpha) by roughly (C - 1) / 2 while the direction
alpha / sum(alpha) settles on the sample mean. It therefore runs until
``max_iterations`` and reports ``converged=False``.

Everything here is vectorised over a leading batch axis so a whole pool of
items is estimated in one tensor iteration.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dirichlet import DirichletParams, as_samples
from .specfun import digamma, inv_digamma_minka

LOG_FLOOR = 1e-300
INIT_FLOOR = 1e-3


class StatisticMode(enum.Enum):
    PAPER_LOG_OF_MEAN = "log-of-mean"
    MEAN_OF_LOGS = "mean-of-logs"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "paper": cls.PAPER_LOG_OF_MEAN,
            "paper-log-of-mean": cls.PAPER_LOG_OF_MEAN,
            "log-of-mean": cls.PAPER_LOG_OF_MEAN,
            "mean-of-logs": cls.MEAN_OF_LOGS,
            "mle": cls.MEAN_OF_LOGS,
        }
        if key not in aliases:
            raise ValueError(f"unknown statistic mode {value!r}")
        return aliases[key]


class EstimationError(RuntimeError):
    """Non-finite values appeared during the fixed-point iteration."""


class DegenerateError(ValueError):
    """Fewer than two classes remain after degenerate-class detection."""


@dataclass(frozen=True)
class EstimationConfig:
    max_iterations: int = 1000
    convergence_tol: float = 1e-10
    statistic_mode: StatisticMode = StatisticMode.PAPER_LOG_OF_MEAN
    degenerate_epsilon: float = 1e-8
    # None: refine for MEAN_OF_LOGS, keep the plain two-branch inverse for log-of-mean
    refine_inverse_digamma: Optional[bool] = None

    def __post_init__(self):
        mode = StatisticMode.parse(self.statistic_mode)
        object.__setattr__(self, "statistic_mode", mode)
        if self.refine_inverse_digamma is None:
            object.__setattr__(
                self, "refine_inverse_digamma", mode is StatisticMode.MEAN_OF_LOGS
            )
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.convergence_tol >= 0.0:
            raise ValueError("convergence_tol must be >= 0")
        if not self.degenerate_epsilon > 0.0:
            raise ValueError("degenerate_epsilon must be > 0")


@dataclass(frozen=True)
class MomentSummary:
    mean_p: np.ndarray
    mean_p2: np.ndarray
    mean_log_p: np.ndarray
    M: int


@dataclass(frozen=True)
class EstimationResult:
    params: DirichletParams
    iterations: int
    converged: bool
    statistic_mode: StatisticMode
    degenerate: tuple = field(default=())

    @property
    def alpha(self):
        return self.params.alpha


def _moments(s):
    # s: (..., M, C)
    mean_p = s.mean(axis=-2)
    mean_p2 = (s * s).mean(axis=-2)
    logs = np.log(np.maximum(s, LOG_FLOOR))
    mean_log_p = logs.mean(axis=-2)
    all_zero = np.all(s <= 0.0, axis=-2)
    mean_log_p = np.where(all_zero, -np.inf, mean_log_p)
    return mean_p, mean_p2, mean_log_p


def summarize(batch):
    """Per-class sample moments.

    ``mean_log_p`` floors exact zeros at 1e-300 before the log; a class that
    is zero in every sample gets ``-inf``.
    """
    s = as_samples(batch)
    if s.shape[0] < 2:
        raise ValueError(f"moment summary needs at least 2 samples, got {s.shape[0]}")
    mean_p, mean_p2, mean_log_p = _moments(s)
    return MomentSummary(mean_p=mean_p, mean_p2=mean_p2, mean_log_p=mean_log_p, M=s.shape[0])


def _degenerate_mask(mean_p, mean_p2, epsilon):
    return (mean_p < epsilon) & (mean_p2 < epsilon * epsilon)


def detect_degenerate(summary, epsilon=1e-8):
    """Indices of classes with E p_k < eps and E p_k^2 < eps^2."""
    if not epsilon > 0.0:
        raise ValueError("epsilon must be > 0")
    mask = _degenerate_mask(summary.mean_p, summary.mean_p2, epsilon)
    if mask.all():
        raise DegenerateError("every class is degenerate")
    return set(int(k) for k in np.flatnonzero(mask))


def _initial(mean_p, mean_p2, degenerate):
    var = mean_p2 - mean_p * mean_p
    with np.errstate(divide="ignore", invalid="ignore"):
        a0 = (mean_p * mean_p - mean_p * mean_p2) / var
    a0 = np.where(np.isfinite(a0) & (a0 > 0.0), a0, INIT_FLOOR)
    a0 = np.maximum(a0, INIT_FLOOR)
    return np.where(degenerate, 0.0, a0)


def initial_alpha(summary, epsilon=1e-8):
    """Moment-matching start (E p^2 - E p E p^2) / (E p^2 - (E p)^2) per class."""
    degenerate = _degenerate_mask(summary.mean_p, summary.mean_p2, epsilon)
    if degenerate.all():
        raise DegenerateError("every class is degenerate")
    return DirichletParams(_initial(summary.mean_p, summary.mean_p2, degenerate))


def fixed_point_many(samples, config=None):
    """Estimate one alpha per item for an (N, M, C) stack of sample batches.

    Returns ``(alpha, iterations, converged, ok)`` arrays of shapes (N, C),
    (N,), (N,), (N,). Items with fewer than two non-degenerate classes or a
    non-finite iterate have ``ok=False`` and NaN alpha; the caller decides
    what to do with them.
    """
    config = config or EstimationConfig()
    s = np.asarray(samples, dtype=np.float64)
    if s.ndim != 3:
        raise ValueError(f"expected an (N, M, C) array, got shape {s.shape}")
    if s.shape[1] < 2:
        raise ValueError("estimation needs at least 2 samples per item")
    mean_p, mean_p2, mean_log_p = _moments(s)
    degenerate = _degenerate_mask(mean_p, mean_p2, config.degenerate_epsilon)
    live = ~degenerate
    ok = live.sum(axis=1) >= 2

    if config.statistic_mode is StatisticMode.PAPER_LOG_OF_MEAN:
        with np.errstate(divide="ignore"):
            stat = np.log(mean_p)
    else:
        stat = mean_log_p
    stat = np.where(live, stat, 0.0)
    ok &= np.all(np.isfinite(stat), axis=1)

    alpha = _initial(mean_p, mean_p2, degenerate)
    n = s.shape[0]
    iterations = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    active = ok.copy()
    for it in range(1, int(config.max_iterations) + 1):
        if not active.any():
            break
        a = alpha[active]
        total = a.sum(axis=1, keepdims=True)
        target = digamma(total) + stat[active]
        new = inv_digamma_minka(target, refine=config.refine_inverse_digamma)
        new = np.where(live[active], new, 0.0)
        change = np.abs(new - a).max(axis=1)
        alpha[active] = new
        idx = np.flatnonzero(active)
        iterations[idx] = it
        bad = ~np.all(np.isfinite(new), axis=1)
        if bad.any():
            ok[idx[bad]] = False
        done = (change <= config.convergence_tol) & ~bad
        converged[idx[done]] = True
        active[idx[done | bad]] = False
    alpha[~ok] = np.nan
    return alpha, iterations, converged, ok


def fixed_point_estimate(batch, config=None):
    """Estimate Dirichlet parameters for one sample batch.

    Raises :class:`DegenerateError` when fewer than two classes survive
    degenerate detection and :class:`EstimationError` on non-finite iterates.
    Hitting ``max_iterations`` is not an error; check ``converged``.
    """
    config = config or EstimationConfig()
    s = as_samples(batch)
    summary = summarize(s)
    degenerate = _degenerate_mask(summary.mean_p, summary.mean_p2, config.degenerate_epsilon)
    if (~degenerate).sum() < 2:
        raise DegenerateError(
            f"need at least two non-degenerate classes, found {int((~degenerate).sum())}"
        )
    alpha, iterations, converged, ok = fixed_point_many(s[None, :, :], config)
    if not ok[0]:
        raise EstimationError("fixed-point iteration produced a non-finite alpha")
    return EstimationResult(
        params=DirichletParams(alpha[0]),
        iterations=int(iterations[0]),
        converged=bool(converged[0]),
        statistic_mode=config.statistic_mode,
        degenerate=tuple(int(k) for k in np.flatnonzero(degenerate)),
    )
