"""Closed-form epistemic/aleatoric uncertainty for Dirichlet predictive probabilities.

Analytic measures take a :class:`DirichletParams` (or any alpha vector).
Coordinates with alpha_k == 0 are dropped before evaluation because the
corresponding class has probability 0 almost surely; values below
``TINY_ALPHA`` are treated as 0 first. Alpha is sorted before any sum is
formed, so permuting the classes gives bit-identical results.

The empirical estimators take a batch of Monte-Carlo probability vectors and
are what "BALD" usually means in practice: H(mean p) - mean H(p).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dirichlet import as_params, as_samples, differential_entropy
from .specfun import DomainError, digamma, log_beta_multivariate, log_gamma

TINY_ALPHA = 1e-10
DENOM_FLOOR = 1e-12
NEG_NOISE = 1e-9


def _reduce(params):
    alpha = np.array(as_params(params).alpha, copy=True)
    tiny = (alpha > 0.0) & (alpha < TINY_ALPHA)
    if tiny.any() and np.any(alpha >= TINY_ALPHA):
        alpha[tiny] = 0.0
    return np.sort(alpha[alpha > 0.0])


def shannon_entropy(p, axis=-1):
    """Shannon entropy in nats with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=axis)


@dataclass(frozen=True)
class _Terms:
    # h - ln B
    entropy_rest: float
    predictive: float
    # the two cross-moment sums of the joint entropy, with the signs of the MI
    cross: float


def _terms(a):
    c = a.size
    s = a.sum()
    m = a / s
    # one digamma call for Psi(a), Psi(a + 1), Psi(S), Psi(S + 1)
    psi = digamma(np.concatenate([a, a + 1.0, [s, s + 1.0]]))
    psi_a, psi_a1 = psi[:c], psi[c:2 * c]
    psi_s, psi_s1 = psi[-2], psi[-1]
    # E[P_i log P_j] = m_i (Psi(a_j) - Psi(S+1)) off the diagonal,
    # m_i (Psi(a_i + 1) - Psi(S+1)) on it
    t = (a - 1.0) * (psi_a - psi_s1)
    off = float(np.dot(m, t.sum() - t))
    diag = float(np.dot(a * m, psi_a1 - psi_s1))
    return _Terms(
        entropy_rest=float((s - c) * psi_s - np.dot(a - 1.0, psi_a)),
        predictive=float(shannon_entropy(m)),
        cross=off + diag,
    )


def predictive_entropy(params):
    """H(Y) = -sum_i E[P_i] log E[P_i]."""
    alpha = np.sort(as_params(params).alpha)
    return float(shannon_entropy(alpha / alpha.sum()))


def analytic_mutual_information(params):
    """Epistemic uncertainty I(omega; Y) in closed form for Dirichlet(alpha)."""
    a = _reduce(params)
    if a.size < 2:
        return 0.0
    t = _terms(a)
    return t.entropy_rest + t.predictive + t.cross


def analytic_aleatoric(params):
    """Aleatoric uncertainty E[H(Y | P)] in closed form for Dirichlet(alpha)."""
    a = _reduce(params)
    if a.size < 2:
        return 0.0
    t = _terms(a)
    return -t.entropy_rest - t.cross


def janossy_joint_entropy(params):
    """Joint entropy of (P, Y) under the Janossy density j(p, i) = p_i f(p)."""
    alpha = np.sort(as_params(params).alpha)
    if not np.all(alpha > 0.0):
        raise DomainError(f"joint entropy needs every alpha > 0, got {alpha}")
    return log_beta_multivariate(alpha) - _terms(alpha).cross


def beta_entropy(a, b):
    """Differential entropy of Beta(a, b)."""
    return differential_entropy(np.array([a, b], dtype=np.float64))


def mjent(params):
    """sum_i E[P_i] * (h(Beta(alpha_i + 1, S - alpha_i)) - log E[P_i]).

    A single remaining class (point mass) gives 0.
    """
    a = _reduce(params)
    if a.size < 2:
        return 0.0
    s = a.sum()
    m = a / s
    h = np.array([beta_entropy(ai + 1.0, s - ai) for ai in a])
    return float(np.dot(m, h - np.log(m)))


def _clamped(d):
    if abs(d) < DENOM_FLOOR:
        return math.copysign(DENOM_FLOOR, d) if d != 0.0 else DENOM_FLOOR
    return d


def baba_from(bald, mj):
    """BALD / MJEnt when MJEnt >= 0, else MJEnt / BALD; small denominators clamped."""
    if mj >= 0.0:
        return bald / _clamped(mj)
    return mj / _clamped(bald)


def baba(params, bald=None):
    """BABA score. ``bald`` overrides the analytic MI (the empirical variant)."""
    if bald is None:
        bald = analytic_mutual_information(params)
    return baba_from(float(bald), mjent(params))


def empirical_bald(batch):
    """Monte-Carlo BALD: H(mean of samples) - mean of per-sample entropies."""
    s = as_samples(batch)
    # identical samples carry no disagreement; the mean can be off by an ulp
    if np.all(s == s[0]):
        return 0.0
    return float(shannon_entropy(s.mean(axis=0)) - shannon_entropy(s, axis=1).mean())


def empirical_bald_batch(samples):
    """Row-wise empirical BALD for an (N, M, C) stack of sample batches."""
    s = np.asarray(samples, dtype=np.float64)
    out = shannon_entropy(s.mean(axis=1)) - shannon_entropy(s, axis=2).mean(axis=1)
    same = np.all(s == s[:, :1, :], axis=(1, 2))
    return np.where(same, 0.0, out)


def empirical_aleatoric(batch):
    """Mean per-sample Shannon entropy."""
    return float(shannon_entropy(as_samples(batch), axis=1).mean())


def _live_rows(alpha):
    a = np.array(alpha, dtype=np.float64, copy=True, ndmin=2)
    if a.ndim != 2 or a.shape[1] < 2:
        raise DomainError(f"expected an (N, C>=2) alpha matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0.0) or not np.all(a.sum(axis=1) > 0.0):
        raise DomainError("alpha rows must be finite, non-negative and not all zero")
    tiny = (a > 0.0) & (a < TINY_ALPHA)
    keep_tiny = ~np.any(a >= TINY_ALPHA, axis=1, keepdims=True)
    a = np.sort(np.where(tiny & ~keep_tiny, 0.0, a), axis=1)
    live = a > 0.0
    return a, live


def mutual_information_batch(alpha):
    """Row-wise closed-form MI for an (N, C) alpha matrix.

    Zero entries are masked out, which gives the same value as dropping the
    coordinate. Rows with a single positive entry give 0.
    """
    a, live = _live_rows(alpha)
    s = a.sum(axis=1, keepdims=True)
    m = a / s
    c = live.sum(axis=1)
    safe = np.where(live, a, 1.0)
    psi_a = np.where(live, digamma(safe), 0.0)
    psi_a1 = digamma(a + 1.0)
    psi_s = digamma(s)[:, 0]
    psi_s1 = digamma(s + 1.0)
    t = np.where(live, (a - 1.0) * (psi_a - psi_s1), 0.0)
    off = (m * (t.sum(axis=1, keepdims=True) - t)).sum(axis=1)
    diag = (a * m * (psi_a1 - psi_s1)).sum(axis=1)
    rest = (s[:, 0] - c) * psi_s - np.where(live, (a - 1.0) * psi_a, 0.0).sum(axis=1)
    out = rest + shannon_entropy(m, axis=1) + off + diag
    return np.where(c >= 2, out, 0.0)


def mjent_batch(alpha):
    """Row-wise MJEnt for an (N, C) alpha matrix (zero entries contribute 0)."""
    a, live = _live_rows(alpha)
    s = a.sum(axis=1, keepdims=True)
    m = a / s
    c = live.sum(axis=1)
    # h(Beta(a_i + 1, s - a_i)) with b = s - a_i > 0 whenever another class is live
    b = np.where(live & (s - a > 0.0), s - a, 1.0)
    x = a + 1.0
    log_beta = log_gamma(x) + log_gamma(b) - log_gamma(x + b)
    h = (
        log_beta
        + (x + b - 2.0) * digamma(x + b)
        - (x - 1.0) * digamma(x)
        - (b - 1.0) * digamma(b)
    )
    with np.errstate(divide="ignore"):
        log_m = np.log(np.where(live, m, 1.0))
    out = np.where(live, m * (h - log_m), 0.0).sum(axis=1)
    return np.where(c >= 2, out, 0.0)


@dataclass(frozen=True)
class UncertaintyReport:
    predictive_entropy: float
    epistemic: float
    aleatoric: float
    joint_entropy: Optional[float]
    mjent: float
    baba: float

    def as_dict(self):
        return {
            "predictive_entropy": self.predictive_entropy,
            "epistemic": self.epistemic,
            "aleatoric": self.aleatoric,
            "joint_entropy": self.joint_entropy,
            "mjent": self.mjent,
            "baba": self.baba,
        }


def _denoise(v):
    return 0.0 if -NEG_NOISE <= v < 0.0 else v


def report(params):
    """All analytic measures for one alpha.

    The joint entropy is evaluated on the positive coordinates and is None
    when only one class remains (a point mass has no finite joint entropy).
    """
    params = as_params(params)
    a = _reduce(params)
    mi = analytic_mutual_information(params)
    mj = mjent(params)
    return UncertaintyReport(
        predictive_entropy=predictive_entropy(params),
        epistemic=_denoise(mi),
        aleatoric=_denoise(analytic_aleatoric(params)),
        joint_entropy=janossy_joint_entropy(a) if a.size >= 2 else None,
        mjent=mj,
        baba=baba_from(mi, mj),
    )
