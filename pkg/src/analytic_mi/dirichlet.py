"""Dirichlet distribution: parameters, density, entropy, moments and sampling."""

from dataclasses import dataclass

import numpy as np

from .rng import make_rng
from .specfun import DomainError, digamma, log_beta_multivariate

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class DirichletParams:
    """Concentration vector alpha.

    Zero entries are allowed and mark degenerate classes whose probability is
    0 almost surely. At least one entry must be positive.
    """

    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=np.float64, copy=True)
        if a.ndim != 1 or a.size < 2:
            raise DomainError(f"alpha must be a vector of length >= 2, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError(f"alpha must be finite, got {a}")
        if np.any(a < 0.0):
            raise DomainError(f"alpha must be non-negative, got {a}")
        if not np.any(a > 0.0):
            raise DomainError("at least one alpha must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def C(self):
        return self.alpha.size

    @property
    def concentration(self):
        return float(self.alpha.sum())

    @property
    def strictly_positive(self):
        return bool(np.all(self.alpha > 0.0))

    def reduced(self):
        """Parameters restricted to the positive coordinates (a plain array)."""
        return self.alpha[self.alpha > 0.0]


def as_params(params):
    if isinstance(params, DirichletParams):
        return params
    return DirichletParams(np.asarray(params, dtype=np.float64))


def _require_positive(params, name):
    params = as_params(params)
    if not params.strictly_positive:
        raise DomainError(f"{name} requires every alpha > 0, got {params.alpha}")
    return params.alpha


@dataclass(frozen=True)
class SampleBatch:
    """M points on the probability simplex, stored as an (M, C) array."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64, copy=True)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 2:
            raise DomainError(f"a sample batch needs shape (M>=1, C>=2), got {s.shape}")
        if not np.all(np.isfinite(s)) or np.any(s < 0.0):
            raise DomainError("sample probabilities must be finite and non-negative")
        if np.any(np.abs(s.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise DomainError("every sample must sum to 1")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def M(self):
        return self.samples.shape[0]

    @property
    def C(self):
        return self.samples.shape[1]


def as_samples(batch):
    """The (M, C) array behind a SampleBatch or array-like."""
    if isinstance(batch, SampleBatch):
        return batch.samples
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def log_density(params, p):
    """ln f(p) for a strictly positive Dirichlet at an interior simplex point."""
    alpha = _require_positive(params, "log_density")
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != alpha.size:
        raise DomainError(f"point has {p.shape[-1]} coordinates, expected {alpha.size}")
    if np.any(p <= 0.0):
        raise DomainError("log_density needs an interior point (all p_i > 0)")
    out = -log_beta_multivariate(alpha) + ((alpha - 1.0) * np.log(p)).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def differential_entropy(params):
    """h(Dirichlet(alpha)) = ln B + (S - C) Psi(S) - sum (alpha_i - 1) Psi(alpha_i)."""
    alpha = _require_positive(params, "differential_entropy")
    s = alpha.sum()
    return float(
        log_beta_multivariate(alpha)
        + (s - alpha.size) * digamma(s)
        - np.dot(alpha - 1.0, digamma(alpha))
    )


def mean(params):
    """E[P] = alpha / sum(alpha)."""
    alpha = as_params(params).alpha
    return alpha / alpha.sum()


def cross_moment_matrix(params):
    """Matrix of E[P_i log P_j] for a strictly positive Dirichlet.

    Row i carries the factor alpha_i / S, which equals B(alpha(i,++)) / B(alpha)
    by the gamma recurrence.
    """
    alpha = _require_positive(params, "cross_moment")
    s = alpha.sum()
    m = alpha / s
    psi_s1 = digamma(s + 1.0)
    out = np.outer(m, digamma(alpha) - psi_s1)
    np.fill_diagonal(out, m * (digamma(alpha + 1.0) - psi_s1))
    return out


def cross_moment(params, i, j):
    """E[P_i log P_j] (0-based class indices)."""
    alpha = _require_positive(params, "cross_moment")
    c = alpha.size
    for idx in (i, j):
        if not (0 <= idx < c):
            raise IndexError(f"class index {idx} out of range for C={c}")
    s = alpha.sum()
    ratio = alpha[i] / s
    if i == j:
        return float(ratio * (digamma(alpha[i] + 1.0) - digamma(s + 1.0)))
    return float(ratio * (digamma(alpha[j]) - digamma(s + 1.0)))


def _log_gamma_variates(rng, shape, size):
    # shape < 1 uses the boost G(a) = G(a + 1) * U**(1/a), kept in log space
    # so tiny shapes do not underflow to an all-zero row
    if shape >= 1.0:
        return np.log(rng.standard_gamma(shape, size=size))
    g = rng.standard_gamma(shape + 1.0, size=size)
    u = rng.random(size=size)
    return np.log(g) + np.log1p(-u) / shape


def sample_array(params, M, seed):
    """Draw an (M, C) array of Dirichlet samples; zero-alpha columns are exactly 0."""
    params = as_params(params)
    if int(M) < 1:
        raise DomainError(f"sample count must be >= 1, got {M}")
    M = int(M)
    rng = make_rng(seed, "dirichlet")
    alpha = params.alpha
    logs = np.full((M, alpha.size), -np.inf)
    for k, a in enumerate(alpha):
        if a > 0.0:
            logs[:, k] = _log_gamma_variates(rng, a, M)
    logs -= logs.max(axis=1, keepdims=True)
    w = np.exp(logs)
    return w / w.sum(axis=1, keepdims=True)


def sample(params, M, seed):
    """M independent Dirichlet draws, deterministic given ``seed``."""
    return SampleBatch(sample_array(params, M, seed))
