"""Scalar special functions: log-gamma, digamma, inverse digamma, log multivariate Beta.

Every function accepts a Python scalar or a numpy array and returns the same
kind. All quantities are in nats.
"""

import math

import numpy as np

__all__ = [
    "DomainError",
    "EULER_GAMMA",
    "MINKA_THRESHOLD",
    "log_gamma",
    "digamma",
    "trigamma",
    "inv_digamma_minka",
    "log_beta_multivariate",
]

# gamma = -digamma(1)
EULER_GAMMA = 0.57721566490153286061
# branch point of Minka's asymptotic inverse
MINKA_THRESHOLD = -2.22

# recurrence pushes arguments up to this value before the asymptotic series
_SHIFT = 10.0

# B_2k / (2k) for k = 1..7
_PSI_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

# B_2k for k = 1..7, used by the trigamma expansion
_TRIGAMMA_SERIES = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


class DomainError(ValueError):
    """Raised when an argument lies outside a function's domain."""


def _positive_array(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} requires finite arguments, got {x!r}")
    if np.any(arr <= 0.0):
        raise DomainError(f"{name} requires arguments > 0, got {x!r}")
    return arr


def _wrap(result, like):
    if np.ndim(like) == 0:
        return float(result)
    return result


_lgamma = np.vectorize(math.lgamma, otypes=[np.float64])


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    arr = _positive_array(x, "log_gamma")
    return _wrap(_lgamma(arr), x)


def _shift_up(arr, power):
    # returns (z, sum_i 1/(x+i)**power) with z = x + n >= _SHIFT
    z = np.array(arr, dtype=np.float64, copy=True, ndmin=1)
    acc = np.zeros_like(z)
    low = z < _SHIFT
    while low.any():
        if power == 1:
            acc += np.where(low, 1.0 / z, 0.0)
        else:
            acc += np.where(low, 1.0 / (z * z), 0.0)
        z += low
        low = z < _SHIFT
    return z, acc


def digamma(x):
    """Psi(x) = d/dx ln Gamma(x) for x > 0.

    Upward recurrence Psi(x) = Psi(x + 1) - 1/x until x >= 10, then the
    asymptotic Bernoulli series. Truncation error is below 1e-16 there.
    """
    arr = _positive_array(x, "digamma")
    z, acc = _shift_up(arr, power=1)
    acc = -acc
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for coef in reversed(_PSI_SERIES):
        series = (series + coef) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    return _wrap(out.reshape(np.shape(arr)), x)


def trigamma(x):
    """Psi'(x) for x > 0; only the Newton refinement of the inverse needs it."""
    arr = _positive_array(x, "trigamma")
    z, acc = _shift_up(arr, power=2)
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    for coef in reversed(_TRIGAMMA_SERIES):
        series = (series + coef) * inv2
    out = acc + inv + 0.5 * inv2 + series * inv
    return _wrap(out.reshape(np.shape(arr)), x)


def inv_digamma_minka(y, refine=False, tol=1e-12, max_newton=100):
    """Approximate inverse of the digamma function.

    The default is Minka's two-branch rule: ``exp(y) + 1/2`` for
    ``y >= -2.22`` and ``-1/(y + gamma)`` below. With ``refine=True`` the
    result is polished by Newton steps on ``digamma(x) - y`` until the
    residual is at most ``tol``.
    """
    arr = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"inv_digamma_minka requires finite arguments, got {y!r}")
    yy = np.array(arr, copy=True).ravel()
    upper = yy >= MINKA_THRESHOLD
    x = np.empty_like(yy)
    x[upper] = np.exp(yy[upper]) + 0.5
    x[~upper] = -1.0 / (yy[~upper] + EULER_GAMMA)
    if refine:
        # elements stop individually, so a value never depends on its neighbours
        todo = np.ones(x.shape, dtype=bool)
        for _ in range(max_newton):
            xs = x[todo]
            resid = digamma(xs) - yy[todo]
            done = np.abs(resid) <= tol
            todo[np.flatnonzero(todo)[done]] = False
            if not todo.any():
                break
            xs, resid = xs[~done], resid[~done]
            nxt = xs - resid / trigamma(xs)
            # Newton can overshoot past zero from the right for very negative y
            bad = nxt <= 0.0
            nxt[bad] = 0.5 * xs[bad]
            x[todo] = nxt
    return _wrap(x.reshape(np.shape(arr)), y)


def log_beta_multivariate(alpha):
    """ln B(alpha) = sum_k ln Gamma(alpha_k) - ln Gamma(sum_k alpha_k).

    Reduces over the last axis, so a 2-D array gives one value per row.
    """
    arr = np.asarray(alpha, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise DomainError("log_beta_multivariate needs at least two parameters")
    arr = _positive_array(arr, "log_beta_multivariate")
    out = _lgamma(arr).sum(axis=-1) - _lgamma(arr.sum(axis=-1))
    return _wrap(out, out)
