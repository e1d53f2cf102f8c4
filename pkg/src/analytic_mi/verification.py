"""Analytic-vs-Monte-Carlo oracle suite.

Every check compares a closed form with an independent route: exact algebraic
identities on a random alpha grid, and Monte-Carlo estimates from seeded
Dirichlet draws whose tolerance is a multiple of the estimate's standard
error (bootstrap for BALD, sample standard deviation for plain means).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import uncertainty as unc
from .dirichlet import cross_moment_matrix, differential_entropy, sample_array
from .rng import make_rng

IDENTITY_TOL = 1e-9
SE_MULTIPLE = 3.0

# Monte-Carlo oracle grid; the first five points are fixed anchors
ORACLE_GRID = (
    (1.0, 1.0),
    (0.5, 0.5),
    (2.0, 3.0, 5.0),
    (10.0, 10.0, 10.0),
    (0.1, 0.1, 0.1, 0.1),
    (0.2, 0.2),
    (2.0, 2.0),
    (5.0, 1.0),
    (20.0, 20.0),
    (50.0, 0.5),
    (1.0, 1.0, 1.0),
    (0.3, 3.0, 0.3),
    (4.0, 1.0, 0.5),
    (30.0, 5.0, 1.0),
    (1.0, 2.0, 3.0, 4.0),
    (0.5, 0.5, 0.5, 0.5, 0.5),
    (8.0, 0.2, 0.2, 8.0),
    (3.0, 3.0, 3.0, 3.0, 3.0, 3.0),
    (1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
    (0.7, 1.5, 2.5, 0.7, 1.5, 2.5, 0.7),
)

TREND_RAY = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    alpha: tuple = ()
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        alpha = ",".join(format(a, ".6g") for a in self.alpha)
        parts = [
            status,
            self.name,
            f"deviation={self.deviation:.6e}",
            f"tolerance={self.tolerance:.6e}",
        ]
        if alpha:
            parts.append(f"alpha=({alpha})")
        if self.detail:
            parts.append(self.detail)
        return " ".join(parts)


def random_alpha_grid(n, classes=range(2, 11), low=0.01, high=50.0, seed=0):
    """n random strictly positive alpha vectors, C drawn from ``classes``."""
    rng = make_rng(seed, "alpha-grid")
    classes = list(classes)
    out = []
    for _ in range(n):
        c = int(rng.choice(classes))
        # (low, high]: reflect the half-open uniform draw
        out.append(high - rng.random(c) * (high - low))
    return out


def bootstrap_se_bald(samples, B=200, seed=0):
    """Bootstrap standard error of the empirical BALD estimate of ``samples``."""
    s = np.asarray(samples, dtype=np.float64)
    n = s.shape[0]
    per_sample = unc.shannon_entropy(s, axis=1)
    rng = make_rng(seed, "bootstrap")
    stats = np.empty(B)
    for b in range(B):
        w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        p_bar = (w @ s) / n
        stats[b] = unc.shannon_entropy(p_bar) - (w @ per_sample) / n
    return float(stats.std(ddof=1))


def check_decomposition(grid):
    dev = 0.0
    worst = ()
    for a in grid:
        d = abs(unc.predictive_entropy(a) - unc.analytic_mutual_information(a)
                - unc.analytic_aleatoric(a))
        if d > dev:
            dev, worst = d, tuple(a)
    return CheckResult("decomposition", dev <= IDENTITY_TOL, dev, IDENTITY_TOL, worst,
                       f"points={len(grid)}")


def check_joint_identity(grid):
    dev = 0.0
    worst = ()
    for a in grid:
        d = abs(differential_entropy(a) + unc.predictive_entropy(a)
                - unc.janossy_joint_entropy(a) - unc.analytic_mutual_information(a))
        if d > dev:
            dev, worst = d, tuple(a)
    return CheckResult("joint-entropy-identity", dev <= IDENTITY_TOL, dev, IDENTITY_TOL, worst,
                       f"points={len(grid)}")


def check_nonnegative(grid):
    low = 0.0
    worst = ()
    for a in grid:
        v = min(unc.analytic_mutual_information(a), unc.analytic_aleatoric(a))
        if v < low:
            low, worst = v, tuple(a)
    return CheckResult("nonnegativity", low >= -IDENTITY_TOL, max(0.0, -low), IDENTITY_TOL,
                       worst, f"points={len(grid)}")


def check_bald_convergence(alpha, n, seed, B=200):
    """|empirical BALD on n draws - analytic MI| <= 3 bootstrap standard errors."""
    alpha = tuple(float(a) for a in alpha)
    s = sample_array(alpha, n, seed)
    est = unc.empirical_bald(s)
    se = bootstrap_se_bald(s, B=B, seed=seed)
    dev = abs(est - unc.analytic_mutual_information(alpha))
    return CheckResult("bald-mc-convergence", dev <= SE_MULTIPLE * se, dev, SE_MULTIPLE * se,
                       alpha, f"mc={est:.10g} se={se:.3e}")


def check_cross_moments(alpha, n, seed):
    """Every E[P_i log P_j] against its sample mean, within 3 standard errors."""
    alpha = tuple(float(a) for a in alpha)
    s = sample_array(alpha, n, seed)
    logs = np.log(np.maximum(s, np.finfo(float).tiny))
    exact = cross_moment_matrix(alpha)
    worst_z, worst = 0.0, (0.0, 1.0, 0, 0)
    for i in range(len(alpha)):
        prod = s[:, i:i + 1] * logs
        mc = prod.mean(axis=0)
        se = prod.std(axis=0, ddof=1) / np.sqrt(n)
        z = np.abs(mc - exact[i]) / se
        j = int(np.argmax(z))
        if z[j] > worst_z:
            worst_z = float(z[j])
            worst = (abs(mc[j] - exact[i, j]), se[j], i, j)
    dev, se, i, j = worst
    return CheckResult("cross-moment-mc", dev <= SE_MULTIPLE * se, dev, SE_MULTIPLE * se, alpha,
                       f"worst=(i={i},j={j}) z={worst_z:.3f}")


def check_trend(ray=TREND_RAY):
    """Along alpha = (t, t): MI strictly decreasing, aleatoric strictly increasing."""
    ts = sorted(float(t) for t in ray)
    mi = [unc.analytic_mutual_information((t, t)) for t in ts]
    al = [unc.analytic_aleatoric((t, t)) for t in ts]
    dmi = np.diff(mi)
    dal = np.diff(al)
    worst = max(float(dmi.max(initial=-np.inf)), float(-dal.min(initial=np.inf)))
    ok = bool(np.all(dmi < 0.0) and np.all(dal > 0.0))
    return CheckResult("symmetric-ray-trend", ok, worst, 0.0, tuple(ts),
                       "worst step sign (must be < 0)")


def run_suite(
    classes=range(2, 11),
    alpha_range=(0.01, 50.0),
    n_random=1000,
    mc_samples=100_000,
    bootstrap=200,
    oracle_grid=None,
    trend_ray=None,
    seed=0,
    threads=1,
):
    """All checks; returns a list of CheckResult in a fixed order."""
    classes = sorted(set(int(c) for c in classes))
    grid = random_alpha_grid(n_random, classes, alpha_range[0], alpha_range[1], seed)
    results = [
        check_decomposition(grid),
        check_joint_identity(grid),
        check_nonnegative(grid),
    ]
    if oracle_grid is None:
        oracle_grid = [a for a in ORACLE_GRID if len(a) in classes]
        if not oracle_grid:
            oracle_grid = [(t,) * c for c in classes for t in (trend_ray or (1.0,))]
    jobs = []
    for k, a in enumerate(oracle_grid):
        jobs.append((check_bald_convergence, (a, mc_samples, seed + 1000 + k, bootstrap)))
        jobs.append((check_cross_moments, (a, mc_samples, seed + 2000 + k)))
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        futures = [pool.submit(fn, *args) for fn, args in jobs]
        results.extend(f.result() for f in futures)
    if 2 in classes:
        results.append(check_trend(trend_ray or TREND_RAY))
    return results
