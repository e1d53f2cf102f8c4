"""Pool-based active learning with empirical and analytic acquisition scores.

Each iteration retrains the MC-dropout model from scratch on the labeled set,
records test accuracy, scores every remaining pool item and moves the top K
into the labeled set, until the budget K_tot is reached.

Randomness is derived from (run seed, iteration, purpose) only, so every
strategy sees the same initial set and the same model initialisations for a
given seed.
"""

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import uncertainty as unc
from .bayes_model import ModelConfig, evaluate, predict_mc_many, train
from .data_io import LearningCurveRecord
from .estimation import EstimationConfig, StatisticMode, fixed_point_many
from .rng import child_seed, make_rng


class AcquisitionStrategy(enum.Enum):
    RANDOM = "random"
    BALD_EMPIRICAL = "bald-empirical"
    BALD_ANALYTIC = "bald-analytic"
    BABA_EMPIRICAL = "baba-empirical"
    BABA_ANALYTIC = "baba-analytic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(
            f"unknown strategy {value!r}; choose from {', '.join(m.value for m in cls)}"
        )

    @property
    def analytic(self):
        return self in (AcquisitionStrategy.BALD_ANALYTIC, AcquisitionStrategy.BABA_ANALYTIC)

    @property
    def uses_baba(self):
        return self in (AcquisitionStrategy.BABA_EMPIRICAL, AcquisitionStrategy.BABA_ANALYTIC)


def default_al_estimation():
    return EstimationConfig(statistic_mode=StatisticMode.MEAN_OF_LOGS, max_iterations=200)


def default_al_model():
    # plain SGD at 1e-3 barely moves on a few dozen labeled points in 50 epochs
    return ModelConfig(learning_rate=0.05)


@dataclass(frozen=True)
class ALConfig:
    K: int = 10
    K_tot: int = 100
    M: int = 50
    initial_size: int = 10
    seeds: tuple = (0, 1, 2)
    model: ModelConfig = field(default_factory=default_al_model)
    estimation: EstimationConfig = field(default_factory=default_al_estimation)
    record_scores: bool = False
    measure_time: bool = True

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.initial_size < 1:
            raise ValueError("initial_size must be >= 1")
        if self.K_tot < self.initial_size + self.K:
            raise ValueError("K_tot must be at least initial_size + K")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def validate_for(self, strategy):
        if AcquisitionStrategy.parse(strategy).analytic and self.M < 2:
            raise ValueError("analytic strategies need M >= 2 dropout samples")


@dataclass
class PoolScores:
    indices: np.ndarray
    scores: np.ndarray
    fallback: np.ndarray

    def __iter__(self):
        return iter(zip(self.indices.tolist(), self.scores.tolist()))

    def __len__(self):
        return self.indices.size

    @property
    def fallback_count(self):
        return int(self.fallback.sum())


# score for items whose samples leave fewer than two live classes; such a
# point mass is the limit of an infinitely concentrated Dirichlet, where BABA
# (MJEnt / BALD with BALD clamped at 1e-12) tends to minus infinity
CERTAIN_BABA_SCORE = -1.0 / unc.DENOM_FLOOR


def _fallback_score(s, strategy, bald, estimation):
    if not strategy.uses_baba:
        return bald
    mean_p = s.mean(axis=0)
    mean_p2 = (s * s).mean(axis=0)
    degenerate = (mean_p < estimation.degenerate_epsilon) & (
        mean_p2 < estimation.degenerate_epsilon ** 2
    )
    if (~degenerate).sum() < 2:
        return CERTAIN_BABA_SCORE
    var = mean_p2 - mean_p * mean_p
    with np.errstate(divide="ignore", invalid="ignore"):
        a0 = mean_p * (mean_p - mean_p2) / var
    a0 = np.where(np.isfinite(a0) & (a0 > 0.0), a0, 1e-3)
    return unc.baba_from(bald, unc.mjent(np.where(degenerate, 0.0, a0)))


def _model_scores(samples, strategy, estimation):
    empirical = unc.empirical_bald_batch(samples)
    fallback = np.zeros(samples.shape[0], dtype=bool)
    if strategy is AcquisitionStrategy.BALD_EMPIRICAL:
        return empirical, fallback
    alpha, _, _, ok = fixed_point_many(samples, estimation)
    scores = np.full(samples.shape[0], np.nan)
    if ok.any():
        a = alpha[ok]
        bald = unc.mutual_information_batch(a) if strategy.analytic else empirical[ok]
        if strategy.uses_baba:
            mj = unc.mjent_batch(a)
            scores[ok] = [unc.baba_from(b, j) for b, j in zip(bald, mj)]
        else:
            scores[ok] = bald
    for i in np.flatnonzero(~np.isfinite(scores)):
        fallback[i] = True
        scores[i] = _fallback_score(samples[i], strategy, empirical[i], estimation)
    return scores, fallback


def score_pool(model, X, strategy, M, seed, indices=None, estimation=None):
    """Acquisition score for every row of ``X``.

    BALD-analytic and both BABA variants fit a Dirichlet per item (BABA needs
    alpha for MJEnt). Items whose fit fails are scored from the samples alone
    and flagged in ``fallback``.
    """
    strategy = AcquisitionStrategy.parse(strategy)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("pool is empty")
    indices = np.arange(X.shape[0]) if indices is None else np.asarray(indices, dtype=np.int64)
    fallback = np.zeros(X.shape[0], dtype=bool)
    if strategy is AcquisitionStrategy.RANDOM:
        scores = make_rng(seed, "random-acquisition").random(X.shape[0])
        return PoolScores(indices, scores, fallback)
    samples = predict_mc_many(model, X, M, seed)
    scores, fallback = _model_scores(samples, strategy, estimation or default_al_estimation())
    return PoolScores(indices, scores, fallback)


def select_top_k(scores, K):
    """Pool indices of the K largest scores, ties to the smaller index, sorted by index."""
    pairs = list(scores)
    K = int(K)
    if K > len(pairs):
        raise ValueError(f"cannot select {K} items from a pool of {len(pairs)}")
    if K < 0:
        raise ValueError("K must be non-negative")
    ranked = sorted(pairs, key=lambda p: (-p[1], p[0]))
    return sorted(int(p[0]) for p in ranked[:K])


@dataclass
class ALRunResult:
    strategy: AcquisitionStrategy
    curves: list = field(default_factory=list)
    # seed -> list of per-iteration selected pool indices
    selection_history: dict = field(default_factory=dict)
    # seed -> initial labeled indices
    initial_sets: dict = field(default_factory=dict)
    score_dumps: list = field(default_factory=list)
    fallback_count: int = 0

    def final_accuracy(self):
        """Mean test accuracy at the last checkpoint of each seed."""
        last = {}
        for r in self.curves:
            if r.seed not in last or r.iteration > last[r.seed].iteration:
                last[r.seed] = r
        return float(np.mean([r.test_accuracy for r in last.values()]))


class ActiveLearningError(RuntimeError):
    """A run failed part way; ``partial`` holds everything recorded before the failure."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def _run_seed(pool, test, config, strategy, seed, result):
    n = len(pool)
    rng = make_rng(seed, "initial-set")
    labeled = np.sort(rng.choice(n, size=config.initial_size, replace=False))
    is_labeled = np.zeros(n, dtype=bool)
    is_labeled[labeled] = True
    result.initial_sets[seed] = labeled.tolist()
    history = result.selection_history.setdefault(seed, [])
    iteration = 0
    while True:
        t0 = time.perf_counter()
        idx = np.flatnonzero(is_labeled)
        model_cfg = ModelConfig(**{
            **config.model.__dict__, "seed": child_seed(seed, "train", iteration)
        })
        model = train(pool.features[idx], pool.labels[idx], model_cfg, class_count=pool.C)
        acc = evaluate(model, test.features, test.labels, config.M,
                       child_seed(seed, "evaluate", iteration))
        elapsed = time.perf_counter() - t0 if config.measure_time else 0.0
        result.curves.append(LearningCurveRecord(
            strategy=strategy.value, seed=seed, iteration=iteration,
            labeled_count=int(idx.size), test_accuracy=acc, wall_time_s=elapsed,
        ))
        if idx.size >= config.K_tot:
            return
        remaining = np.flatnonzero(~is_labeled)
        k = min(config.K, config.K_tot - idx.size)
        scores = score_pool(
            model, pool.features[remaining], strategy, config.M,
            child_seed(seed, "score", iteration), indices=remaining,
            estimation=config.estimation,
        )
        result.fallback_count += scores.fallback_count
        chosen = select_top_k(scores, k)
        if config.record_scores:
            result.score_dumps.append({
                "strategy": strategy.value, "seed": seed, "iteration": iteration,
                "indices": scores.indices.tolist(), "scores": scores.scores.tolist(),
                "fallback": scores.fallback.tolist(),
            })
        history.append(chosen)
        is_labeled[chosen] = True
        iteration += 1


def run_active_learning(pool, test, config, strategy):
    """Run every seed in ``config.seeds`` for one strategy."""
    strategy = AcquisitionStrategy.parse(strategy)
    config.validate_for(strategy)
    if len(pool) < config.K_tot:
        raise ValueError(f"pool of {len(pool)} items is smaller than K_tot={config.K_tot}")
    result = ALRunResult(strategy=strategy)
    for seed in config.seeds:
        try:
            _run_seed(pool, test, config, strategy, seed, result)
        except Exception as exc:
            raise ActiveLearningError(
                f"{strategy.value} run with seed {seed} failed: {exc}", result
            ) from exc
    return result
