"""Monte Carlo measurement, grid maximum likelihood and the adaptive scheme.

Randomness: a study owns one 64-bit seed; run ``k`` draws from
``SeedSequence(seed, spawn_key=(k,))`` so runs are independent of execution
order.  The likelihood uses a flat prior on the configured interval, so the
maximum-likelihood and maximum-a-posteriori estimates coincide.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fisher import outcome_probability_derivative
from .protocol import ProtocolConfig, build_protocol, protocol_probability

log = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_PRIOR",
    "MeasurementBatch",
    "MLEResult",
    "EstimationRun",
    "PrecisionStats",
    "sample_batch",
    "LikelihoodGrid",
    "mle_estimate",
    "adaptive_run",
    "precision_study",
    "precision_from_estimates",
    "fixed_protocol_runner",
    "adaptive_runner",
    "monotone_window",
    "run_seed",
    "interior_sampler",
]

DEFAULT_PRIOR = (0.0, np.pi / 2)
INTERIOR_MARGIN = 0.05
GRID_SIZE = 2048
REFINE_SIZE = 64
P_CLAMP = 1e-12

Model = Callable[[ProtocolConfig, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class MeasurementBatch:
    n_plus: int
    n_total: int
    protocol: ProtocolConfig | None = None

    def __post_init__(self):
        if not 0 <= self.n_plus <= self.n_total:
            raise ValueError(f"need 0 <= n_plus <= n_total, got {self.n_plus}/{self.n_total}")


@dataclass(frozen=True)
class MLEResult:
    estimate: float
    log_likelihood: float
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class EstimationRun:
    x_true: float
    batches: tuple[MeasurementBatch, ...]
    estimates: tuple[float, ...]
    seed: int
    degenerate: tuple[bool, ...] = ()

    @property
    def final_estimate(self) -> float:
        return self.estimates[-1]

    def summary(self) -> dict:
        return {
            "x_true": self.x_true,
            "seed": self.seed,
            "n_plus": [b.n_plus for b in self.batches],
            "n_total": [b.n_total for b in self.batches],
            "x_hat_design": [b.protocol.x_hat for b in self.batches],
            "estimates": list(self.estimates),
            "final_estimate": self.final_estimate,
        }


@dataclass(frozen=True, eq=False)
class PrecisionStats:
    """Spread of ``K`` independent estimates, each from ``n`` measurements.

    ``std`` is the sample standard deviation of the errors ``x_hat - x_true``
    (for a fixed ``x_true`` this is the spread of the estimates themselves);
    ``rmse`` is the root-mean-square error, the quantity bounded by the
    Bayesian Cramer-Rao bound when ``x_true`` is drawn from a prior.
    """

    K: int
    n: int
    std: float
    std_err: float
    sqrt_fisher_emp: float
    rmse: float
    bias: float
    estimates: np.ndarray = field(repr=False)
    x_true: np.ndarray = field(repr=False)

    @property
    def rmse_err(self) -> float:
        return self.rmse / np.sqrt(2 * (self.K - 1))

    def as_dict(self) -> dict:
        return {
            "K": self.K,
            "n": self.n,
            "std": self.std,
            "std_err": self.std_err,
            "sqrt_fisher_emp": self.sqrt_fisher_emp,
            "rmse": self.rmse,
            "bias": self.bias,
        }


def sample_batch(
    p_plus: float,
    n: int,
    rng: int | np.random.Generator,
    protocol: ProtocolConfig | None = None,
) -> MeasurementBatch:
    """Draw ``n_plus ~ Binomial(n, p_plus)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not -1e-12 <= p_plus <= 1 + 1e-12:
        raise ValueError(f"p_plus must lie in [0, 1], got {p_plus}")
    rng = np.random.default_rng(rng)
    k = int(rng.binomial(n, min(max(p_plus, 0.0), 1.0)))
    return MeasurementBatch(k, int(n), protocol)


def _log_likelihood(batch: MeasurementBatch, x: np.ndarray, model: Model) -> np.ndarray:
    p = np.clip(model(batch.protocol, x), P_CLAMP, 1 - P_CLAMP)
    return batch.n_plus * np.log(p) + (batch.n_total - batch.n_plus) * np.log1p(-p)


class LikelihoodGrid:
    """Joint log-likelihood on a fixed grid over ``[lo, hi)``, one batch at a time.

    Coarse values are cached per batch so the adaptive loop only evaluates
    each new batch once; the refinement pass re-evaluates all batches on a
    small window around the coarse maximum.  Ties go to the smallest ``x``.
    """

    def __init__(
        self,
        prior: tuple[float, float] = DEFAULT_PRIOR,
        grid_size: int = GRID_SIZE,
        refine_size: int = REFINE_SIZE,
        model: Model = protocol_probability,
    ):
        lo, hi = map(float, prior)
        if not hi > lo:
            raise ValueError(f"prior interval must have hi > lo, got {prior}")
        self.lo, self.hi = lo, hi
        self.grid = np.linspace(lo, hi, grid_size, endpoint=False)
        self.step = (hi - lo) / grid_size
        self.refine_size = refine_size
        self.model = model
        self.batches: list[MeasurementBatch] = []
        self.total = np.zeros_like(self.grid)

    def add(self, batch: MeasurementBatch) -> None:
        self.batches.append(batch)
        self.total = self.total + _log_likelihood(batch, self.grid, self.model)

    def estimate(self) -> MLEResult:
        if not self.batches:
            raise ValueError("no measurement batches")
        total = self.total
        spread = np.max(total) - np.min(total)
        if not np.isfinite(spread) or spread <= 1e-12 * max(1.0, abs(np.max(total))):
            return MLEResult(0.5 * (self.lo + self.hi), float(np.max(total)), True)
        i = int(np.argmax(total))
        best_x, best_ll = float(self.grid[i]), float(total[i])
        fine = np.linspace(
            max(self.lo, best_x - self.step),
            min(self.hi - 1e-15, best_x + self.step),
            self.refine_size,
        )
        fine_ll = sum(_log_likelihood(b, fine, self.model) for b in self.batches)
        j = int(np.argmax(fine_ll))
        if fine_ll[j] > best_ll:
            best_x, best_ll = float(fine[j]), float(fine_ll[j])
        return MLEResult(best_x, best_ll, False)


def mle_estimate(
    batches: Sequence[MeasurementBatch],
    prior: tuple[float, float] = DEFAULT_PRIOR,
    grid_size: int = GRID_SIZE,
    model: Model = protocol_probability,
) -> MLEResult:
    """Grid maximum of the joint binomial log-likelihood, refined once."""
    acc = LikelihoodGrid(prior, grid_size, model=model)
    for b in batches:
        acc.add(b)
    return acc.estimate()


def adaptive_run(
    x_true: float,
    N: int,
    t: float,
    iterations: int = 5,
    batch_size: int = 10,
    seed: int = 0,
    prior: tuple[float, float] = DEFAULT_PRIOR,
    alpha: float = 0.0,
    beta: float = np.pi / 2,
    grid_size: int = GRID_SIZE,
) -> EstimationRun:
    """Adaptive scheme: design each batch for the latest estimate.

    The first batch is designed for the middle of the prior interval; after
    every batch the estimate is recomputed from all data so far.
    """
    if iterations < 1 or batch_size < 1:
        raise ValueError("iterations and batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    acc = LikelihoodGrid(prior, grid_size)
    x_hat = 0.5 * (prior[0] + prior[1])
    estimates, flags = [], []
    for _ in range(iterations):
        protocol = build_protocol(x_hat, N, t, alpha, beta)
        p = float(protocol_probability(protocol, x_true))
        acc.add(sample_batch(p, batch_size, rng, protocol))
        res = acc.estimate()
        x_hat = res.estimate
        estimates.append(x_hat)
        flags.append(res.degenerate)
    return EstimationRun(float(x_true), tuple(acc.batches), tuple(estimates), int(seed), tuple(flags))


def run_seed(seed: int, k: int) -> tuple[np.random.SeedSequence, int]:
    """Per-run streams: a sequence for drawing ``x_true`` and an integer run seed."""
    child_x, child_run = np.random.SeedSequence(seed, spawn_key=(k,)).spawn(2)
    return child_x, int(child_run.generate_state(1, np.uint64)[0])


Runner = Callable[[float, int, int], float]


def fixed_protocol_runner(
    protocol: ProtocolConfig,
    prior: tuple[float, float],
    grid_size: int = GRID_SIZE,
) -> Runner:
    """One batch of ``n`` shots with a fixed design, then MLE on ``prior``."""

    def run(x_true: float, n: int, seed: int) -> float:
        p = float(protocol_probability(protocol, x_true))
        batch = sample_batch(p, n, seed, protocol)
        return mle_estimate([batch], prior, grid_size).estimate

    return run


def adaptive_runner(
    N: int,
    t: float,
    iterations: int = 5,
    prior: tuple[float, float] = DEFAULT_PRIOR,
    grid_size: int = GRID_SIZE,
) -> Runner:
    """The adaptive scheme with ``n`` shots split evenly over ``iterations`` batches."""

    def run(x_true: float, n: int, seed: int) -> float:
        if n % iterations:
            raise ValueError(f"n={n} not divisible by iterations={iterations}")
        return adaptive_run(
            x_true, N, t, iterations, n // iterations, seed, prior, grid_size=grid_size
        ).final_estimate

    return run


def interior_sampler(
    prior: tuple[float, float] = DEFAULT_PRIOR, margin: float = INTERIOR_MARGIN
) -> Callable[[np.random.Generator], float]:
    """Draw ``x_true`` uniformly from the prior interval shrunk by ``margin`` at each end."""
    lo, hi = prior[0] + margin, prior[1] - margin
    if not hi > lo:
        raise ValueError("margin leaves an empty interval")
    return lambda rng: float(rng.uniform(lo, hi))


def precision_from_estimates(estimates: np.ndarray, x_true: np.ndarray, n: int) -> PrecisionStats:
    estimates = np.asarray(estimates, dtype=float)
    x_true = np.broadcast_to(np.asarray(x_true, dtype=float), estimates.shape)
    K = estimates.size
    err = estimates - x_true
    std = float(np.std(err, ddof=1))
    with np.errstate(divide="ignore"):
        sqrt_j = float(1.0 / (std * np.sqrt(n))) if std > 0 else float("inf")
    return PrecisionStats(
        K=K,
        n=n,
        std=std,
        std_err=std / np.sqrt(2 * (K - 1)),
        sqrt_fisher_emp=sqrt_j,
        rmse=float(np.sqrt(np.mean(err**2))),
        bias=float(np.mean(err)),
        estimates=estimates,
        x_true=np.array(x_true),
    )


def precision_study(
    x_true: float | Callable[[np.random.Generator], float],
    runner: Runner,
    n: int,
    K: int,
    seed: int = 0,
) -> PrecisionStats:
    """Repeat an estimation ``K`` times with ``n`` measurements each.

    ``x_true`` is either fixed or a sampler drawing one value per run.
    """
    if n < 2 or K < 2:
        raise ValueError("need n >= 2 and K >= 2")
    xs = np.empty(K)
    est = np.empty(K)
    for k in range(K):
        seq_x, s = run_seed(seed, k)
        xs[k] = x_true(np.random.default_rng(seq_x)) if callable(x_true) else float(x_true)
        est[k] = runner(xs[k], n, s)
    stats = precision_from_estimates(est, xs, n)
    log.debug("precision study K=%d n=%d: %s", K, n, stats.as_dict())
    return stats


def monotone_window(N: int, t: float, x_hat: float = 0.0, points: int = 20001) -> tuple[float, float]:
    """Largest interval around ``x_hat`` on which ``P_+`` is strictly monotone.

    A single-design estimate is only unambiguous inside this window, so it is
    the natural prior for a locally ideal control.
    """
    d = np.linspace(0.0, np.pi / 2, points)
    slope = outcome_probability_derivative(d, 0.0, t, N)
    flips = np.nonzero(np.sign(slope[1:]) != np.sign(slope[0]))[0]
    half = d[flips[0]] if flips.size else np.pi / 2
    return x_hat - half, x_hat + half
