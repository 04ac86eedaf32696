"""Reference precision limits: Heisenberg scaling, the shot-noise limit and the
prior-information (van Trees) bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, optimize

__all__ = [
    "heisenberg_qfi",
    "solve_t0",
    "shot_noise_qfi",
    "shot_noise_limit",
    "best_controlled_qfi",
    "PriorDistribution",
    "raised_cosine_prior",
    "gaussian_prior",
    "simpson",
    "prior_fisher_information",
    "van_trees_bound",
]


def heisenberg_qfi(T: ArrayLike) -> np.ndarray:
    """``4 |v0|^2 T^2 = 16 T^2`` for the phase plate."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("T must be non-negative")
    return 16 * T**2


def solve_t0(tol: float = 1e-12) -> float:
    """Slice time maximising ``sin^2(t)/t``: the root of ``sin t = 2 t cos t`` in ``(pi/4, pi/2)``."""
    return float(optimize.bisect(lambda t: np.sin(t) - 2 * t * np.cos(t), np.pi / 4, np.pi / 2, xtol=tol))


def shot_noise_qfi(N: ArrayLike, T: float) -> np.ndarray:
    """QFI of ``N`` independent slices of length ``T/N``: ``16 N sin^2(T/N)``."""
    N = np.asarray(N, dtype=float)
    return 16 * N * np.sin(T / N) ** 2


def shot_noise_limit(T: float) -> tuple[float, int]:
    """``(J_shot, N_opt)``: the better of the two integer slice counts around ``T / t0``."""
    if T <= 0:
        raise ValueError("T must be positive")
    t0 = solve_t0()
    candidates = sorted({max(1, math.floor(T / t0)), max(1, math.ceil(T / t0))})
    values = [float(shot_noise_qfi(n, T)) for n in candidates]
    best = int(np.argmax(values))
    return values[best], candidates[best]


def best_controlled_qfi(T: float, n_max: int = 1000) -> tuple[float, int]:
    """Largest ``16 N^2 sin^2(T/N)`` over ``1 <= N <= n_max``."""
    ns = np.arange(1, n_max + 1)
    j = 16 * ns**2 * np.sin(T / ns) ** 2
    k = int(np.argmax(j))
    return float(j[k]), int(ns[k])


def simpson(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
            intervals: int = 1024, rtol: float = 1e-6, atol: float = 1e-12,
            max_doublings: int = 10) -> float:
    """Composite Simpson rule, doubling the node count until the change is below
    ``rtol`` relative (or ``atol`` absolute, for integrals that vanish)."""
    prev = None
    for _ in range(max_doublings + 1):
        x = np.linspace(lo, hi, intervals + 1)
        val = float(integrate.simpson(f(x), x=x))
        if prev is not None and abs(val - prev) <= max(rtol * abs(val), atol):
            return val
        prev = val
        intervals *= 2
    return prev


@dataclass(frozen=True)
class PriorDistribution:
    """Differentiable prior density on ``[lo, hi]``.

    ``dlog`` is ``d ln p / dx``; when omitted it is taken by central
    differences of ``density``.
    """

    density: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float
    dlog: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "custom"

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("prior needs hi > lo")

    def normalization(self) -> float:
        return simpson(self.density, self.lo, self.hi)

    def sample(self, rng: np.random.Generator, size=None):
        """Rejection sampling against the uniform envelope."""
        grid = np.linspace(self.lo, self.hi, 4097)
        pmax = 1.05 * float(np.max(self.density(grid)))
        out = []
        count = 1 if size is None else int(np.prod(size))
        while len(out) < count:
            x = rng.uniform(self.lo, self.hi, size=2 * count)
            keep = rng.uniform(0, pmax, size=x.size) < self.density(x)
            out.extend(x[keep].tolist())
        arr = np.array(out[:count])
        return float(arr[0]) if size is None else arr.reshape(size)


def raised_cosine_prior(lo: float, hi: float) -> PriorDistribution:
    """``p(x) = (2/L) cos^2(pi (x - c)/L)`` on ``[lo, hi]``; its Fisher information is ``4 pi^2 / L^2``."""
    L = hi - lo
    c = 0.5 * (lo + hi)

    def density(x):
        return 2 / L * np.cos(np.pi * (np.asarray(x) - c) / L) ** 2

    def dlog(x):
        u = np.pi * (np.asarray(x) - c) / L
        return -2 * np.pi / L * np.tan(u)

    return PriorDistribution(density, lo, hi, dlog, name="raised-cosine")


def gaussian_prior(mu: float, sigma: float, lo: float, hi: float) -> PriorDistribution:
    """Gaussian truncated to ``[lo, hi]`` and renormalised."""
    from scipy.stats import norm

    z = norm.cdf(hi, mu, sigma) - norm.cdf(lo, mu, sigma)

    def density(x):
        return norm.pdf(np.asarray(x), mu, sigma) / z

    def dlog(x):
        return -(np.asarray(x) - mu) / sigma**2

    return PriorDistribution(density, lo, hi, dlog, name="gaussian")


def prior_fisher_information(prior: PriorDistribution) -> float:
    """``F_p = int p (d ln p/dx)^2 dx``.

    Raises ``ValueError`` for a density that is not normalised or does not
    vanish at the ends of its support (``F_p`` is then undefined).
    """
    norm_ = prior.normalization()
    if abs(norm_ - 1) > 1e-8:
        raise ValueError(f"prior is not normalised: integral = {norm_:.10g}")
    L = prior.hi - prior.lo
    edge = max(float(prior.density(prior.lo)), float(prior.density(prior.hi)))
    if edge * L > 1e-6:
        raise ValueError(
            f"prior density is {edge:.3g} at the edge of its support; "
            "its Fisher information is undefined (use a prior that vanishes at the boundary)"
        )
    if prior.dlog is not None:
        def integrand(x):
            p = prior.density(x)
            with np.errstate(invalid="ignore", over="ignore"):
                g = p * prior.dlog(x) ** 2
            return np.where(p > 0, g, 0.0)
    else:
        h = 1e-6 * L

        def integrand(x):
            p = prior.density(x)
            dp = (prior.density(x + h) - prior.density(x - h)) / (2 * h)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(p > 1e-300, dp**2 / p, 0.0)
    value = simpson(integrand, prior.lo, prior.hi)
    if not np.isfinite(value):
        raise ValueError("prior Fisher information diverges")
    return value


def van_trees_bound(prior: PriorDistribution, n: int, J: Callable[[np.ndarray], np.ndarray]) -> float:
    """``1 / sqrt(n int p(x) J(x) dx + F_p)``: floor on the prior-averaged RMSE."""
    if n < 0:
        raise ValueError("n must be non-negative")
    f_p = prior_fisher_information(prior)
    avg_j = simpson(lambda x: prior.density(x) * J(x), prior.lo, prior.hi) if n else 0.0
    return 1.0 / math.sqrt(n * avg_j + f_p)
