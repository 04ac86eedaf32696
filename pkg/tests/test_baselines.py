import math

import numpy as np
import pytest

from ctrlseq.baselines import (
    PriorDistribution,
    best_controlled_qfi,
    gaussian_prior,
    heisenberg_qfi,
    prior_fisher_information,
    raised_cosine_prior,
    shot_noise_limit,
    shot_noise_qfi,
    simpson,
    solve_t0,
    van_trees_bound,
)
from ctrlseq.fisher import qfi_controlled_closed


def test_heisenberg_examples():
    assert heisenberg_qfi(np.pi / 2) == pytest.approx(4 * np.pi**2)
    assert heisenberg_qfi(0.0) == 0.0
    with pytest.raises(ValueError):
        heisenberg_qfi(-1.0)
    T = np.linspace(0, 10, 101)
    for N in range(1, 30):
        assert np.all(qfi_controlled_closed(N, T) <= heisenberg_qfi(T) + 1e-9)


def test_t0_root():
    t0 = solve_t0()
    assert t0 == pytest.approx(1.1656, abs=1e-4)
    assert abs(np.sin(t0) - 2 * t0 * np.cos(t0)) < 1e-9
    assert 16 * np.sin(t0) ** 2 / t0 == pytest.approx(11.593, abs=1e-3)


def test_shot_noise_small_time_single_slice():
    for T in (0.1, 0.5, 1.0):
        J, n_opt = shot_noise_limit(T)
        assert n_opt == 1
        assert J == pytest.approx(16 * np.sin(T) ** 2)


def test_shot_noise_long_time_slope():
    J, _ = shot_noise_limit(100.0)
    assert J / 100 == pytest.approx(11.593, rel=0.005)


@pytest.mark.parametrize("T", [0.5, 1, 2, 3.3, 5, 10, 37.5, 100])
def test_shot_noise_beats_exhaustive_scan(T):
    J, n_opt = shot_noise_limit(T)
    ns = np.arange(1, math.ceil(10 * T) + 1)
    assert np.max(shot_noise_qfi(ns, T)) <= J + 1e-9
    assert J <= 11.5938 * T + 1e-6
    assert J == pytest.approx(float(shot_noise_qfi(n_opt, T)))


def test_shot_noise_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        shot_noise_limit(0.0)


def test_best_controlled_qfi_below_heisenberg():
    J, N = best_controlled_qfi(np.pi, 1000)
    assert J <= 16 * np.pi**2
    assert J == pytest.approx(16 * np.pi**2, rel=1e-5)


def test_simpson_polynomial_exact():
    assert simpson(lambda x: x**3 - x, 0.0, 2.0) == pytest.approx(2.0, abs=1e-12)


def test_raised_cosine_prior():
    p = raised_cosine_prior(0.0, np.pi / 2)
    assert p.normalization() == pytest.approx(1.0, abs=1e-10)
    L = np.pi / 2
    assert prior_fisher_information(p) == pytest.approx(4 * np.pi**2 / L**2, rel=1e-8)
    rng = np.random.default_rng(0)
    xs = p.sample(rng, 20000)
    assert xs.min() >= 0 and xs.max() <= L
    assert np.std(xs) == pytest.approx(L * np.sqrt(1 / 12 - 1 / (2 * np.pi**2)), rel=0.02)


def test_gaussian_prior_fisher_information():
    sigma = 0.07
    p = gaussian_prior(0.4, sigma, 0.4 - 10 * sigma, 0.4 + 10 * sigma)
    assert prior_fisher_information(p) == pytest.approx(1 / sigma**2, rel=1e-4)


def test_numeric_log_derivative_path():
    base = raised_cosine_prior(-1.0, 1.0)
    p = PriorDistribution(base.density, -1.0, 1.0)
    assert prior_fisher_information(p) == pytest.approx(prior_fisher_information(base), rel=1e-5)


def test_priors_without_finite_fisher_information_are_rejected():
    uniform = PriorDistribution(lambda x: np.ones_like(np.asarray(x, dtype=float)), 0.0, 1.0)
    with pytest.raises(ValueError, match="edge"):
        prior_fisher_information(uniform)
    unnormalised = PriorDistribution(lambda x: 2 * raised_cosine_prior(0, 1).density(x), 0.0, 1.0)
    with pytest.raises(ValueError, match="normalised"):
        prior_fisher_information(unnormalised)
    with pytest.raises(ValueError):
        PriorDistribution(lambda x: x, 1.0, 1.0)


def test_van_trees_examples():
    p = raised_cosine_prior(0.0, np.pi / 2)
    fp = prior_fisher_information(p)
    assert van_trees_bound(p, 0, lambda x: 0 * x) == pytest.approx(1 / np.sqrt(fp))
    assert van_trees_bound(p, 50, lambda x: 0 * x + 7.0) == pytest.approx(1 / np.sqrt(350 + fp))
    with pytest.raises(ValueError):
        van_trees_bound(p, -1, lambda x: 0 * x)


def test_van_trees_with_varying_information():
    p = raised_cosine_prior(-1.0, 1.0)
    # int p x^2 for the raised cosine on [-1, 1] is 1/3 - 2/pi^2
    second_moment = 1 / 3 - 2 / np.pi**2
    bound = van_trees_bound(p, 10, lambda x: x**2)
    assert bound == pytest.approx(1 / np.sqrt(10 * second_moment + np.pi**2), rel=1e-6)


def test_ordering_envelope():
    for T in np.linspace(0.05, 20, 100):
        J_shot, _ = shot_noise_limit(T)
        J_ctrl, _ = best_controlled_qfi(T)
        assert J_shot <= J_ctrl + 1e-6
        assert J_ctrl <= heisenberg_qfi(T) + 1e-6
