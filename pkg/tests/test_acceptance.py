"""Acceptance criteria, one test each, at the stated tolerances.

Each test prints a single PASS/FAIL line; the lines are repeated in the
pytest terminal summary.  The file also runs as a script.
"""

import filecmp
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from ctrlseq import cli
from ctrlseq.baselines import (
    best_controlled_qfi,
    heisenberg_qfi,
    raised_cosine_prior,
    shot_noise_limit,
    shot_noise_qfi,
    solve_t0,
    van_trees_bound,
)
from ctrlseq.estimation import (
    adaptive_runner,
    fixed_protocol_runner,
    interior_sampler,
    monotone_window,
    precision_study,
)
from ctrlseq.fisher import cfi_two_outcome, outcome_probability, qfi_from_generator
from ctrlseq.generators import (
    PHASE_PLATE,
    controlled_generator,
    free_generator,
    generator_norm_sq,
    numerical_generator,
)
from ctrlseq.protocol import (
    analyzer_jones,
    build_protocol,
    control_jones,
    preparation_jones,
    protocol_qfi,
    waveplate_settings,
)
from ctrlseq.qubit import KET_H, KET_V, equal_up_to_phase
from oracles import brute_probability, fd_generator, ket_from_bloch, phase_distance, plate_u


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_sweet_spot_qfi():
    start = time.perf_counter()
    worst = 0.0
    for N in (1, 2, 4, 8):
        for x in (0.0, 0.3, -0.9, 1.2):
            g = controlled_generator(PHASE_PLATE, x, N * np.pi / 2, N)
            j = qfi_from_generator(g, build_protocol(x, N, np.pi / 2).probe)
            worst = max(worst, abs(float(j) - 16 * N**2))
    elapsed = time.perf_counter() - start
    report(1, "sweet-spot QFI = 16N^2", worst < 1e-9 and elapsed < 1,
           f"max |J - 16N^2| = {worst:.2e}, {elapsed:.3f} s")


def test_criterion_02_generator_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    norm_gap = 0.0
    for _ in range(50):
        x, T, N = rng.uniform(-1.5, 1.5), rng.uniform(0.05, 8), int(rng.integers(1, 9))
        t = T / N
        free_fd = numerical_generator(lambda xx: plate_u(xx, T), x)
        worst = max(worst, np.max(np.abs(free_generator(PHASE_PLATE, x, T).s - free_fd.s)))
        uc = plate_u(x, t).conj().T
        seq = lambda xx: np.linalg.matrix_power(uc @ plate_u(xx, t), N)  # noqa: E731
        ctrl_fd = numerical_generator(seq, x)
        ctrl = controlled_generator(PHASE_PLATE, x, T, N)
        worst = max(worst, np.max(np.abs(ctrl.s - ctrl_fd.s)))
        # the other operator ordering, i (dU) U^dagger, has the same length
        u = seq(x)
        du = (seq(x + 1e-6) - seq(x - 1e-6)) / 2e-6
        m = 1j * du @ u.conj().T
        other = np.real([np.trace(m @ p) / 2 for p in
                         (np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1]))])
        norm_gap = max(norm_gap, abs(np.linalg.norm(other) - np.linalg.norm(ctrl.s)))
        assert np.allclose(fd_generator(seq, x), ctrl_fd.s, atol=1e-7)
    elapsed = time.perf_counter() - start
    report(2, "closed-form generators = finite-difference oracle", worst < 1e-6 and elapsed < 5,
           f"max deviation {worst:.2e} on 50 instances, |s| gap to reversed ordering {norm_gap:.1e}, {elapsed:.2f} s")


def test_criterion_03_free_generator_bound():
    start = time.perf_counter()
    T = np.linspace(0, 4 * np.pi, 200)
    dev, excess = 0.0, -np.inf
    for x in (0.0, 0.4, -1.1):
        ns = generator_norm_sq(PHASE_PLATE, x, T)
        helix = free_generator(PHASE_PLATE, x, T).norm_sq
        dev = max(dev, np.max(np.abs(ns - 4 * np.sin(T) ** 2)), np.max(np.abs(helix - 4 * np.sin(T) ** 2)))
        excess = max(excess, np.max(helix - 4 * T**2))
    elapsed = time.perf_counter() - start
    report(3, "|s_T|^2 = 4 sin^2 T <= 4 T^2", dev < 1e-10 and excess <= 1e-10 and elapsed < 1,
           f"max |dev| {dev:.1e}, max(|s|^2 - 4T^2) = {excess:.2e}, {elapsed:.3f} s")


def test_criterion_04_probability_model():
    start = time.perf_counter()
    rng = np.random.default_rng(44)
    worst = 0.0
    for _ in range(200):
        x, x_hat = rng.uniform(-1.5, 1.5, 2)
        t, N, alpha = rng.uniform(0.05, 3.1), int(rng.integers(1, 9)), rng.uniform(-np.pi, np.pi)
        # orthogonal readout in the optimal plane, beta = alpha - pi/2
        ref = brute_probability(x, x_hat, t, N, alpha, alpha - np.pi / 2)
        worst = max(worst, abs(float(outcome_probability(x, x_hat, t, N, alpha)) - ref))
    xs = np.linspace(-np.pi / 2, np.pi / 2, 401)
    sweet = max(np.max(np.abs(outcome_probability(xs, 0.0, np.pi / 2, N) - (0.5 + 0.5 * np.sin(4 * N * xs))))
                for N in (1, 2, 4, 8))
    elapsed = time.perf_counter() - start
    report(4, "P_+ model = state-vector simulation", worst < 1e-10 and sweet < 1e-12 and elapsed < 10,
           f"max deviation {worst:.2e} (200 instances), sweet-spot form {sweet:.1e}, {elapsed:.2f} s")


def test_criterion_05_sweet_spot_fisher():
    x = np.linspace(-np.pi / 2, np.pi / 2, 801)
    spread = 0.0
    for N in (1, 2, 4, 8):
        f = cfi_two_outcome(x, 0.0, np.pi / 2, N)
        spread = max(spread, (np.max(f) - np.min(f)) / (16 * N**2), np.max(np.abs(f / (16 * N**2) - 1)))
    x4 = np.linspace(-np.pi / 2, 0, 401)
    sweet = np.sqrt(cfi_two_outcome(x4, 0.0, np.pi / 2, 8))
    non = np.sqrt(cfi_two_outcome(x4, 0.0, np.pi / 4, 8))
    peak_at = x4[np.argmax(non)]
    ok = (spread < 1e-6 and np.max(np.abs(sweet - 32)) < 1e-6 * 32
          and abs(non[-1] - 22.63) <= 0.01 and peak_at == 0.0)
    report(5, "sweet-spot CFI constant; sweet and non-sweet sqrtF curves", ok,
           f"relative spread {spread:.1e}; sqrtF sweet in [{sweet.min():.6f}, {sweet.max():.6f}], "
           f"non-sweet peak {non.max():.4f} at x = {peak_at:.3g}")


def test_criterion_06_ideal_precision():
    start = time.perf_counter()
    parts, ok = [], True
    for N in (1, 2, 4):
        t = np.pi / 2
        config = build_protocol(0.0, N, t)
        stats = precision_study(0.0, fixed_protocol_runner(config, monotone_window(N, t)), 50, 1000, seed=600 + N)
        ratio = stats.sqrt_fisher_emp / (4 * N)
        ok &= abs(ratio - 1) <= 0.10
        parts.append(f"N={N}: {stats.sqrt_fisher_emp:.3f}/{4 * N} ({ratio:.3f})")
    elapsed = time.perf_counter() - start
    report(6, "ideal-control Monte Carlo sqrtJ within 10% of 4N", ok and elapsed < 60,
           ", ".join(parts) + f", {elapsed:.1f} s")


def test_criterion_07_adaptive_scheme():
    start = time.perf_counter()
    prior = (0.0, np.pi / 2)
    thresholds = {1: 0.8, 2: 0.8, 4: 0.7}
    parts, ok = [], True
    for N, need in thresholds.items():
        t = np.pi / 2
        stats = precision_study(interior_sampler(prior), adaptive_runner(N, t, 5, prior), 50, 500, seed=700 + N)
        ratio = stats.sqrt_fisher_emp / (4 * N * np.sin(t))
        err = np.abs(stats.estimates - stats.x_true)
        ok &= ratio >= need
        parts.append(f"N={N}: ratio {ratio:.3f} (need {need}), median |err| {np.median(err):.3f}, "
                     f"{np.mean(err > 0.1):.0%} of runs off by > 0.1 rad")
    elapsed = time.perf_counter() - start
    report(7, "adaptive 5x10 sqrtJ vs ideal at T = N pi/2", ok and elapsed < 300,
           "; ".join(parts) + f"; {elapsed:.1f} s")


def test_criterion_08_shot_noise_limit():
    t0 = solve_t0()
    J100, _ = shot_noise_limit(100.0)
    beaten = []
    for T in (0.5, 1, 2, 5, 10, 100):
        J, _ = shot_noise_limit(T)
        ns = np.arange(1, int(np.ceil(10 * T)) + 1)
        if np.max(shot_noise_qfi(ns, T)) > J + 1e-9:
            beaten.append(T)
    ok = abs(t0 - 1.1656) <= 1e-3 and abs(J100 / 100 / 11.593 - 1) <= 0.005 and not beaten
    report(8, "shot-noise limit", ok, f"t0 = {t0:.6f}, J_shot(100)/100 = {J100 / 100:.4f}, oracle beats at {beaten}")


def test_criterion_09_ordering_envelope():
    worst = -np.inf
    for T in np.linspace(0.05, 20, 100):
        J_shot, _ = shot_noise_limit(T)
        J_ctrl, _ = best_controlled_qfi(T)
        worst = max(worst, J_shot - J_ctrl, J_ctrl - float(heisenberg_qfi(T)))
    report(9, "J_shot <= max_N J^(N) <= 16T^2", worst <= 1e-6, f"largest violation {worst:.2e}")


def test_criterion_10_waveplates():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        x_hat, t = rng.uniform(-np.pi / 2, np.pi / 2), rng.uniform(0.05, np.pi)
        w = waveplate_settings(x_hat, t)
        cfg = build_protocol(x_hat, 1, t)
        worst = max(
            worst,
            phase_distance(preparation_jones(w) @ KET_H, cfg.probe),
            phase_distance(control_jones(w), cfg.control),
            phase_distance(analyzer_jones(w) @ KET_H, ket_from_bloch(cfg.meas_axis)),
            phase_distance(analyzer_jones(w) @ KET_V, ket_from_bloch(-cfg.meas_axis)),
        )
        assert equal_up_to_phase(control_jones(w), cfg.control, 1e-9)
    report(10, "waveplate stacks = targets up to phase", worst < 1e-9, f"max deviation {worst:.2e} on 100 settings")


def test_criterion_11_van_trees():
    L = np.pi / 2
    prior = raised_cosine_prior(0.0, L)
    parts, ok = [], True
    for T in (np.pi, np.pi - 0.1, np.pi + 0.1):
        cfg = build_protocol(L / 2, 1, T)
        stats = precision_study(lambda rng: prior.sample(rng), fixed_protocol_runner(cfg, (0.0, L)), 50, 1000, seed=11)
        vt = van_trees_bound(prior, 50, lambda x: protocol_qfi(cfg, x))
        j = float(protocol_qfi(cfg, L / 2))
        naive = 1 / np.sqrt(50 * j) if j > 1e-12 else np.inf
        respects = stats.rmse >= vt - 3 * stats.rmse_err
        ok &= respects
        if T == np.pi:
            ok &= bool(np.isfinite(stats.rmse) and stats.rmse < naive)
        parts.append(f"T={T:.4g}: rmse {stats.rmse:.4f} +- {stats.rmse_err:.4f}, van Trees {vt:.4f}, "
                     f"1/sqrt(nJ) {naive:.4g}")
    report(11, "van Trees respected near J = 0", ok, "; ".join(parts))


def test_criterion_12_determinism(tmp_path):
    commands = [
        ["qfi-curve", "--N", "1,2,4", "--Tmax", "6.28", "--steps", "50"],
        ["fringe-scan", "--N", "8", "--sweet", "true"],
        ["fringe-scan", "--N", "8", "--sweet", "false", "--format", "json"],
        ["adaptive-sim", "--N", "2", "--t", "1.0"],
        ["adaptive-sim", "--format", "csv"],
        ["precision-study", "--K", "50"],
        ["precision-study", "--K", "20", "--iterations", "5", "--batch-size", "10", "--format", "csv"],
        ["landscape", "--xsteps", "11", "--Tsteps", "7"],
        ["shot-noise", "--T", "7.5"],
        ["protocol", "--xhat", "0.2", "--t", "0.9"],
        ["bounds", "--N", "2", "--t", "1.2"],
    ]
    mismatched = []
    for k, argv in enumerate(commands):
        a, b = tmp_path / f"a{k}", tmp_path / f"b{k}"
        assert cli.main([*argv, "--seed", "42", "--out", str(a)]) == 0
        assert cli.main([*argv, "--seed", "42", "--out", str(b)]) == 0
        if not filecmp.cmp(a, b, shallow=False):
            mismatched.append(argv[0])
    for d in ("fa", "fb"):
        assert cli.main(["figure", "fig3b", "--K", "10", "--seed", "42", "--out", str(tmp_path / d)]) == 0
    if not filecmp.cmp(tmp_path / "fa" / "fig3b.csv", tmp_path / "fb" / "fig3b.csv", shallow=False):
        mismatched.append("figure fig3b")
    report(12, "CLI output byte-identical across runs", not mismatched,
           f"{len(commands) + 1} commands compared, mismatches: {mismatched or 'none'}")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
