"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

from geonoise.covariance import build_covariance, cholesky, toeplitz_covariance, toeplitz_solve
from geonoise.estimator import fit_arrays, mle_fit, sigma_from_residuals, wls_fit
from geonoise.noise_kernel import NoiseModelSpec, ggm_filter_coeffs, pl_filter_coeffs
from geonoise.spectral import fit_power_law_psd, periodogram, welch
from geonoise.synthesis import (
    BSG_LENGTH,
    generate_bsg,
    generate_colored_noise,
    make_rng,
    parse_truth,
    scale_amplitude,
    synthesize_noise,
)
from geonoise.timeseries import read_timeseries
from geonoise.trajectory import standard_model

DAY = 1 / 365.25


@pytest.fixture
def verdict(capsys):
    """Print one result line per criterion, bypassing output capture."""

    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def tap_sum_covariance(h):
    n = len(h)
    c = np.zeros((n, n))
    for k in range(n):
        for l in range(n):
            a, b = min(k, l), max(k, l)
            c[k, l] = sum(h[i] * h[i + b - a] for i in range(a + 1))
    return c


def flicker_line(seed, n=500, sigma=0.5):
    t = np.arange(n) * DAY
    A = np.column_stack([np.ones(n), t])
    return A, 6.0 + 3.0 * t + synthesize_noise(NoiseModelSpec.flicker(sigma), n, seed)


def test_criterion_01_closed_form_covariance(verdict):
    started = time.perf_counter()
    ok = True
    for n in (1, 2, 7, 23, 50):
        ok &= np.array_equal(build_covariance(NoiseModelSpec.white(), n).dense, np.identity(n))
        rw = build_covariance(NoiseModelSpec.random_walk(), n).dense
        k = np.arange(n)
        ok &= np.array_equal(rw, np.minimum.outer(k, k) + 1.0)
        ok &= np.array_equal(rw, tap_sum_covariance(pl_filter_coeffs(-2.0, n).h))
    elapsed = time.perf_counter() - started
    verdict(1, bool(ok) and elapsed < 1.0, f"exact white and random-walk matrices, {elapsed:.3f} s")


def test_criterion_02_filter_tap_anchors(verdict):
    white = pl_filter_coeffs(0.0, 6).h
    rw = pl_filter_coeffs(-2.0, 6).h
    flicker = pl_filter_coeffs(-1.0, 4).h
    ok = (
        np.array_equal(white, [1, 0, 0, 0, 0, 0])
        and np.array_equal(rw, np.ones(6))
        and np.max(np.abs(flicker - [1, 0.5, 0.375, 0.3125])) <= 1e-12
    )
    verdict(2, ok, f"flicker taps {flicker.tolist()}")


def test_criterion_03_ggm_reduction(verdict):
    rng = np.random.default_rng(3)
    worst = 0.0
    for kappa in rng.uniform(-2.0, 2.0, 20):
        g = ggm_filter_coeffs(kappa, 1.0, 200).h
        p = pl_filter_coeffs(kappa, 200).h
        worst = max(worst, float(np.max(np.abs(g - p))))
    verdict(3, worst <= 1e-15, f"max |ggm(phi=1) - pl| = {worst:.1e}")


def test_criterion_04_fft_vs_direct_convolution(verdict):
    started = time.perf_counter()
    worst = 0.0
    for n in (257, 500, 1024):
        for kappa, phi in ((-1.0, 1.0), (-0.6, 0.95), (-2.0, 1.0)):
            h = ggm_filter_coeffs(kappa, phi, n)
            w = generate_colored_noise(h, 1.3, n, n)
            v = 1.3 * make_rng(n).standard_normal(n)
            direct = np.array([h.h[: i + 1][::-1] @ v[: i + 1] for i in range(n)])
            worst = max(worst, float(np.max(np.abs(w - direct)) / np.max(np.abs(direct))))
    elapsed = time.perf_counter() - started
    verdict(4, worst <= 1e-9 and elapsed < 5.0, f"max relative error {worst:.1e}, {elapsed:.2f} s")


def test_criterion_05_parseval(verdict):
    rng = np.random.default_rng(5)
    worst = 0.0
    for n in (64, 500, 1024):
        for _ in range(20):
            y = rng.standard_normal(n) * rng.uniform(0.1, 5) + rng.uniform(-3, 3)
            pg = periodogram(y, 365.25)
            lhs = np.sum(pg.power) * pg.fs / n
            worst = max(worst, abs(lhs / np.mean(y**2) - 1))
    verdict(5, worst <= 1e-10, f"max relative Parseval error {worst:.1e}")


def test_criterion_06_mle_recovery(verdict):
    started = time.perf_counter()
    kappas, sigmas = [], []
    for seed in range(20):
        A, y = flicker_line(seed)
        fit = fit_arrays(A, y, NoiseModelSpec.powerlaw(-0.5).with_free("sigma", "kappa"))
        kappas.append(fit.noise.kappa)
        sigmas.append(fit.noise.sigma)
    kappas = np.array(kappas)
    med_k, med_s = np.median(kappas), np.median(sigmas)
    inside = np.mean((kappas >= -1.2) & (kappas <= -0.8))
    elapsed = time.perf_counter() - started
    ok = -1.05 <= med_k <= -0.95 and 0.475 <= med_s <= 0.525 and inside >= 0.9 and elapsed < 600
    verdict(6, ok, f"median kappa {med_k:.3f}, median sigma {med_s:.3f}, "
                   f"{inside:.0%} in [-1.2, -0.8], {elapsed:.0f} s")


def test_criterion_07_trend_uncertainty_inflation(verdict):
    n = 500
    white = cholesky(np.identity(n))
    flicker = cholesky(build_covariance(NoiseModelSpec.flicker(), n))
    ratios = []
    for seed in range(20):
        A, y = flicker_line(seed)
        scaled = []
        for chol in (flicker, white):
            x, C_x = wls_fit(A, chol, y)
            sigma = sigma_from_residuals(chol, y - A @ x)
            scaled.append(sigma * np.sqrt(C_x[1, 1]))
        ratios.append(scaled[0] / scaled[1])
    med = float(np.median(ratios))
    verdict(7, 4.0 <= med <= 8.0, f"median flicker/white trend sigma ratio {med:.2f}")


def test_criterion_08_amplitude_conversion(verdict):
    vertical = scale_amplitude(4.8, 0.7, -1.0, DAY)
    horizontal = scale_amplitude(1.4, 0.6, -1.0, DAY)
    expected = (17.6, 2.6, 4.7, 0.9)
    got = (*vertical, *horizontal)
    worst = max(abs(g - e) for g, e in zip(got, expected))
    verdict(8, worst <= 0.05, "converted amplitudes " + ", ".join(f"{g:.3f}" for g in got))


@pytest.mark.slow
def test_criterion_09_benchmark_dataset(verdict, tmp_path):
    started = time.perf_counter()
    paths = generate_bsg(tmp_path / "a", master_seed=0)
    generation = time.perf_counter() - started
    generate_bsg(tmp_path / "b", master_seed=0)
    deterministic = all(p.read_bytes() == (tmp_path / "b" / p.name).read_bytes() for p in paths)
    truth = parse_truth((tmp_path / "a" / "truth.txt").read_text())

    started = time.perf_counter()
    family = NoiseModelSpec.plwn(-1.0, 0.5).with_free()
    covered = 0
    for path in paths:
        ts = read_timeseries(path)
        assert len(ts) == BSG_LENGTH
        rec = truth[path.stem]
        fit = mle_fit(ts, standard_model(rec["reference_epoch"]), family, toeplitz=True)
        x, s = fit.parameter("trend")
        covered += abs(x - rec["trend"]) <= s
    refit = time.perf_counter() - started
    share = covered / len(paths)
    ok = len(paths) == 60 and deterministic and generation < 60 and share >= 0.6 and refit < 7200
    verdict(9, ok, f"{covered}/{len(paths)} trends within 1 sigma, generation {generation:.1f} s, "
                   f"refit {refit:.0f} s")


def test_criterion_10_crlb_monte_carlo(verdict):
    n, draws = 200, 500
    spec = NoiseModelSpec.plwn(-1.0, 0.6, 1.4)
    A = np.column_stack([np.ones(n), np.arange(n) * DAY])
    chol = cholesky(build_covariance(spec, n))
    rng = make_rng(10)
    estimates = []
    for _ in range(draws):
        y = A @ [2.0, 1.0] + synthesize_noise(spec, n, rng)
        estimates.append(wls_fit(A, chol, y)[0])
    mc = np.cov(np.array(estimates), rowvar=False)
    bound = np.linalg.inv(A.T @ chol.solve(A))
    worst = float(np.max(np.abs(mc / bound - 1)))
    verdict(10, worst <= 0.15, f"max relative deviation of Monte-Carlo covariance {worst:.3f}")


def test_criterion_11_toeplitz_fast_path(verdict):
    n = 4096
    cov = toeplitz_covariance(NoiseModelSpec.ggm(-1.0, 0.99), n)
    rhs = make_rng(11).standard_normal(n)
    dense_times, fast_times = [], []
    for _ in range(3):
        t0 = time.perf_counter()
        dense = cholesky(cov).solve(rhs)
        dense_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        fast = toeplitz_solve(cov.first_row, rhs)
        fast_times.append(time.perf_counter() - t0)
    err = np.linalg.norm(fast - dense) / np.linalg.norm(dense)
    speedup = min(dense_times) / min(fast_times)
    verdict(11, err <= 1e-8 and speedup >= 5, f"relative error {err:.1e}, speed-up {speedup:.1f}x")


def test_criterion_12_psd_slope_recovery(verdict):
    flicker, white = [], []
    for seed in range(20):
        y = synthesize_noise(NoiseModelSpec.flicker(), 4096, seed)
        flicker.append(fit_power_law_psd(welch(y, 365.25))[1])
        w = synthesize_noise(NoiseModelSpec.white(), 4096, seed)
        white.append(fit_power_law_psd(welch(w, 365.25))[1])
    mf, mw = np.median(flicker), np.median(white)
    verdict(12, -1.2 <= mf <= -0.8 and -0.2 <= mw <= 0.2,
            f"median slope flicker {mf:.3f}, white {mw:.3f}")
