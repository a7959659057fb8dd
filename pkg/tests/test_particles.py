import csv
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import erfc

from molcom.channel import ChannelParams, absorb_cdf, absorb_cdf_degraded, channel_taps
from molcom.particles import (
    ArrivalRecord,
    SimConfig,
    check_step,
    coupled_refinement,
    empirical_cdf,
    first_passage_sample_1d,
    max_stable_step,
    simulate,
)

SPHERE = ChannelParams(4.0, 79.4, 10.0, dimension=3)


def within(p_hat, p, n, k=3.0):
    return abs(p_hat - p) <= k * math.sqrt(max(p * (1 - p), 1e-300) / n)


def test_config_validation():
    for bad in (dict(time_step=0, max_time=1, particle_count=1), dict(time_step=1, max_time=0, particle_count=1),
                dict(time_step=1, max_time=1, particle_count=0)):
        with pytest.raises(ValueError):
            SimConfig(**bad)


def test_step_heuristic_enforced():
    limit = max_stable_step(SPHERE)
    assert math.isclose(limit, 16 / 7940)
    with pytest.raises(ValueError, match="allow_coarse_step"):
        check_step(SPHERE, SimConfig(limit * 2, 1.0, 10))
    check_step(SPHERE, SimConfig(limit * 2, 1.0, 10, allow_coarse_step=True))


def test_partition_sizes_cover_all_particles():
    cfg = SimConfig(1.0, 1.0, 1_000_003, partitions=7)
    assert sum(cfg.partition_sizes()) == 1_000_003
    assert len(cfg.partition_sizes()) == 7


def test_reproducible_and_worker_independent():
    cfg = SimConfig(max_stable_step(SPHERE), 0.2, 20_000, rng_seed=11, partitions=4)
    a = simulate(SPHERE, cfg)
    b = simulate(SPHERE, cfg)
    c = simulate(SPHERE, SimConfig(cfg.time_step, cfg.max_time, cfg.particle_count, 11, partitions=4, workers=3))
    np.testing.assert_array_equal(a.absorption_times, b.absorption_times)
    np.testing.assert_array_equal(a.absorption_times, c.absorption_times)
    d = simulate(SPHERE, SimConfig(cfg.time_step, cfg.max_time, cfg.particle_count, 12, partitions=4))
    assert not np.array_equal(np.nan_to_num(a.absorption_times), np.nan_to_num(d.absorption_times))


def test_accounting_identity():
    p = SPHERE.with_half_life(0.2)
    rec = simulate(p, SimConfig(max_stable_step(p), 0.5, 20_000, rng_seed=3))
    assert rec.absorbed_count + rec.degraded_count + rec.surviving_count == rec.emitted_count
    assert rec.degraded_count > 0 and rec.surviving_count > 0


def test_instant_degradation_means_no_arrivals():
    p = SPHERE.with_half_life(1e-9)
    rec = simulate(p, SimConfig(max_stable_step(p), 1.0, 10_000))
    assert rec.absorbed_count == 0
    assert rec.degraded_count == rec.emitted_count


def test_3d_fraction_by_time_matches_closed_form():
    N = 200_000
    # absorption times sit on the step grid, so compare at grid times
    rec = simulate(SPHERE, SimConfig(0.002, 0.5, N, rng_seed=5))
    for t in (0.05, 0.2, 0.5):
        assert within(empirical_cdf(rec, t), absorb_cdf(SPHERE, t), N)


def test_asymptotic_fraction_approaches_capture_fraction():
    # The bridge correction is exact at grid times, so a coarse step is allowed here.
    N = 200_000
    T = 2e5
    rec = simulate(SPHERE, SimConfig(200.0, T, N, rng_seed=8, allow_coarse_step=True))
    p_T = absorb_cdf(SPHERE, T)
    assert 0 < 10 / 14 - p_T < 5e-4
    assert within(empirical_cdf(rec, T), p_T, N)


def test_degraded_arrivals_match_quadrature():
    p = SPHERE.with_half_life(2.0)
    N = 200_000
    rec = simulate(p, SimConfig(max_stable_step(p), 1.0, N, rng_seed=9))
    assert within(empirical_cdf(rec, 1.0), absorb_cdf_degraded(p, 1.0), N)


def test_1d_and_3d_consistency():
    N = 200_000
    p1 = ChannelParams(4.0, 79.4)
    r1 = simulate(p1, SimConfig(max_stable_step(p1), 0.3, N, rng_seed=1))
    r3 = simulate(SPHERE, SimConfig(max_stable_step(SPHERE), 0.3, N, rng_seed=2))
    g = SPHERE.capture_fraction
    f1 = empirical_cdf(r1, 0.3)
    f3 = empirical_cdf(r3, 0.3) / g
    se = math.sqrt(f1 * (1 - f1) / N + (f3 * g) * (1 - f3 * g) / N / g**2)
    assert abs(f1 - f3) < 3 * se


def test_1d_drift_walk_matches_inverse_gaussian():
    p = ChannelParams(1.0, 1.0, drift=2.0)
    N = 100_000
    rec = simulate(p, SimConfig(max_stable_step(p), 1.0, N, rng_seed=4))
    for t in (0.2, 0.5, 1.0):
        assert within(empirical_cdf(rec, t), absorb_cdf(p, t), N)


def test_3d_drift_accelerates_arrival():
    p0 = ChannelParams(4.0, 79.4, 10.0, dimension=3)
    pv = ChannelParams(4.0, 79.4, 10.0, dimension=3, drift=50.0)
    cfg = SimConfig(max_stable_step(p0), 0.1, 20_000, rng_seed=6)
    assert empirical_cdf(simulate(pv, cfg), 0.1) > empirical_cdf(simulate(p0, cfg), 0.1)


def test_taps_match_binned_histogram():
    N = 200_000
    ts, K = 0.2, 10
    rec = simulate(SPHERE, SimConfig(max_stable_step(SPHERE), ts * K, N, rng_seed=21))
    edges = np.arange(K + 1) * ts
    # nudge edges by a relative ulp so grid-aligned arrival times fall on the right side
    counts = rec.histogram(edges * (1 + 1e-12))
    taps = channel_taps(SPHERE, ts, K).taps
    for c, p in zip(counts, taps):
        assert within(c / N, p, N)


def test_step_size_convergence():
    N = 200_000
    for p in (SPHERE, ChannelParams(1.0, 1.0)):
        tau = p.peak_time
        h = tau / 20
        coarse, fine = coupled_refinement(p, SimConfig(h, tau, N, rng_seed=13), tau)
        se = math.sqrt(fine * (1 - fine) / N)
        assert abs(coarse - fine) < se
        assert within(fine, absorb_cdf(p, tau), N)


def test_coupled_refinement_scope():
    with pytest.raises(ValueError):
        coupled_refinement(SPHERE.with_half_life(1.0), SimConfig(0.01, 0.1, 10), 0.1)


def test_binomial_arrival_law():
    n, trials, t = 40, 5000, 0.1
    rec = simulate(SPHERE, SimConfig(max_stable_step(SPHERE), t, n * trials, rng_seed=17))
    hit = (rec.absorption_times <= t * (1 + 1e-12)).reshape(trials, n)
    counts = hit.sum(1)
    p = absorb_cdf(SPHERE, t)
    expected = stats.binom.pmf(np.arange(n + 1), n, p) * trials
    # pool sparse tails so every expected bin has at least 5
    lo = int(np.argmax(np.cumsum(expected) >= 5))
    hi = n - int(np.argmax(np.cumsum(expected[::-1]) >= 5))
    obs = np.bincount(counts, minlength=n + 1).astype(float)
    o = np.concatenate([[obs[: lo + 1].sum()], obs[lo + 1 : hi], [obs[hi:].sum()]])
    e = np.concatenate([[expected[: lo + 1].sum()], expected[lo + 1 : hi], [expected[hi:].sum()]])
    e *= o.sum() / e.sum()
    assert stats.chisquare(o, e).pvalue > 0.01


# -- direct first-passage sampling ----------------------------------------------------


def test_levy_sampler_matches_erfc():
    rng = np.random.default_rng(0)
    N = 1_000_000
    x = first_passage_sample_1d(1.0, 1.0, 0.0, rng, N)
    assert within(np.mean(x <= 0.25), erfc(1.0), N)


def test_drift_sampler_ks_against_scipy():
    rng = np.random.default_rng(1)
    d, D, v = 1.0, 0.5, 2.0
    x = first_passage_sample_1d(d, D, v, rng, 20_000)
    mean, shape = d / v, d * d / (2 * D)
    assert stats.kstest(x, stats.invgauss(mean / shape, scale=shape).cdf).pvalue > 0.01


def test_drift_lowers_median():
    rng = np.random.default_rng(2)
    assert np.median(first_passage_sample_1d(1, 1, 1.0, rng, 50_000)) < np.median(
        first_passage_sample_1d(1, 1, 0.0, rng, 50_000)
    )


def test_mean_approaches_ballistic_time():
    rng = np.random.default_rng(3)
    d, D, v = 1.0, 1.0, 60.0
    assert abs(first_passage_sample_1d(d, D, v, rng, 200_000).mean() - d / v) < 0.05 * d / v


def test_sampler_rejects_bad_args():
    with pytest.raises(ValueError):
        first_passage_sample_1d(1.0, 1.0, -1.0, np.random.default_rng(0))


# -- records -------------------------------------------------------------------------------


def test_empirical_cdf_properties():
    rec = ArrivalRecord(np.array([0.1, np.nan, 0.3, 0.2, np.nan]), 1, 5, 1.0)
    assert empirical_cdf(rec, 0.0) == 0.0
    assert empirical_cdf(rec, 1.0) == rec.absorbed_count / rec.emitted_count
    grid = np.linspace(0, 1, 101)
    assert np.all(np.diff(empirical_cdf(rec, grid)) >= 0)
    with pytest.raises(ValueError):
        empirical_cdf(rec, -1.0)


def test_histogram_csv(tmp_path):
    rec = ArrivalRecord(np.array([0.05, 0.1, 0.15, np.nan]), 0, 4, 1.0)
    path = tmp_path / "h.csv"
    rec.write_histogram_csv(path, [0.0, 0.1, 0.2])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["bin_start_s", "bin_end_s", "count"]
    assert [int(r[2]) for r in rows[1:]] == [2, 1]
