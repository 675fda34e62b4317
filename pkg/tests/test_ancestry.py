import csv
import math

import numpy as np
import pytest
from scipy import stats

from wfselect._random import replicate_rng
from wfselect.ancestry import (AncestryOptions, ConditionedPathSource, ConstantPath, EventKind,
                               ReplicateError, StationaryPathSource, Track, bernoulli_k1,
                               ewens_alleles_pmf, latent_counts, rescaled_genealogy_sim,
                               run_ancestry_batch, simulate_conditional_ancestry,
                               total_variation, write_event_csv)
from wfselect.diffusion import Demography, FrequencyPath
from wfselect.stationary import ModelParams, SampleCounts, ScaledSelection

# Brute-force enumeration of the 2^4 Bernoulli outcomes (exact rationals via mpmath).
EWENS_5_02 = [0.0, 0.67640692640692640693, 0.28183621933621933622, 0.039457070707070707071,
              0.0022546897546897546898, 0.000045093795093795093795]


def test_ewens_small_cases():
    assert ewens_alleles_pmf(1, 0.7).full().tolist() == [0.0, 1.0]
    np.testing.assert_allclose(ewens_alleles_pmf(2, 1.0).full(), [0.0, 0.5, 0.5])
    np.testing.assert_allclose(ewens_alleles_pmf(5, 0.2).full(), EWENS_5_02, rtol=1e-14)
    assert ewens_alleles_pmf(5, 0.2).mean() == pytest.approx(
        sum(0.2 / (0.2 + j - 1) for j in range(1, 6)), rel=1e-14)


def test_total_variation():
    assert total_variation(np.array([1, 1, 2, 2]), [0.0, 0.5, 0.5]) == pytest.approx(0.0)
    assert total_variation(np.array([0.0, 1.0]), np.array([1.0, 0.0, 0.0])) == pytest.approx(1.0)


def test_bernoulli_k1_limits():
    np.testing.assert_allclose(bernoulli_k1(np.zeros(3), 4, 0.3), ewens_alleles_pmf(4, 0.3).full(),
                               rtol=1e-14)
    np.testing.assert_allclose(bernoulli_k1(np.ones(3), 4, 0.3), [0, 1, 0, 0, 0])
    assert bernoulli_k1([], 1, 0.3).tolist() == [0.0, 1.0]
    assert bernoulli_k1(np.ones(2), 3, 0.3, rng=np.random.default_rng(0)) == 1
    with pytest.raises(ValueError):
        bernoulli_k1(np.zeros(2), 4, 0.3)


def test_single_lineage_is_one_mutation():
    params = ModelParams(0.4, 0.6, -3.0)
    for i in range(20):
        log = simulate_conditional_ancestry(SampleCounts(1, 0), params, StationaryPathSource(),
                                            replicate_rng(1, i), Track.Type1Only)
        t, k, _ = log.type1()
        assert k.tolist() == [EventKind.Mut1]
        assert latent_counts(log) == (1, 0)


def test_log_invariants_and_export(tmp_path):
    params = ModelParams(0.5, 0.5, 2.0)
    logs = [simulate_conditional_ancestry(SampleCounts(3, 4), params, StationaryPathSource(),
                                          replicate_rng(2, i), Track.Both) for i in range(30)]
    for log in logs:
        log.check()
        k1, k2 = latent_counts(log)
        assert 1 <= k1 <= 3 and 1 <= k2 <= 4
        assert len(log) == 7
    out = tmp_path / "events.csv"
    write_event_csv(logs, out)
    rows = list(csv.reader(out.open()))
    assert rows[0][:3] == ["replicate", "time", "kind"]
    assert len(rows) == 1 + 7 * 30


def test_frozen_symmetric_background_exchangeable():
    params = ModelParams(0.5, 0.5, 0.0)
    counts = SampleCounts(3, 3)
    b = run_ancestry_batch(counts, params, ConstantPath(0.5), 3, 20_000, track=Track.Both)
    assert total_variation(b.K1, np.bincount(b.K2, minlength=4) / len(b.K2)) < 0.02
    assert stats.ks_2samp(b.tau1[:, -1], b.tau2[:, -1]).pvalue > 0.01


def test_frozen_background_matches_bernoulli():
    # With p fixed, a lineage split is a mutation with probability
    # (1-p) theta1 / ((1-p) theta1 + k - 1).
    p, th1 = 0.3, 0.8
    b = run_ancestry_batch(SampleCounts(4, 0), ModelParams(th1, 0.5), ConstantPath(p), 4, 20_000)
    ref = bernoulli_k1(np.full(3, p), 4, th1)
    assert total_variation(b.K1, ref) < 0.015


def test_step_refinement_consistency():
    counts, params = SampleCounts(2, 2), ModelParams(0.5, 0.5, -1.0)
    R = 4000
    a = run_ancestry_batch(counts, params, StationaryPathSource(), 5, R)
    # a quarter of the default Euler step
    fine = AncestryOptions(rel_step=0.005, h_max=0.0025)
    b = run_ancestry_batch(counts, params, StationaryPathSource(), 6, R, options=fine)
    pa, pb = np.mean(a.K1 == 1), np.mean(b.K1 == 1)
    se = math.sqrt(pa * (1 - pa) / R + pb * (1 - pb) / R)
    assert abs(pa - pb) < 3 * se


def test_batch_independent_of_threads_and_split():
    counts, params = SampleCounts(3, 5), ModelParams(0.3, 0.6, -2.0)
    a = run_ancestry_batch(counts, params, StationaryPathSource(), 9, 200)
    b = run_ancestry_batch(counts, params, StationaryPathSource(), 9, 200, threads=4)
    np.testing.assert_array_equal(a.K1, b.K1)
    np.testing.assert_array_equal(a.tau1, b.tau1)
    c1 = run_ancestry_batch(counts, params, StationaryPathSource(), 9, 120)
    c2 = run_ancestry_batch(counts, params, StationaryPathSource(), 9, 80, start=120)
    np.testing.assert_array_equal(np.concatenate([c1.tau1, c2.tau1]), a.tau1)


def test_scenario_ii_small_ewens():
    b = run_ancestry_batch(SampleCounts(3, 10_000), ModelParams(0.2, 0.5, -5.0), StationaryPathSource(),
                           11, 10_000)
    assert total_variation(b.K1, ewens_alleles_pmf(3, 0.2).full()) < 0.03


def test_scenario_i_first_events_coalesce():
    b = run_ancestry_batch(SampleCounts(3, 7), ModelParams(0.5, 0.5, 800.0), StationaryPathSource(),
                           12, 3000)
    assert np.mean(b.K1 == 1) >= 0.97
    assert np.mean(np.all(b.kinds1[:, :2] == EventKind.Coal1, axis=1)) >= 0.97


def test_rescaled_genealogy_is_ewens():
    r = np.random.default_rng(13)
    logs = [rescaled_genealogy_sim(3, 0.2, ScaledSelection(-0.5), 0.01, r) for _ in range(20_000)]
    k1 = np.array([latent_counts(l)[0] for l in logs])
    assert total_variation(k1, ewens_alleles_pmf(3, 0.2).full()) < 0.015


def test_rescaled_genealogy_matches_full_model():
    n2 = 10_000
    r = np.random.default_rng(14)
    tl = np.array([rescaled_genealogy_sim(3, 0.2, ScaledSelection(-0.5), 0.01, r).times[-1]
                   for _ in range(4000)])
    b = run_ancestry_batch(SampleCounts(3, n2), ModelParams(0.2, 0.5, -0.5 * n2), StationaryPathSource(),
                           15, 4000)
    assert stats.ks_2samp(tl, (n2 + 3) * b.age1).pvalue > 0.01


def test_bernoulli_pmf_matches_simulated_jumps():
    n2 = 10_000
    b = run_ancestry_batch(SampleCounts(3, n2), ModelParams(0.2, 0.5, -0.5 * n2), StationaryPathSource(),
                           16, 20_000)
    # Average the conditional pmf over the observed jump frequencies.
    pmf = np.mean([bernoulli_k1(f[:2], 3, 0.2) for f in b.freq1], axis=0)
    assert total_variation(b.K1, pmf) < 0.02


def test_conditioned_source_runs():
    source = ConditionedPathSource(Demography.linear(0.01, 1.0, 3.0), 1e-4)
    b = run_ancestry_batch(SampleCounts(2, 50), ModelParams(0.2, 0.5, -5.0), source, 17, 50)
    assert np.all((b.K1 >= 1) & (b.K1 <= 2))


def test_exhausted_path_reports_replicate():
    path = FrequencyPath(0.01, np.full(3, 0.4))
    with pytest.raises(ReplicateError) as err:
        run_ancestry_batch(SampleCounts(3, 0), ModelParams(0.2, 0.5), path, 18, 5, start=40)
    assert err.value.index == 40
