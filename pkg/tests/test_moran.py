import math

import numpy as np
import pytest
from scipy import stats

from wfselect.moran import (BdiParams, MoranParams, SubsampleMode, bdi_from_moran, mixed_sampling_prob,
                            mixed_sampling_sum, moran_step_probs, negbinom_pmf, negbinom_truncation,
                            simulate_bdi, simulate_moran, subsample, wf_poisson_path,
                            wf_poisson_stationary_variance, wf_poisson_step)
from wfselect.specfun import AsymRegime
from wfselect.stationary import ModelParams, SampleCounts, sampling_prob_asym

# mpmath recurrence p(l+1)/p(l) = (l + theta1)/((l + 1)(1 + s)) at (s, theta1) = (1, 0.3).
NB_1_03 = {0: 0.81225239635623552261, 10: 0.000052348370847547227461, 50: 1.5563238434240466661e-17}


def test_moran_params_validation():
    with pytest.raises(ValueError):
        MoranParams(1, 0.1, 0.01, 0.01)
    with pytest.raises(ValueError):
        MoranParams(10, -0.1, 0.01, 0.01)
    with pytest.raises(ValueError):
        MoranParams(10, 0.1, 0.6, 0.6)


def test_moran_boundaries():
    mp = MoranParams(100, 0.5, 0.01, 0.02)
    up, down = moran_step_probs(0, mp)
    assert down == 0.0 and up == pytest.approx(0.01)
    up, down = moran_step_probs(100, MoranParams(100, 0.5, 0.01, 0.0))
    assert up == 0.0
    with pytest.raises(ValueError):
        moran_step_probs(101, mp)


def test_moran_neutral_martingale():
    mp = MoranParams(50, 0.0, 0.0, 0.0)
    for ell in range(51):
        up, down = moran_step_probs(ell, mp)
        assert up == pytest.approx(down, abs=1e-15)


def test_simulate_moran_stays_in_range():
    path = simulate_moran(MoranParams(200, 0.3, 0.002, 0.0), 5, 20_000, np.random.default_rng(1))
    assert path.min() >= 0 and path.max() <= 200
    assert np.all(np.abs(np.diff(path)) <= 1)


def test_bdi_params():
    with pytest.raises(ValueError):
        BdiParams(1.0, 0.9, 0.3)
    bp = bdi_from_moran(0.5, 0.4)
    assert bp.stationary_mean == pytest.approx(0.8)


def test_bdi_absorbing():
    path = simulate_bdi(None, 100.0, np.random.default_rng(2), immigration=0.0)
    assert np.all(path.states == 0)


def test_bdi_long_run_mean():
    path = simulate_bdi(bdi_from_moran(0.5, 0.4), 2e5, np.random.default_rng(3))
    x = path.at(np.arange(100.0, 2e5, 10.0))
    # spaced snapshots are nearly independent (relaxation time 2)
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - 0.8) < 3 * se
    occ = path.occupation(100.0)
    assert occ.sum() == pytest.approx(1.0)
    assert occ[0] == pytest.approx(negbinom_pmf(0, 0.5, 0.4), abs=0.01)


def test_bdi_path_lookup():
    path = simulate_bdi(bdi_from_moran(1.0, 1.0), 10.0, np.random.default_rng(4), start=3)
    assert path.at(0.0) == 3
    with pytest.raises(ValueError):
        path.at(11.0)


def test_negbinom_values():
    assert negbinom_pmf(0, 0.5, 0.4) == pytest.approx((0.5 / 1.5) ** 0.4, rel=1e-14)
    ell = np.arange(0, 4000)
    assert float(np.dot(ell, negbinom_pmf(ell, 0.5, 0.4))) == pytest.approx(0.8, rel=1e-12)
    for k, v in NB_1_03.items():
        assert negbinom_pmf(k, 1.0, 0.3) == pytest.approx(v, rel=1e-12)
    with pytest.raises(ValueError):
        negbinom_pmf(1, 0.0, 0.3)


def test_negbinom_truncation_bound():
    L, tail = negbinom_truncation(0.5, 0.4)
    assert tail < 1e-14
    assert 1.0 - negbinom_pmf(np.arange(L + 1), 0.5, 0.4).sum() == pytest.approx(tail, abs=2e-15)


def test_subsample_edge_cases():
    np.testing.assert_allclose(subsample(0, 100, 10), [1.0])
    pmf = subsample(7, 100, 100)
    assert pmf[7] == pytest.approx(1.0)
    b = subsample(7, 1000, 100, SubsampleMode.BinomialLimit)
    np.testing.assert_allclose(b, stats.binom.pmf(np.arange(8), 7, 0.1))
    with pytest.raises(ValueError):
        subsample(7, 5, 3)


def test_hypergeometric_approaches_binomial():
    diffs = []
    for N in (10**3, 10**4, 10**5):
        h = subsample(7, N, N // 10)
        b = subsample(7, N, N // 10, SubsampleMode.BinomialLimit, alpha=0.1)
        diffs.append(np.max(np.abs(h - b)))
    assert diffs[0] > diffs[1] > diffs[2]


def test_mixed_sampling_prob():
    a, s, t = 0.2, 0.5, 0.3
    assert mixed_sampling_prob(0, a, s, t) == pytest.approx((s / (a + s)) ** t, rel=1e-14)
    total = math.fsum(mixed_sampling_prob(n, a, s, t) for n in range(2000))
    assert total == pytest.approx(1.0, abs=1e-12)
    value, tail = mixed_sampling_sum(3, a, s, t, tol=1e-13)
    assert tail < 1e-12
    assert value == pytest.approx(mixed_sampling_prob(3, a, s, t), rel=1e-10)


def test_mixed_closed_form_matches_scaled_regime():
    a, s, t, n2 = 0.2, 0.5, 0.3, 1000
    for n1 in range(6):
        lq = sampling_prob_asym(SampleCounts(n1, n2), ModelParams(t, 0.9, -s / a * n2),
                                AsymRegime.ScaledBetaLt1)
        assert math.exp(lq) == pytest.approx(mixed_sampling_prob(n1, a, s, t), rel=1e-10)


def test_wf_poisson_basics():
    r = np.random.default_rng(5)
    draws = [wf_poisson_step(0, 0.4, 0.5, r) for _ in range(20_000)]
    assert np.mean(draws) == pytest.approx(0.4, abs=0.02)
    with pytest.raises(ValueError):
        wf_poisson_step(0, 0.4, 1.2, r)
    assert wf_poisson_stationary_variance(0.4, 0.5) == pytest.approx(0.4 / (0.25 * 1.5))


def test_wf_poisson_not_negative_binomial():
    th, s = 0.4, 0.5
    w = wf_poisson_path(0, th, s, 400_000, np.random.default_rng(6))[1000:]
    assert w.mean() == pytest.approx(th / s, rel=0.02)
    batches = np.array_split(w, 50)
    se = np.std([b.var() for b in batches], ddof=1) / math.sqrt(50)
    nb_var = th * (1 + s) / s**2
    assert abs(w.var() - nb_var) > 3 * se
    assert abs(w.var() - wf_poisson_stationary_variance(th, s)) < 3 * se
