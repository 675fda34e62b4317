import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import gammaln

from wfselect.specfun import AsymRegime
from wfselect.stationary import (ModelParams, SampleCounts, SamplerError, ScaledSelection,
                                 log_norm_const, posterior_pdf, posterior_sample, sampling_prob,
                                 sampling_prob_asym, sampling_ratio_asym, stationary_pdf)

# Frozen oracles: mpmath quadrature with power substitutions at both endpoints.
LOG_C_001_002_10 = -13.857088143841336785
LOG_PDF_001_002_10_AT_09 = -2.4962478422059239766
LOG_Q_1_4_AT_01_01_2 = -3.8756034523642823861
LOG_POST_03_07_M8_2_50_AT_005 = 2.3854179171696174723
POST_MEAN_01_01_5_3_3 = 0.65939924007845377162


def test_uniform_and_arcsine_constants():
    assert log_norm_const(ModelParams(1.0, 1.0, 0.0)) == pytest.approx(0.0, abs=1e-15)
    assert math.exp(log_norm_const(ModelParams(0.5, 0.5, 0.0))) == pytest.approx(1 / math.pi, rel=1e-14)


def test_norm_const_frozen():
    assert log_norm_const(ModelParams(0.01, 0.02, 10.0)) == pytest.approx(LOG_C_001_002_10, rel=1e-12)


def test_pdf_values():
    assert stationary_pdf(0.3, ModelParams(1.0, 1.0, 0.0)) == pytest.approx(0.0, abs=1e-15)
    assert stationary_pdf(0.9, ModelParams(0.01, 0.02, 10.0)) == pytest.approx(
        LOG_PDF_001_002_10_AT_09, rel=1e-12)


def test_pdf_normalised():
    p = ModelParams(0.1, 0.3, -5.0)
    # The Beta-type endpoint factors go into the quadrature weight.
    c = log_norm_const(p)
    val, _ = integrate.quad(lambda x: math.exp(c + p.beta * x), 0, 1, weight="alg",
                            wvar=(p.theta1 - 1, p.theta2 - 1))
    assert val == pytest.approx(1.0, abs=1e-8)
    x = 0.42
    assert stationary_pdf(x, p) == pytest.approx(
        c + (p.theta1 - 1) * math.log(x) + (p.theta2 - 1) * math.log1p(-x) + p.beta * x, rel=1e-14)


def test_pdf_rejects_boundary():
    with pytest.raises(ValueError):
        stationary_pdf(0.0, ModelParams(0.5, 0.5, 0.0))


def test_uniform_marginal():
    p = ModelParams(1.0, 1.0, 0.0)
    for n1 in range(11):
        assert math.exp(sampling_prob(SampleCounts(n1, 10 - n1), p)) == pytest.approx(1 / 11, rel=1e-12)


@pytest.mark.parametrize("params,n", [(ModelParams(0.05, 0.2, -3.0), 20),
                                      (ModelParams(0.3, 0.7, 40.0), 30),
                                      (ModelParams(0.2, 0.5, -5000.0), 12)])
def test_sampling_probs_sum_to_one(params, n):
    total = math.fsum(math.exp(sampling_prob(SampleCounts(k, n - k), params)) for k in range(n + 1))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_sampling_prob_frozen():
    assert sampling_prob(SampleCounts(1, 4), ModelParams(0.1, 0.1, 2.0)) == pytest.approx(
        LOG_Q_1_4_AT_01_01_2, rel=1e-12)


@pytest.mark.parametrize("n1,n2,beta", [(2, 5, 3.0), (0, 7, -12.0), (4, 1, 250.0)])
def test_label_swap(n1, n2, beta):
    p = ModelParams(0.3, 0.9, beta)
    a = sampling_prob(SampleCounts(n1, n2), p)
    b = sampling_prob(SampleCounts(n2, n1), ModelParams(0.9, 0.3, -beta))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
    assert SampleCounts(n1, n2).swapped() == SampleCounts(n2, n1)


def test_bayes_consistency():
    counts, params = SampleCounts(3, 4), ModelParams(0.4, 0.6, 2.5)
    x = 0.37
    lhs = posterior_pdf(x, counts, params)
    log_binom = gammaln(8) - gammaln(4) - gammaln(5)
    rhs = (log_binom + 3 * math.log(x) + 4 * math.log1p(-x) + stationary_pdf(x, params)
           - sampling_prob(counts, params))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_posterior_special_cases():
    x = np.array([0.1, 0.5, 0.8])
    post = posterior_pdf(x, SampleCounts(2, 3), ModelParams(0.4, 0.6, 0.0))
    np.testing.assert_allclose(post, stats.beta.logpdf(x, 2.4, 3.6), rtol=1e-12)
    p = ModelParams(0.4, 0.6, 3.0)
    np.testing.assert_allclose(posterior_pdf(x, SampleCounts(0, 0), p), stationary_pdf(x, p), rtol=1e-12)


def test_posterior_pdf_frozen():
    v = posterior_pdf(0.05, SampleCounts(2, 50), ModelParams(0.3, 0.7, -8.0))
    assert v == pytest.approx(LOG_POST_03_07_M8_2_50_AT_005, rel=1e-11)


def test_posterior_sample_neutral_is_beta():
    rng = np.random.default_rng(3)
    x = posterior_sample(SampleCounts(2, 5), ModelParams(0.5, 0.5, 0.0), rng, size=20_000)
    assert stats.kstest(x, "beta", args=(2.5, 5.5)).pvalue > 0.01


def test_posterior_sample_mean():
    rng = np.random.default_rng(4)
    x = posterior_sample(SampleCounts(3, 3), ModelParams(0.1, 0.1, 5.0), rng, size=40_000)
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - POST_MEAN_01_01_5_3_3) < 3 * se


@pytest.mark.parametrize("method", ["auto", "gamma", "mixture"])
def test_posterior_sample_large_negative_beta(method):
    rng = np.random.default_rng(5)
    counts, params = SampleCounts(2, 10_000), ModelParams(0.3, 0.5, -5000.0)
    x = posterior_sample(counts, params, rng, size=20_000, method=method)
    assert stats.kstest(10_000 * x, "gamma", args=(2.3, 0, 1 / 1.5)).statistic < 0.03


def test_posterior_sample_scalar_and_errors():
    rng = np.random.default_rng(6)
    v = posterior_sample(SampleCounts(1, 1), ModelParams(0.5, 0.5, 1.0), rng)
    assert isinstance(v, float) and 0 < v < 1
    with pytest.raises(SamplerError):
        posterior_sample(SampleCounts(0, 5), ModelParams(0.5, 0.5, 200.0), rng, size=5,
                         method="beta")


def test_posterior_concentration_large_beta():
    rng = np.random.default_rng(7)
    x = posterior_sample(SampleCounts(3, 7), ModelParams(0.5, 0.5, 300.0), rng, size=10_000)
    assert np.mean(x > 0.9) >= 0.95


def _mass_outside(counts, params, centre, delta):
    f = lambda x: math.exp(posterior_pdf(x, counts, params))
    lo, hi = max(centre - delta, 0.0), min(centre + delta, 1.0)
    out = 0.0
    if lo > 0:
        out += integrate.quad(f, 0, lo, limit=200)[0]
    if hi < 1:
        out += integrate.quad(f, hi, 1, limit=200)[0]
    return out


@pytest.mark.parametrize("case", ["strong_positive", "fixed_beta", "scaled_lt1", "scaled_gt1"])
def test_posterior_concentration_ladder(case):
    # Posterior mass outside a neighbourhood of the limiting frequency must
    # shrink as the large parameter grows.
    if case == "strong_positive":
        ladder = [(SampleCounts(3, 7), ModelParams(0.5, 0.5, b)) for b in (25.0, 50.0, 100.0, 200.0)]
        centre, delta = 1.0, 0.1
    else:
        bt = {"fixed_beta": None, "scaled_lt1": -0.5, "scaled_gt1": 2.0}[case]
        ladder = [(SampleCounts(3, n2), ModelParams(0.2, 0.5, -5.0 if bt is None else bt * n2))
                  for n2 in (50, 200, 800, 3200)]
        centre = 0.0 if bt is None or bt < 1 else 1 - 1 / bt
        delta = 0.05
    masses = [_mass_outside(c, p, centre, delta) for c, p in ladder]
    assert all(b < a for a, b in zip(masses, masses[1:])), masses
    assert masses[-1] < 0.01


def test_posterior_mean_scaled_lt1():
    t1, bt, n1, n2 = 0.2, -0.5, 3, 10_000
    counts, params = SampleCounts(n1, n2), ModelParams(t1, 0.5, bt * n2)
    predicted = (t1 + n1) / ((1 - bt) * counts.n)
    mean = integrate.quad(lambda x: x * math.exp(posterior_pdf(x, counts, params)), 0, 0.05,
                          points=[predicted], limit=200)[0]
    assert mean == pytest.approx(predicted, rel=0.01)


def test_asym_large_negative_beta_accuracy():
    # First-order error is a (b - a - 1)/|beta| - theta1 (theta2 - 1)/|beta|
    # with a = theta1 + n1, b = theta + n.
    t1, t2, beta = 0.1, 0.5, -500.0
    counts, params = SampleCounts(2, 4), ModelParams(t1, t2, beta)
    rel = abs(math.expm1(sampling_prob_asym(counts, params, AsymRegime.LargeBetaNeg)
                         - sampling_prob(counts, params)))
    a, b = t1 + 2, t1 + t2 + 6
    predicted = (a * (b - a - 1) - t1 * (t2 - 1)) / abs(beta)
    assert rel == pytest.approx(predicted, rel=0.05)


def test_asym_scaled_gt1_close_to_exact():
    counts, params = SampleCounts(1, 400), ModelParams(0.5, 0.5, 800.0)
    approx = sampling_prob_asym(counts, params, AsymRegime.ScaledBetaGt1)
    assert abs(math.expm1(approx - sampling_prob(counts, params))) < 0.05


def test_asym_lt1_shape_reduces_to_neutral():
    # n1-dependence at small negative beta_tilde approaches Gamma(t1 + n1) / n1!
    p = ModelParams(0.3, 0.5, -1e-6 * 1000)
    f = lambda n1: sampling_prob_asym(SampleCounts(n1, 1000), p, AsymRegime.ScaledBetaLt1)
    neutral = lambda n1: gammaln(0.3 + n1) - gammaln(n1 + 1)
    assert f(4) - f(1) == pytest.approx(neutral(4) - neutral(1), abs=1e-5)


def test_ratio_forms():
    assert sampling_ratio_asym(SampleCounts(2, 100), ScaledSelection(-1.0), 0.5) == pytest.approx(2.5 / 6)
    assert sampling_ratio_asym(SampleCounts(0, 1000), ScaledSelection(2.0), 0.5) == pytest.approx(500.0)
    assert sampling_ratio_asym(SampleCounts(3, 100), ScaledSelection(-1e-12), 0.5) == pytest.approx(3.5 / 4)


def test_ratio_form_matches_exact_ratio():
    n2, bt, th1 = 10_000, -0.5, 0.3
    p = ModelParams(th1, 0.5, bt * n2)
    exact = math.exp(sampling_prob(SampleCounts(3, n2), p) - sampling_prob(SampleCounts(2, n2), p))
    approx = sampling_ratio_asym(SampleCounts(2, n2), ScaledSelection(bt), th1)
    assert approx == pytest.approx(exact, rel=1e-3)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(-0.1, 0.5, 0.0)
    with pytest.raises(ValueError):
        SampleCounts(-1, 2)
