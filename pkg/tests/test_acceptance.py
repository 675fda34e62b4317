"""End-to-end acceptance checks at full replicate counts.

Each test records one PASS/FAIL line (see ``conftest.py``) and then
asserts. The scenario runs are shared between criteria through
module-scoped fixtures.
"""
import math

import pytest

from wfselect.experiments import ExperimentConfig, run
from wfselect.specfun import log_hyp1f1
from wfselect.stationary import (ModelParams, SampleCounts, log_norm_const, posterior_pdf,
                                 sampling_prob, stationary_pdf)
from scipy import integrate
from scipy.special import gammaln

pytestmark = pytest.mark.slow

SEED = 20240611


def _fmt(rows):
    return "; ".join(f"{r.statistic}={r.value:.4g} ({r.threshold})" for r in rows)


def _checks(table, *names):
    rows = [table.get(n) for n in names]
    return all(r.passed for r in rows), _fmt(rows)


@pytest.fixture(scope="module")
def iii_a():
    return run(ExperimentConfig("iii_a", seed=SEED))


@pytest.fixture(scope="module")
def scen_i():
    return run(ExperimentConfig("i", seed=SEED))


@pytest.fixture(scope="module")
def iii_b():
    return run(ExperimentConfig("iii_b", seed=SEED))


def test_criterion_1_ewens_limit(iii_a, record_criterion):
    ok, detail = _checks(iii_a, "TV_K1_vs_Ewens")
    record_criterion(1, ok, f"n=(3,1e4) bt=-0.5 R=1e5: {detail}")
    assert ok


def test_criterion_2_favoured_age(scen_i, record_criterion):
    ok, detail = _checks(scen_i, "KS_age1_over_beta_vs_Exp", "P(K1=1)", "TV_K2_vs_Ewens")
    record_criterion(2, ok, f"beta=800 R=1e4: {detail}")
    assert ok


def test_criterion_3_scaled_favoured_age(iii_b, record_criterion):
    names = ["KS_age1_over_n_vs_Exp"] + [r.statistic for r in iii_b.rows
                                         if r.statistic.startswith("z_gap_")]
    ok, detail = _checks(iii_b, *names)
    record_criterion(3, ok, f"bt=2 R=5e3: {detail}")
    assert ok


def test_criterion_4_posterior_gamma(iii_a, record_criterion):
    ok, detail = _checks(iii_a, "KS_n2_p0_vs_Gamma")
    record_criterion(4, ok, f"n1=2 theta1=0.3 bt=-0.5 draws=1e5: {detail}")
    assert ok


def test_criterion_5_cir_means(scen_i, iii_b, record_criterion):
    a = scen_i.get("QZero_mean_rel_error")
    b = iii_b.get("QTilde_mean_rel_error")
    ok = a.passed and b.passed
    record_criterion(5, ok, _fmt([a, b]))
    assert ok


def test_criterion_6_moran_bridge(record_criterion):
    t = run(ExperimentConfig("moran", seed=SEED))
    ok, detail = _checks(t, "BDI_chisquare_pvalue", "mixing_identity_max_rel_error",
                         "bridge_to_diffusion_max_rel_error", "z_WF_variance_vs_negative_binomial")
    record_criterion(6, ok, detail)
    assert ok


def test_criterion_7_asymptotics_audit(record_criterion):
    t = run(ExperimentConfig("asymptotics_audit", seed=SEED))
    bad = [r for r in t.checks if not r.passed]
    ratios = [r.value for r in t.checks if ":ratio" in r.statistic]
    record_criterion(7, not bad, f"{len(t.checks)} checks, ratios in [{min(ratios):.3f}, "
                                 f"{max(ratios):.3f}], failing: {_fmt(bad) or 'none'}")
    assert not bad


def test_criterion_8_asg_crosscheck(record_criterion):
    t = run(ExperimentConfig("asg_crosscheck", seed=SEED))
    ok, detail = _checks(t, "TV_K1_asg_vs_ancestry", "max_harmonicity_rel_error",
                         "max_collapse_rel_error")
    record_criterion(8, ok, f"R=1e5 each: {detail}")
    assert ok


def _exact_formula_errors():
    errs = {}
    # normalization of the stationary density
    p = ModelParams(0.1, 0.3, -5.0)
    c = log_norm_const(p)
    val, _ = integrate.quad(lambda x: math.exp(c + p.beta * x), 0, 1, weight="alg",
                            wvar=(p.theta1 - 1, p.theta2 - 1))
    errs["normalization"] = (abs(val - 1.0), 1e-8)
    # label swap
    worst = 0.0
    for n1, n2, beta in [(2, 5, 3.0), (0, 7, -12.0), (4, 1, 250.0), (3, 3, -40.0)]:
        a = sampling_prob(SampleCounts(n1, n2), ModelParams(0.3, 0.9, beta))
        b = sampling_prob(SampleCounts(n2, n1), ModelParams(0.9, 0.3, -beta))
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    errs["label_swap"] = (worst, 1e-12)
    # Bayes: posterior = likelihood x prior / evidence
    counts, params, x = SampleCounts(3, 4), ModelParams(0.4, 0.6, 2.5), 0.37
    log_binom = gammaln(8) - gammaln(4) - gammaln(5)
    rhs = (log_binom + 3 * math.log(x) + 4 * math.log1p(-x) + stationary_pdf(x, params)
           - sampling_prob(counts, params))
    errs["bayes"] = (abs(posterior_pdf(x, counts, params) - rhs) / abs(rhs), 1e-10)
    # Kummer transformation
    worst = 0.0
    for a, b, z in [(0.4, 1.9, -12.0), (2.0, 3.5, 40.0), (0.2, 10_000.7, -5000.0)]:
        lhs = log_hyp1f1(a, b, z)
        worst = max(worst, abs(lhs - (z + log_hyp1f1(b - a, b, -z))) / max(1.0, abs(lhs)))
    errs["kummer"] = (worst, 1e-11)
    # sampling probabilities sum to one
    worst = 0.0
    for params, n in [(ModelParams(0.05, 0.2, -3.0), 20), (ModelParams(0.3, 0.7, 40.0), 30)]:
        s = math.fsum(math.exp(sampling_prob(SampleCounts(k, n - k), params)) for k in range(n + 1))
        worst = max(worst, abs(s - 1.0))
    errs["sum_q"] = (worst, 1e-10)
    return errs


def test_criterion_9_exact_formulas(record_criterion):
    errs = _exact_formula_errors()
    ok = all(e < tol for e, tol in errs.values())
    record_criterion(9, ok, "; ".join(f"{k}={e:.1e} (<{tol:.0e})" for k, (e, tol) in errs.items()))
    assert ok


def test_criterion_10_time_varying(record_criterion):
    t = run(ExperimentConfig("time_varying", seed=SEED))
    ok, detail = _checks(t, "TV_K1_vs_Ewens")
    record_criterion(10, ok, f"rho 1->3 over T=0.01, R=5e4: {detail}")
    assert ok
