import math

import mpmath
import numpy as np
import pytest
from scipy.special import gammaln

from wfselect.specfun import (AsymRegime, EvaluationError, HypArgs, LogValue, gamma_ratio_asym,
                              hyp1f1, hyp1f1_asym, log_hyp1f1)

# 50-digit term-by-term series, computed once with mpmath.
LOG_1F1_HALF_THREEHALVES_M80 = -2.311795554972186028861845
# mpmath Gamma(50.4) / Gamma(52.1)
GAMMA_RATIO_04_21_50 = 0.001261192255758181675195713


def test_zero_argument_is_one():
    v = hyp1f1(HypArgs(3.7, 5.2, 0.0))
    assert v.log_magnitude == 0.0 and v.sign == 1


def test_closed_form_a1_b2():
    assert hyp1f1(HypArgs(1.0, 2.0, 1.0)).value == pytest.approx(math.e - 1.0, rel=1e-14)


def test_large_negative_argument_frozen():
    v = hyp1f1(HypArgs(0.5, 1.5, -80.0))
    assert v.log_magnitude == pytest.approx(LOG_1F1_HALF_THREEHALVES_M80, rel=1e-13)


@pytest.mark.parametrize("a,b,z", [
    (0.3, 0.8, 5.0), (2.5, 7.0, -30.0), (0.01, 0.03, 800.0), (1.2, 3.4, -2000.0),
    (10.3, 10_000.5, -5000.0), (3.2, 10_000.7, 20_000.0), (0.5, 0.7, -1e4),
])
def test_against_mpmath(a, b, z):
    ref = float(mpmath.log(mpmath.hyp1f1(a, b, z, maxterms=10**6)))
    assert log_hyp1f1(a, b, z) == pytest.approx(ref, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("a,b,z", [(0.4, 1.9, -12.0), (2.0, 3.5, 40.0), (0.2, 10_000.7, -5000.0)])
def test_kummer_transformation(a, b, z):
    # 1F1(a; b; z) = e^z 1F1(b - a; b; -z)
    assert log_hyp1f1(a, b, z) == pytest.approx(z + log_hyp1f1(b - a, b, -z), rel=1e-11, abs=1e-11)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        HypArgs(-1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        HypArgs(1.0, 2.0, math.inf)
    with pytest.raises(ValueError):
        LogValue(0.0, 0)


def test_tiny_term_cap_raises():
    with pytest.raises(EvaluationError):
        hyp1f1(HypArgs(0.5, 1.5, 200.0), max_terms=5)


def test_gamma_ratio_identities():
    assert gamma_ratio_asym(1.3, 1.3, 10) == 1.0
    assert gamma_ratio_asym(2.0, 1.0, 100) == pytest.approx(101.0, rel=1e-15)


def test_gamma_ratio_second_order():
    approx = gamma_ratio_asym(0.4, 2.1, 50)
    rel = abs(approx / GAMMA_RATIO_04_21_50 - 1.0)
    # Error is O(n2^-2): well below the first-order size 1/50.
    assert rel < 1e-3
    assert math.exp(gammaln(50.4) - gammaln(52.1)) == pytest.approx(GAMMA_RATIO_04_21_50, rel=1e-12)


def test_scaled_lt1_at_zero():
    assert hyp1f1_asym(HypArgs(0.7, 1.0, 0.0), AsymRegime.ScaledBetaLt1, n2=50).log_magnitude == 0.0


def _rel(approx: LogValue, a, b, z):
    return abs(math.expm1(approx.log_magnitude - log_hyp1f1(a, b, z)))


def test_large_negative_ratio_two():
    a, b = 1.2, 3.4
    e1 = _rel(hyp1f1_asym(HypArgs(a, b, -200.0), AsymRegime.LargeBetaNeg, order=0), a, b, -200.0)
    e2 = _rel(hyp1f1_asym(HypArgs(a, b, -400.0), AsymRegime.LargeBetaNeg, order=0), a, b, -400.0)
    assert e1 / e2 == pytest.approx(2.0, rel=0.25)


def test_first_correction_improves():
    a, b, z = 1.2, 3.4, -200.0
    e0 = _rel(hyp1f1_asym(HypArgs(a, b, z), AsymRegime.LargeBetaNeg, order=0), a, b, z)
    e1 = _rel(hyp1f1_asym(HypArgs(a, b, z), AsymRegime.LargeBetaNeg, order=1), a, b, z)
    assert e1 < e0 / 20


def test_scaled_gt1_within_five_percent():
    a, b, n2 = 0.5, 1.0, 200
    approx = hyp1f1_asym(HypArgs(a, b, 2.0 * n2), AsymRegime.ScaledBetaGt1, n2=n2)
    assert _rel(approx, a, b + n2, 2.0 * n2) < 0.05


@pytest.mark.parametrize("regime,z", [(AsymRegime.LargeBetaNeg, 5.0), (AsymRegime.LargeBetaPos, -5.0),
                                      (AsymRegime.ScaledBetaLt1, 600.0),
                                      (AsymRegime.ScaledBetaGt1, 100.0)])
def test_regime_domain_errors(regime, z):
    with pytest.raises(ValueError):
        hyp1f1_asym(HypArgs(1.0, 2.0, z), regime, n2=200)


def test_vectorised_inputs_consistent():
    zs = np.linspace(-50, 50, 11)
    vals = [log_hyp1f1(0.7, 1.9, z) for z in zs]
    assert np.all(np.diff(vals) > 0)
