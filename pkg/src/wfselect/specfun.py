"""Confluent hypergeometric function 1F1 and its large-parameter forms.

Everything here works in log space. Values such as ``1F1(a; b; 800)``
are of order ``e**800`` and overflow double precision, so the public
functions return a :class:`LogValue` (a log-magnitude plus a sign).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
from scipy.special import gammaln

__all__ = [
    "AsymRegime",
    "EvaluationError",
    "HypArgs",
    "LogValue",
    "gamma_ratio_asym",
    "hyp1f1",
    "hyp1f1_asym",
    "log_hyp1f1",
]

# Stop the series once this many consecutive terms each contribute less
# than REL_TOL relative to the running sum.
REL_TOL = 1e-16
QUIET_TERMS = 3
DEFAULT_MAX_TERMS = 10_000


class EvaluationError(ArithmeticError):
    """Raised when a series fails to converge or loses all precision."""


@dataclass(frozen=True)
class HypArgs:
    """Arguments ``(a, b, z)`` of ``1F1(a; b; z)``."""

    a: float
    b: float
    z: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"1F1 requires a > 0 and b > 0, got a={self.a}, b={self.b}")
        if not math.isfinite(self.z):
            raise ValueError(f"z must be finite, got {self.z}")


@dataclass(frozen=True)
class LogValue:
    """A real number stored as ``sign * exp(log_magnitude)``."""

    log_magnitude: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def value(self) -> float:
        """The number itself (may overflow to inf)."""
        return self.sign * math.exp(self.log_magnitude)

    def __float__(self) -> float:
        return self.value


class AsymRegime(enum.Enum):
    """Asymptotic regimes for 1F1 and the sampling probabilities."""

    LargeBetaNeg = "LargeBetaNeg"
    LargeBetaPos = "LargeBetaPos"
    LargeN2FixedBeta = "LargeN2FixedBeta"
    ScaledBetaLt1 = "ScaledBetaLt1"
    ScaledBetaGt1 = "ScaledBetaGt1"


def _default_cap(z: float) -> int:
    # The terms of the series peak near k = |z|, so a fixed cap would make
    # large arguments fail by construction.
    return DEFAULT_MAX_TERMS + int(2.0 * abs(z))


def _series(a: float, b: float, z: float, max_terms: int) -> tuple[float, int]:
    """log|S| and sign of S = sum_k (a)_k z^k / ((b)_k k!), for b > 0.

    Terms are stored as (log-magnitude, sign) and summed with ``math.fsum``
    after rescaling by the largest one, so magnitudes like e**800 are fine.
    The caller arranges z >= 0, which makes all terms beyond k > -a share
    one sign; only the first few terms can then cancel.
    """
    if z == 0.0:
        return 0.0, 1
    log_terms = [0.0]
    signs = [1]
    log_t = 0.0
    sign = 1
    peak = 0.0
    quiet = 0
    log_tol = math.log(REL_TOL)
    for k in range(max_terms):
        ratio = (a + k) * z / ((b + k) * (k + 1.0))
        if ratio == 0.0:
            # a is a non-positive integer: the series is a polynomial.
            break
        log_t += math.log(abs(ratio))
        if ratio < 0:
            sign = -sign
        log_terms.append(log_t)
        signs.append(sign)
        peak = max(peak, log_t)
        if log_t - peak < log_tol and abs(ratio) < 0.5:
            quiet += 1
            if quiet >= QUIET_TERMS:
                break
        else:
            quiet = 0
    else:
        raise EvaluationError(
            f"1F1({a}; {b}; {z}) series did not converge in {max_terms} terms "
            f"(last relative term e^{log_t - peak:.1f})"
        )
    total = math.fsum(s * math.exp(lt - peak) for lt, s in zip(log_terms, signs))
    if total == 0.0 or abs(total) < 1e-8:
        raise EvaluationError(
            f"1F1({a}; {b}; {z}): cancellation destroyed the result "
            f"(largest term e^{peak:.1f}, rescaled sum {total:.3e})"
        )
    return peak + math.log(abs(total)), (1 if total > 0 else -1)


@lru_cache(maxsize=65536)
def _log_hyp1f1_cached(a: float, b: float, z: float, max_terms: int) -> tuple[float, int]:
    if z >= 0.0:
        return _series(a, b, z, max_terms)
    # Kummer: 1F1(a; b; z) = e^z 1F1(b - a; b; -z). The transformed series
    # has a positive argument, so the alternating cancellation of the
    # direct series at negative z never happens.
    try:
        log_mag, sign = _series(b - a, b, -z, max_terms)
    except EvaluationError:
        if b - a >= 0:
            raise
        # b - a < 0: the leading terms alternate and may cancel almost
        # completely (a >> b gives Laguerre-like oscillation). Fall back to
        # extended precision rather than return a meaningless value.
        return _extended_precision(a, b, z)
    return z + log_mag, sign


def _extended_precision(a: float, b: float, z: float) -> tuple[float, int]:
    with mpmath.workdps(60):
        val = mpmath.hyp1f1(a, b, z)
        if val == 0:
            raise EvaluationError(f"1F1({a}; {b}; {z}) evaluated to zero")
        return float(mpmath.log(abs(val))), (1 if val > 0 else -1)


def hyp1f1(args: HypArgs, max_terms: int | None = None) -> LogValue:
    """Evaluate ``1F1(a; b; z)`` in log space.

    Parameters
    ----------
    args : HypArgs
        The arguments; ``a`` and ``b`` must be positive.
    max_terms : int, optional
        Iteration cap. Defaults to ``10_000 + 2|z|``.

    Returns
    -------
    LogValue

    Notes
    -----
    For ``z >= 0`` the defining series has positive terms. For ``z < 0``
    Kummer's transformation is applied first, so the series is always
    summed at a non-negative argument.
    """
    cap = _default_cap(args.z) if max_terms is None else int(max_terms)
    log_mag, sign = _log_hyp1f1_cached(float(args.a), float(args.b), float(args.z), cap)
    return LogValue(log_mag, sign)


def log_hyp1f1(a: float, b: float, z: float) -> float:
    """Shorthand for ``log 1F1(a; b; z)`` when the value is known positive."""
    if not (a > 0 and b > 0):
        raise ValueError(f"1F1 requires a > 0 and b > 0, got a={a}, b={b}")
    log_mag, sign = _log_hyp1f1_cached(float(a), float(b), float(z), _default_cap(z))
    if sign < 0:
        raise EvaluationError(f"1F1({a}; {b}; {z}) is negative")
    return log_mag


def gamma_ratio_asym(a: float, b: float, n2: int) -> float:
    """Two-term expansion of ``Gamma(a + n2) / Gamma(b + n2)``.

    Returns ``n2**(a-b) * (1 + (a-b)(a+b-1)/(2 n2))``; the relative error
    is O(n2**-2).
    """
    if n2 <= 0 or a + n2 <= 0 or b + n2 <= 0:
        raise ValueError("need n2 > 0, a + n2 > 0 and b + n2 > 0")
    return n2 ** (a - b) * (1.0 + (a - b) * (a + b - 1.0) / (2.0 * n2))


def _from_signed(log_part: float, factor: float) -> LogValue:
    if factor == 0.0:
        return LogValue(-math.inf, 1)
    return LogValue(log_part + math.log(abs(factor)), 1 if factor > 0 else -1)


def hyp1f1_asym(args: HypArgs, regime: AsymRegime, n2: int | None = None,
                order: int = 1) -> LogValue:
    """Large-parameter approximation of the confluent hypergeometric function.

    Parameters
    ----------
    args : HypArgs
        For ``LargeBetaNeg``/``LargeBetaPos`` the target is ``1F1(a; b; z)``
        with ``|z|`` large. For the three large-``n2`` regimes the target is
        ``1F1(a; b + n2; z)``; in the scaled regimes ``z = beta_tilde * n2``.
    regime : AsymRegime
    n2 : int, optional
        The large integer parameter; required by the large-``n2`` regimes.
    order : {0, 1}
        ``1`` (default) keeps the first correction term in the regimes that
        have one (large |z| and ``LargeN2FixedBeta``); ``0`` keeps only the
        leading term. The scaled regimes are leading order either way.

    Returns
    -------
    LogValue
    """
    a, b, z = float(args.a), float(args.b), float(args.z)
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")

    if regime is AsymRegime.LargeBetaNeg:
        if z >= 0:
            raise ValueError("LargeBetaNeg needs z < 0")
        if b <= a:
            raise ValueError("LargeBetaNeg needs b > a")
        w = -z
        lead = gammaln(b) - gammaln(b - a) - a * math.log(w)
        corr = 1.0 - a * (b - a - 1.0) / w if order else 1.0
        return _from_signed(lead, corr)

    if regime is AsymRegime.LargeBetaPos:
        if z <= 0:
            raise ValueError("LargeBetaPos needs z > 0")
        lead = gammaln(b) - gammaln(a) + z + (a - b) * math.log(z)
        corr = 1.0 - (b - a) * (a - 1.0) / z if order else 1.0
        return _from_signed(lead, corr)

    if n2 is None or n2 <= 0:
        raise ValueError(f"{regime.value} needs a positive n2")

    if regime is AsymRegime.LargeN2FixedBeta:
        corr = 1.0 + a * z / n2 if order else 1.0
        return _from_signed(0.0, corr)

    bt = z / n2
    if regime is AsymRegime.ScaledBetaLt1:
        if bt >= 1:
            raise ValueError("ScaledBetaLt1 needs beta_tilde = z/n2 < 1")
        return LogValue(-a * math.log1p(-bt), 1)

    if regime is AsymRegime.ScaledBetaGt1:
        if bt <= 1:
            raise ValueError("ScaledBetaGt1 needs beta_tilde = z/n2 > 1")
        log_val = (0.5 * math.log(2 * math.pi) - gammaln(a)
                   + (a - 1.0) * math.log1p(-1.0 / bt)
                   - (b - a + n2) * math.log(bt)
                   + (a - 0.5) * math.log(n2)
                   + n2 * (bt - 1.0))
        return LogValue(log_val, 1)

    raise ValueError(f"unknown regime {regime!r}")
