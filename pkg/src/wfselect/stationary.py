"""Stationary law of the two-allele Wright-Fisher diffusion with selection.

The stationary density is

    phi(x) = C x**(theta1 - 1) (1 - x)**(theta2 - 1) exp(beta x),

and the probability of an ordered-free sample ``(n1, n2)`` is the binomial
mixture of ``phi``. Everything is returned on the log scale because
``beta`` and the sample size reach 1e4 in the large-parameter regimes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaln, gammaln

from .specfun import AsymRegime, EvaluationError, log_hyp1f1

__all__ = [
    "ModelParams",
    "SampleCounts",
    "ScaledSelection",
    "SamplerError",
    "log_norm_const",
    "stationary_pdf",
    "sampling_prob",
    "posterior_pdf",
    "posterior_sample",
    "sampling_prob_asym",
    "sampling_ratio_asym",
]


@dataclass(frozen=True)
class ModelParams:
    """Mutation rates ``theta1`` (into A1), ``theta2`` (into A2) and selection ``beta`` on A1."""

    theta1: float
    theta2: float
    beta: float = 0.0

    def __post_init__(self):
        if not (self.theta1 > 0 and self.theta2 > 0):
            raise ValueError(f"mutation rates must be positive, got {self.theta1}, {self.theta2}")
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")

    @property
    def theta(self) -> float:
        return self.theta1 + self.theta2

    def swapped(self) -> "ModelParams":
        """The same model with allele labels exchanged."""
        return ModelParams(self.theta2, self.theta1, -self.beta)


@dataclass(frozen=True)
class SampleCounts:
    """Observed allele counts."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def swapped(self) -> "SampleCounts":
        return SampleCounts(self.n2, self.n1)


@dataclass(frozen=True)
class ScaledSelection:
    """Selection measured relative to the sample: ``beta_tilde = beta / n2``."""

    beta_tilde: float

    def __post_init__(self):
        if not math.isfinite(self.beta_tilde):
            raise ValueError("beta_tilde must be finite")

    def beta(self, n2: int) -> float:
        return self.beta_tilde * n2


class SamplerError(RuntimeError):
    """Raised when a rejection sampler would accept too rarely to be usable."""


# ---------------------------------------------------------------------------
# exact formulas


def log_norm_const(params: ModelParams) -> float:
    """Log of the normalizing constant ``C`` of the stationary density."""
    t1, t2 = params.theta1, params.theta2
    return float(gammaln(t1 + t2) - gammaln(t1) - gammaln(t2)
                 - log_hyp1f1(t1, t1 + t2, params.beta))


def stationary_pdf(x, params: ModelParams):
    """Log stationary density at ``x`` (scalar or array, strictly inside (0, 1))."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) | (xa >= 1)):
        raise ValueError("x must lie strictly inside (0, 1)")
    out = (log_norm_const(params) + (params.theta1 - 1) * np.log(xa)
           + (params.theta2 - 1) * np.log1p(-xa) + params.beta * xa)
    return float(out) if np.ndim(out) == 0 else out


def _log_binom(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def sampling_prob(counts: SampleCounts, params: ModelParams) -> float:
    """Log probability that a sample of size ``n`` holds ``n1`` copies of A1."""
    n1, n2 = counts.n1, counts.n2
    t1, t2 = params.theta1, params.theta2
    n = n1 + n2
    return float(log_norm_const(params) + _log_binom(n, n1)
                 + gammaln(t1 + n1) + gammaln(t2 + n2) - gammaln(t1 + t2 + n)
                 + log_hyp1f1(t1 + n1, t1 + t2 + n, params.beta))


def _log_posterior_const(counts: SampleCounts, params: ModelParams) -> float:
    a = params.theta1 + counts.n1
    b = params.theta2 + counts.n2
    return -float(betaln(a, b) + log_hyp1f1(a, a + b, params.beta))


def posterior_pdf(x, counts: SampleCounts, params: ModelParams):
    """Log density of the population frequency given the sample.

    This is ``x**(a-1) (1-x)**(b-1) exp(beta x)`` normalized, with
    ``a = theta1 + n1`` and ``b = theta2 + n2``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) | (xa >= 1)):
        raise ValueError("x must lie strictly inside (0, 1)")
    a = params.theta1 + counts.n1
    b = params.theta2 + counts.n2
    out = (_log_posterior_const(counts, params) + (a - 1) * np.log(xa)
           + (b - 1) * np.log1p(-xa) + params.beta * xa)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# posterior sampling
#
# Target density on (0, 1): x**(a-1) (1-x)**(b-1) exp(beta x).
#
# Three rejection envelopes are available, each with a closed-form
# acceptance rate, plus an exact mixture representation used whenever no
# envelope accepts often enough:
#
#   beta     Beta(a, b) proposal, accept with exp(beta (x - max(beta, 0)) ...)
#   gamma    Gamma(a, rate b - 1 - beta) proposal (needs b >= 1), accept with
#            (1-x)**(b-1) exp((b-1) x); reject x >= 1
#   mirror   the same on y = 1 - x with Gamma(b, rate a - 1 + beta) (a >= 1)
#   mixture  exp(z y) = sum_k z**k y**k / k! turns the target into a
#            Poisson-like mixture of Beta laws; exact for any parameters


MIN_AUTO_ACCEPT = 0.05
MIN_FORCED_ACCEPT = 1e-6
MIXTURE_LOG_CUTOFF = 45.0


def _log_target_mass(a: float, b: float, beta: float) -> float:
    return float(betaln(a, b) + log_hyp1f1(a, a + b, beta))


def _acceptance(a: float, b: float, beta: float) -> dict[str, float]:
    """Predicted acceptance rate of every applicable rejection envelope."""
    log_mass = _log_target_mass(a, b, beta)
    out = {"beta": math.exp(log_mass - betaln(a, b) - max(beta, 0.0))}
    rate = b - 1.0 - beta
    if b >= 1 and rate > 0:
        out["gamma"] = math.exp(log_mass - (gammaln(a) - a * math.log(rate)))
    rate_m = a - 1.0 + beta
    if a >= 1 and rate_m > 0:
        # mirrored target has mass e^{-beta} times the original
        out["mirror"] = math.exp(log_mass - beta - (gammaln(b) - b * math.log(rate_m)))
    return out


@lru_cache(maxsize=256)
def _mixture_plan(p: float, q: float, z: float) -> tuple[np.ndarray, np.ndarray]:
    """Support and CDF of K with weights proportional to (p)_k z^k / ((p+q)_k k!)."""
    if z == 0.0:
        return np.zeros(1, dtype=np.int64), np.ones(1)
    # The term ratio (p+k) z / ((p+q+k)(k+1)) falls below one past roughly
    # k = z; the weights then decay at least geometrically.
    kmax = int(z + 60.0 * math.sqrt(z + 1.0) + 200)
    k = np.arange(kmax + 1, dtype=float)
    logw = (gammaln(p + k) - gammaln(p) + k * math.log(z)
            - gammaln(p + q + k) + gammaln(p + q) - gammaln(k + 1))
    top = logw.max()
    keep = logw > top - MIXTURE_LOG_CUTOFF
    if keep[-1]:
        raise EvaluationError(f"mixture table for z={z} not wide enough")
    ks = np.nonzero(keep)[0]
    lo, hi = ks[0], ks[-1]
    w = np.exp(logw[lo:hi + 1] - top)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    return np.arange(lo, hi + 1, dtype=np.int64), cdf


def _sample_mixture(a, b, beta, rng, size):
    if beta >= 0:
        p, q, z, mirrored = a, b, beta, False
    else:
        p, q, z, mirrored = b, a, -beta, True
    ks, cdf = _mixture_plan(float(p), float(q), float(z))
    kdraw = ks[np.searchsorted(cdf, rng.random(size), side="right").clip(0, len(ks) - 1)]
    g1 = rng.standard_gamma(p + kdraw)
    g2 = rng.standard_gamma(np.full(size, q))
    # y = g1 / (g1 + g2) follows the mirrored law; x = 1 - y is formed as
    # g2 / (g1 + g2) so that x near 0 keeps full relative precision.
    x = (g2 if mirrored else g1) / (g1 + g2)
    return x


def _sample_rejection(a, b, beta, rng, size, scheme, accept_rate):
    out = np.empty(size)
    filled = 0
    batch = max(64, int(1.2 * size / max(accept_rate, 1e-3)))
    while filled < size:
        if scheme == "beta":
            x = rng.beta(a, b, batch)
            log_acc = beta * x - max(beta, 0.0)
        elif scheme == "gamma":
            x = rng.gamma(a, 1.0 / (b - 1.0 - beta), batch)
            ok = x < 1
            x = np.where(ok, x, 0.5)
            log_acc = np.where(ok, (b - 1.0) * (np.log1p(-x) + x), -np.inf)
        else:  # mirror
            y = rng.gamma(b, 1.0 / (a - 1.0 + beta), batch)
            ok = y < 1
            y = np.where(ok, y, 0.5)
            log_acc = np.where(ok, (a - 1.0) * (np.log1p(-y) + y), -np.inf)
            x = 1.0 - y
        u = rng.random(batch)
        acc = x[np.log(u) < log_acc]
        take = min(len(acc), size - filled)
        out[filled:filled + take] = acc[:take]
        filled += take
    return out


def posterior_sample(counts: SampleCounts, params: ModelParams, rng: np.random.Generator,
                     size: int | None = None, method: str = "auto"):
    """Exact draws from the posterior of the population frequency.

    Parameters
    ----------
    counts, params
        Sample and model.
    rng : numpy.random.Generator
        Random source owned by the caller.
    size : int, optional
        Number of draws; a scalar is returned when omitted.
    method : {"auto", "beta", "gamma", "mirror", "mixture"}
        ``auto`` uses the Beta-proposal rejection sampler for moderate
        ``|beta|``, otherwise the Gamma envelope with the best acceptance
        rate, and falls back to the exact mixture sampler when every
        envelope accepts less than 5% of proposals.

    Raises
    ------
    SamplerError
        If a rejection scheme is forced whose acceptance rate is below 1e-6,
        or the forced scheme does not apply to these parameters.
    """
    a = params.theta1 + counts.n1
    b = params.theta2 + counts.n2
    beta = params.beta
    n = 1 if size is None else int(size)

    if method == "mixture":
        x = _sample_mixture(a, b, beta, rng, n)
    else:
        rates = _acceptance(a, b, beta)
        if method == "auto":
            if abs(beta) <= 30 and rates["beta"] >= MIN_AUTO_ACCEPT:
                scheme = "beta"
            else:
                scheme = max(rates, key=rates.get)
                if rates[scheme] < MIN_AUTO_ACCEPT:
                    scheme = "mixture"
        else:
            if method not in rates:
                raise SamplerError(f"rejection scheme {method!r} does not apply to "
                                   f"a={a}, b={b}, beta={beta}")
            if rates[method] < MIN_FORCED_ACCEPT:
                raise SamplerError(
                    f"acceptance rate of the {method!r} envelope is {rates[method]:.2e}; "
                    "use method='gamma'/'mirror' (Gamma-limit proposals) or 'mixture'")
            scheme = method
        if scheme == "mixture":
            x = _sample_mixture(a, b, beta, rng, n)
        else:
            x = _sample_rejection(a, b, beta, rng, n, scheme, rates[scheme])
    return float(x[0]) if size is None else x


# ---------------------------------------------------------------------------
# large-parameter forms


def sampling_prob_asym(counts: SampleCounts, params: ModelParams, regime: AsymRegime,
                       scaled: ScaledSelection | None = None) -> float:
    """Leading-order log sampling probability in one asymptotic regime.

    Parameters
    ----------
    counts, params
        Sample and model. In the scaled regimes ``beta_tilde`` is taken from
        ``scaled`` when given and from ``params.beta / n2`` otherwise.
    regime : AsymRegime
        ``LargeBetaNeg``/``LargeBetaPos``: ``|beta|`` large, ``n`` fixed.
        ``LargeN2FixedBeta``: ``n2`` large, ``beta`` fixed.
        ``ScaledBetaLt1``: ``beta_tilde < 1`` (either sign, nonzero).
        ``ScaledBetaGt1``: ``beta_tilde > 1``.

    Notes
    -----
    For ``0 < beta_tilde < 1`` and ``beta_tilde > 1`` only the shape in
    ``n1`` and the growth in ``n2`` are fixed by the expansion; the
    prefactors used here come from carrying the Laplace-method constants
    through, so the result is a genuine approximation of ``q`` rather than
    a proportionality statement.
    """
    n1, n2 = counts.n1, counts.n2
    n = n1 + n2
    t1, t2, beta = params.theta1, params.theta2, params.beta

    if regime is AsymRegime.LargeBetaNeg:
        if beta >= 0:
            raise ValueError("LargeBetaNeg needs beta < 0")
        return float(_log_binom(n, n1) + gammaln(t1 + n1) - gammaln(t1) - n1 * math.log(-beta))
    if regime is AsymRegime.LargeBetaPos:
        if beta <= 0:
            raise ValueError("LargeBetaPos needs beta > 0")
        return float(_log_binom(n, n1) + gammaln(t2 + n2) - gammaln(t2) - n2 * math.log(beta))

    if n2 <= 0:
        raise ValueError(f"{regime.value} needs n2 > 0")
    if regime is AsymRegime.LargeN2FixedBeta:
        return float(log_norm_const(params) + gammaln(t1 + n1) - gammaln(n1 + 1)
                     - t1 * math.log(n2))

    bt = scaled.beta_tilde if scaled is not None else beta / n2
    if regime is AsymRegime.ScaledBetaLt1:
        if bt == 0:
            raise ValueError("beta_tilde = 0 is the fixed-beta regime; use LargeN2FixedBeta")
        if bt >= 1:
            raise ValueError("ScaledBetaLt1 needs beta_tilde < 1")
        shape = gammaln(t1 + n1) - gammaln(n1 + 1)
        if bt < 0:
            w = -bt
            return float(shape - gammaln(t1) - n1 * math.log1p(w)
                         + t1 * (math.log(w) - math.log1p(w)))
        log_b1 = (t2 * math.log(bt) - t1 * math.log1p(-bt) + (t2 - t1) * math.log(n2)
                  - bt * n2 - gammaln(t2))
        return float(log_b1 + shape - n1 * math.log1p(-bt))

    if regime is AsymRegime.ScaledBetaGt1:
        if bt <= 1:
            raise ValueError("ScaledBetaGt1 needs beta_tilde > 1")
        log_b2 = (0.5 * math.log(2 * math.pi) - gammaln(t2)
                  + (t1 - 1) * math.log((bt - 1) / bt)
                  + (t2 - 0.5) * math.log(n2) - n2 * (math.log(bt) + 1.0))
        return float(log_b2 - gammaln(n1 + 1) + n1 * math.log((bt - 1) / bt * n2))

    raise ValueError(f"unknown regime {regime!r}")


def sampling_ratio_asym(counts: SampleCounts, scaled: ScaledSelection, theta1: float) -> float:
    """Leading-order ``q(n1 + 1, n2) / q(n1, n2)`` for large ``n2`` at fixed ``beta_tilde``."""
    bt = scaled.beta_tilde
    n1, n2 = counts.n1, counts.n2
    if bt == 1:
        raise ValueError("no large-n2 ratio formula at beta_tilde = 1")
    if bt < 1:
        return (theta1 + n1) / ((1.0 - bt) * (n1 + 1))
    return (bt - 1.0) * n2 / (bt * (n1 + 1))
