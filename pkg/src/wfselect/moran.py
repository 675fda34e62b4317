"""Discrete-population counterparts of the rare-allele sampling law.

A Moran model with strong selection against A1 and mutation of order
``1/N`` keeps A1 at a finite number of copies. As ``N`` grows the count
becomes a linear birth-death process with immigration, whose stationary
law is negative binomial. Binomial subsampling of that law gives the
large-sample sampling probability of the diffusion model in closed form.
A Wright-Fisher population with Poisson offspring does not share this
stationary law, which :func:`wf_poisson_step` lets one check.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import stats
from scipy.special import gammaln

__all__ = [
    "BdiParams",
    "BdiPath",
    "MoranParams",
    "SubsampleMode",
    "bdi_from_moran",
    "mixed_sampling_prob",
    "mixed_sampling_sum",
    "moran_step_probs",
    "negbinom_pmf",
    "negbinom_truncation",
    "simulate_bdi",
    "simulate_moran",
    "subsample",
    "wf_poisson_path",
    "wf_poisson_stationary_variance",
    "wf_poisson_step",
]

TAIL_TOL = 1e-14


@dataclass(frozen=True)
class MoranParams:
    """Haploid Moran model; A1 is ``1 + s`` times as likely as A2 to be chosen to die."""

    N: int
    s: float
    u1: float
    u2: float

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.s < 0:
            raise ValueError("s must be non-negative")
        if not (0 <= self.u1 < 1 and 0 <= self.u2 < 1):
            raise ValueError("mutation probabilities must lie in [0, 1)")
        if self.u1 + self.u2 > 1:
            raise ValueError("u1 + u2 must not exceed 1")


@dataclass(frozen=True)
class BdiParams:
    """Linear birth-death process with immigration."""

    birth: float
    death: float
    immigration: float

    def __post_init__(self):
        if not (self.birth > 0 and self.death > 0 and self.immigration > 0):
            raise ValueError("rates must be positive")
        if self.death <= self.birth:
            raise ValueError("stationarity requires death > birth")

    @property
    def stationary_mean(self) -> float:
        return self.immigration / (self.death - self.birth)


def bdi_from_moran(s: float, theta1: float) -> BdiParams:
    """Limit of the Moran chain with ``N u1 -> theta1`` and fixed ``s``."""
    return BdiParams(1.0, 1.0 + s, theta1)


def moran_step_probs(ell: int, mp: MoranParams) -> tuple[float, float]:
    """Probabilities that the A1 count moves up or down by one in a step.

    The A1 count ``ell`` lies in ``[0, N]``. A reproducer is chosen
    uniformly; the individual that dies is chosen with weight ``1 + s``
    for A1 and 1 for A2. Offspring mutate with probability ``u1``
    (A2 to A1) or ``u2`` (A1 to A2).

    Returns
    -------
    (p_up, p_down)
    """
    N = mp.N
    if not (0 <= ell <= N):
        raise ValueError(f"ell must lie in [0, {N}], got {ell}")
    w = N - ell + ell * (1.0 + mp.s)
    die2 = (N - ell) / w
    die1 = ell * (1.0 + mp.s) / w
    p_up = die2 * (ell / N) * (1.0 - mp.u2) + die2 * ((N - ell) / N) * mp.u1
    p_down = die1 * ((N - ell) / N) * (1.0 - mp.u1) + die1 * (ell / N) * mp.u2
    return p_up, p_down


def simulate_moran(mp: MoranParams, ell0: int, steps: int, rng: np.random.Generator) -> np.ndarray:
    """A1 counts over ``steps`` steps of the Moran chain (for demonstration)."""
    out = np.empty(steps + 1, dtype=np.int64)
    ell = int(ell0)
    out[0] = ell
    u = rng.random(steps)
    for i in range(steps):
        up, down = moran_step_probs(ell, mp)
        if u[i] < up:
            ell += 1
        elif u[i] < up + down:
            ell -= 1
        out[i + 1] = ell
    return out


@dataclass
class BdiPath:
    """Piecewise-constant path: ``states[i]`` holds on ``[times[i], times[i+1])``."""

    times: np.ndarray
    states: np.ndarray
    horizon: float

    def at(self, t) -> np.ndarray:
        """States at the given times."""
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > self.horizon)):
            raise ValueError("times outside [0, horizon]")
        return self.states[np.searchsorted(self.times, t, side="right") - 1]

    def occupation(self, burn_in: float = 0.0) -> np.ndarray:
        """Fraction of time after ``burn_in`` spent in each state 0, 1, ..."""
        ends = np.append(self.times[1:], self.horizon)
        starts = np.maximum(self.times, burn_in)
        dur = np.clip(ends - starts, 0.0, None)
        occ = np.bincount(self.states, weights=dur)
        return occ / dur.sum()


@numba.njit(cache=True)
def _bdi_kernel(rng, birth, death, imm, k0, horizon):
    cap = 1024
    times = np.empty(cap)
    states = np.empty(cap, dtype=np.int64)
    t = 0.0
    k = k0
    n = 0
    while True:
        if n == cap:
            cap *= 2
            nt = np.empty(cap)
            ns = np.empty(cap, dtype=np.int64)
            nt[:n] = times[:n]
            ns[:n] = states[:n]
            times = nt
            states = ns
        times[n] = t
        states[n] = k
        n += 1
        up = k * birth + imm
        total = up + k * death
        if total <= 0.0:
            break
        t += rng.standard_exponential() / total
        if t >= horizon:
            break
        if rng.random() * total < up:
            k += 1
        else:
            k -= 1
    return times[:n], states[:n]


def simulate_bdi(bp: BdiParams | None, horizon: float, rng: np.random.Generator,
                 start: int = 0, *, immigration: float | None = None) -> BdiPath:
    """Continuous-time jump chain of the birth-death-immigration process.

    ``k -> k+1`` at rate ``k*birth + immigration`` and ``k -> k-1`` at rate
    ``k*death``. Pass ``bp=None`` with ``immigration=0`` to get the absorbing
    case that :class:`BdiParams` rejects.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if bp is None:
        birth, death, imm = 1.0, 1.0, float(immigration or 0.0)
    else:
        birth, death, imm = bp.birth, bp.death, bp.immigration
    times, states = _bdi_kernel(rng, float(birth), float(death), imm, int(start), float(horizon))
    return BdiPath(times, states, float(horizon))


def negbinom_pmf(ell, s: float, theta1: float):
    """Stationary law of the A1 count: negative binomial, mean ``theta1 / s``.

    ``C(ell + theta1 - 1, ell) (1/(1+s))**ell (s/(1+s))**theta1``.
    """
    if not (s > 0 and theta1 > 0):
        raise ValueError("need s > 0 and theta1 > 0")
    return stats.nbinom.pmf(ell, theta1, s / (1.0 + s))


def negbinom_truncation(s: float, theta1: float, tol: float = TAIL_TOL) -> tuple[int, float]:
    """Smallest ``L`` whose upper tail ``P(ell > L)`` is below ``tol``, and that tail."""
    dist = stats.nbinom(theta1, s / (1.0 + s))
    L = int(dist.isf(tol))
    while dist.sf(L) >= tol:
        L += 1
    return L, float(dist.sf(L))


class SubsampleMode(enum.Enum):
    ExactHypergeometric = "ExactHypergeometric"
    BinomialLimit = "BinomialLimit"


def subsample(ell: int, N: int, n: int, mode: SubsampleMode = SubsampleMode.ExactHypergeometric,
              alpha: float | None = None) -> np.ndarray:
    """Law of the A1 count in a sample from a population with ``ell`` copies.

    Returns the pmf over ``n1 = 0 .. ell``. ``ExactHypergeometric`` draws
    ``n`` of ``N`` without replacement. ``BinomialLimit`` uses
    ``Binomial(ell, alpha)``; ``alpha`` defaults to ``n / N``, the sampled
    fraction of the population.
    """
    if not (0 <= ell <= N) or not (0 <= n <= N):
        raise ValueError("need 0 <= ell <= N and 0 <= n <= N")
    k = np.arange(ell + 1)
    if mode is SubsampleMode.ExactHypergeometric:
        return stats.hypergeom.pmf(k, N, ell, n)
    if alpha is None:
        alpha = n / N
    if not (0 < alpha <= 1):
        raise ValueError("alpha must lie in (0, 1]")
    return stats.binom.pmf(k, ell, alpha)


def mixed_sampling_prob(n1: int, alpha: float, s: float, theta1: float) -> float:
    """Closed form of ``sum_ell Binomial(n1; ell, alpha) NegBin(ell; s, theta1)``.

    ``Gamma(n1+theta1)/(n1! Gamma(theta1)) (alpha/(alpha+s))**n1 (s/(alpha+s))**theta1``,
    i.e. a negative binomial in ``n1`` with success probability ``s/(alpha+s)``.
    """
    if not (0 < alpha <= 1 and s > 0 and theta1 > 0) or n1 < 0:
        raise ValueError("need 0 < alpha <= 1, s > 0, theta1 > 0, n1 >= 0")
    log_p = (gammaln(n1 + theta1) - gammaln(n1 + 1) - gammaln(theta1)
             + n1 * math.log(alpha / (alpha + s)) + theta1 * math.log(s / (alpha + s)))
    return math.exp(log_p)


def mixed_sampling_sum(n1: int, alpha: float, s: float, theta1: float,
                       tol: float = TAIL_TOL) -> tuple[float, float]:
    """The same mixture summed term by term.

    Returns ``(value, tail_bound)``. The omitted terms are bounded by the
    negative-binomial tail beyond the truncation point, since the binomial
    factor is at most 1.
    """
    L, tail = negbinom_truncation(s, theta1, tol)
    ell = np.arange(n1, max(L, n1) + 1)
    terms = stats.binom.pmf(n1, ell, alpha) * negbinom_pmf(ell, s, theta1)
    return math.fsum(terms), tail


def wf_poisson_step(ell: int, theta1: float, s: float, rng: np.random.Generator) -> int:
    """Next-generation A1 count: ``Poisson(theta1 + ell (1 - s))``."""
    if not (0 <= s < 1):
        raise ValueError("need 0 <= s < 1")
    if ell < 0:
        raise ValueError("ell must be non-negative")
    return int(rng.poisson(theta1 + ell * (1.0 - s)))


@numba.njit(cache=True)
def _wf_poisson_kernel(rng, ell0, theta1, s, gens):
    out = np.empty(gens + 1, dtype=np.int64)
    ell = ell0
    out[0] = ell
    for g in range(gens):
        ell = rng.poisson(theta1 + ell * (1.0 - s))
        out[g + 1] = ell
    return out


def wf_poisson_path(ell0: int, theta1: float, s: float, generations: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Iterate :func:`wf_poisson_step` for many generations (compiled loop)."""
    if not (0 <= s < 1):
        raise ValueError("need 0 <= s < 1")
    return _wf_poisson_kernel(rng, int(ell0), float(theta1), float(s), int(generations))


def wf_poisson_stationary_variance(theta1: float, s: float) -> float:
    """Fixed point of ``V = m + (1-s)**2 V`` with ``m = theta1/s``."""
    return theta1 / (s * s * (2.0 - s))
