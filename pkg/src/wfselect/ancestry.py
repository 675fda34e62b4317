"""Coalescence and latent mutation of sample lineages in a random background.

Given a backward-in-time frequency path ``p_t`` of allele A1, the ``a1``
ancestral lineages of the A1 copies experience events at total rate

    lambda_a1(p) = a1 / (2 p) * ((1 - p) theta1 + a1 - 1),

each being a coalescence with probability ``(a1 - 1) / ((1 - p) theta1 + a1 - 1)``
and otherwise a latent mutation (the lineage leaves the A1 background).
A2 lineages follow the mirror image with ``p -> 1 - p``. The number ``K1``
of latent mutations is the number of distinct A2 -> A1 mutations that
produced the sampled A1 copies.

Implementation
--------------
Between grid points the path is linear, and the integrated hazard of
``A / p + B`` along a linear segment has a closed form, so event times are
found by exact inversion rather than by freezing the rate per step.

Beyond a tabulated prefix the path is generated on the fly by Euler steps
no longer than a small fraction of ``p`` (or ``1 - p``), which keeps the
rates resolved however close the frequency gets to a boundary.

Strong positive selection leaves a single A1 lineage waiting a time of
order ``beta`` while ``q = 1 - p`` fluctuates on a time scale ``1 / beta``.
For that phase the kernel switches to exact blocks: near ``q = 0`` the
frequency is a square-root process and the killing rate is affine in
``q``, so survival over a block and the law of ``q`` at the block end (or
at the event) are explicit noncentral chi-square expressions.
"""
from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from ._random import replicate_rng
from .diffusion import Demography, FrequencyPath, conditioned_varying_path
from .stationary import ModelParams, SampleCounts, ScaledSelection, posterior_sample

__all__ = [
    "Track",
    "EventKind",
    "AncestralState",
    "AncestryEventLog",
    "AncestryOptions",
    "StationaryPathSource",
    "ConstantPath",
    "ConditionedPathSource",
    "PathExhaustedError",
    "AncestryBatch",
    "EwensAllelesPmf",
    "simulate_conditional_ancestry",
    "ReplicateError",
    "run_ancestry_batch",
    "latent_counts",
    "bernoulli_k1",
    "ewens_alleles_pmf",
    "rescaled_genealogy_sim",
    "write_event_csv",
    "total_variation",
]


class Track(enum.Enum):
    Type1Only = "Type1Only"
    Both = "Both"


class EventKind(enum.IntEnum):
    Coal1 = 0
    Mut1 = 1
    Coal2 = 2
    Mut2 = 3


@dataclass(frozen=True)
class AncestralState:
    """Surviving observed lineages ``a_i`` and latent mutations so far ``l_i``."""

    a1: int
    l1: int
    a2: int
    l2: int


class PathExhaustedError(RuntimeError):
    """The frequency path ended (or the time cap was hit) before absorption."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.partial_log = log


class BoundaryError(RuntimeError):
    """A segment started exactly at a boundary while lineages of that type remained."""


@dataclass
class AncestryEventLog:
    """Time-ordered events of one replicate.

    Arrays share one index per event. ``kinds`` holds :class:`EventKind`
    values; ``a1`` etc. give the state after the event.
    """

    n1: int
    n2: int
    track: Track
    times: np.ndarray
    kinds: np.ndarray
    freqs: np.ndarray
    a1: np.ndarray
    l1: np.ndarray
    a2: np.ndarray
    l2: np.ndarray
    complete: bool = True

    def __len__(self):
        return len(self.times)

    @property
    def events(self):
        return [(float(t), EventKind(int(k)), float(p), AncestralState(int(x), int(y), int(z), int(w)))
                for t, k, p, x, y, z, w in zip(self.times, self.kinds, self.freqs,
                                               self.a1, self.l1, self.a2, self.l2)]

    def type1(self):
        m = self.kinds <= EventKind.Mut1
        return self.times[m], self.kinds[m], self.freqs[m]

    def type2(self):
        m = self.kinds >= EventKind.Coal2
        return self.times[m], self.kinds[m], self.freqs[m]

    def check(self) -> None:
        """Raise if counting identities or monotonicity are violated."""
        k = self.kinds
        if np.any(np.diff(self.times) < 0):
            raise AssertionError("event times are not ordered")
        if self.complete:
            if np.sum(k <= 1) != self.n1:
                raise AssertionError("type-1 events do not add up to n1")
            if self.track is Track.Both and np.sum(k >= 2) != self.n2:
                raise AssertionError("type-2 events do not add up to n2")
        for arr in (self.a1, self.a2):
            if np.any(np.diff(arr) > 0):
                raise AssertionError("lineage counts increased")
        for arr in (self.l1, self.l2):
            if np.any(np.diff(arr) < 0):
                raise AssertionError("mutation counts decreased")


@dataclass(frozen=True)
class AncestryOptions:
    """Numerical controls of the event kernel.

    Attributes
    ----------
    rel_step : float
        Euler step relative to the frequency of any tracked type.
    h_max : float
        Largest Euler step.
    block_q : float
        Upper limit of ``1 - p`` for the exact boundary-layer blocks.
    block_kappa_min : float
        Blocks are used only when ``(beta + theta1 + theta2) / 2`` exceeds
        this; below it the Euler path is cheap enough.
    block_frac : float
        Expected number of events per block.
    horizon : float
        Time cap; reaching it raises :class:`PathExhaustedError`.
    max_steps : int
        Cap on Euler steps plus blocks.
    """

    rel_step: float = 0.02
    h_max: float = 0.01
    block_q: float = 0.01
    block_kappa_min: float = 100.0
    block_frac: float = 0.01
    horizon: float = 1e12
    max_steps: int = 500_000_000
    use_blocks: bool = True


# ---------------------------------------------------------------------------
# kernel

ST_DONE, ST_EXHAUSTED, ST_HORIZON, ST_BOUNDARY = 1, 2, 3, 4
MODE_STOP, MODE_EULER, MODE_CONSTANT = 0, 1, 2
OTHER_FLOOR = 1e-4


@numba.njit(cache=True)
def _jint(u, x0, s):
    """Integral of 1 / (x0 + s v) over v in [0, u]."""
    if s == 0.0:
        return u / x0
    y = s * u / x0
    if y <= -1.0:
        return np.inf
    return math.log1p(y) / s


@numba.njit(cache=True)
def _hazard(u, x0, s, A, B):
    return A * _jint(u, x0, s) + B * u


@numba.njit(cache=True)
def _invert_hazard(E, x0, s, A, B, L):
    """Smallest u in [0, L] with cumulative hazard E (requires H(L) >= E)."""
    lo = 0.0
    hi = L
    r0 = A / x0 + B
    u = E / r0 if r0 > 0.0 else 0.5 * L
    if not (lo < u < hi):
        u = 0.5 * (lo + hi)
    for _ in range(200):
        f = _hazard(u, x0, s, A, B) - E
        if f > 0.0:
            hi = u
        else:
            lo = u
        d = A / (x0 + s * u) + B
        un = u - f / d if d > 0.0 else -1.0
        if not (lo < un < hi):
            un = 0.5 * (lo + hi)
        if abs(un - u) <= 1e-15 * u or hi - lo <= 1e-15 * hi:
            return un
        u = un
    return u


@numba.njit(cache=True)
def _record(ev_f, ev_i, n_ev, t, kind, p, a1, l1, a2, l2):
    ev_f[n_ev, 0] = t
    ev_f[n_ev, 1] = p
    ev_i[n_ev, 0] = kind
    ev_i[n_ev, 1] = a1
    ev_i[n_ev, 2] = l1
    ev_i[n_ev, 3] = a2
    ev_i[n_ev, 4] = l2


@numba.njit(cache=True)
def _fire(rng, which, p, th1, th2, st):
    """Apply a type-``which`` event at frequency p; st = [a1, l1, a2, l2]. Returns kind."""
    if which == 1:
        a = st[0]
        w_mut = (1.0 - p) * th1
        if a == 1 or rng.random() * (w_mut + a - 1.0) < w_mut:
            st[0] -= 1
            st[1] += 1
            return 1
        st[0] -= 1
        return 0
    a = st[2]
    w_mut = p * th2
    if a == 1 or rng.random() * (w_mut + a - 1.0) < w_mut:
        st[2] -= 1
        st[3] += 1
        return 3
    st[2] -= 1
    return 2


@numba.njit(cache=True)
def _segment(rng, t, x0, x1, L, th1, th2, both, st, clocks, ev_f, ev_i, n_ev):
    """Process events while p moves linearly from x0 to x1 over [t, t + L].

    ``clocks`` holds the unused unit-exponential hazard budgets of the two
    types. Returns (n_ev, status) with status 0 (continue) or ST_BOUNDARY.
    """
    s = (x1 - x0) / L if L > 0.0 else 0.0
    u0 = 0.0
    while True:
        a1 = st[0]
        a2 = st[2] if both else 0
        if a1 == 0 and a2 == 0:
            return n_ev, 0
        rem = L - u0
        if rem <= 0.0:
            return n_ev, 0
        xs = x0 + s * u0
        H1 = 0.0
        H2 = 0.0
        A1 = 0.0
        B1 = 0.0
        A2 = 0.0
        B2 = 0.0
        if a1 > 0:
            if xs <= 0.0:
                return n_ev, ST_BOUNDARY
            A1 = 0.5 * a1 * (th1 + a1 - 1.0)
            B1 = -0.5 * a1 * th1
            H1 = np.inf if x1 <= 0.0 else _hazard(rem, xs, s, A1, B1)
        if a2 > 0:
            if xs >= 1.0:
                return n_ev, ST_BOUNDARY
            A2 = 0.5 * a2 * (th2 + a2 - 1.0)
            B2 = -0.5 * a2 * th2
            H2 = np.inf if x1 >= 1.0 else _hazard(rem, 1.0 - xs, -s, A2, B2)
        u1 = np.inf
        u2 = np.inf
        if a1 > 0 and H1 >= clocks[0]:
            u1 = _invert_hazard(clocks[0], xs, s, A1, B1, rem)
        if a2 > 0 and H2 >= clocks[1]:
            u2 = _invert_hazard(clocks[1], 1.0 - xs, -s, A2, B2, rem)
        if u1 == np.inf and u2 == np.inf:
            clocks[0] -= H1
            clocks[1] -= H2
            return n_ev, 0
        if u1 <= u2:
            u = u1
            if a2 > 0:
                clocks[1] -= _hazard(u, 1.0 - xs, -s, A2, B2)
            clocks[0] = rng.standard_exponential()
            which = 1
        else:
            u = u2
            if a1 > 0:
                clocks[0] -= _hazard(u, xs, s, A1, B1)
            clocks[1] = rng.standard_exponential()
            which = 2
        p = min(max(xs + s * u, 0.0), 1.0)
        kind = _fire(rng, which, p, th1, th2, st)
        u0 += u
        _record(ev_f, ev_i, n_ev, t + u0, kind, p, st[0], st[1], st[2], st[3])
        n_ev += 1


@numba.njit(cache=True)
def _killed_cir_logsurv(u, q0, alpha, kappa, c0, c1):
    """log P(no event in [0, u]) for dq = sqrt(q) dW + (alpha - kappa q) dt
    killed at rate c0 + c1 q; also returns (k, lam, tt) of the surviving law."""
    gam = math.sqrt(kappa * kappa + 2.0 * c1)
    s = 2.0 * c1 / (gam + kappa)
    k = -math.expm1(-gam * u) / (4.0 * gam)
    lam = q0 * math.exp(-gam * u) / k
    tt = s * k
    d = 4.0 * alpha
    one = 1.0 - 2.0 * tt
    logs = -c0 * u - s * q0 - s * alpha * u - 0.5 * d * math.log(one) + lam * tt / one
    return logs, k, lam, tt


@numba.njit(cache=True)
def _killed_cir_draw(rng, k, lam, tt, alpha, size_biased):
    """Draw q from the surviving law (optionally size-biased by q)."""
    d = 4.0 * alpha
    one = 1.0 - 2.0 * tt
    mu = 0.5 * lam / one
    if size_biased:
        nn = rng.poisson(mu)
        if rng.random() * (0.5 * d + mu) >= 0.5 * d:
            nn += 1
        x = 2.0 * rng.standard_gamma(0.5 * d + nn + 1.0) / one
    else:
        nn = rng.poisson(mu)
        x = 2.0 * rng.standard_gamma(0.5 * d + nn) / one
    return k * x


@numba.njit(cache=True)
def _block(rng, t, p, th1, th2, beta, block_frac, st, clocks, ev_f, ev_i, n_ev):
    """One exact block near p = 1 with only A1 lineages left. Returns (t, p, n_ev)."""
    a = st[0]
    q0 = 1.0 - p
    alpha = 0.5 * th2
    kappa = 0.5 * (beta + th1 + th2)
    c0 = 0.5 * a * (a - 1.0)
    c1 = c0 + 0.5 * a * th1
    h = block_frac / (c0 + c1 * max(q0, alpha / kappa))
    logU = math.log(rng.random())
    logS, k, lam, tt = _killed_cir_logsurv(h, q0, alpha, kappa, c0, c1)
    if logU < logS:
        q = _killed_cir_draw(rng, k, lam, tt, alpha, False)
        clocks[0] = rng.standard_exponential()
        return t + h, 1.0 - min(q, 1.0), n_ev
    lo = 0.0
    hi = h
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lm = _killed_cir_logsurv(mid, q0, alpha, kappa, c0, c1)[0]
        if lm > logU:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    u = 0.5 * (lo + hi)
    logS, k, lam, tt = _killed_cir_logsurv(u, q0, alpha, kappa, c0, c1)
    # The frequency at the event is weighted by the killing rate c0 + c1 q.
    mean_q = k / (1.0 - 2.0 * tt) * (4.0 * alpha + lam / (1.0 - 2.0 * tt))
    biased = rng.random() * (c0 + c1 * mean_q) >= c0
    q = min(_killed_cir_draw(rng, k, lam, tt, alpha, biased), 1.0)
    pe = 1.0 - q
    kind = _fire(rng, 1, pe, th1, th2, st)
    _record(ev_f, ev_i, n_ev, t + u, kind, pe, st[0], st[1], st[2], st[3])
    clocks[0] = rng.standard_exponential()
    return t + u, pe, n_ev + 1


@numba.njit(cache=True)
def _finished(st, both):
    return st[0] == 0 and (not both or st[2] == 0)


@numba.njit(cache=True)
def _ancestry_kernel(rng, tab_t, tab_p, mode, th1, th2, c_th1, c_th2, c_beta, a1, a2, both,
                     rel_step, h_max, block_q, block_kappa_min, block_frac, use_blocks,
                     horizon, max_steps):
    n_max = a1 + a2 + 1
    ev_f = np.zeros((n_max, 2))
    ev_i = np.zeros((n_max, 5), dtype=np.int64)
    st = np.array([a1, 0, a2 if both else 0, 0], dtype=np.int64)
    clocks = np.array([rng.standard_exponential(), rng.standard_exponential()])
    n_ev = 0

    t = tab_t[0]
    p = tab_p[0]
    if _finished(st, both):
        return ev_f[:0], ev_i[:0], ST_DONE, t, p
    for i in range(len(tab_t) - 1):
        L = tab_t[i + 1] - tab_t[i]
        n_ev, status = _segment(rng, tab_t[i], tab_p[i], tab_p[i + 1], L, th1, th2, both,
                                st, clocks, ev_f, ev_i, n_ev)
        t = tab_t[i + 1]
        p = tab_p[i + 1]
        if status != 0:
            return ev_f[:n_ev], ev_i[:n_ev], status, t, p
        if _finished(st, both):
            return ev_f[:n_ev], ev_i[:n_ev], ST_DONE, t, p

    if mode == MODE_STOP:
        return ev_f[:n_ev], ev_i[:n_ev], ST_EXHAUSTED, t, p

    if mode == MODE_CONSTANT:
        L = horizon - t
        n_ev, status = _segment(rng, t, p, p, L, th1, th2, both, st, clocks, ev_f, ev_i, n_ev)
        if status != 0:
            return ev_f[:n_ev], ev_i[:n_ev], status, t, p
        if _finished(st, both):
            return ev_f[:n_ev], ev_i[:n_ev], ST_DONE, t, p
        return ev_f[:n_ev], ev_i[:n_ev], ST_HORIZON, horizon, p

    kappa = 0.5 * (abs(c_beta) + c_th1 + c_th2)
    kappa_up = 0.5 * (c_beta + c_th1 + c_th2)
    blocks_ok = use_blocks and kappa_up >= block_kappa_min
    steps = 0
    while True:
        if t >= horizon or steps >= max_steps:
            return ev_f[:n_ev], ev_i[:n_ev], ST_HORIZON, t, p
        steps += 1
        if blocks_ok and st[0] >= 1 and (not both or st[2] == 0) and 1.0 - p <= block_q:
            t, p, n_ev = _block(rng, t, p, c_th1, c_th2, c_beta, block_frac, st, clocks,
                                ev_f, ev_i, n_ev)
            if _finished(st, both):
                return ev_f[:n_ev], ev_i[:n_ev], ST_DONE, t, p
            continue
        # A type's rate blows up at its own boundary (1/p for A1) and, for
        # a single lineage, is proportional to the distance to the other
        # one. The second limit has a floor because for theta < 1 the
        # relative-step path would otherwise creep towards that boundary
        # in ever smaller steps.
        h = min(h_max, 0.1 / kappa)
        if st[0] > 0:
            h = min(h, rel_step * p, rel_step * max(1.0 - p, OTHER_FLOOR))
        if both and st[2] > 0:
            h = min(h, rel_step * (1.0 - p), rel_step * max(p, OTHER_FLOOR))
        h = max(h, 1e-300)
        drift = 0.5 * (c_th1 * (1.0 - p) - c_th2 * p + c_beta * p * (1.0 - p))
        sd = math.sqrt(p * (1.0 - p))
        xn = p
        for retry in range(7):
            xn = p + drift * h + sd * math.sqrt(h) * rng.standard_normal()
            bad = (xn <= 0.0 and st[0] > 0) or (xn >= 1.0 and both and st[2] > 0)
            if not bad:
                break
            if retry < 6:
                h *= 0.25
        xn = min(max(xn, 0.0), 1.0)
        n_ev, status = _segment(rng, t, p, xn, h, th1, th2, both, st, clocks, ev_f, ev_i, n_ev)
        t += h
        p = xn
        if status != 0:
            return ev_f[:n_ev], ev_i[:n_ev], status, t, p
        if _finished(st, both):
            return ev_f[:n_ev], ev_i[:n_ev], ST_DONE, t, p


# ---------------------------------------------------------------------------
# path sources


@dataclass(frozen=True)
class StationaryPathSource:
    """Backward path of a stationary population sampled today.

    The present frequency is drawn from the posterior given the sample and
    the path continues with the constant-size dynamics (reversibility).
    """

    sampler: str = "auto"

    def prepare(self, counts, params, rng):
        p0 = posterior_sample(counts, params, rng, method=self.sampler)
        return np.array([0.0]), np.array([p0]), MODE_EULER, params


@dataclass(frozen=True)
class ConstantPath:
    """A frequency frozen at ``p`` forever."""

    p: float

    def prepare(self, counts, params, rng):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        return np.array([0.0]), np.array([float(self.p)]), MODE_CONSTANT, params


@dataclass(frozen=True)
class ConditionedPathSource:
    """Backward path for a population of varying size, conditioned by rejection."""

    demog: Demography
    dt: float
    mu0: object = "stationary"
    max_attempts: int = 1_000_000

    def prepare(self, counts, params, rng):
        path = conditioned_varying_path(counts, params, self.demog, self.mu0, self.dt, rng,
                                        max_attempts=self.max_attempts)
        return _from_frequency_path(path, params)


def _from_frequency_path(path: FrequencyPath, params):
    mode = MODE_EULER if path.continuation is not None else MODE_STOP
    cont = path.continuation if path.continuation is not None else params
    return np.asarray(path.times, dtype=float), np.asarray(path.values, dtype=float), mode, cont


def _prepare(source, counts, params, rng):
    if isinstance(source, FrequencyPath):
        return _from_frequency_path(source, params)
    return source.prepare(counts, params, rng)


_STATUS_TEXT = {
    ST_EXHAUSTED: "the frequency path ended before all lineages were resolved",
    ST_HORIZON: "the time or step cap was reached before all lineages were resolved",
    ST_BOUNDARY: "a path segment started at a boundary with lineages of that type remaining",
}


def simulate_conditional_ancestry(counts: SampleCounts, params: ModelParams, path_source,
                                  rng: np.random.Generator, track: Track = Track.Both,
                                  options: AncestryOptions = AncestryOptions()
                                  ) -> AncestryEventLog:
    """Simulate the ancestry of the sample along a random frequency background.

    Parameters
    ----------
    counts : SampleCounts
    params : ModelParams
        ``theta1``/``theta2`` set the mutation rates of the lineages; the
        path dynamics use the same parameters unless the source carries its
        own continuation model.
    path_source : StationaryPathSource, ConstantPath, ConditionedPathSource or FrequencyPath
        A :class:`FrequencyPath` is read as a backward path starting at the
        sampling time; it is continued past its end only if it carries
        ``continuation`` parameters.
    rng : numpy.random.Generator
    track : Track
        ``Type1Only`` ignores A2 lineages (the frequency path is unaffected).

    Returns
    -------
    AncestryEventLog

    Raises
    ------
    PathExhaustedError
        With the partial log attached, if the path ends or a cap is hit.
    BoundaryError
        If a segment starts exactly at p = 0 (p = 1) with A1 (A2) lineages left.
    """
    tab_t, tab_p, mode, cont = _prepare(path_source, counts, params, rng)
    both = track is Track.Both
    o = options
    ev_f, ev_i, status, t_end, p_end = _ancestry_kernel(
        rng, tab_t, tab_p, mode, params.theta1, params.theta2,
        cont.theta1, cont.theta2, cont.beta, counts.n1, counts.n2, both,
        o.rel_step, o.h_max, o.block_q, o.block_kappa_min, o.block_frac, o.use_blocks,
        o.horizon, o.max_steps)
    log = AncestryEventLog(counts.n1, counts.n2 if both else 0, track,
                           ev_f[:, 0].copy(), ev_i[:, 0].copy(), ev_f[:, 1].copy(),
                           ev_i[:, 1].copy(), ev_i[:, 2].copy(), ev_i[:, 3].copy(),
                           ev_i[:, 4].copy(), complete=status == ST_DONE)
    if status == ST_BOUNDARY:
        raise BoundaryError(_STATUS_TEXT[status])
    if status != ST_DONE:
        raise PathExhaustedError(f"{_STATUS_TEXT[status]} (t={t_end:.6g}, p={p_end:.6g})", log)
    return log


# ---------------------------------------------------------------------------
# batches


@dataclass
class AncestryBatch:
    """Summary of many independent replicates.

    ``tau1[r, j]`` is the time of the (j+1)-th A1 event of replicate r and
    ``freq1`` the frequency at that event; likewise for A2 when tracked.
    """

    counts: SampleCounts
    seed: int
    K1: np.ndarray
    K2: np.ndarray
    tau1: np.ndarray
    freq1: np.ndarray
    tau2: np.ndarray
    freq2: np.ndarray
    kinds1: np.ndarray

    @property
    def replicates(self) -> int:
        return len(self.K1)

    @property
    def age1(self) -> np.ndarray:
        """Time of the last A1 event (the oldest A1 latent mutation)."""
        return self.tau1[:, -1] if self.tau1.shape[1] else np.zeros(self.replicates)


class ReplicateError(RuntimeError):
    """A replicate failed; ``index`` identifies its random stream."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"replicate {index} failed: {type(cause).__name__}: {cause}")
        self.index = index


def _one_replicate(args):
    counts, params, source, seed, index, track, options = args
    rng = replicate_rng(seed, index)
    try:
        return simulate_conditional_ancestry(counts, params, source, rng, track, options)
    except (RuntimeError, ArithmeticError) as e:
        raise ReplicateError(index, e) from e


def run_ancestry_batch(counts: SampleCounts, params: ModelParams, source, seed: int,
                       replicates: int, track: Track = Track.Type1Only,
                       options: AncestryOptions = AncestryOptions(), threads: int = 1,
                       start: int = 0) -> AncestryBatch:
    """Run replicates ``start .. start + replicates - 1`` with per-replicate streams.

    Results depend only on ``seed`` and the replicate indices, not on
    ``threads``.
    """
    n1 = counts.n1
    n2 = counts.n2 if track is Track.Both else 0
    jobs = [(counts, params, source, seed, start + r, track, options) for r in range(replicates)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            logs = list(ex.map(_one_replicate, jobs, chunksize=64))
    else:
        logs = [_one_replicate(j) for j in jobs]
    R = replicates
    K1 = np.empty(R, dtype=np.int64)
    K2 = np.empty(R, dtype=np.int64)
    tau1 = np.empty((R, n1))
    freq1 = np.empty((R, n1))
    kinds1 = np.empty((R, n1), dtype=np.int64)
    tau2 = np.empty((R, n2))
    freq2 = np.empty((R, n2))
    for r, log in enumerate(logs):
        K1[r], K2[r] = latent_counts(log)
        t, k, f = log.type1()
        tau1[r], freq1[r], kinds1[r] = t, f, k
        if n2:
            t, k, f = log.type2()
            tau2[r], freq2[r] = t, f
    return AncestryBatch(counts, seed, K1, K2, tau1, freq1, tau2, freq2, kinds1)


# ---------------------------------------------------------------------------
# latent-mutation counts


def latent_counts(log: AncestryEventLog) -> tuple[int, int]:
    """Numbers of A1 and A2 latent mutations of a completed log."""
    if not log.complete:
        raise ValueError("log is incomplete")
    return int(np.sum(log.kinds == EventKind.Mut1)), int(np.sum(log.kinds == EventKind.Mut2))


def _mutation_probs(freqs, n1, theta1):
    freqs = np.asarray(freqs, dtype=float)
    if freqs.shape != (max(n1 - 1, 0),):
        raise ValueError(f"expected {max(n1 - 1, 0)} frequencies for n1={n1}, got {freqs.shape}")
    if np.any((freqs < 0) | (freqs > 1)):
        raise ValueError("frequencies must lie in [0, 1]")
    k = np.arange(n1, 1, -1)  # lineages present at jumps 1 .. n1-1
    w = (1.0 - freqs) * theta1
    return w / (w + k - 1.0)


def _convolve_bernoulli(probs):
    pmf = np.array([1.0])
    for h in probs:
        pmf = np.concatenate([pmf * (1.0 - h), [0.0]]) + np.concatenate([[0.0], pmf * h])
    return pmf


def bernoulli_k1(freqs: Sequence[float], n1: int, theta1: float,
                 rng: np.random.Generator | None = None):
    """K1 as one plus independent Bernoulli variables along the A1 jumps.

    Parameters
    ----------
    freqs : sequence of float
        Frequencies at the first ``n1 - 1`` A1 jumps, in time order.
    n1 : int
    theta1 : float
    rng : numpy.random.Generator, optional
        If given, return one sample of K1; otherwise the exact pmf of K1 as
        an array indexed by ``k = 0 .. n1`` (entry 0 is zero for n1 >= 1).
    """
    h = _mutation_probs(freqs, n1, theta1)
    if rng is not None:
        return int(1 + np.sum(rng.random(len(h)) < h)) if n1 >= 1 else 0
    if n1 == 0:
        return np.array([1.0])
    return np.concatenate([[0.0], _convolve_bernoulli(h)])


@dataclass(frozen=True)
class EwensAllelesPmf:
    """Distribution of the number of alleles among ``n`` genes; ``pmf[k-1] = P(K = k)``."""

    n: int
    theta: float
    pmf: np.ndarray

    def full(self) -> np.ndarray:
        """pmf indexed by ``k = 0 .. n``."""
        return np.concatenate([[0.0], self.pmf])

    def mean(self) -> float:
        return float(np.dot(np.arange(1, self.n + 1), self.pmf))


def ewens_alleles_pmf(n: int, theta: float) -> EwensAllelesPmf:
    """Number of distinct alleles in a sample of ``n`` genes (mutation rate ``theta``)."""
    if n < 1 or not theta > 0:
        raise ValueError("need n >= 1 and theta > 0")
    j = np.arange(2, n + 1)
    pmf = _convolve_bernoulli(theta / (theta + j - 1.0))
    return EwensAllelesPmf(n, float(theta), pmf)


def total_variation(counts_or_pmf, reference) -> float:
    """Total-variation distance between an empirical sample / pmf and a reference pmf.

    ``counts_or_pmf`` may be integer samples (values index ``reference``).
    """
    ref = np.asarray(reference, dtype=float)
    x = np.asarray(counts_or_pmf)
    if np.issubdtype(x.dtype, np.integer):
        emp = np.bincount(x, minlength=len(ref)).astype(float)
        emp /= emp.sum()
    else:
        emp = x.astype(float)
    m = max(len(emp), len(ref))
    emp = np.pad(emp, (0, m - len(emp)))
    ref = np.pad(ref, (0, m - len(ref)))
    return 0.5 * float(np.abs(emp - ref).sum())


# ---------------------------------------------------------------------------
# rescaled limit genealogy


@numba.njit(cache=True)
def _rescaled_kernel(rng, z0, n1, th1, alpha, kappa, dt, frac):
    ev_f = np.zeros((n1, 2))
    ev_i = np.zeros((n1, 5), dtype=np.int64)
    st = np.array([n1, 0, 0, 0], dtype=np.int64)
    clock = rng.standard_exponential()
    t = 0.0
    z = z0
    n_ev = 0
    while st[0] > 0:
        a = st[0]
        h = min(dt, frac * z) if z > 0 else dt * 1e-6
        # exact square-root transition, then trapezoid hazard of A / z
        if kappa == 0.0:
            c = h / 4.0
            dec = 1.0
        else:
            c = -math.expm1(-kappa * h) / (4.0 * kappa)
            dec = math.exp(-kappa * h)
        lam = z * dec / c
        nn = rng.poisson(0.5 * lam)
        zn = c * 2.0 * rng.standard_gamma(2.0 * alpha + nn)
        A = 0.5 * a * (th1 + a - 1.0)
        if z <= 0.0 or zn <= 0.0:
            rate_int = np.inf
        else:
            rate_int = 0.5 * A * h * (1.0 / z + 1.0 / zn)
        if rate_int >= clock:
            u = h * clock / rate_int if rate_int < np.inf else 0.0
            kind = _fire(rng, 1, 0.0, th1, 0.0, st)
            t_ev = t + u
            _record(ev_f, ev_i, n_ev, t_ev, kind, z + (zn - z) * (u / h), st[0], st[1], 0, 0)
            n_ev += 1
            clock = rng.standard_exponential()
        else:
            clock -= rate_int
        t += h
        z = zn
    return ev_f, ev_i


def rescaled_genealogy_sim(n1: int, theta1: float, scaled: ScaledSelection, dt: float,
                           rng: np.random.Generator, frac: float = 0.01) -> AncestryEventLog:
    """A1 genealogy in the large-sample limit, on the rescaled time axis.

    The rescaled frequency ``Z`` is a square-root process with drift
    ``(theta1 + bt Z) / 2`` started from ``Gamma(n1 + theta1, rate 1 - bt)``.
    Events fire at rate ``a (theta1 + a - 1) / (2 Z)`` and are mutations
    with probability ``theta1 / (theta1 + a - 1)``. The ``freqs`` field of
    the log holds ``Z`` at each event.
    """
    bt = scaled.beta_tilde
    if bt >= 1:
        raise ValueError("the rescaled genealogy needs beta_tilde < 1")
    z0 = rng.gamma(n1 + theta1, 1.0 / (1.0 - bt))
    ev_f, ev_i = _rescaled_kernel(rng, z0, n1, theta1, theta1 / 2.0, -bt / 2.0, dt, frac)
    return AncestryEventLog(n1, 0, Track.Type1Only, ev_f[:, 0].copy(), ev_i[:, 0].copy(),
                            ev_f[:, 1].copy(), ev_i[:, 1].copy(), ev_i[:, 2].copy(),
                            ev_i[:, 3].copy(), ev_i[:, 4].copy())


# ---------------------------------------------------------------------------
# export


def write_event_csv(logs: Sequence[AncestryEventLog], path, first_replicate: int = 0) -> None:
    """Write rows (replicate, time, kind, frequency, a1, l1, a2, l2)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "time", "kind", "frequency", "a1", "l1", "a2", "l2"])
        for r, log in enumerate(logs):
            for t, k, p, st in log.events:
                w.writerow([first_replicate + r, f"{t:.17g}", k.name, f"{p:.17g}",
                            st.a1, st.l1, st.a2, st.l2])
