"""Allele-frequency trajectories and their square-root-process limits.

The Wright-Fisher diffusion is integrated with Euler-Maruyama and clamped to
[0, 1]. Within a few steps of a boundary it switches to an exact step of
the square-root process obtained by linearising the model at that
boundary. The output grid is always the caller's. The CIR-type limits
are sampled with exact noncentral chi-square transitions, so they need
no step-size control.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .stationary import ModelParams, SampleCounts, ScaledSelection, posterior_sample

__all__ = [
    "FrequencyPath",
    "Demography",
    "CirKind",
    "CirPath",
    "PathRejectionError",
    "simulate_wf",
    "simulate_wf_varying",
    "reversed_stationary_path",
    "conditioned_varying_path",
    "simulate_cir",
    "rescaled_frequency_check",
    "wf_at_times",
]



@dataclass
class FrequencyPath:
    """A frequency trajectory sampled on a grid.

    Attributes
    ----------
    dt : float
        Grid spacing (ignored when ``times`` is given explicitly).
    values : ndarray
        Frequencies in [0, 1].
    t0 : float
        Time of ``values[0]``.
    times : ndarray, optional
        Explicit, strictly increasing grid. Defaults to ``t0 + dt * arange``.
    continuation : ModelParams, optional
        When set, the path may be extended past its end by running the
        constant-size diffusion with these parameters. This is valid for
        backward paths whose far end is in stationarity (by reversibility).
    """

    dt: float
    values: np.ndarray
    t0: float = 0.0
    times: np.ndarray | None = None
    continuation: ModelParams | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) < 1:
            raise ValueError("values must be a non-empty 1-d array")
        if np.any((self.values < 0) | (self.values > 1)):
            raise ValueError("frequencies must lie in [0, 1]")
        if self.times is None:
            if not self.dt > 0:
                raise ValueError("dt must be positive")
            self.times = self.t0 + self.dt * np.arange(len(self.values))
        else:
            self.times = np.asarray(self.times, dtype=float)
            if self.times.shape != self.values.shape or np.any(np.diff(self.times) <= 0):
                raise ValueError("times must be strictly increasing and match values")

    def __len__(self):
        return len(self.values)

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def extend(self, n_steps: int, rng: np.random.Generator) -> None:
        """Append ``n_steps`` grid points using the continuation dynamics."""
        if self.continuation is None:
            raise RuntimeError("path has no continuation dynamics")
        grid = self.end_time + self.dt * np.arange(1, n_steps + 1)
        p = self.continuation
        new = _wf_grid(rng, float(self.values[-1]), self.end_time, grid, p.theta1, p.theta2,
                       p.beta, _ONE_T, _ONE_RHO, self.dt)
        self.values = np.concatenate([self.values, new])
        self.times = np.concatenate([self.times, grid])

    def to_csv_rows(self):
        return [(float(t), float(v)) for t, v in zip(self.times, self.values)]


@dataclass(frozen=True)
class Demography:
    """Relative population size ``rho(t)`` on forward time [0, T], linear between knots."""

    knot_times: tuple
    knot_rho: tuple

    def __post_init__(self):
        t = np.asarray(self.knot_times, dtype=float)
        r = np.asarray(self.knot_rho, dtype=float)
        if t.shape != r.shape or len(t) < 1:
            raise ValueError("knot_times and knot_rho must have the same non-zero length")
        if np.any(np.diff(t) <= 0) or t[0] != 0.0:
            raise ValueError("knot_times must start at 0 and increase strictly")
        if np.any(r <= 0):
            raise ValueError("rho must be strictly positive at every knot")
        object.__setattr__(self, "knot_times", tuple(t))
        object.__setattr__(self, "knot_rho", tuple(r))

    @property
    def T(self) -> float:
        return float(self.knot_times[-1])

    def rho(self, t):
        return np.interp(t, self.knot_times, self.knot_rho)

    @classmethod
    def constant(cls, T: float, rho: float = 1.0) -> "Demography":
        return cls((0.0, float(T)), (float(rho), float(rho)))

    @classmethod
    def linear(cls, T: float, rho_start: float, rho_end: float) -> "Demography":
        return cls((0.0, float(T)), (float(rho_start), float(rho_end)))

    def arrays(self):
        return np.asarray(self.knot_times), np.asarray(self.knot_rho)


_ONE_T = np.array([0.0, 1.0])
_ONE_RHO = np.array([1.0, 1.0])


class CirKind(enum.Enum):
    """The three square-root diffusions arising as rescaled limits.

    ``QZero``: dQ = sqrt(Q) dW + (theta2 - Q)/2 dt (scaled minor-allele frequency, large beta).
    ``ZGen``: dZ = sqrt(Z) dW + (theta1 + bt Z)/2 dt (rare allele, bt < 1).
    ``QTilde``: dq = sqrt(q) dW + (theta2 - bt q)/2 dt (rare allele A2, bt > 1).
    """

    QZero = "QZero"
    ZGen = "ZGen"
    QTilde = "QTilde"


@dataclass
class CirPath:
    dt: float
    values: np.ndarray
    kind: CirKind

    @property
    def times(self):
        return self.dt * np.arange(len(self.values))


class PathRejectionError(RuntimeError):
    """Raised when conditioning by rejection exhausts its attempt budget."""


# ---------------------------------------------------------------------------
# Euler kernel


@numba.njit(cache=True, nogil=True)
def _boundary_step(rng, z, th_near, th_far, beta, rho, h):
    """Exact step of the square-root diffusion that linearises the model at 0.

    Near ``z = 0`` the frequency follows dz = sqrt(z / rho) dW +
    (a - k z) dt with a = th_near / 2 and k = (th_near + th_far - beta) / 2;
    ``y = rho z`` is then a CIR process with a noncentral chi-square law.
    """
    alpha = 0.5 * th_near
    kappa = 0.5 * (th_near + th_far - beta)
    if kappa == 0.0:
        c = 0.25 * h
        decay = 1.0
    else:
        c = -math.expm1(-kappa * h) / (4.0 * kappa)
        decay = math.exp(-kappa * h)
    lam = max(rho * z * decay / c, 1e-300)
    return c * rng.noncentral_chisquare(4.0 * rho * alpha, lam) / rho


@numba.njit(cache=True, nogil=True)
def _wf_advance(rng, x, t, t_end, th1, th2, beta, knot_t, knot_rho, h_max):
    """Advance the diffusion from (t, x) to t_end; returns the new frequency.

    Euler-Maruyama with clamping in the interior. Within ``10 h`` of a
    boundary, where Euler increments are as large as the distance to the
    boundary, an exact step of the locally linearised square-root
    diffusion is taken instead (needs a positive mutation rate into the
    boundary it approaches).
    """
    while t < t_end:
        h = min(h_max, t_end - t)
        rho = np.interp(t, knot_t, knot_rho)
        if x < 10.0 * h and x <= 0.5 and th1 > 0.0:
            x = _boundary_step(rng, x, th1, th2, beta, rho, h)
        elif 1.0 - x < 10.0 * h and th2 > 0.0:
            x = 1.0 - _boundary_step(rng, 1.0 - x, th2, th1, -beta, rho, h)
        else:
            drift = 0.5 * (th1 * (1.0 - x) - th2 * x + beta * x * (1.0 - x))
            sd = math.sqrt(max(x * (1.0 - x), 0.0) * h / rho)
            x = x + drift * h + sd * rng.standard_normal()
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
        t += h
        if t_end - t < 1e-15 * max(1.0, abs(t_end)):
            t = t_end
    return x


@numba.njit(cache=True, nogil=True)
def _wf_grid(rng, x0, t0, grid, th1, th2, beta, knot_t, knot_rho, h_max):
    out = np.empty(len(grid))
    x = x0
    t = t0
    for i in range(len(grid)):
        x = _wf_advance(rng, x, t, grid[i], th1, th2, beta, knot_t, knot_rho, h_max)
        t = grid[i]
        out[i] = x
    return out


def _check_dt(dt):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")


def simulate_wf(params: ModelParams, x0: float, dt: float, horizon: float,
                rng: np.random.Generator) -> FrequencyPath:
    """Simulate the constant-size diffusion forward in time.

    Parameters
    ----------
    params : ModelParams
    x0 : float
        Initial frequency in [0, 1].
    dt : float
        Output grid spacing and maximal Euler step.
    horizon : float
        Final time.
    rng : numpy.random.Generator

    Returns
    -------
    FrequencyPath
        Values on ``0, dt, ..., ceil(horizon/dt) dt``.
    """
    return simulate_wf_varying(params, Demography((0.0, 1.0), (1.0, 1.0)), x0, dt, rng,
                               horizon=horizon)


def simulate_wf_varying(params: ModelParams, demog: Demography, x0: float, dt: float,
                        rng: np.random.Generator, horizon: float | None = None) -> FrequencyPath:
    """Simulate the diffusion with relative population size ``rho(t)``.

    The noise term is divided by ``sqrt(rho(t))``; ``rho`` is held constant
    beyond the last knot. ``horizon`` defaults to ``demog.T``.
    """
    _check_dt(dt)
    if not 0.0 <= x0 <= 1.0:
        raise ValueError("x0 must lie in [0, 1]")
    horizon = demog.T if horizon is None else horizon
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    nsteps = int(math.ceil(horizon / dt - 1e-9))
    grid = dt * np.arange(1, nsteps + 1)
    kt, kr = demog.arrays()
    vals = _wf_grid(rng, float(x0), 0.0, grid, params.theta1, params.theta2, params.beta,
                    kt, kr, dt)
    return FrequencyPath(dt, np.concatenate([[x0], vals]))


def wf_at_times(params: ModelParams, x0s, times, h_max: float, rng: np.random.Generator) -> np.ndarray:
    """Frequencies at ``times`` for many independent paths started at ``x0s``.

    Returns an array of shape ``(len(x0s), len(times))``.
    """
    x0s = np.asarray(x0s, dtype=float)
    times = np.asarray(times, dtype=float)
    return _wf_many(rng, x0s, times, params.theta1, params.theta2, params.beta, h_max)


@numba.njit(cache=True, nogil=True)
def _wf_many(rng, x0s, times, th1, th2, beta, h_max):
    out = np.empty((len(x0s), len(times)))
    kt = np.array([0.0, 1.0])
    kr = np.array([1.0, 1.0])
    for r in range(len(x0s)):
        out[r] = _wf_grid(rng, x0s[r], 0.0, times, th1, th2, beta, kt, kr, h_max)
    return out


# ---------------------------------------------------------------------------
# backward paths


def reversed_stationary_path(counts: SampleCounts, params: ModelParams, dt: float,
                             rng: np.random.Generator, horizon: float | None = None
                             ) -> FrequencyPath:
    """Backward frequency path for a sample taken from a stationary population.

    The present-day frequency is drawn from the posterior given ``counts``.
    Because the stationary diffusion is reversible, the backward path has
    the forward dynamics, so the returned path can be extended indefinitely
    with :meth:`FrequencyPath.extend`. Only the starting point is generated
    when ``horizon`` is omitted.
    """
    _check_dt(dt)
    p0 = posterior_sample(counts, params, rng)
    path = FrequencyPath(dt, np.array([p0]), continuation=params)
    if horizon is not None:
        path.extend(int(math.ceil(horizon / dt - 1e-9)), rng)
    return path


@numba.njit(cache=True, nogil=True)
def _conditioned_attempts(rng, x0s, grid, th1, th2, beta, knot_t, knot_rho, h_max,
                          n1, n2, log_max):
    """Run proposals until one is accepted; returns (index, path) or (-1, empty)."""
    for i in range(len(x0s)):
        vals = _wf_grid(rng, x0s[i], 0.0, grid, th1, th2, beta, knot_t, knot_rho, h_max)
        xT = vals[-1]
        if n1 > 0 and xT <= 0.0:
            continue
        if n2 > 0 and xT >= 1.0:
            continue
        log_l = 0.0
        if n1 > 0:
            log_l += n1 * math.log(xT)
        if n2 > 0:
            log_l += n2 * math.log1p(-xT)
        if math.log(rng.random()) < log_l - log_max:
            return i, vals
    return -1, np.empty(0)


def conditioned_varying_path(counts: SampleCounts, params: ModelParams, demog: Demography,
                             mu0: Callable | str, dt: float, rng: np.random.Generator,
                             max_attempts: int = 1_000_000, batch: int = 64, return_attempts: bool = False):
    """Backward frequency path conditioned on the present-day sample.

    Forward paths are generated on ``[0, T]`` from ``mu0`` and accepted with
    probability ``L(X_T) / max L`` where ``L(y) = y**n1 (1 - y)**n2``. The
    accepted path is returned in backward time ``s = T - t``.

    Parameters
    ----------
    mu0 : callable or "stationary"
        ``mu0(rng, size)`` returns initial frequencies; ``"stationary"`` draws
        them from the stationary law of the constant-size model.
    max_attempts : int
        Total proposals allowed before :class:`PathRejectionError`.

    Notes
    -----
    When ``mu0`` is stationary and ``rho(0) = 1`` the population at forward
    time 0 is in stationarity, so the backward path may be continued past
    ``T`` with the constant-size dynamics; the returned path then carries
    ``continuation=params``.
    """
    _check_dt(dt)
    n1, n2 = counts.n1, counts.n2
    n = n1 + n2
    if n == 0:
        log_max = 0.0
    else:
        y = n1 / n
        log_max = (n1 * math.log(y) if n1 else 0.0) + (n2 * math.log1p(-y) if n2 else 0.0)
    T = demog.T
    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    grid = np.linspace(0.0, T, nsteps + 1)[1:]
    kt, kr = demog.arrays()
    if mu0 == "stationary":
        def draw(r, size):
            return posterior_sample(SampleCounts(0, 0), params, r, size=size)
        stationary_start = True
    else:
        draw = mu0
        stationary_start = False

    attempts = 0
    while attempts < max_attempts:
        m = min(batch, max_attempts - attempts)
        x0s = np.asarray(draw(rng, m), dtype=float)
        idx, vals = _conditioned_attempts(rng, x0s, grid, params.theta1, params.theta2,
                                          params.beta, kt, kr, T / nsteps,
                                          n1, n2, log_max)
        if idx >= 0:
            attempts += idx + 1
            forward = np.concatenate([[x0s[idx]], vals])
            cont = params if (stationary_start and abs(demog.knot_rho[0] - 1.0) < 1e-12) else None
            path = FrequencyPath(T / nsteps, forward[::-1].copy(), continuation=cont)
            return (path, attempts) if return_attempts else path
        attempts += m
    raise PathRejectionError(
        f"no path accepted in {max_attempts} attempts for counts ({n1}, {n2}); "
        f"the sample is too unlikely under mu0 and this demography")


# ---------------------------------------------------------------------------
# square-root processes


def _cir_coeffs(kind: CirKind, params: ModelParams, beta_tilde: float | None):
    if kind is CirKind.QZero:
        return params.theta2 / 2.0, 0.5
    if beta_tilde is None:
        raise ValueError(f"{kind.value} needs beta_tilde")
    if kind is CirKind.ZGen:
        return params.theta1 / 2.0, -beta_tilde / 2.0
    return params.theta2 / 2.0, beta_tilde / 2.0


def cir_transition(rng: np.random.Generator, z0, alpha: float, kappa: float, h: float):
    """Exact draw of Z_h given Z_0 for dZ = sqrt(Z) dW + (alpha - kappa Z) dt."""
    if kappa == 0.0:
        c = h / 4.0
        decay = 1.0
    else:
        c = -math.expm1(-kappa * h) / (4.0 * kappa)
        decay = math.exp(-kappa * h)
    lam = np.asarray(z0, dtype=float) * decay / c
    return c * rng.noncentral_chisquare(4.0 * alpha, np.maximum(lam, 1e-300))


def simulate_cir(kind: CirKind, params: ModelParams, z0, dt: float, horizon: float,
                 rng: np.random.Generator, beta_tilde: float | None = None):
    """Simulate one of the square-root limit diffusions.

    ``z0`` may be a scalar (one path, returned as :class:`CirPath`) or an
    array of starting values (many paths, returned as an array of shape
    ``(len(z0), nsteps + 1)``). Transitions are exact.
    """
    _check_dt(dt)
    if np.any(np.asarray(z0) < 0):
        raise ValueError("z0 must be non-negative")
    if kind is CirKind.ZGen and beta_tilde is not None and beta_tilde >= 1:
        raise ValueError("ZGen arises only for beta_tilde < 1")
    alpha, kappa = _cir_coeffs(kind, params, beta_tilde)
    nsteps = int(math.ceil(horizon / dt - 1e-9))
    scalar = np.ndim(z0) == 0
    z = np.atleast_1d(np.asarray(z0, dtype=float))
    out = np.empty((len(z), nsteps + 1))
    out[:, 0] = z
    for i in range(nsteps):
        z = cir_transition(rng, z, alpha, kappa, dt)
        out[:, i + 1] = z
    if scalar:
        return CirPath(dt, out[0], kind)
    return out


def cir_mean(kind: CirKind, params: ModelParams, z0: float, t, beta_tilde=None):
    """Closed-form mean of the square-root process at time ``t``."""
    alpha, kappa = _cir_coeffs(kind, params, beta_tilde)
    t = np.asarray(t, dtype=float)
    if kappa == 0:
        return z0 + alpha * t
    return alpha / kappa + (z0 - alpha / kappa) * np.exp(-kappa * t)


@dataclass
class RescaledCheck:
    """Matched marginal statistics of a rescaled frequency and its limit."""

    kind: CirKind
    times: np.ndarray
    wf_mean: np.ndarray
    wf_se: np.ndarray
    wf_var: np.ndarray
    cir_mean: np.ndarray
    cir_se: np.ndarray
    cir_var: np.ndarray
    start_values: np.ndarray = field(repr=False)

    def z_scores(self):
        return (self.wf_mean - self.cir_mean) / np.hypot(self.wf_se, self.cir_se)


def rescaled_frequency_check(params: ModelParams, counts: SampleCounts,
                             scaled: ScaledSelection | None, dt: float,
                             rng: np.random.Generator, times=(0.25, 0.5, 1.0, 1.5, 2.0),
                             replicates: int = 10_000) -> RescaledCheck:
    """Compare a rescaled diffusion path with its square-root limit.

    With ``scaled`` given (``beta_tilde < 1``) the statistic is ``n p_{t/n}``
    compared with ``ZGen``. With ``scaled=None`` the large-``beta`` case is
    used: ``beta q_{t/beta}`` with ``q = 1 - p`` compared with ``QZero``.

    Both processes start from the same values: the rescaled posterior draws
    of the present-day frequency. ``dt`` is the Euler step on the rescaled
    time axis.
    """
    times = np.asarray(times, dtype=float)
    n = counts.n
    if scaled is not None:
        if scaled.beta_tilde >= 1:
            raise ValueError("ZGen comparison needs beta_tilde < 1")
        kind, scale = CirKind.ZGen, float(n)
        model = ModelParams(params.theta1, params.theta2, scaled.beta_tilde * counts.n2)
        p0 = posterior_sample(counts, model, rng, size=replicates)
        y0 = scale * p0
        x0 = p0
    else:
        if params.beta <= 0:
            raise ValueError("the large-beta comparison needs beta > 0")
        kind, scale = CirKind.QZero, float(params.beta)
        model = params
        p0 = posterior_sample(counts, model, rng, size=replicates)
        # Track q = 1 - p directly (the swapped model) for precision near 1.
        x0 = 1.0 - p0
        y0 = scale * x0
        model = model.swapped()
    wf = wf_at_times(model, x0, times / scale, dt / scale, rng) * scale
    alpha, kappa = _cir_coeffs(kind, params, scaled.beta_tilde if scaled else None)
    cir = np.empty_like(wf)
    z = y0.copy()
    prev = 0.0
    for j, t in enumerate(times):
        z = cir_transition(rng, z, alpha, kappa, t - prev)
        cir[:, j] = z
        prev = t
    r = replicates
    return RescaledCheck(kind, times, wf.mean(0), wf.std(0, ddof=1) / math.sqrt(r), wf.var(0, ddof=1),
                         cir.mean(0), cir.std(0, ddof=1) / math.sqrt(r), cir.var(0, ddof=1), y0)
