"""Scenario runners behind the command-line interface.

Each runner takes an :class:`ExperimentConfig` and returns a
:class:`ResultTable` of named statistics. A statistic may carry a
threshold; ``ResultTable.passed`` is true when every thresholded
statistic meets it. All randomness comes from streams keyed by the
config seed and the replicate index (or a fixed block tag), so results
do not depend on the number of worker threads.
"""
from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import ancestry as anc
from . import asg
from . import moran as mor
from ._random import block_rng
from .diffusion import CirKind, Demography, simulate_cir
from .specfun import AsymRegime, HypArgs, gamma_ratio_asym, hyp1f1_asym, log_hyp1f1
from .stationary import (ModelParams, SampleCounts, posterior_sample,
                         sampling_prob, sampling_prob_asym)

__all__ = [
    "DEFAULTS",
    "ConfigError",
    "ExperimentConfig",
    "ResultTable",
    "Row",
    "SCENARIOS",
    "run",
]

# Block tags for auxiliary (non-replicate) random streams.
_TAG_CIR = 1
_TAG_POSTERIOR = 2
_TAG_BDI = 3
_TAG_WF = 4
_ASG_SEED_OFFSET = 0x5EED


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# ---------------------------------------------------------------------------
# configuration

DEFAULTS: dict[str, dict[str, Any]] = {
    "i": {"params": {"theta1": 0.5, "theta2": 0.5, "beta": 800.0},
          "counts": [2, 2], "replicates": 10_000,
          "options": {"cir_paths": 2000, "cir_horizon": 200.0, "cir_burn_in": 40.0}},
    "ii": {"params": {"theta1": 0.2, "theta2": 0.5, "beta": -5.0},
           "counts": [3, 10_000], "replicates": 100_000},
    "iii_a": {"params": {"theta1": 0.2, "theta2": 0.5, "beta_tilde": -0.5},
              "counts": [3, 10_000], "replicates": 100_000,
              "options": {"posterior_draws": 100_000, "posterior_n1": 2,
                          "posterior_theta1": 0.3}},
    "iii_b": {"params": {"theta1": 0.5, "theta2": 0.5, "beta_tilde": 2.0},
              "counts": [3, 10_000], "replicates": 5_000,
              "options": {"cir_paths": 2000, "cir_horizon": 100.0, "cir_burn_in": 20.0}},
    "time_varying": {"params": {"theta1": 0.2, "theta2": 0.5, "beta": -5.0},
                     "counts": [3, 10_000], "replicates": 50_000, "dt": 1e-5,
                     "options": {"window": 0.01, "rho_start": 1.0, "rho_end": 3.0}},
    "asg_crosscheck": {"params": {"theta": 1.0, "pi1": 0.5, "beta": -1.0},
                       "counts": [2, 2], "replicates": 100_000,
                       "options": {"max_lineages": 6}},
    "moran": {"params": {"theta1": 0.4, "s": 0.5, "alpha": 0.2, "theta1_mix": 0.3,
                         "s_mix": 0.5},
              "counts": [3, 0], "replicates": 1,
              "options": {"bdi_horizon": 1e6, "bdi_spacing": 10.0, "bdi_burn_in": 100.0,
                          "wf_generations": 1_000_000, "wf_batches": 100}},
    "asymptotics_audit": {"params": {"theta1": 0.5, "theta2": 0.7}, "counts": [2, 3],
                          "replicates": 1},
}
SCENARIOS = tuple(DEFAULTS)


@dataclass
class ExperimentConfig:
    """One experiment. Unset fields take the scenario defaults in :data:`DEFAULTS`."""

    scenario: str
    params: dict[str, float] = field(default_factory=dict)
    counts: tuple[int, int] | None = None
    replicates: int | None = None
    dt: float | None = None
    seed: int = 1
    out: str | None = None
    format: str = "csv"
    threads: int = 1
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in DEFAULTS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        d = DEFAULTS[self.scenario]
        self.params = {**d.get("params", {}), **(self.params or {})}
        self.options = {**d.get("options", {}), **(self.options or {})}
        if self.counts is None:
            self.counts = tuple(d["counts"])
        self.counts = tuple(int(c) for c in self.counts)
        if self.replicates is None:
            self.replicates = d["replicates"]
        if self.dt is None:
            self.dt = d.get("dt")
        self.validate()

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["counts"] = list(self.counts)
        return d

    def validate(self) -> None:
        if len(self.counts) != 2 or min(self.counts) < 0:
            raise ConfigError("counts must be two non-negative integers")
        if not (isinstance(self.replicates, (int, np.integer)) and self.replicates > 0):
            raise ConfigError("replicates must be a positive integer")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive")
        p = self.params
        sc = self.scenario
        if sc == "iii_a" and not p.get("beta_tilde", 0) < 1:
            raise ConfigError("iii_a requires beta_tilde < 1")
        if sc == "iii_a" and p.get("beta_tilde", 0) == 0:
            raise ConfigError("iii_a requires a non-zero beta_tilde")
        if sc == "iii_b" and not p.get("beta_tilde", 0) > 1:
            raise ConfigError("iii_b requires beta_tilde > 1")
        if sc == "i" and abs(p.get("beta", 0)) < 50:
            raise ConfigError("scenario i is a large-|beta| regime; use |beta| >= 50")
        if sc in ("ii", "iii_a", "time_varying") and self.counts[0] < 1:
            raise ConfigError(f"{sc} needs n1 >= 1")
        if sc == "time_varying":
            if not (self.options["rho_start"] > 0 and self.options["rho_end"] > 0):
                raise ConfigError("rho must stay positive")
            if not self.options["window"] > 0:
                raise ConfigError("window must be positive")

    def model(self) -> ModelParams:
        p = self.params
        if "theta" in p:
            pim = asg.PimParams(p["theta"], p["pi1"])
            return pim.model(p.get("beta", 0.0))
        beta = p["beta"] if "beta" in p else p["beta_tilde"] * self.counts[1]
        return ModelParams(p["theta1"], p["theta2"], beta)


# ---------------------------------------------------------------------------
# results

COLUMNS = ("scenario", "statistic", "value", "se", "replicates", "seed", "threshold", "passed")


@dataclass
class Row:
    statistic: str
    value: float
    se: float | None = None
    replicates: int | None = None
    threshold: str | None = None
    passed: bool | None = None


def _check(value: float, op: str, bound) -> bool:
    if op == "<":
        return value < bound
    if op == "<=":
        return value <= bound
    if op == ">":
        return value > bound
    if op == ">=":
        return value >= bound
    if op == "|.|<=":
        return abs(value) <= bound
    if op == "in":
        return bound[0] <= value <= bound[1]
    raise ValueError(op)


def _fmt_threshold(op: str, bound) -> str:
    if op == "in":
        return f"in[{bound[0]},{bound[1]}]"
    return f"{op}{bound}"


@dataclass
class ResultTable:
    scenario: str
    seed: int
    rows: list[Row] = field(default_factory=list)

    def add(self, statistic: str, value: float, se: float | None = None,
            replicates: int | None = None, check: tuple[str, Any] | None = None) -> Row:
        threshold = passed = None
        if check is not None:
            threshold = _fmt_threshold(*check)
            passed = bool(_check(float(value), *check))
        row = Row(statistic, float(value), None if se is None else float(se),
                  None if replicates is None else int(replicates), threshold, passed)
        self.rows.append(row)
        return row

    def add_histogram(self, name: str, samples: np.ndarray, length: int) -> None:
        counts = np.bincount(np.asarray(samples, dtype=np.int64), minlength=length)
        for k, c in enumerate(counts):
            self.add(f"{name}[{k}]", int(c), replicates=len(samples))

    def get(self, statistic: str) -> Row:
        for r in self.rows:
            if r.statistic == statistic:
                return r
        raise KeyError(statistic)

    @property
    def checks(self) -> list[Row]:
        return [r for r in self.rows if r.threshold is not None]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.checks)

    def records(self) -> list[dict]:
        return [{"scenario": self.scenario, "statistic": r.statistic, "value": r.value,
                 "se": r.se, "replicates": r.replicates, "seed": self.seed,
                 "threshold": r.threshold, "passed": r.passed} for r in self.rows]

    @classmethod
    def from_records(cls, scenario: str, seed: int, records: list[dict]) -> "ResultTable":
        rows = [Row(d["statistic"], d["value"], d["se"], d["replicates"], d["threshold"],
                    d["passed"]) for d in records]
        return cls(scenario, seed, rows)


# ---------------------------------------------------------------------------
# shared pieces

def _prop_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _ancestry(cfg: ExperimentConfig, params: ModelParams, source, track=anc.Track.Type1Only,
              replicates: int | None = None) -> anc.AncestryBatch:
    return anc.run_ancestry_batch(SampleCounts(*cfg.counts), params, source, cfg.seed,
                                  replicates or cfg.replicates, track=track,
                                  threads=cfg.threads)


def _ewens_rows(table: ResultTable, k1: np.ndarray, n1: int, theta1: float, bound: float) -> None:
    ref = anc.ewens_alleles_pmf(n1, theta1).full()
    table.add_histogram("K1", k1, n1 + 1)
    table.add("TV_K1_vs_Ewens", anc.total_variation(k1, ref), replicates=len(k1),
              check=("<", bound))


def cir_long_run_mean(kind: CirKind, params: ModelParams, beta_tilde: float | None,
                      rng: np.random.Generator, paths: int, horizon: float, burn_in: float,
                      dt: float = 0.05) -> tuple[float, float]:
    """Time-averaged level of a square-root process after burn-in, with its SE.

    Each path contributes one time average, so the SE is over independent
    paths.
    """
    z = simulate_cir(kind, params, np.full(paths, 1.0), dt, horizon, rng, beta_tilde=beta_tilde)
    start = int(math.ceil(burn_in / dt))
    per_path = z[:, start:].mean(axis=1)
    return float(per_path.mean()), float(per_path.std(ddof=1) / math.sqrt(paths))


def _cir_rows(table: ResultTable, cfg: ExperimentConfig, kind: CirKind, params: ModelParams,
              beta_tilde: float | None, target: float, name: str) -> None:
    o = cfg.options
    m, se = cir_long_run_mean(kind, params, beta_tilde, block_rng(cfg.seed, 0, _TAG_CIR),
                              int(o["cir_paths"]), float(o["cir_horizon"]),
                              float(o["cir_burn_in"]))
    table.add(f"{name}_long_run_mean", m, se, int(o["cir_paths"]))
    table.add(f"{name}_mean_rel_error", abs(m - target) / target, se / target,
              int(o["cir_paths"]), check=("<", 0.02))


# ---------------------------------------------------------------------------
# scenario runners

def _run_i(cfg: ExperimentConfig) -> ResultTable:
    params = cfg.model()
    n1, n2 = cfg.counts
    R = cfg.replicates
    t = ResultTable("i", cfg.seed)
    track = anc.Track.Both if n2 > 0 else anc.Track.Type1Only
    batch = _ancestry(cfg, params, anc.StationaryPathSource(), track=track)
    k1 = batch.K1
    if params.beta > 0:
        p1 = float(np.mean(k1 == 1))
        t.add_histogram("K1", k1, n1 + 1)
        t.add("P(K1=1)", p1, _prop_se(p1, R), R, check=(">=", 0.97))
        mean = 2.0 / (params.theta1 * params.theta2)
        x = batch.age1 / params.beta
        t.add("mean_age1_over_beta", float(x.mean()), float(x.std(ddof=1) / math.sqrt(R)), R)
        t.add("expected_mean_age1_over_beta", mean)
        t.add("KS_age1_over_beta_vs_Exp", stats.kstest(x, "expon", args=(0.0, mean)).statistic,
              replicates=R, check=("<", 0.05))
        if n1 >= 2:
            coal_first = np.all(batch.kinds1[:, :-1] == anc.EventKind.Coal1, axis=1)
            f = float(coal_first.mean())
            t.add("frac_first_events_coalescent", f, _prop_se(f, R), R)
        if n2 > 0:
            ref = anc.ewens_alleles_pmf(n2, params.theta2).full()
            t.add_histogram("K2", batch.K2, n2 + 1)
            t.add("TV_K2_vs_Ewens", anc.total_variation(batch.K2, ref), replicates=R,
                  check=("<", 0.05))
        _cir_rows(t, cfg, CirKind.QZero, params, None, params.theta2, "QZero")
    else:
        _ewens_rows(t, k1, n1, params.theta1, 0.05)
    return t


def _run_ii(cfg: ExperimentConfig) -> ResultTable:
    params = cfg.model()
    t = ResultTable(cfg.scenario, cfg.seed)
    batch = _ancestry(cfg, params, anc.StationaryPathSource())
    _ewens_rows(t, batch.K1, cfg.counts[0], params.theta1, 0.03)
    return t


def _run_iii_a(cfg: ExperimentConfig) -> ResultTable:
    t = _run_ii(cfg)
    n2 = cfg.counts[1]
    bt = cfg.params["beta_tilde"]
    o = cfg.options
    draws = int(o["posterior_draws"])
    n1, th1 = int(o["posterior_n1"]), float(o["posterior_theta1"])
    params = ModelParams(th1, cfg.params["theta2"], bt * n2)
    p0 = posterior_sample(SampleCounts(n1, n2), params, block_rng(cfg.seed, 0, _TAG_POSTERIOR),
                          size=draws)
    shape, rate = th1 + n1, 1.0 - bt
    x = n2 * p0
    t.add("mean_n2_p0", float(x.mean()), float(x.std(ddof=1) / math.sqrt(draws)), draws)
    t.add("KS_n2_p0_vs_Gamma", stats.kstest(x, "gamma", args=(shape, 0.0, 1.0 / rate)).statistic,
          replicates=draws, check=("<", 0.05))
    return t


def _run_iii_b(cfg: ExperimentConfig) -> ResultTable:
    params = cfg.model()
    n1, n2 = cfg.counts
    n = n1 + n2
    bt = cfg.params["beta_tilde"]
    R = cfg.replicates
    t = ResultTable("iii_b", cfg.seed)
    batch = _ancestry(cfg, params, anc.StationaryPathSource())
    t.add_histogram("K1", batch.K1, n1 + 1)
    p1 = float(np.mean(batch.K1 == 1))
    t.add("P(K1=1)", p1, _prop_se(p1, R), R)
    mean = 2.0 * bt / (params.theta1 * params.theta2)
    x = batch.age1 / n
    t.add("mean_age1_over_n", float(x.mean()), float(x.std(ddof=1) / math.sqrt(R)), R)
    t.add("expected_mean_age1_over_n", mean)
    t.add("KS_age1_over_n_vs_Exp", stats.kstest(x, "expon", args=(0.0, mean)).statistic,
          replicates=R, check=("<", 0.05))
    # Before the last lineage, type-1 events should follow a pure-death
    # chain with rate C(k, 2) while k lineages remain.
    prev = np.zeros(R)
    for j in range(n1 - 1):
        k = n1 - j
        gaps = batch.tau1[:, j] - prev
        prev = batch.tau1[:, j]
        se = float(gaps.std(ddof=1) / math.sqrt(R))
        expect = 1.0 / (k * (k - 1) / 2.0)
        t.add(f"mean_gap_k{k}", float(gaps.mean()), se, R)
        t.add(f"z_gap_k{k}_vs_pure_death", (float(gaps.mean()) - expect) / se, replicates=R,
              check=("|.|<=", 3.0))
    _cir_rows(t, cfg, CirKind.QTilde, params, bt, params.theta2 / bt, "QTilde")
    return t


def _run_time_varying(cfg: ExperimentConfig) -> ResultTable:
    params = cfg.model()
    o = cfg.options
    demog = Demography.linear(float(o["window"]), float(o["rho_start"]), float(o["rho_end"]))
    source = anc.ConditionedPathSource(demog, cfg.dt)
    t = ResultTable("time_varying", cfg.seed)
    batch = _ancestry(cfg, params, source)
    _ewens_rows(t, batch.K1, cfg.counts[0], params.theta1, 0.05)
    within = float(np.mean(batch.age1 <= demog.T))
    t.add("frac_age1_within_window", within, _prop_se(within, cfg.replicates), cfg.replicates)
    return t


def _asg_states(max_lineages: int, beta: float):
    for r1, r2, v in itertools.product(range(max_lineages + 1), repeat=3):
        if 1 <= r1 + r2 and r1 + r2 + v <= max_lineages:
            yield asg.AsgState.reduced(r1, r2, v, beta)


def asg_identity_errors(pim: asg.PimParams, beta: float, max_lineages: int) -> tuple[float, float]:
    """Worst harmonicity defect and worst full-to-reduced collapse error."""
    harm = 0.0
    for s in itertools.product(range(max_lineages + 1), repeat=4):
        if s[0] + s[1] >= 1 and sum(s) <= max_lineages:
            harm = max(harm, asg.harmonicity_defect(asg.AsgState(*s), pim, beta))
    coll = 0.0
    for st in _asg_states(max_lineages, beta):
        red = asg.reduced_rates(st, pim, beta)
        col = asg.collapse(asg.full_rates(st, pim, beta), pim, beta)
        got = col.as_dict()
        if set(got) != set(red.as_dict()):
            return harm, math.inf
        for lab, _, r in red.entries:
            coll = max(coll, abs(got[lab] - r) / r)
        if red.null_rate > 0:
            coll = max(coll, abs(col.null_rate - red.null_rate) / red.null_rate)
    return harm, coll


def _run_asg(cfg: ExperimentConfig) -> ResultTable:
    p = cfg.params
    pim = asg.PimParams(p["theta"], p["pi1"])
    beta = float(p["beta"])
    n1, n2 = cfg.counts
    R = cfg.replicates
    counts = SampleCounts(n1, n2)
    t = ResultTable("asg_crosscheck", cfg.seed)
    k_asg = asg.run_asg_batch(counts, pim, beta, cfg.seed + _ASG_SEED_OFFSET, R,
                              threads=cfg.threads)
    batch = _ancestry(cfg, pim.model(beta), anc.StationaryPathSource())
    t.add_histogram("K1_asg", k_asg, n1 + 1)
    t.add_histogram("K1_ancestry", batch.K1, n1 + 1)
    emp = np.bincount(batch.K1, minlength=n1 + 1) / R
    t.add("TV_K1_asg_vs_ancestry", anc.total_variation(k_asg, emp), replicates=R,
          check=("<", 0.05))
    harm, coll = asg_identity_errors(pim, beta, int(cfg.options["max_lineages"]))
    t.add("max_harmonicity_rel_error", harm, check=("<", 1e-8))
    t.add("max_collapse_rel_error", coll, check=("<", 1e-10))
    return t


def bdi_chisquare(s: float, theta1: float, horizon: float, spacing: float, burn_in: float,
                  rng: np.random.Generator) -> tuple[float, float, int]:
    """Chi-square test of spaced BDI snapshots against the negative binomial.

    Snapshots are ``spacing`` apart, several relaxation times ``1/s``, so
    they are close to independent. Classes with expected count below 5
    are pooled into the upper tail. Returns (statistic, p-value, samples).
    """
    path = mor.simulate_bdi(mor.bdi_from_moran(s, theta1), horizon, rng)
    x = path.at(np.arange(burn_in, horizon, spacing))
    m = len(x)
    pmf = mor.negbinom_pmf(np.arange(0, 200), s, theta1)
    L = int(np.nonzero(pmf * m >= 5)[0].max())
    expected = np.append(pmf[:L] * m, (1.0 - pmf[:L].sum()) * m)
    observed = np.bincount(np.minimum(x, L), minlength=L + 1)
    res = stats.chisquare(observed, expected)
    return float(res.statistic), float(res.pvalue), m


def _run_moran(cfg: ExperimentConfig) -> ResultTable:
    p, o = cfg.params, cfg.options
    t = ResultTable("moran", cfg.seed)
    s, th = float(p["s"]), float(p["theta1"])
    stat, pval, m = bdi_chisquare(s, th, float(o["bdi_horizon"]), float(o["bdi_spacing"]),
                                  float(o["bdi_burn_in"]), block_rng(cfg.seed, 0, _TAG_BDI))
    t.add("BDI_chisquare_statistic", stat, replicates=m)
    t.add("BDI_chisquare_pvalue", pval, replicates=m, check=(">", 0.01))

    a, sm, tm = float(p["alpha"]), float(p["s_mix"]), float(p["theta1_mix"])
    worst_mix = worst_bridge = worst_tail = 0.0
    for n1 in range(0, 11):
        closed = mor.mixed_sampling_prob(n1, a, sm, tm)
        # Truncate relative to the value so the omitted mass cannot exceed
        # a 1e-13 share of it.
        summed, tail = mor.mixed_sampling_sum(n1, a, sm, tm, tol=min(mor.TAIL_TOL, 1e-13 * closed))
        worst_mix = max(worst_mix, abs(summed - closed) / closed)
        worst_tail = max(worst_tail, tail / closed)
        approx = math.exp(sampling_prob_asym(
            SampleCounts(n1, 1000), ModelParams(tm, 1.0, -sm / a * 1000),
            AsymRegime.ScaledBetaLt1))
        worst_bridge = max(worst_bridge, abs(approx - closed) / closed)
    t.add("mixing_identity_max_rel_error", worst_mix, check=("<", 1e-10))
    t.add("mixing_tail_bound_rel", worst_tail)
    t.add("bridge_to_diffusion_max_rel_error", worst_bridge, check=("<", 1e-10))

    gens, nb = int(o["wf_generations"]), int(o["wf_batches"])
    w = mor.wf_poisson_path(0, th, s, gens + 1000, block_rng(cfg.seed, 0, _TAG_WF))[1001:]
    v = float(w.var())
    batch_vars = np.array([b.var() for b in np.array_split(w, nb)])
    se = float(batch_vars.std(ddof=1) / math.sqrt(nb))
    nb_var = th * (1.0 + s) / s**2
    t.add("WF_stationary_variance", v, se, gens)
    t.add("WF_predicted_variance", mor.wf_poisson_stationary_variance(th, s))
    t.add("negative_binomial_variance", nb_var)
    t.add("z_WF_variance_vs_negative_binomial", (v - nb_var) / se, replicates=gens,
          check=(">", 3.0) if v > nb_var else ("<", -3.0))
    return t


def audit_rows(params: ModelParams, counts: SampleCounts) -> list[tuple[str, float, tuple]]:
    """Error ratios under doubling of the large parameter, and scaled-regime errors."""
    def rel(approx_log, exact_log):
        return abs(math.expm1(approx_log - exact_log))

    def ladder(err: Callable[[float], float], base: float):
        e = [err(base * 2**k) for k in range(3)]
        return e, e[0] / e[1], e[1] / e[2]

    first, second = ("in", (1.4, 2.6)), ("in", (2.8, 5.2))
    t1, t2 = params.theta1, params.theta2
    a, b = 1.3, 2.9
    out = []

    def add(name, err, base, check):
        e, r1, r2 = ladder(err, base)
        for k, v in enumerate(e):
            out.append((f"{name}:rel_error[{k}]", v, None))
        out.append((f"{name}:ratio[0]", r1, check))
        out.append((f"{name}:ratio[1]", r2, check))

    add("sampling_prob_large_negative_beta",
        lambda B: rel(sampling_prob_asym(counts, ModelParams(t1, t2, -B), AsymRegime.LargeBetaNeg),
                      sampling_prob(counts, ModelParams(t1, t2, -B))), 200.0, first)
    add("sampling_prob_large_positive_beta",
        lambda B: rel(sampling_prob_asym(counts, ModelParams(t1, t2, B), AsymRegime.LargeBetaPos),
                      sampling_prob(counts, ModelParams(t1, t2, B))), 200.0, first)
    add("sampling_prob_large_n2",
        lambda n: rel(sampling_prob_asym(SampleCounts(counts.n1, int(n)), ModelParams(t1, t2, -1.5),
                                         AsymRegime.LargeN2FixedBeta),
                      sampling_prob(SampleCounts(counts.n1, int(n)), ModelParams(t1, t2, -1.5))),
        200.0, first)
    for order, chk in ((0, first), (1, second)):
        add(f"hyp1f1_large_negative_z:order{order}",
            lambda z, o=order: rel(hyp1f1_asym(HypArgs(a, b, -z), AsymRegime.LargeBetaNeg, order=o)
                                   .log_magnitude, log_hyp1f1(a, b, -z)), 100.0, chk)
        add(f"hyp1f1_large_positive_z:order{order}",
            lambda z, o=order: rel(hyp1f1_asym(HypArgs(a, b, z), AsymRegime.LargeBetaPos, order=o)
                                   .log_magnitude, log_hyp1f1(a, b, z)), 100.0, chk)
        add(f"hyp1f1_large_b:order{order}",
            lambda n, o=order: rel(hyp1f1_asym(HypArgs(a, b, -1.5), AsymRegime.LargeN2FixedBeta,
                                               n2=int(n), order=o).log_magnitude,
                                   log_hyp1f1(a, b + int(n), -1.5)), 100.0, chk)
    add("gamma_ratio_two_term",
        lambda n: abs(gamma_ratio_asym(a, b, int(n)) / math.exp(gammaln(a + n) - gammaln(b + n)) - 1),
        100.0, second)
    n2 = 400
    for bt in (-0.5, 0.5):
        out.append((f"hyp1f1_scaled_lt1[beta_tilde={bt}]:rel_error_n2_400",
                    rel(hyp1f1_asym(HypArgs(a, b, bt * n2), AsymRegime.ScaledBetaLt1, n2=n2)
                        .log_magnitude, log_hyp1f1(a, b + n2, bt * n2)), ("<", 0.05)))
    out.append(("hyp1f1_scaled_gt1[beta_tilde=2]:rel_error_n2_400",
                rel(hyp1f1_asym(HypArgs(a, b, 2.0 * n2), AsymRegime.ScaledBetaGt1, n2=n2)
                    .log_magnitude, log_hyp1f1(a, b + n2, 2.0 * n2)), ("<", 0.05)))
    return out


def _run_audit(cfg: ExperimentConfig) -> ResultTable:
    t = ResultTable("asymptotics_audit", cfg.seed)
    for name, value, chk in audit_rows(cfg.model() if "beta" in cfg.params
                                       else ModelParams(cfg.params["theta1"], cfg.params["theta2"]),
                                       SampleCounts(*cfg.counts)):
        t.add(name, value, check=chk)
    return t


_RUNNERS: dict[str, Callable[[ExperimentConfig], ResultTable]] = {
    "i": _run_i,
    "ii": _run_ii,
    "iii_a": _run_iii_a,
    "iii_b": _run_iii_b,
    "time_varying": _run_time_varying,
    "asg_crosscheck": _run_asg,
    "moran": _run_moran,
    "asymptotics_audit": _run_audit,
}


def run(cfg: ExperimentConfig) -> ResultTable:
    """Run one experiment and return its statistics."""
    return _RUNNERS[cfg.scenario](cfg)
