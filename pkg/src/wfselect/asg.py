"""Conditional ancestral selection graph for a two-allele sample.

States count real lineages of each type (``r1``, ``r2``) and virtual
lineages (``v1``, ``v2``). Event rates are unconditional rates reweighted
by ratios of the ordered sampling probability

    q_o(r1, r2, v1, v2) = int x^(r1+v1) (1-x)^(r2+v2) phi_beta(x) dx,

which is evaluated in log space through the 1F1 machinery of
:mod:`wfselect.stationary`.

Two rate systems are provided. :func:`full_rates` keeps every weighted
transition of the process with both virtual classes. :func:`reduced_rates`
is the five-transition process that remains after two exact lumpings: a
branching event whose descendant and incoming lineages are both of the
favoured type is a null event, and under parent-independent mutation a
lineage that mutates can be dropped (except real type-1 lineages, whose
actual mutations are the latent mutations being counted). :func:`collapse`
performs these lumpings on a full table so the two can be compared entry
by entry.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import betaln

from ._random import replicate_rng
from .specfun import AsymRegime, log_hyp1f1
from .stationary import ModelParams, SampleCounts, log_norm_const

__all__ = [
    "AsgMode",
    "AsgRecord",
    "AsgState",
    "PimParams",
    "RateTable",
    "RateTableError",
    "asym_rates",
    "collapse",
    "full_rates",
    "harmonicity_defect",
    "log_qo",
    "rate_table_json",
    "reduced_rates",
    "run_asg_batch",
    "simulate_asg",
    "unconditional_total",
]

# Labels of the five transitions of the reduced process.
LATENT_MUTATION = "latent_mutation"
COALESCENCE_1 = "coalescence_1"
VIRTUAL_GAIN = "virtual_gain"
VIRTUAL_LOSS = "virtual_loss"
LOSS_2 = "loss_2"
REDUCED_LABELS = (LATENT_MUTATION, COALESCENCE_1, VIRTUAL_GAIN, VIRTUAL_LOSS, LOSS_2)
NULL = "null"


class RateTableError(RuntimeError):
    """Raised when a state has no outgoing events or inputs are inconsistent."""


class AsgMode(enum.Enum):
    Reduced = "Reduced"
    Full = "Full"


@dataclass(frozen=True)
class PimParams:
    """Parent-independent mutation: ``theta1 = theta*pi1``, ``theta2 = theta*pi2``."""

    theta: float
    pi1: float
    pi2: float | None = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        pi2 = 1.0 - self.pi1 if self.pi2 is None else self.pi2
        if not (0 < self.pi1 < 1 and 0 < pi2 < 1):
            raise ValueError("pi1 and pi2 must lie in (0, 1)")
        if abs(self.pi1 + pi2 - 1.0) > 1e-12:
            raise ValueError("pi1 + pi2 must equal 1")
        object.__setattr__(self, "pi2", pi2)

    @property
    def theta1(self) -> float:
        return self.theta * self.pi1

    @property
    def theta2(self) -> float:
        return self.theta * self.pi2

    def model(self, beta: float = 0.0) -> ModelParams:
        return ModelParams(self.theta1, self.theta2, beta)

    @classmethod
    def from_model(cls, params: ModelParams) -> "PimParams":
        return cls(params.theta, params.theta1 / params.theta)


@dataclass(frozen=True, order=True)
class AsgState:
    """Lineage counts. In reduced mode only the disfavoured virtual class is used."""

    r1: int
    r2: int
    v1: int = 0
    v2: int = 0

    def __post_init__(self):
        if min(self.r1, self.r2, self.v1, self.v2) < 0:
            raise ValueError(f"negative lineage count in {self!r}")

    @property
    def v(self) -> int:
        return self.v1 + self.v2

    @property
    def total(self) -> int:
        return self.r1 + self.r2 + self.v1 + self.v2

    @classmethod
    def reduced(cls, r1: int, r2: int, v: int, beta: float) -> "AsgState":
        """Reduced-mode state; ``v`` is type 1 when ``beta < 0``, type 2 otherwise."""
        return cls(r1, r2, v, 0) if beta < 0 else cls(r1, r2, 0, v)

    def shift(self, dr1=0, dr2=0, dv1=0, dv2=0) -> "AsgState":
        return AsgState(self.r1 + dr1, self.r2 + dr2, self.v1 + dv1, self.v2 + dv2)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.r1, self.r2, self.v1, self.v2)


@dataclass
class RateTable:
    """Weighted transitions out of ``state``.

    ``entries`` holds ``(label, target, rate)`` for events that change the
    state. Events that leave it unchanged are kept apart in ``nulls``
    (label to rate); ``null_rate`` is their sum.
    """

    state: AsgState
    entries: list[tuple[str, AsgState, float]]
    nulls: dict[str, float] = field(default_factory=dict)

    @property
    def null_rate(self) -> float:
        return math.fsum(self.nulls.values())

    @property
    def event_rate(self) -> float:
        return math.fsum(r for _, _, r in self.entries)

    @property
    def total(self) -> float:
        return self.event_rate + self.null_rate

    def rate(self, label: str) -> float:
        """Rate of the entry with this label (0 if absent)."""
        return math.fsum(r for lab, _, r in self.entries if lab == label)

    def as_dict(self) -> dict[str, float]:
        return {lab: r for lab, _, r in self.entries}

    def to_json_obj(self) -> dict:
        return {
            "state": list(self.state.as_tuple()),
            "entries": [{"label": lab, "target": list(t.as_tuple()), "rate": r}
                        for lab, t, r in self.entries],
            "nulls": dict(self.nulls),
            "null_rate": self.null_rate,
            "total": self.total,
        }


# ---------------------------------------------------------------------------
# sampling probabilities

@lru_cache(maxsize=200_000)
def _log_qo(x_exp: int, y_exp: int, theta1: float, theta2: float, beta: float) -> float:
    a = theta1 + x_exp
    b = theta2 + y_exp
    return float(log_norm_const(ModelParams(theta1, theta2, beta))
                 + betaln(a, b) + log_hyp1f1(a, a + b, beta))


def log_qo(r1: int, r2: int, v1: int, v2: int, pim: PimParams, beta: float) -> float:
    """Log of the ordered sampling probability of a lineage configuration.

    Real and virtual lineages of the same type enter identically, so only
    the exponents ``r1 + v1`` and ``r2 + v2`` matter.

    Examples
    --------
    >>> pim = PimParams(0.4, 0.5)
    >>> round(log_qo(0, 0, 0, 0, pim, -2.0), 12)
    0.0
    """
    if min(r1, r2, v1, v2) < 0:
        raise ValueError("lineage counts must be non-negative")
    return _log_qo(int(r1 + v1), int(r2 + v2), float(pim.theta1), float(pim.theta2), float(beta))


def _ratio(target: AsgState, state: AsgState, pim: PimParams, beta: float) -> float:
    # exp of a log difference; the two magnitudes themselves can be tiny.
    return math.exp(log_qo(*target.as_tuple(), pim, beta) - log_qo(*state.as_tuple(), pim, beta))


def unconditional_total(state: AsgState, pim: PimParams, beta: float) -> float:
    """Total event rate of the unconditional ancestral process."""
    m = state.total
    return m * (pim.theta + abs(beta) + m - 1) / 2.0


def _comb2(k: int) -> float:
    return k * (k - 1) / 2.0


# ---------------------------------------------------------------------------
# full process

def _full_events(state: AsgState, pim: PimParams, beta: float):
    """Yield ``(label, multiplicity, target, null)`` for every weighted event.

    ``multiplicity`` is the unconditional rate before q_o weighting.
    Branching labels carry the (incoming, continuing) types.
    """
    r1, r2, v1, v2 = state.as_tuple()
    t1, t2 = pim.theta1 / 2.0, pim.theta2 / 2.0
    s = abs(beta) / 2.0

    def S(**kw):
        # Targets of zero-multiplicity events may have negative counts.
        try:
            return state.shift(**kw)
        except ValueError:
            return None

    yield "mut_r1_empty", r1 * t1, state, True
    yield "mut_r1_actual", r1 * t1, S(dr1=-1, dr2=1), False
    yield "mut_r2_empty", r2 * t2, state, True
    yield "mut_r2_actual", r2 * t2, S(dr1=1, dr2=-1), False
    yield "mut_v1_empty", v1 * t1, state, True
    yield "mut_v1_actual", v1 * t1, S(dv1=-1, dv2=1), False
    yield "mut_v2_empty", v2 * t2, state, True
    yield "mut_v2_actual", v2 * t2, S(dv1=1, dv2=-1), False

    if beta <= 0:
        # A2 favoured. On a type-1 lineage only (I=1, C=1) fits the data.
        yield "branch_r1_I1C1", r1 * s, S(dv1=1), False
        yield "branch_r2_I1C2", r2 * s, S(dv1=1), False
        yield "branch_r2_I2C1", r2 * s, S(dv1=1), False
        yield "branch_r2_I2C2", r2 * s, S(dv2=1), False
        yield "branch_v1_I1C1", v1 * s, S(dv1=1), False
        yield "branch_v2_I1C2", v2 * s, S(dv1=1), False
        yield "branch_v2_I2C1", v2 * s, S(dv1=1), False
        yield "branch_v2_I2C2", v2 * s, S(dv2=1), False
    else:
        # A1 favoured. On a type-2 lineage only (I=2, C=2) fits the data.
        yield "branch_r1_I1C1", r1 * s, S(dv1=1), False
        yield "branch_r1_I1C2", r1 * s, S(dv2=1), False
        yield "branch_r1_I2C1", r1 * s, S(dv2=1), False
        yield "branch_r2_I2C2", r2 * s, S(dv2=1), False
        yield "branch_v1_I1C1", v1 * s, S(dv1=1), False
        yield "branch_v1_I1C2", v1 * s, S(dv2=1), False
        yield "branch_v1_I2C1", v1 * s, S(dv2=1), False
        yield "branch_v2_I2C2", v2 * s, S(dv2=1), False

    yield "coal_r1", _comb2(r1), S(dr1=-1), False
    yield "coal_r2", _comb2(r2), S(dr2=-1), False
    yield "coal_r1v1", float(r1 * v1), S(dv1=-1), False
    yield "coal_r2v2", float(r2 * v2), S(dv2=-1), False
    yield "coal_v1", _comb2(v1), S(dv1=-1), False
    yield "coal_v2", _comb2(v2), S(dv2=-1), False


def full_rates(state: AsgState, pim: PimParams, beta: float) -> RateTable:
    """All weighted transitions of the conditional process with both virtual classes.

    Events with zero unconditional multiplicity in this state are omitted.
    Empty mutations (a lineage "mutating" to its own type) go to ``nulls``.

    Notes
    -----
    With every lineage count positive there are 22 weighted events, four of
    which are empty mutations. Their rates sum to :func:`unconditional_total`
    (see :func:`harmonicity_defect`).
    """
    entries = []
    nulls = {}
    for label, mult, target, is_null in _full_events(state, pim, beta):
        if mult == 0:
            continue
        if is_null:
            nulls[label] = mult
        else:
            entries.append((label, target, mult * _ratio(target, state, pim, beta)))
    return RateTable(state, entries, nulls)


def harmonicity_defect(state: AsgState, pim: PimParams, beta: float) -> float:
    """Relative gap between the summed conditional rates and the unconditional total.

    Zero (to rounding) when ``q_o`` is harmonic for the unconditional
    process at ``state``.
    """
    tot = unconditional_total(state, pim, beta)
    return abs(full_rates(state, pim, beta).total - tot) / tot


# Where each full-process event goes after lumping, keyed by sign of beta.
_COLLAPSE_NEG = {
    "mut_r1_actual": LATENT_MUTATION,
    "mut_r1_empty": NULL,
    "mut_r2_actual": LOSS_2,
    "mut_r2_empty": LOSS_2,
    "mut_v1_actual": VIRTUAL_LOSS,
    "mut_v1_empty": VIRTUAL_LOSS,
    "branch_r1_I1C1": VIRTUAL_GAIN,
    "branch_r2_I1C2": VIRTUAL_GAIN,
    "branch_r2_I2C1": NULL,
    "branch_r2_I2C2": NULL,
    "branch_v1_I1C1": VIRTUAL_GAIN,
    "coal_r1": COALESCENCE_1,
    "coal_r2": LOSS_2,
    "coal_r1v1": VIRTUAL_LOSS,
    "coal_v1": VIRTUAL_LOSS,
}
_COLLAPSE_POS = {
    "mut_r1_actual": LATENT_MUTATION,
    "mut_r1_empty": NULL,
    "mut_r2_actual": LOSS_2,
    "mut_r2_empty": LOSS_2,
    "mut_v2_actual": VIRTUAL_LOSS,
    "mut_v2_empty": VIRTUAL_LOSS,
    "branch_r1_I1C1": NULL,
    "branch_r1_I1C2": NULL,
    "branch_r1_I2C1": VIRTUAL_GAIN,
    "branch_r2_I2C2": VIRTUAL_GAIN,
    "branch_v2_I2C2": VIRTUAL_GAIN,
    "coal_r1": COALESCENCE_1,
    "coal_r2": LOSS_2,
    "coal_r2v2": VIRTUAL_LOSS,
    "coal_v2": VIRTUAL_LOSS,
}


def _reduced_targets(state: AsgState, beta: float) -> dict[str, AsgState]:
    S = state.shift
    if beta < 0:
        gain, loss = S(dv1=1), S(dv1=-1) if state.v1 > 0 else None
    else:
        gain, loss = S(dv2=1), S(dv2=-1) if state.v2 > 0 else None
    return {
        LATENT_MUTATION: S(dr1=-1, dr2=1) if state.r1 > 0 else None,
        COALESCENCE_1: S(dr1=-1) if state.r1 > 0 else None,
        VIRTUAL_GAIN: gain,
        VIRTUAL_LOSS: loss,
        LOSS_2: S(dr2=-1) if state.r2 > 0 else None,
    }


def _check_reduced(state: AsgState, beta: float) -> None:
    if beta == 0:
        if state.v:
            raise ValueError("with beta = 0 there are no virtual lineages")
    elif beta < 0 and state.v2:
        raise ValueError("reduced state for beta < 0 carries only type-1 virtual lineages")
    elif beta > 0 and state.v1:
        raise ValueError("reduced state for beta > 0 carries only type-2 virtual lineages")


def collapse(table: RateTable, pim: PimParams, beta: float) -> RateTable:
    """Lump a :func:`full_rates` table into the reduced five-event form.

    Entries sharing a reduced transition are summed. Their weights then
    combine through the identities ``q_o(v1+1) + q_o(v2+1) = q_o`` and
    ``q_o(., r2) + q_o(r1+1, r2-1) = q_o(r2-1)`` (and the virtual
    analogues), so the sums equal the reduced-process rates exactly.
    """
    state = table.state
    _check_reduced(state, beta)
    mapping = _COLLAPSE_NEG if beta <= 0 else _COLLAPSE_POS
    targets = _reduced_targets(state, beta)
    sums: dict[str, list[float]] = {lab: [] for lab in REDUCED_LABELS}
    nulls: dict[str, list[float]] = {}
    for label, _, rate in table.entries:
        dest = mapping.get(label)
        if dest is None:
            raise RateTableError(f"event {label} has no reduced counterpart in state {state}")
        (nulls.setdefault(label, []) if dest == NULL else sums[dest]).append(rate)
    for label, rate in table.nulls.items():
        dest = mapping.get(label)
        if dest is None:
            raise RateTableError(f"event {label} has no reduced counterpart in state {state}")
        (nulls.setdefault(label, []) if dest == NULL else sums[dest]).append(rate)
    entries = [(lab, targets[lab], math.fsum(sums[lab]))
               for lab in REDUCED_LABELS if sums[lab] and targets[lab] is not None]
    return RateTable(state, entries, {k: math.fsum(v) for k, v in nulls.items()})


# ---------------------------------------------------------------------------
# reduced process

def reduced_rates(state: AsgState, pim: PimParams, beta: float) -> RateTable:
    """The five transitions of the reduced conditional process.

    Parameters
    ----------
    state : AsgState
        Reduced-mode state: ``v1`` is used when ``beta < 0``, ``v2`` when
        ``beta > 0``; with ``beta = 0`` there are no virtual lineages.
    pim : PimParams
    beta : float

    Returns
    -------
    RateTable
        Entries in the order latent mutation, type-1 coalescence, virtual
        gain, virtual loss, type-2 loss (zero-multiplicity ones dropped).
        ``nulls`` holds the empty type-1 mutations and the lumped branching
        events; these account for the gap to the unconditional total.
    """
    _check_reduced(state, beta)
    r1, r2, v1, v2 = state.as_tuple()
    t1, t2 = pim.theta1 / 2.0, pim.theta2 / 2.0
    s = abs(beta) / 2.0
    tg = _reduced_targets(state, beta)
    if beta < 0:
        v, tv = v1, t1
        own = r1 * v1
        null_branch = r2 * s
    else:
        v, tv = v2, t2
        own = r2 * v2
        null_branch = r1 * s
    mults = {
        LATENT_MUTATION: r1 * t1,
        COALESCENCE_1: _comb2(r1),
        VIRTUAL_GAIN: (r1 + r2 + v) * s,
        VIRTUAL_LOSS: v * tv + own + _comb2(v),
        LOSS_2: r2 * t2 + _comb2(r2),
    }
    entries = [(lab, tg[lab], m * _ratio(tg[lab], state, pim, beta))
               for lab, m in mults.items() if m > 0 and tg[lab] is not None]
    nulls = {}
    if r1 * t1 > 0:
        nulls["mut_r1_empty"] = r1 * t1
    if null_branch > 0:
        nulls["branch_favoured"] = null_branch
    return RateTable(state, entries, nulls)


def asym_rates(state: AsgState, pim: PimParams, regime: AsymRegime,
               beta: float | None = None, beta_tilde: float | None = None) -> RateTable:
    """Leading-order rates of the reduced process in an asymptotic regime.

    Parameters
    ----------
    state : AsgState
        Reduced-mode state.
    regime : AsymRegime
        ``LargeBetaNeg``/``LargeBetaPos``: large ``|beta|`` (pass ``beta``).
        ``LargeN2FixedBeta``: large ``r2`` with ``beta`` fixed (pass ``beta``).
        ``ScaledBetaLt1``/``ScaledBetaGt1``: ``beta = beta_tilde * r2`` with
        ``beta_tilde`` fixed (pass ``beta_tilde``; ``beta_tilde < 0`` and
        ``0 < beta_tilde < 1`` both use ``ScaledBetaLt1``).

    Returns
    -------
    RateTable
        Same labels and targets as :func:`reduced_rates`; ``nulls`` is empty.
    """
    r1, r2 = state.r1, state.r2
    tp1, tp2 = pim.theta1, pim.theta2
    R = AsymRegime

    if regime in (R.LargeBetaNeg, R.LargeBetaPos, R.LargeN2FixedBeta):
        if beta is None or beta == 0:
            raise ValueError(f"{regime.value} needs a non-zero beta")
        if regime is R.LargeBetaNeg and beta > 0 or regime is R.LargeBetaPos and beta < 0:
            raise ValueError(f"beta={beta} does not match regime {regime.value}")
        sign = -1 if beta < 0 else 1
    elif regime in (R.ScaledBetaLt1, R.ScaledBetaGt1):
        if beta_tilde is None or beta_tilde == 0:
            raise ValueError(f"{regime.value} needs a non-zero beta_tilde")
        if regime is R.ScaledBetaLt1 and beta_tilde >= 1 or regime is R.ScaledBetaGt1 and beta_tilde <= 1:
            raise ValueError(f"beta_tilde={beta_tilde} does not match regime {regime.value}")
        sign = -1 if beta_tilde < 0 else 1
    else:
        raise ValueError(f"unknown regime {regime!r}")
    _check_reduced(state, sign)
    v = state.v

    if sign < 0:
        d = tp1 + r1 + v - 1.0
        if regime is R.LargeBetaNeg:
            f = abs(beta)
            gain = (r1 + r2 + v) * (tp1 + r1 + v) / 2.0
            loss2 = r2 * tp2 / 2.0 + _comb2(r2)
        elif regime is R.LargeN2FixedBeta:
            f = r2
            gain = abs(beta) * (tp1 + r1 + v) / 2.0
            loss2 = r2 * r2 / 2.0
        else:
            bt = abs(beta_tilde)
            f = r2 * (1.0 + bt)
            gain = bt * (tp1 + r1 + v) / (2.0 * (1.0 + bt))
            loss2 = r2 * r2 / 2.0
        rates = {
            LATENT_MUTATION: r1 * f / 2.0 * tp1 / d if r1 else 0.0,
            COALESCENCE_1: r1 * f / 2.0 * (r1 - 1) / d if r1 else 0.0,
            VIRTUAL_GAIN: gain,
            VIRTUAL_LOSS: v * f / 2.0 * (tp1 + 2 * r1 + v - 1.0) / d if v else 0.0,
            LOSS_2: loss2,
        }
    else:
        if regime is R.LargeBetaPos:
            d2 = tp2 + r2 + v - 1.0
            rates = {
                LATENT_MUTATION: r1 / beta * tp1 * (tp2 + r2 + v) / 2.0,
                COALESCENCE_1: _comb2(r1),
                VIRTUAL_GAIN: (r1 + r2 + v) * (tp2 + r2 + v) / 2.0,
                VIRTUAL_LOSS: v * beta / 2.0 * (tp2 + 2 * r2 + v - 1.0) / d2 if v else 0.0,
                LOSS_2: r2 * beta / 2.0 * (tp2 + r2 - 1.0) / d2 if r2 else 0.0,
            }
        elif regime is R.ScaledBetaGt1:
            bt = beta_tilde
            rates = {
                LATENT_MUTATION: r1 * tp1 / 2.0 / (bt - 1.0),
                COALESCENCE_1: _comb2(r1) * bt / (bt - 1.0),
                VIRTUAL_GAIN: r2 / 2.0,
                VIRTUAL_LOSS: v * r2 * bt,
                LOSS_2: r2 * r2 / 2.0 * bt,
            }
        else:
            if regime is R.LargeN2FixedBeta:
                f, gain = r2, r2 * abs(beta) / 2.0
            else:
                f, gain = r2 * (1.0 - beta_tilde), r2 * beta_tilde / 2.0
            d = tp1 + r1 - 1.0
            rates = {
                LATENT_MUTATION: r1 * f / 2.0 * tp1 / d if r1 else 0.0,
                COALESCENCE_1: r1 * f / 2.0 * (r1 - 1) / d if r1 else 0.0,
                VIRTUAL_GAIN: gain,
                VIRTUAL_LOSS: v * r2,
                LOSS_2: r2 * r2 / 2.0,
            }
    tg = _reduced_targets(state, sign)
    entries = [(lab, tg[lab], float(r)) for lab, r in rates.items()
               if r > 0 and tg[lab] is not None]
    return RateTable(state, entries, {})


def rate_table_json(state: AsgState, pim: PimParams, beta: float,
                    mode: AsgMode = AsgMode.Reduced, indent: int | None = 2) -> str:
    """JSON dump of the rate table at ``state`` (for docs and snapshots)."""
    table = reduced_rates(state, pim, beta) if mode is AsgMode.Reduced else full_rates(state, pim, beta)
    obj = {"mode": mode.value, "theta": pim.theta, "pi1": pim.pi1, "beta": beta,
           **table.to_json_obj(),
           "unconditional_total": unconditional_total(state, pim, beta)}
    return json.dumps(obj, indent=indent)


# ---------------------------------------------------------------------------
# simulation

@dataclass
class AsgRecord:
    """One realisation of the conditional process.

    ``labels[i]`` is the event that moved the process into ``states[i + 1]``
    at time ``times[i]``; ``states[0]`` is the sampled configuration.
    ``k1`` counts latent mutations in the ancestry of the sampled A1 copies,
    including one for the surviving lineage when it is an ancestor of
    those copies.
    """

    n1: int
    n2: int
    mode: AsgMode
    times: np.ndarray
    labels: list[str]
    states: list[AsgState]
    mutation_times: np.ndarray
    k1: int

    def type1_events(self):
        """Times and kinds (``"coal"``/``"mut"``) of events that end a sampled-A1 ancestral line."""
        out_t, out_k = [], []
        for t, lab in zip(self.times, self.labels):
            if lab in (COALESCENCE_1, "coal_r1_obs"):
                out_t.append(t)
                out_k.append("coal")
            elif lab in (LATENT_MUTATION, "mut_r1_obs"):
                out_t.append(t)
                out_k.append("mut")
        return np.asarray(out_t), out_k


@lru_cache(maxsize=100_000)
def _jump_table(state: AsgState, theta: float, pi1: float, beta: float, full: bool):
    pim = PimParams(theta, pi1)
    table = full_rates(state, pim, beta) if full else reduced_rates(state, pim, beta)
    labels = [lab for lab, _, _ in table.entries]
    targets = [t for _, t, _ in table.entries]
    rates = np.array([r for _, _, r in table.entries])
    total = float(rates.sum())
    if not total > 0:
        raise RateTableError(f"no events out of state {state}")
    return labels, targets, np.cumsum(rates) / total, total


def simulate_asg(counts: SampleCounts, pim: PimParams, beta: float, rng: np.random.Generator,
                 mode: AsgMode = AsgMode.Reduced, max_events: int = 10_000_000) -> AsgRecord:
    """Simulate the conditional ancestral process until one real lineage remains.

    Null events are not simulated; they do not change the state and the
    embedded jump chain skips them.

    In ``Full`` mode a real type-1 lineage can also arise from a type-2
    lineage by mutation. Such lineages are not ancestral to the sampled A1
    copies, so the simulator tracks how many real type-1 lineages still
    carry sampled ancestry (``obs``). Mutations and the terminal count
    apply only to those.
    """
    state = AsgState.reduced(counts.n1, counts.n2, 0, beta)
    if counts.n < 1:
        raise ValueError("empty sample")
    full = mode is AsgMode.Full
    obs = counts.n1
    t = 0.0
    k1 = 0
    times, labels, states, muts = [], [], [state], []
    key = (float(pim.theta), float(pim.pi1), float(beta), full)
    for _ in range(max_events):
        if state.r1 + state.r2 <= 1:
            break
        labs, targets, cum, total = _jump_table(state, *key)
        t += rng.standard_exponential() / total
        j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        j = min(j, len(labs) - 1)
        lab = labs[j]
        r1_before = state.r1
        state = targets[j]
        if lab in ("mut_r1_actual", LATENT_MUTATION):
            if not full or rng.random() * r1_before < obs:
                obs -= 1
                k1 += 1
                muts.append(t)
                if full:
                    lab = "mut_r1_obs"
        elif lab in ("coal_r1", COALESCENCE_1):
            # The merged lineage is ancestral to sampled A1 copies if either
            # parent line was; only an obs-obs merger lowers obs.
            pairs = r1_before * (r1_before - 1)
            if not full or rng.random() * pairs < obs * (obs - 1):
                obs -= 1
                if full:
                    lab = "coal_r1_obs"
        times.append(t)
        labels.append(lab)
        states.append(state)
    else:
        raise RateTableError(f"no absorption within {max_events} events")
    if state.r1 == 1 and obs == 1:
        k1 += 1
    return AsgRecord(counts.n1, counts.n2, mode, np.asarray(times), labels, states,
                     np.asarray(muts), k1)


def run_asg_batch(counts: SampleCounts, pim: PimParams, beta: float, seed: int,
                  replicates: int, mode: AsgMode = AsgMode.Reduced, threads: int = 1,
                  start: int = 0) -> np.ndarray:
    """K1 for replicates ``start .. start+replicates-1``, one RNG stream each.

    The result does not depend on ``threads``.
    """
    def one(i):
        return simulate_asg(counts, pim, beta, replicate_rng(seed, i), mode).k1

    idx = range(start, start + replicates)
    if threads <= 1:
        return np.fromiter((one(i) for i in idx), dtype=np.int64, count=replicates)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return np.fromiter(ex.map(one, idx, chunksize=256), dtype=np.int64, count=replicates)
