"""Execution of the three-stage adaptive test.

The scalar state machine (``TrialState``/``analyze``/``run``) processes one
trial and keeps an audit trail.  ``evaluate_paths`` applies the identical
stopping rules to many simulated trials at once; the tests check that both
routes agree decision for decision.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .design import DesignParams, second_stage_sizes
from .exp_family import SuffStat


class Verdict(str, enum.Enum):
    REJECT = "reject"
    ACCEPT = "accept"


class Trigger(str, enum.Enum):
    EARLY_REJECT = "early_reject"
    EARLY_ACCEPT = "early_accept"
    FINAL_REJECT = "final_reject"
    FINAL_ACCEPT = "final_accept"


class OutOfOrderError(RuntimeError):
    pass


class DataExhaustedError(RuntimeError):
    pass


@dataclass(frozen=True)
class Thresholds:
    """Calibrated stopping thresholds (b, b_tilde, c)."""

    b: float
    b_tilde: float
    c: float

    def __post_init__(self):
        for name in ("b", "b_tilde", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.b > self.b_tilde:
            raise ValueError(f"b={self.b} must exceed b_tilde={self.b_tilde}")

    def as_tuple(self):
        return self.b, self.b_tilde, self.c


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    at_stage: int
    total_n: int
    trigger: Trigger
    n_analyses: int

    @property
    def rejected(self) -> bool:
        return self.verdict is Verdict.REJECT


@dataclass(frozen=True)
class ContinueWith:
    next_n: int


@dataclass(frozen=True)
class AuditRecord:
    stage: int
    n: int
    theta_hat: tuple
    stat_null: float
    stat_alt: float
    thresholds: tuple
    action: str

    def to_line(self) -> str:
        th = ",".join(repr(float(t)) for t in self.theta_hat)
        thr = ",".join(repr(float(t)) for t in self.thresholds)
        return (
            f"stage={self.stage}\tn={self.n}\ttheta_hat={th}\tstat_null={float(self.stat_null)!r}"
            f"\tstat_alt={float(self.stat_alt)!r}\tthresholds={thr}\taction={self.action}"
        )

    @classmethod
    def from_line(cls, line: str) -> "AuditRecord":
        kv = dict(part.split("=", 1) for part in line.strip().split("\t"))
        return cls(
            stage=int(kv["stage"]),
            n=int(kv["n"]),
            theta_hat=tuple(float(t) for t in kv["theta_hat"].split(",")),
            stat_null=float(kv["stat_null"]),
            stat_alt=float(kv["stat_alt"]),
            thresholds=tuple(float(t) for t in kv["thresholds"].split(",")),
            action=kv["action"],
        )


@dataclass
class TrialState:
    params: DesignParams
    thresholds: Thresholds
    cum: SuffStat | None = None
    stage: int = 1
    planned_n: list = field(default_factory=list)
    trail: list = field(default_factory=list)
    n_analyses: int = 0

    def __post_init__(self):
        if not self.planned_n:
            self.planned_n = [self.params.m, None, self.params.M]

    @property
    def current_target(self) -> int:
        return self.planned_n[self.stage - 1]


def _statistics(params: DesignParams, stat: SuffStat):
    fam = params.family
    theta_hat = fam.mle(stat)
    u_hat = fam.u(theta_hat)
    info0 = fam.constrained_kl(theta_hat, params.u0)
    info1 = fam.constrained_kl(theta_hat, params.u1)
    return theta_hat, u_hat, stat.n * info0, stat.n * info1, info0, info1


def analyze(state: TrialState) -> Decision | ContinueWith:
    """Apply the stopping rules at the current analysis.

    Ties at a threshold resolve toward stopping; rejection is checked before
    futility.  At n = M only the final rule applies.
    """
    params, thr = state.params, state.thresholds
    target = state.current_target
    if state.cum is None or state.cum.n != target:
        have = None if state.cum is None else state.cum.n
        raise OutOfOrderError(f"stage {state.stage} analysis needs n={target}, have n={have}")
    theta_hat, u_hat, stat0, stat1, _, _ = _statistics(params, state.cum)
    state.n_analyses += 1
    stage = state.stage

    def record(action):
        state.trail.append(
            AuditRecord(stage, target, tuple(theta_hat), stat0, stat1, thr.as_tuple(), action)
        )

    if target >= params.M:
        if u_hat > params.u0 and stat0 >= thr.c:
            record("final_reject")
            return Decision(Verdict.REJECT, state.stage, target, Trigger.FINAL_REJECT, state.n_analyses)
        record("final_accept")
        return Decision(Verdict.ACCEPT, state.stage, target, Trigger.FINAL_ACCEPT, state.n_analyses)
    if u_hat > params.u0 and stat0 >= thr.b:
        record("early_reject")
        return Decision(Verdict.REJECT, state.stage, target, Trigger.EARLY_REJECT, state.n_analyses)
    if u_hat < params.u1 and stat1 >= thr.b_tilde:
        record("early_accept")
        return Decision(Verdict.ACCEPT, state.stage, target, Trigger.EARLY_ACCEPT, state.n_analyses)
    if state.stage == 1:
        nxt = plan_second_stage(state)
    else:
        nxt = params.M
        state.stage = 3
    record(f"continue:{nxt}")
    return ContinueWith(nxt)


def plan_second_stage(state: TrialState) -> int:
    """Fix n2 from the stage-1 estimate and advance the state.

    When n2 == m the duplicate analysis is skipped and the next look is the
    final one at M.
    """
    params = state.params
    if state.stage != 1 or state.cum is None or state.cum.n != params.m:
        raise OutOfOrderError("the second stage is planned right after the stage-1 analysis")
    _, _, _, _, info0, info1 = _statistics(params, state.cum)
    n2 = int(second_stage_sizes(params, info0, info1))
    state.planned_n[1] = n2
    state.stage = 3 if n2 == params.m else 2
    return state.current_target


def _accumulate(family, stat: SuffStat | None, xs: list) -> SuffStat:
    new = SuffStat.from_observations(family, np.asarray(xs, dtype=float)) if xs else None
    if stat is None:
        return new
    if new is None:
        return stat
    return SuffStat(stat.n + new.n, tuple(a + b for a, b in zip(stat.sums, new.sums)))


def run(params: DesignParams, thresholds: Thresholds, data_source: Iterable) -> tuple[Decision, list]:
    """Drive one trial to termination, pulling observations as needed.

    ``data_source`` yields one observation at a time (a pair for the binomial
    family).  Returns the decision and the audit trail.
    """
    state = TrialState(params, thresholds)
    it = iter(data_source)
    while True:
        target = state.current_target
        need = target - (0 if state.cum is None else state.cum.n)
        batch = []
        for _ in range(need):
            try:
                batch.append(next(it))
            except StopIteration:
                have = (0 if state.cum is None else state.cum.n) + len(batch)
                raise DataExhaustedError(f"data ran out at n={have}; analysis needs n={target}") from None
        state.cum = _accumulate(params.family, state.cum, batch)
        out = analyze(state)
        if isinstance(out, Decision):
            return out, state.trail


def trail_to_text(trail: list) -> str:
    return "".join(rec.to_line() + "\n" for rec in trail)


def trail_from_text(text: str) -> list:
    return [AuditRecord.from_line(line) for line in text.splitlines() if line.strip()]


# -- vectorized evaluation -----------------------------------------------------


@dataclass
class PathStatistics:
    """Per-path statistics at the (threshold-independent) analysis points."""

    n2: np.ndarray
    u1hat: np.ndarray
    R1: np.ndarray
    F1: np.ndarray
    u2hat: np.ndarray
    R2: np.ndarray
    F2: np.ndarray
    uMhat: np.ndarray
    RM: np.ndarray


def path_statistics(params: DesignParams, cum: np.ndarray, n2: np.ndarray | None = None) -> PathStatistics:
    """Compute GLR statistics at m, n2 and M for an array of cumulative stats.

    ``cum`` has shape ``(reps, >= M, d)``.  ``n2`` overrides the adaptive
    second-stage rule (used for fixed group sizes).
    """
    fam, m, M = params.family, params.m, params.M
    rows = np.arange(cum.shape[0])
    c1 = cum[:, m - 1]
    u1hat, i0 = fam.glr_batch(m, c1, params.u0)
    _, i1 = fam.glr_batch(m, c1, params.u1)
    if n2 is None:
        n2 = second_stage_sizes(params, i0, i1)
    else:
        n2 = np.broadcast_to(np.asarray(n2, dtype=np.int64), rows.shape)
    c2 = cum[rows, n2 - 1]
    u2hat, j0 = fam.glr_batch(n2, c2, params.u0)
    _, j1 = fam.glr_batch(n2, c2, params.u1)
    cM = cum[:, M - 1]
    uMhat, k0 = fam.glr_batch(M, cM, params.u0)
    return PathStatistics(n2, u1hat, m * i0, m * i1, u2hat, n2 * j0, n2 * j1, uMhat, M * k0)


@dataclass
class PathOutcomes:
    reject: np.ndarray
    total_n: np.ndarray
    n_analyses: np.ndarray
    early_reject: np.ndarray
    early_accept: np.ndarray
    final_reject: np.ndarray


def path_outcomes(params: DesignParams, thr: Thresholds, st: PathStatistics) -> PathOutcomes:
    m, M = params.m, params.M
    b, bt, c = thr.b, thr.b_tilde, thr.c
    early = np.bool_(m < M)
    rej1 = early & (st.u1hat > params.u0) & (st.R1 >= b)
    fut1 = early & ~rej1 & (st.u1hat < params.u1) & (st.F1 >= bt)
    cont1 = ~rej1 & ~fut1 & early
    mid = (st.n2 > m) & (st.n2 < M)
    rej2 = cont1 & mid & (st.u2hat > params.u0) & (st.R2 >= b)
    fut2 = cont1 & mid & ~rej2 & (st.u2hat < params.u1) & (st.F2 >= bt)
    final = (cont1 & ~rej2 & ~fut2) | ~early
    frej = final & (st.uMhat > params.u0) & (st.RM >= c)
    total_n = np.where(rej1 | fut1, m, np.where(rej2 | fut2, st.n2, M))
    n_analyses = np.where(rej1 | fut1 | ~early, 1, np.where(mid & cont1 & final, 3, 2))
    return PathOutcomes(
        reject=rej1 | rej2 | frej,
        total_n=total_n.astype(np.int64),
        n_analyses=n_analyses.astype(np.int64),
        early_reject=rej1 | rej2,
        early_accept=fut1 | fut2,
        final_reject=frej,
    )


def evaluate_paths(params: DesignParams, thr: Thresholds, cum: np.ndarray, n2=None) -> PathOutcomes:
    return path_outcomes(params, thr, path_statistics(params, cum, n2))


def critical_values(params: DesignParams, st: PathStatistics, b_tilde=None, b=None):
    """Per-path critical thresholds for the three spending equations.

    For fixed paths each spend is a step function of its threshold; the event
    in question occurs exactly when the threshold is <= the returned value
    (``-inf`` marks paths that can never contribute).
    """
    m, M = params.m, params.M
    neg = -np.inf
    mid = (st.n2 > m) & (st.n2 < M)
    if b_tilde is None:
        # futility-only process under the alternative
        g1 = np.where(st.u1hat < params.u1, st.F1, neg)
        g2 = np.where(mid & (st.u2hat < params.u1), st.F2, neg)
        return np.maximum(g1, g2) if m < M else np.full(st.F1.shape, neg)
    r1 = np.where(st.u1hat > params.u0, st.R1, neg)
    fut1 = (st.u1hat < params.u1) & (st.F1 >= b_tilde)
    if b is None:
        r2 = np.where(mid & (st.u2hat > params.u0), st.R2, neg)
        # reject-first at stage 1; stage 2 only reached when stage 1 neither rejects nor stops
        out = np.where(fut1, r1, np.maximum(r1, r2))
        return out if m < M else np.full(st.R1.shape, neg)
    cont1 = ~((st.u1hat > params.u0) & (st.R1 >= b)) & ~fut1
    rej2 = mid & (st.u2hat > params.u0) & (st.R2 >= b)
    fut2 = mid & ~rej2 & (st.u2hat < params.u1) & (st.F2 >= b_tilde)
    final = (cont1 & ~rej2 & ~fut2) if m < M else np.ones(st.R1.shape, bool)
    return np.where(final & (st.uMhat > params.u0), st.RM, neg)
