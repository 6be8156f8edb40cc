"""Comparator tests evaluated against the adaptive test.

Every comparator is an estimator with the same contract as
:class:`adaptrial.estimator.AdaptiveTest`: ``fit`` fixes its constants,
``evaluate`` applies the stopping rules to an array of cumulative statistics
and ``run`` drives a single trial from an observation stream.

Tests built on a z-statistic accept the known-variance normal family or the
two-sample binomial family; for the latter the z-statistic is the arcsine
transform oriented so that large values favour ``p2 > p1``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import optimize
from scipy.special import ndtr
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import validation
from .design import DesignParams, z_upper
from .engine import (
    DataExhaustedError,
    Decision,
    PathOutcomes,
    Thresholds,
    Trigger,
    Verdict,
    evaluate_paths,
)
from .exp_family import NormalKnownVar, TwoSampleBinomial, arcsine_stat_batch, cumulative

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


# -- shared z-statistic machinery ---------------------------------------------


def _at(cum: np.ndarray, n) -> np.ndarray:
    """Cumulative statistic after ``n`` observations (``n`` may vary per path)."""
    n = np.asarray(n)
    if n.ndim == 0:
        if int(n) == 0:
            return np.zeros(cum.shape[:1] + cum.shape[2:])
        return cum[:, int(n) - 1]
    rows = np.arange(cum.shape[0])
    out = cum[rows, np.maximum(n, 1) - 1]
    return np.where((n > 0)[:, None], out, 0.0)


def z_statistic(family, u0: float, cum: np.ndarray, n_hi, n_lo=0) -> np.ndarray:
    """Standardized statistic of the observations ``n_lo + 1 .. n_hi``."""
    n = np.asarray(n_hi) - np.asarray(n_lo)
    seg = _at(cum, n_hi) - _at(cum, n_lo)
    with np.errstate(invalid="ignore", divide="ignore"):
        if isinstance(family, NormalKnownVar):
            return (seg[..., 0] - n * u0) / (family.sigma * np.sqrt(n))
        if isinstance(family, TwoSampleBinomial):
            return arcsine_stat_batch(n, seg)
    raise TypeError(f"z-statistic tests support the normal and binomial families, not {family.name!r}")


def _z_family(family, u0):
    fam = validation.check_family(family)
    if isinstance(fam, TwoSampleBinomial) and u0 != 0:
        raise ValueError("the arcsine statistic tests u0 = 0 only")
    if not isinstance(fam, (NormalKnownVar, TwoSampleBinomial)):
        raise TypeError(f"z-statistic tests support the normal and binomial families, not {fam.name!r}")
    return fam


def _composite(a: float, b: float, width: float):
    k = max(1, math.ceil((b - a) / width))
    edges = np.linspace(a, b, k + 1)
    half = (edges[1:] - edges[:-1]) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    return (mid[:, None] + half[:, None] * _GL_X).ravel(), (half[:, None] * _GL_W).ravel()


def _npdf(x, sd):
    return np.exp(-0.5 * (x / sd) ** 2) / (sd * math.sqrt(2 * math.pi))


def boundary_crossing(looks, lower, upper, drift: float = 0.0, resolution: int = 8):
    """Exit probabilities of a group sequential z-test.

    ``looks`` are cumulative sample sizes, ``lower``/``upper`` z-scale
    boundaries (``-inf``/``inf`` allowed) and ``drift`` the standardized
    per-observation mean.  The test stops at look k for rejection when
    Z_k >= upper[k] and for acceptance when Z_k <= lower[k].  Returns the
    arrays (pr reject at k, pr accept at k), computed by recursive
    integration of the sub-density of the score on the continuation region.
    """
    looks = np.asarray(looks, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    K = len(looks)
    up, lo = np.zeros(K), np.zeros(K)
    sd = math.sqrt(looks[0])
    mu = drift * looks[0]
    up[0] = ndtr((mu - upper[0] * sd) / sd)
    lo[0] = ndtr((lower[0] * sd - mu) / sd)
    if K == 1:
        return up, lo
    nodes, w = _composite(max(lower[0] * sd, mu - 10 * sd), min(upper[0] * sd, mu + 10 * sd), sd / resolution)
    dens = w * _npdf(nodes - mu, sd)
    for k in range(1, K):
        step = looks[k] - looks[k - 1]
        sd = math.sqrt(step)
        shift = drift * step
        hi = upper[k] * math.sqrt(looks[k])
        low = lower[k] * math.sqrt(looks[k])
        up[k] = dens @ ndtr((nodes + shift - hi) / sd)
        lo[k] = dens @ ndtr((low - nodes - shift) / sd)
        if k < K - 1:
            a = max(low, nodes.min() + shift - 10 * sd)
            b = min(hi, nodes.max() + shift + 10 * sd)
            new, w = _composite(a, b, sd / resolution)
            dens = w * (dens @ _npdf(new[None, :] - nodes[:, None] - shift, sd))
            nodes = new
    return up, lo


# -- base class ---------------------------------------------------------------


class SequentialTest(BaseEstimator):
    """Common plumbing: batch evaluation, prediction and single-trial runs."""

    def _family(self):
        return validation.check_family(self.family, getattr(self, "sigma", 1.0))

    @property
    def family_(self):
        return self._family()

    def evaluate(self, cum: np.ndarray) -> PathOutcomes:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        """1 where the trial rejects H0, else 0.  Rows of ``X`` are trials."""
        check_is_fitted(self)
        out = self.evaluate_observations(X)
        return out.reject.astype(int)

    def evaluate_observations(self, X) -> PathOutcomes:
        check_is_fitted(self)
        X = validation.check_observations(X, self.family_, min_n=1)
        have = X.shape[1]
        cum = cumulative(self.family_, X)
        if have < self.max_n_:
            pad = np.full((cum.shape[0], self.max_n_ - have) + cum.shape[2:], np.nan)
            cum = np.concatenate([cum, pad], axis=1)
        out = self.evaluate(cum)
        short = out.total_n > have
        if short.any():
            i = int(np.argmax(short))
            raise DataExhaustedError(f"trial {i} needs n={out.total_n[i]} observations, got {have}")
        return out

    def run(self, data_source) -> Decision:
        """Run one trial, pulling at most ``max_n_`` observations."""
        check_is_fitted(self)
        xs = list(itertools.islice(iter(data_source), self.max_n_))
        if not xs:
            raise DataExhaustedError("data source is empty")
        out = self.evaluate_observations(np.asarray(xs, dtype=float)[None])
        return decision_from_outcomes(out, 0)


def decision_from_outcomes(out: PathOutcomes, i: int) -> Decision:
    if out.early_reject[i]:
        verdict, trigger = Verdict.REJECT, Trigger.EARLY_REJECT
    elif out.early_accept[i]:
        verdict, trigger = Verdict.ACCEPT, Trigger.EARLY_ACCEPT
    elif out.final_reject[i]:
        verdict, trigger = Verdict.REJECT, Trigger.FINAL_REJECT
    else:
        verdict, trigger = Verdict.ACCEPT, Trigger.FINAL_ACCEPT
    stages = int(out.n_analyses[i])
    return Decision(verdict, stages, int(out.total_n[i]), trigger, stages)


def _outcomes(reject_at, accept_at, looks_n) -> PathOutcomes:
    """Assemble outcomes from per-look stop indicators (first stop wins)."""
    K = len(reject_at)
    reps = reject_at[0].shape[0]
    stopped = np.zeros(reps, bool)
    reject = np.zeros(reps, bool)
    early_rej = np.zeros(reps, bool)
    early_acc = np.zeros(reps, bool)
    total = np.zeros(reps, np.int64)
    stages = np.zeros(reps, np.int64)
    for k in range(K):
        last = k == K - 1
        r = ~stopped & reject_at[k]
        a = ~stopped & ~r & (accept_at[k] | last)
        now = r | a
        reject |= r
        if not last:
            early_rej |= r
            early_acc |= a
        total = np.where(now, np.broadcast_to(looks_n[k], (reps,)), total)
        stages = np.where(now, k + 1, stages)
        stopped |= now
    final_rej = reject & ~early_rej
    return PathOutcomes(reject, total, stages, early_rej, early_acc, final_rej)


# -- fixed sample size ------------------------------------------------------------


def fss_critical(n: int, alpha: float, sigma: float = 1.0) -> float:
    """Critical value for S_n - n u0 of the level-alpha one-sided z-test."""
    validation.check_probability(alpha, "alpha")
    return float(z_upper(alpha) * sigma * math.sqrt(n))


class FixedSampleTest(SequentialTest):
    """Level-alpha z-test after exactly ``n`` observations."""

    def __init__(self, n=120, alpha=0.025, family="normal", sigma=1.0, u0=0.0):
        self.n = n
        self.alpha = alpha
        self.family = family
        self.sigma = sigma
        self.u0 = u0

    def fit(self, X=None, y=None):
        _z_family(self._family(), self.u0)
        self.n_ = validation.check_positive_int(self.n, "n")
        self.critical_ = float(z_upper(validation.check_probability(self.alpha, "alpha")))
        self.max_n_ = self.n_
        return self

    def evaluate(self, cum):
        check_is_fitted(self)
        z = z_statistic(self.family_, self.u0, cum, self.n_)
        return _outcomes([z >= self.critical_], [np.zeros_like(z, bool)], [self.n_])


# -- O'Brien-Fleming ------------------------------------------------------------


class OBrienFlemingTest(SequentialTest):
    """One-sided O'Brien-Fleming test with a futility rule.

    ``futility="power_family"`` uses the binding boundary
    ``theta1 sqrt(n_k) - C2 (n_k/N)^(delta - 1/2)`` with (C1, C2) solved so
    that the type I error is ``alpha`` and the power at ``theta1`` is
    ``1 - alpha_tilde``.  ``futility="curtailment"`` keeps the unmodified
    O'Brien-Fleming rejection constant and stops for futility when the
    conditional power at ``theta1`` falls to ``1 - gamma`` or below.
    """

    def __init__(
        self,
        group_sizes=(40, 40, 40),
        alpha=0.025,
        alpha_tilde=0.1,
        theta1=0.3,
        futility="power_family",
        delta=1.0,
        gamma=0.9,
        family="normal",
        sigma=1.0,
        u0=0.0,
    ):
        self.group_sizes = group_sizes
        self.alpha = alpha
        self.alpha_tilde = alpha_tilde
        self.theta1 = theta1
        self.futility = futility
        self.delta = delta
        self.gamma = gamma
        self.family = family
        self.sigma = sigma
        self.u0 = u0

    def _boundaries(self, C1, C2=None):
        t = self.looks_ / self.looks_[-1]
        upper = C1 / np.sqrt(t)
        if self.futility == "curtailment":
            N = self.looks_[-1]
            rest = N - self.looks_
            q = -z_upper(1 - self.gamma)
            lower = (C1 * math.sqrt(N) - self.drift_ * rest + q * np.sqrt(rest)) / np.sqrt(self.looks_)
        else:
            lower = self.drift_ * np.sqrt(self.looks_) - C2 * t ** (self.delta - 0.5)
        lower = np.minimum(lower, upper)
        lower[-1] = upper[-1]
        return lower, upper

    def fit(self, X=None, y=None):
        fam = self._family()
        if not isinstance(fam, NormalKnownVar):
            raise TypeError("the O'Brien-Fleming comparator is implemented for the known-variance normal family")
        sizes = [validation.check_positive_int(g, "group_sizes") for g in self.group_sizes]
        if len(sizes) < 2:
            raise ValueError("need at least two groups")
        if self.futility not in ("power_family", "curtailment"):
            raise ValueError(f"futility must be 'power_family' or 'curtailment', got {self.futility!r}")
        alpha = validation.check_probability(self.alpha, "alpha")
        validation.check_probability(self.gamma, "gamma")
        self.looks_ = np.cumsum(sizes)
        self.max_n_ = int(self.looks_[-1])
        self.drift_ = (self.theta1 - self.u0) / fam.sigma
        K = len(sizes)
        none = np.full(K, -np.inf)
        t = self.looks_ / self.looks_[-1]

        def size(C1, lower=None):
            lo = none if lower is None else lower
            return boundary_crossing(self.looks_, lo, C1 / np.sqrt(t))[0].sum() - alpha

        C1 = optimize.brentq(size, 0.5, 10.0, xtol=1e-10)
        C2 = None
        if self.futility == "power_family":
            target = 1 - validation.check_probability(self.alpha_tilde, "alpha_tilde")

            def c1_for(C2):
                return optimize.brentq(lambda c: size(c, self._boundaries(c, C2)[0]), 0.5, 10.0, xtol=1e-10)

            def power_gap(C2):
                c = c1_for(C2)
                lower, upper = self._boundaries(c, C2)
                return boundary_crossing(self.looks_, lower, upper, self.drift_)[0].sum() - target

            hi = self.drift_ * math.sqrt(self.max_n_) + 10.0
            if power_gap(hi) < 0:
                raise ValueError(
                    f"power {target:g} at theta1={self.theta1} is out of reach with N={self.max_n_}"
                )
            C2 = optimize.brentq(power_gap, 0.0, hi, xtol=1e-8)
            C1 = c1_for(C2)
        self.C1_, self.C2_ = float(C1), None if C2 is None else float(C2)
        self.lower_, self.upper_ = self._boundaries(self.C1_, self.C2_)
        return self

    def exit_probabilities(self, theta: float):
        check_is_fitted(self)
        drift = (theta - self.u0) / self.family_.sigma
        return boundary_crossing(self.looks_, self.lower_, self.upper_, drift)

    def evaluate(self, cum):
        check_is_fitted(self)
        fam = self.family_
        z = [z_statistic(fam, self.u0, cum, n) for n in self.looks_]
        rej = [zk >= b for zk, b in zip(z, self.upper_)]
        acc = [zk <= a for zk, a in zip(z, self.lower_)]
        return _outcomes(rej, acc, self.looks_)


# -- two-stage conditional power tests -------------------------------------------


class ProschanHunsbergerTest(SequentialTest):
    """Two-stage test with the circular conditional error function.

    Stage 1 accepts when z1 < h and rejects when z1 > k.  Otherwise the
    second stage adds ``n2'`` observations, chosen so that the conditional
    power at the observed effect is ``cond_power``, and rejects when the
    second-stage z-statistic reaches ``sqrt(k^2 - z1^2)``.  ``h`` may be
    given directly or as ``p_star`` (h = z_{p*}).
    """

    def __init__(self, m=40, h=None, p_star=0.0436, k=2.05, cond_power=0.9, family="normal", sigma=1.0, u0=0.0):
        self.m = m
        self.h = h
        self.p_star = p_star
        self.k = k
        self.cond_power = cond_power
        self.family = family
        self.sigma = sigma
        self.u0 = u0

    def fit(self, X=None, y=None):
        _z_family(self._family(), self.u0)
        self.m_ = validation.check_positive_int(self.m, "m")
        if self.h is not None:
            self.h_ = float(self.h)
        else:
            self.h_ = float(z_upper(validation.check_probability(self.p_star, "p_star")))
        if not 0 < self.h_ < self.k:
            raise ValueError(f"need 0 < h < k, got h={self.h_}, k={self.k}")
        self.z_power_ = float(z_upper(1 - validation.check_probability(self.cond_power, "cond_power")))
        self.max_n_ = self.m_ + int(self.second_stage_size(self.h_))
        return self

    def conditional_critical(self, z1):
        return np.sqrt(np.maximum(self.k**2 - np.asarray(z1, dtype=float) ** 2, 0.0))

    def second_stage_size(self, z1):
        """Additional observations after stage 1 (z1 in [h, k])."""
        z1 = np.clip(np.asarray(z1, dtype=float), self.h_, self.k)
        need = self.m_ * (self.conditional_critical(z1) + self.z_power_) ** 2 / z1**2
        return np.maximum(np.ceil(need - 1e-9), 1).astype(np.int64)

    def type_one_error(self) -> float:
        """Exact level of the normal-theory test."""
        check_is_fitted(self)
        x, w = _composite(self.h_, self.k, 0.05)
        inner = ndtr(-self.conditional_critical(x)) * _npdf(x, 1.0)
        return float(ndtr(-self.k) + w @ inner)

    def evaluate(self, cum):
        check_is_fitted(self)
        fam = self.family_
        z1 = z_statistic(fam, self.u0, cum, self.m_)
        n2 = self.m_ + self.second_stage_size(z1)
        z2 = z_statistic(fam, self.u0, cum, n2, self.m_)
        rej2 = z2 >= self.conditional_critical(z1)
        return _outcomes([z1 > self.k, rej2], [z1 < self.h_, ~rej2], [self.m_, n2])


class LiTest(SequentialTest):
    """Two-stage conditional power test with a fixed final critical value.

    Stage 1 accepts when z1 < h and rejects when z1 > k.  Otherwise the total
    size N is the smallest n in (m, M] at which the conditional power of
    ``S_N / sqrt(N) >= c`` at the observed effect reaches ``cond_power``
    (``M`` if none).  When ``c`` is None it is solved so that the
    normal-theory type I error equals ``alpha``.
    """

    def __init__(self, m=40, h=1.63, k=2.83, c=None, M=120, alpha=0.025, cond_power=0.9, family="normal", sigma=1.0, u0=0.0):
        self.m = m
        self.h = h
        self.k = k
        self.c = c
        self.M = M
        self.alpha = alpha
        self.cond_power = cond_power
        self.family = family
        self.sigma = sigma
        self.u0 = u0

    def total_size(self, z1, c=None):
        c = self.c_ if c is None else c
        z1 = np.atleast_1d(np.asarray(z1, dtype=float))
        m, M = self.m_, self.max_n_
        N = np.arange(m + 1, M + 1, dtype=float)
        mu = z1[:, None] / math.sqrt(m)
        ok = mu * N - c * np.sqrt(N) >= self.z_power_ * np.sqrt(N - m)
        first = np.argmax(ok, axis=1)
        return np.where(ok.any(axis=1), m + 1 + first, M).astype(np.int64)

    def _type_one_error(self, c):
        x, w = _composite(self.h, self.k, 0.01)
        N = self.total_size(x, c)
        m = self.m_
        cont = ndtr((x * math.sqrt(m) - c * np.sqrt(N)) / np.sqrt(N - m))
        return float(ndtr(-self.k) + w @ (cont * _npdf(x, 1.0)))

    def fit(self, X=None, y=None):
        _z_family(self._family(), self.u0)
        self.m_ = validation.check_positive_int(self.m, "m")
        self.max_n_ = validation.check_positive_int(self.M, "M")
        if self.max_n_ <= self.m_:
            raise ValueError(f"M={self.M} must exceed m={self.m}")
        if not 0 < self.h < self.k:
            raise ValueError(f"need 0 < h < k, got h={self.h}, k={self.k}")
        self.z_power_ = float(z_upper(1 - validation.check_probability(self.cond_power, "cond_power")))
        if self.c is None:
            alpha = validation.check_probability(self.alpha, "alpha")
            self.c_ = float(optimize.brentq(lambda c: self._type_one_error(c) - alpha, 0.1, 6.0, xtol=1e-8))
        else:
            self.c_ = float(self.c)
        return self

    def type_one_error(self) -> float:
        check_is_fitted(self)
        return self._type_one_error(self.c_)

    def evaluate(self, cum):
        check_is_fitted(self)
        fam = self.family_
        z1 = z_statistic(fam, self.u0, cum, self.m_)
        N = self.total_size(z1)
        zN = z_statistic(fam, self.u0, cum, N)
        rej2 = zN >= self.c_
        return _outcomes([z1 > self.k, rej2], [z1 < self.h, ~rej2], [self.m_, N])


class ShenFisherTest(SequentialTest):
    """Two-stage weighted z-test with first-stage futility stopping.

    Stops for futility when ``S_m/m <= theta1 - z_{alpha0} sigma/sqrt(m)``.
    Otherwise ``n2'`` more observations are taken for conditional power
    ``cond_power`` at the observed effect (total capped at ``M``), and H0 is
    rejected when ``w1 z1 + w2 z2 >= z_alpha``.  The weights are fixed in
    advance: ``w1^2 = stage1_weight`` and all remaining variance goes to the
    second stage.
    """

    def __init__(
        self,
        m=40,
        alpha=0.025,
        alpha0=0.425,
        theta1=0.3,
        M=120,
        cond_power=0.9,
        stage1_weight=0.5,
        family="normal",
        sigma=1.0,
        u0=0.0,
    ):
        self.m = m
        self.alpha = alpha
        self.alpha0 = alpha0
        self.theta1 = theta1
        self.M = M
        self.cond_power = cond_power
        self.stage1_weight = stage1_weight
        self.family = family
        self.sigma = sigma
        self.u0 = u0

    def fit(self, X=None, y=None):
        fam = self._family()
        if not isinstance(fam, NormalKnownVar):
            raise TypeError("the Shen-Fisher comparator is implemented for the known-variance normal family")
        self.m_ = validation.check_positive_int(self.m, "m")
        self.max_n_ = validation.check_positive_int(self.M, "M")
        if self.max_n_ <= self.m_:
            raise ValueError(f"M={self.M} must exceed m={self.m}")
        self.z_alpha_ = float(z_upper(validation.check_probability(self.alpha, "alpha")))
        self.z_power_ = float(z_upper(1 - validation.check_probability(self.cond_power, "cond_power")))
        alpha0 = validation.check_probability(self.alpha0, "alpha0")
        self.futility_z_ = float((self.theta1 - self.u0) * math.sqrt(self.m_) / fam.sigma - z_upper(alpha0))
        self.w1_ = math.sqrt(validation.check_probability(self.stage1_weight, "stage1_weight"))
        self.w2_ = math.sqrt(1 - self.w1_**2)
        return self

    def second_stage_size(self, z1):
        z1 = np.asarray(z1, dtype=float)
        mu = z1 / math.sqrt(self.m_)
        lead = (self.z_alpha_ - self.w1_ * z1) / self.w2_ + self.z_power_
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(mu > 0, (np.maximum(lead, 0) / np.where(mu > 0, mu, 1)) ** 2, np.inf)
        room = self.max_n_ - self.m_
        return np.clip(np.ceil(np.minimum(need, room) - 1e-9), 1, room).astype(np.int64)

    def type_one_error(self) -> float:
        """Exact level; under H0 the second-stage z is N(0, 1) whatever n2'."""
        check_is_fitted(self)
        x, w = _composite(self.futility_z_, max(self.futility_z_, 0.0) + 10.0, 0.05)
        inner = ndtr((self.w1_ * x - self.z_alpha_) / self.w2_) * _npdf(x, 1.0)
        return float(w @ inner)

    def evaluate(self, cum):
        check_is_fitted(self)
        fam = self.family_
        z1 = z_statistic(fam, self.u0, cum, self.m_)
        n2 = self.m_ + self.second_stage_size(z1)
        z2 = z_statistic(fam, self.u0, cum, n2, self.m_)
        rej2 = self.w1_ * z1 + self.w2_ * z2 >= self.z_alpha_
        never = np.zeros_like(rej2)
        return _outcomes([never, rej2], [z1 <= self.futility_z_, ~rej2], [self.m_, n2])


# -- fixed-group GLR test -----------------------------------------------------------


class LaiShihTest(SequentialTest):
    """The adaptive test's stopping rules at prespecified group sizes.

    ``group_sizes`` has three entries (m, n2 - m, M - n2), or a single entry
    M, in which case only the final rule with ``c`` applies and
    ``thresholds`` must be given.  Thresholds are otherwise calibrated by
    Monte Carlo unless given explicitly.
    """

    def __init__(
        self,
        group_sizes=(34, 43, 43),
        family="normal_unknown_var",
        sigma=1.0,
        u0=0.0,
        u1=0.28016,
        alpha=0.025,
        alpha_tilde=0.2,
        eps=0.5,
        eps_tilde=0.75,
        nuisance=None,
        thresholds=None,
        reps=100_000,
        seed=0,
        threads=1,
    ):
        self.group_sizes = group_sizes
        self.family = family
        self.sigma = sigma
        self.u0 = u0
        self.u1 = u1
        self.alpha = alpha
        self.alpha_tilde = alpha_tilde
        self.eps = eps
        self.eps_tilde = eps_tilde
        self.nuisance = nuisance
        self.thresholds = thresholds
        self.reps = reps
        self.seed = seed
        self.threads = threads

    def fit(self, X=None, y=None):
        from .calibrate import calibrate_monte_carlo

        sizes = [validation.check_positive_int(g, "group_sizes") for g in self.group_sizes]
        if len(sizes) == 1:
            if self.thresholds is None:
                raise ValueError("a single group needs explicit thresholds")
            m = n2 = M = sizes[0]
        elif len(sizes) == 3:
            m, n2, M = np.cumsum(sizes)
        else:
            raise ValueError(f"group_sizes must have one or three entries, got {len(sizes)}")
        self.design_ = DesignParams(
            family=self._family(),
            u0=self.u0,
            u1=self.u1,
            alpha=self.alpha,
            alpha_tilde=self.alpha_tilde,
            m=int(m),
            M=int(M),
            eps=self.eps,
            eps_tilde=self.eps_tilde,
            rho=0.0,
        )
        self.n2_ = int(n2)
        self.max_n_ = int(M)
        if self.thresholds is not None:
            self.thresholds_ = validation.check_thresholds(self.thresholds)
            self.calibration_ = None
        else:
            report = calibrate_monte_carlo(
                self.design_, self.reps, self.seed, nuisance=self.nuisance, n2=self.n2_, threads=self.threads
            )
            self.thresholds_, self.calibration_ = report.thresholds, report
        return self

    def evaluate(self, cum):
        check_is_fitted(self)
        return evaluate_paths(self.design_, self.thresholds_, cum, n2=self.n2_)


COMPARATORS = {
    "fss": FixedSampleTest,
    "obf": OBrienFlemingTest,
    "ph": ProschanHunsbergerTest,
    "li": LiTest,
    "sf": ShenFisherTest,
    "ls": LaiShihTest,
}

__all__ = [
    "boundary_crossing",
    "fss_critical",
    "z_statistic",
    "decision_from_outcomes",
    "SequentialTest",
    "FixedSampleTest",
    "OBrienFlemingTest",
    "ProschanHunsbergerTest",
    "LiTest",
    "ShenFisherTest",
    "LaiShihTest",
    "COMPARATORS",
    "Thresholds",
]
