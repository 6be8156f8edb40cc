"""Threshold calibration for the three-stage test.

The thresholds are fixed one at a time: b_tilde from the futility spend under
the alternative, then b from the early-rejection spend under the null, then c
from the final-rejection spend.  In the known-variance normal case the spends
are computed by recursive numerical integration (``NormalQuadrature``);
otherwise, or on request, by Monte Carlo on a fixed common-random-number
ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import optimize
from scipy.special import ndtr

from . import streams
from .design import DesignParams, second_stage_sizes
from .engine import PathStatistics, Thresholds, critical_values, path_statistics
from .exp_family import NormalKnownVar

BRACKET = (1e-6, 50.0)
_SQRT2PI = math.sqrt(2 * math.pi)


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CalibrationReport:
    thresholds: Thresholds
    achieved: tuple
    targets: tuple
    method: str
    reps_or_nodes: int
    seed: int | None = None

    def summary(self) -> str:
        t = self.thresholds
        lines = [
            f"method     {self.method} ({'reps' if self.method == 'monte_carlo' else 'nodes'}={self.reps_or_nodes}"
            + (f", seed={self.seed})" if self.seed is not None else ")"),
            f"b_tilde    {t.b_tilde:.4f}",
            f"b          {t.b:.4f}",
            f"c          {t.c:.4f}",
        ]
        for name, a, tg in zip(("futility", "early_reject", "final_reject"), self.achieved, self.targets):
            lines.append(f"{name:<12} achieved {a:.6f}  target {tg:.6f}")
        return "\n".join(lines)


def spend_targets(params: DesignParams) -> tuple[float, float, float]:
    return (
        params.eps_tilde * params.alpha_tilde,
        params.eps * params.alpha,
        (1 - params.eps) * params.alpha,
    )


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT2PI


def _solve(f, lo, hi, what):
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise CalibrationError(f"no sign change for {what} on ({lo:g}, {hi:g}): f={flo:.3g}, {fhi:.3g}")
    return optimize.brentq(f, lo, hi, xtol=1e-10, rtol=1e-12, maxiter=200)


class NormalQuadrature:
    """Spend probabilities of the three-stage test for N(theta, sigma^2) data.

    Works on the standardized scale x = (S_m/m - u0)/sigma, where the
    alternative sits at d1 = (u1 - u0)/sigma.  The outer integral over x is
    split wherever the second-stage size k(x) changes, so each panel carries a
    constant k and a smooth integrand; panels are then subdivided to a width of
    at most half a standard deviation of x and integrated by Gauss-Legendre.
    """

    def __init__(self, params: DesignParams, nodes: int = 16, inner_panels: int = 8):
        if not isinstance(params.family, NormalKnownVar):
            raise TypeError("recursive numerical integration needs the known-variance normal family")
        if params.m >= params.M:
            raise ValueError("quadrature needs m < M")
        self.params = params
        self.nodes = int(nodes)
        self.inner_panels = int(inner_panels)
        self.m, self.M = params.m, params.M
        self.d1 = (params.u1 - params.u0) / params.family.sigma
        self._t, self._w = leggauss(self.nodes)
        self._breaks = self._k_breakpoints()

    def drift(self, theta) -> float:
        return (theta - self.params.u0) / self.params.family.sigma

    def k(self, x):
        x = np.asarray(x, dtype=float)
        return second_stage_sizes(self.params, x * x / 2, (x - self.d1) ** 2 / 2)

    def _k_breakpoints(self) -> np.ndarray:
        p = self.params
        j = np.arange(max(p.m - 1, 1), p.M + 2, dtype=float)
        r0 = np.sqrt(2 * (1 + p.rho) * p.log_alpha / j)
        r1 = np.sqrt(2 * (1 + p.rho) * p.log_alpha_tilde / j)
        pts = np.concatenate([r0, -r0, self.d1 + r1, self.d1 - r1, [0.0, self.d1]])
        return np.unique(pts)

    def outer(self, lo: float, hi: float, drift: float):
        """Nodes, density-weighted weights and k-values on (lo, hi)."""
        sd = 1 / math.sqrt(self.m)
        lo, hi = max(lo, drift - 10 * sd), min(hi, drift + 10 * sd)
        if not hi > lo:
            empty = np.empty(0)
            return empty, empty, empty.astype(np.int64)
        inner = self._breaks[(self._breaks > lo) & (self._breaks < hi)]
        edges = np.concatenate([[lo], inner, [hi]])
        pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            count = max(1, math.ceil((b - a) / (0.5 * sd)))
            pieces.append(np.linspace(a, b, count + 1))
        left = np.concatenate([p[:-1] for p in pieces])
        right = np.concatenate([p[1:] for p in pieces])
        half, centre = (right - left) / 2, (right + left) / 2
        kval = np.repeat(self.k(centre), self.nodes)
        x = (centre[:, None] + half[:, None] * self._t).ravel()
        w = (half[:, None] * self._w).ravel()
        dens = math.sqrt(self.m) * _phi(math.sqrt(self.m) * (x - drift))
        return x, w * dens, kval

    # -- cut points on the standardized mean scale ---------------------------
    def futility_cut(self, b_tilde: float, n) -> np.ndarray:
        """Sum S_n at or below which the futility rule fires (stat >= b_tilde)."""
        n = np.asarray(n, dtype=float)
        return n * self.d1 - np.sqrt(2 * b_tilde * n)

    @staticmethod
    def reject_cut(b: float, n) -> np.ndarray:
        return np.sqrt(2 * b * np.asarray(n, dtype=float))

    # -- spends ---------------------------------------------------------------
    def futility_spend(self, b_tilde: float, drift: float | None = None) -> float:
        """P(futility at stage 1 or 2) in the process that stops only for futility."""
        drift = self.d1 if drift is None else drift
        m, M = self.m, self.M
        f = self.futility_cut(b_tilde, m) / m
        first = float(ndtr(math.sqrt(m) * (f - drift)))
        x, w, k = self.outer(f, math.inf, drift)
        mid = (k > m) & (k < M)
        x, w, k = x[mid], w[mid], k[mid]
        p = ndtr((self.futility_cut(b_tilde, k) - m * x - drift * (k - m)) / np.sqrt(k - m))
        return first + float(w @ p)

    def early_reject_spend(self, b_tilde: float, b: float, drift: float = 0.0) -> float:
        if not b > b_tilde:
            raise ValueError(f"b={b} must exceed b_tilde={b_tilde}")
        m, M = self.m, self.M
        r = float(self.reject_cut(b, m)) / m
        first = float(ndtr(-math.sqrt(m) * (r - drift)))
        f = self.futility_cut(b_tilde, m) / m
        x, w, k = self.outer(f, r, drift)
        mid = (k > m) & (k < M)
        x, w, k = x[mid], w[mid], k[mid]
        p = ndtr((m * x + drift * (k - m) - self.reject_cut(b, k)) / np.sqrt(k - m))
        return first + float(w @ p)

    def _stage2_band(self, b_tilde, b, k):
        return self.futility_cut(b_tilde, k), self.reject_cut(b, k)

    def final_reject_spend(self, thr: Thresholds, drift: float = 0.0) -> float:
        m, M = self.m, self.M
        b_tilde, b, c = thr.b_tilde, thr.b, thr.c
        cM = math.sqrt(2 * c * M)
        r = float(self.reject_cut(b, m)) / m
        f = self.futility_cut(b_tilde, m) / m
        x, w, k = self.outer(f, r, drift)
        if x.size == 0:
            return 0.0
        direct = (k == m) | (k == M)
        total = float(w[direct] @ ndtr((m * x[direct] + drift * (M - m) - cM) / math.sqrt(M - m)))
        x, w, k = x[~direct], w[~direct], k[~direct]
        if x.size:
            p = self._inner(x, k, b_tilde, b, drift, lambda y, kk: ndtr((y + drift * (M - kk) - cM) / np.sqrt(M - kk)))
            total += float(w @ p)
        return total

    def _inner(self, x, k, b_tilde, b, drift, g):
        """Integrate g(S_k, k) over the stage-2 continuation band given S_m = m x."""
        m = self.m
        kf = k.astype(float)
        mean = m * x + drift * (kf - m)
        sd = np.sqrt(kf - m)
        lo, hi = self._stage2_band(b_tilde, b, kf)
        lo = np.maximum(lo, mean - 10 * sd)
        hi = np.minimum(hi, mean + 10 * sd)
        ok = hi > lo
        lo, hi = np.where(ok, lo, 0.0), np.where(ok, hi, 0.0)
        P = self.inner_panels
        edges = lo[:, None] + (hi - lo)[:, None] * np.linspace(0, 1, P + 1)[None, :]
        a, bb = edges[:, :-1], edges[:, 1:]
        half, centre = (bb - a) / 2, (bb + a) / 2
        y = centre[..., None] + half[..., None] * self._t
        wy = half[..., None] * self._w
        dens = _phi((y - mean[:, None, None]) / sd[:, None, None]) / sd[:, None, None]
        vals = g(y, kf[:, None, None]) * dens * wy
        return vals.sum(axis=(1, 2))

    def stage2_continue_prob(self, x, k, b_tilde, b, drift):
        return self._inner(x, k, b_tilde, b, drift, lambda y, kk: np.ones_like(y))

    # -- operating characteristics ------------------------------------------
    def rejection_probability(self, thr: Thresholds, theta: float) -> float:
        d = self.drift(theta)
        return self.early_reject_spend(thr.b_tilde, thr.b, d) + self.final_reject_spend(thr, d)

    def expected_sample_size(self, thr: Thresholds, theta: float) -> float:
        d = self.drift(theta)
        m, M = self.m, self.M
        r = float(self.reject_cut(thr.b, m)) / m
        f = self.futility_cut(thr.b_tilde, m) / m
        x, w, k = self.outer(f, r, d)
        p_cont1 = float(w.sum())
        en = m * (1 - p_cont1)
        direct = (k == m) | (k == M)
        en += M * float(w[direct].sum())
        x, w, k = x[~direct], w[~direct], k[~direct]
        if x.size:
            cont2 = self.stage2_continue_prob(x, k, thr.b_tilde, thr.b, d)
            en += float(w @ (k * (1 - cont2) + M * cont2))
        return en

    # -- calibration ----------------------------------------------------------
    def solve(self) -> tuple[Thresholds, tuple]:
        t7, t8, t9 = spend_targets(self.params)
        bt = _solve(lambda t: self.futility_spend(t) - t7, *BRACKET, "b_tilde")
        b = _solve(lambda t: self.early_reject_spend(bt, t) - t8, bt + 1e-9, BRACKET[1], "b")
        c = _solve(lambda t: self.final_reject_spend(Thresholds(b, bt, t)) - t9, *BRACKET, "c")
        thr = Thresholds(b, bt, c)
        return thr, self.spends(thr)

    def spends(self, thr: Thresholds) -> tuple[float, float, float]:
        return (
            self.futility_spend(thr.b_tilde),
            self.early_reject_spend(thr.b_tilde, thr.b),
            self.final_reject_spend(thr),
        )

    def n_outer_nodes(self) -> int:
        return len(self.outer(-math.inf, math.inf, 0.0)[0])


def _refined(params, nodes, tol, max_nodes, thr=None):
    """Double the per-panel node count until the three spends move by < tol."""
    quad = NormalQuadrature(params, nodes)
    while True:
        finer = NormalQuadrature(params, 2 * quad.nodes)
        probe = thr if thr is not None else quad.solve()[0]
        if max(abs(a - b) for a, b in zip(quad.spends(probe), finer.spends(probe))) < tol:
            return quad
        if finer.nodes > max_nodes:
            return finer
        quad = finer


def futility_spend(params: DesignParams, b_tilde: float, nodes: int = 16) -> float:
    return NormalQuadrature(params, nodes).futility_spend(b_tilde)


def early_reject_spend(params: DesignParams, b_tilde: float, b: float, nodes: int = 16) -> float:
    return NormalQuadrature(params, nodes).early_reject_spend(b_tilde, b)


def final_reject_spend(params: DesignParams, thresholds: Thresholds, nodes: int = 16) -> float:
    return NormalQuadrature(params, nodes).final_reject_spend(thresholds)


# -- Monte Carlo ----------------------------------------------------------------


def simulate_path_statistics(
    params: DesignParams,
    theta,
    reps: int,
    seed: int,
    key: tuple = (),
    n2=None,
    block: int = streams.DEFAULT_BLOCK,
    threads: int = 1,
) -> PathStatistics:
    """Path statistics for ``reps`` trials simulated at ``theta``."""

    def one(i, size):
        rng = streams.block_rng(seed, *key, i)
        cum = params.family.sample_cumulative(rng, theta, size, params.M)
        return path_statistics(params, cum, n2)

    parts = streams.map_blocks(one, reps, block, threads)
    return PathStatistics(*(np.concatenate([getattr(p, f) for p in parts]) for f in PathStatistics.__dataclass_fields__))


def _empirical_root(T: np.ndarray, target: float, what: str) -> float:
    """Threshold t with mean(T >= t) == target on a fixed sample.

    The spend is a non-increasing step function of t; the root is placed
    midway between the two order statistics that straddle the target count.
    """
    N = T.size
    j = int(round(target * N))
    desc = np.sort(T)[::-1]
    if j < 1 or j >= N or not np.isfinite(desc[j]) or not np.isfinite(desc[j - 1]):
        raise CalibrationError(f"Monte Carlo sample cannot resolve {what} at spend {target:g}")
    t = 0.5 * (desc[j - 1] + desc[j])
    if not BRACKET[0] < t < BRACKET[1]:
        raise CalibrationError(f"{what}={t:.4g} outside the bracket {BRACKET}")
    return float(t)


def calibrate_monte_carlo(
    params: DesignParams,
    reps: int,
    seed: int,
    nuisance=None,
    n2=None,
    block: int = streams.DEFAULT_BLOCK,
    threads: int = 1,
) -> CalibrationReport:
    """Solve the three spending equations on one seeded ensemble per hypothesis.

    Data are simulated at the parameter on ``u = u0`` (null) and on ``u = u1``
    (alternative) with the nuisance component fixed at ``nuisance``.
    """
    fam = params.family
    theta0 = fam.null_theta(params.u0, nuisance)
    theta1 = fam.null_theta(params.u1, nuisance)
    t7, t8, t9 = spend_targets(params)
    alt = simulate_path_statistics(params, theta1, reps, seed, (streams.CALIBRATION, 1), n2, block, threads)
    T7 = critical_values(params, alt)
    bt = _empirical_root(T7, t7, "b_tilde")
    null = simulate_path_statistics(params, theta0, reps, seed, (streams.CALIBRATION, 0), n2, block, threads)
    T8 = critical_values(params, null, b_tilde=bt)
    b = _empirical_root(T8, t8, "b")
    T9 = critical_values(params, null, b_tilde=bt, b=b)
    c = _empirical_root(T9, t9, "c")
    achieved = (float(np.mean(T7 >= bt)), float(np.mean(T8 >= b)), float(np.mean(T9 >= c)))
    return CalibrationReport(Thresholds(b, bt, c), achieved, (t7, t8, t9), "monte_carlo", int(reps), int(seed))


def monte_carlo_spends(
    params: DesignParams,
    thr: Thresholds,
    reps: int,
    seed: int,
    nuisance=None,
    n2=None,
    threads: int = 1,
) -> tuple[tuple, tuple]:
    """Estimate the three spends at given thresholds; returns (values, standard errors)."""
    fam = params.family
    alt = simulate_path_statistics(
        params, fam.null_theta(params.u1, nuisance), reps, seed, (streams.CALIBRATION, 3), n2, threads=threads
    )
    null = simulate_path_statistics(
        params, fam.null_theta(params.u0, nuisance), reps, seed, (streams.CALIBRATION, 2), n2, threads=threads
    )
    vals = (
        float(np.mean(critical_values(params, alt) >= thr.b_tilde)),
        float(np.mean(critical_values(params, null, b_tilde=thr.b_tilde) >= thr.b)),
        float(np.mean(critical_values(params, null, b_tilde=thr.b_tilde, b=thr.b) >= thr.c)),
    )
    ses = tuple(math.sqrt(max(v * (1 - v), 1e-300) / reps) for v in vals)
    return vals, ses


def calibrate(
    params: DesignParams,
    method: str = "quadrature",
    *,
    reps: int | None = None,
    seed: int | None = None,
    nodes: int = 16,
    tol: float = 1e-8,
    max_nodes: int = 256,
    nuisance=None,
    threads: int = 1,
) -> CalibrationReport:
    if method == "quadrature":
        quad = _refined(params, nodes, tol, max_nodes)
        thr, achieved = quad.solve()
        return CalibrationReport(thr, achieved, spend_targets(params), "quadrature", quad.n_outer_nodes())
    if method == "monte_carlo":
        if reps is None or seed is None:
            raise ValueError("Monte Carlo calibration needs both reps and seed")
        return calibrate_monte_carlo(params, reps, seed, nuisance=nuisance, threads=threads)
    raise ValueError(f"unknown calibration method {method!r}")


def calibrate_multiparam(
    params: DesignParams, reps: int, seed: int, nuisance=None, threads: int = 1
) -> CalibrationReport:
    """Monte Carlo calibration for the unknown-variance normal and two-sample binomial."""
    if isinstance(params.family, NormalKnownVar):
        raise TypeError("use calibrate() for the known-variance normal family")
    return calibrate_monte_carlo(params, reps, seed, nuisance=nuisance, threads=threads)
