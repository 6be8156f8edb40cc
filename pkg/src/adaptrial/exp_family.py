"""Exponential-family models used by the adaptive tests.

Three families are supported:

* ``NormalKnownVar``  -- N(theta, sigma^2) with sigma known, u(theta) = theta
* ``NormalUnknownVar`` -- N(mu, sigma^2), theta = (mu, sigma), u(theta) = mu
* ``TwoSampleBinomial`` -- paired Bernoulli(p1), Bernoulli(p2) observations,
  theta = (p1, p2), u(theta) = p2 - p1

Every family knows its sufficient statistics, MLE, Kullback-Leibler information
number, and the information distance from an estimate to the level set
``{theta : u(theta) = delta}``.  The ``*_batch`` methods are vectorized versions
operating on arrays of cumulative sufficient statistics; they drive the Monte
Carlo machinery and must agree with the scalar methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize


class InsufficientDataError(ValueError):
    """Raised when a statistic has too few observations for an estimate."""


class InfeasibleConstraintError(ValueError):
    """Raised when ``{theta : u(theta) = delta}`` misses the parameter space."""


@dataclass(frozen=True)
class SuffStat:
    """Cumulative sufficient statistic.

    ``sums`` is ``(S_n,)`` for the known-variance normal, ``(S_n, sum x_i^2)``
    for the unknown-variance normal and ``(successes_1, successes_2)`` for the
    two-sample binomial.  ``n_second`` is only meaningful for raw binomial data
    with unequal group sizes; it defaults to ``n``.
    """

    n: int
    sums: tuple
    n_second: int | None = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be nonnegative, got {self.n}")
        object.__setattr__(self, "sums", tuple(float(s) for s in np.atleast_1d(self.sums)))

    @property
    def group_sizes(self) -> tuple[int, int]:
        return self.n, self.n if self.n_second is None else self.n_second

    @classmethod
    def from_observations(cls, family: "Family", xs) -> "SuffStat":
        xs = np.asarray(xs, dtype=float)
        if family.dimension == 1:
            xs = xs.reshape(-1)
            return cls(len(xs), (xs.sum(),))
        if isinstance(family, NormalUnknownVar):
            xs = xs.reshape(-1)
            return cls(len(xs), (xs.sum(), (xs**2).sum()))
        xs = xs.reshape(-1, 2)
        return cls(len(xs), tuple(xs.sum(axis=0)))


def _as_theta(theta) -> tuple[float, ...]:
    return tuple(float(t) for t in np.atleast_1d(theta))


class Family:
    """Base class; subclasses implement one exponential family."""

    dimension: int = 1
    name: str = ""

    # -- scalar API ---------------------------------------------------------
    def check_theta(self, theta) -> tuple[float, ...]:
        theta = _as_theta(theta)
        if len(theta) != self.dimension:
            raise ValueError(
                f"{self.name} parameter must have {self.dimension} components, got {len(theta)}"
            )
        return theta

    def u(self, theta) -> float:
        raise NotImplementedError

    def mle(self, stat: SuffStat) -> tuple[float, ...]:
        raise NotImplementedError

    def kl(self, theta, lam) -> float:
        raise NotImplementedError

    def constrained_kl(self, theta_hat, delta: float) -> float:
        raise NotImplementedError

    # -- vectorized API -------------------------------------------------------
    def glr_batch(self, n, cum: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(u_hat, info)`` for arrays of cumulative statistics.

        ``cum`` has shape ``(..., d)``; ``n`` broadcasts against ``cum[..., 0]``.
        ``info`` is the per-observation constrained KL distance to ``delta``.
        """
        raise NotImplementedError

    def sample_cumulative(self, rng: np.random.Generator, theta, size: int, nmax: int) -> np.ndarray:
        """Cumulative sufficient statistics of ``size`` independent streams.

        Returns an array of shape ``(size, nmax, d)`` where entry ``[:, j]``
        holds the statistic after ``j + 1`` observations.  Observations are
        drawn observation-major so the prefix of a stream does not depend on
        ``nmax``.
        """
        raise NotImplementedError

    def null_theta(self, u0: float, nuisance=None) -> tuple[float, ...]:
        """A parameter on the level set ``u = u0`` at the given nuisance value."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.name}


@dataclass(frozen=True)
class NormalKnownVar(Family):
    sigma: float = 1.0
    dimension: int = field(default=1, init=False, repr=False)
    name: str = field(default="normal", init=False, repr=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def u(self, theta) -> float:
        return self.check_theta(theta)[0]

    def mle(self, stat: SuffStat) -> tuple[float, ...]:
        if stat.n < 1:
            raise InsufficientDataError("need at least one observation")
        return (stat.sums[0] / stat.n,)

    def kl(self, theta, lam) -> float:
        (t,), (l,) = self.check_theta(theta), self.check_theta(lam)
        return (t - l) ** 2 / (2 * self.sigma**2)

    def constrained_kl(self, theta_hat, delta: float) -> float:
        return self.kl(theta_hat, delta)

    def glr_batch(self, n, cum, delta):
        mean = cum[..., 0] / n
        return mean, (mean - delta) ** 2 / (2 * self.sigma**2)

    def sample_cumulative(self, rng, theta, size, nmax):
        (t,) = self.check_theta(theta)
        x = rng.standard_normal((nmax, size)).T * self.sigma + t
        return np.cumsum(x, axis=1)[..., None]

    def null_theta(self, u0, nuisance=None):
        return (float(u0),)

    def to_dict(self):
        return {"family": self.name, "sigma": self.sigma}


@dataclass(frozen=True)
class NormalUnknownVar(Family):
    dimension: int = field(default=2, init=False, repr=False)
    name: str = field(default="normal_unknown_var", init=False, repr=False)

    def check_theta(self, theta):
        theta = super().check_theta(theta)
        if not theta[1] > 0:
            raise ValueError(f"sigma must be positive, got {theta[1]}")
        return theta

    def u(self, theta) -> float:
        return self.check_theta(theta)[0]

    def mle(self, stat: SuffStat) -> tuple[float, ...]:
        if stat.n < 2:
            raise InsufficientDataError("need at least two observations to estimate sigma")
        mean = stat.sums[0] / stat.n
        var = stat.sums[1] / stat.n - mean**2
        if var < -1e-12 * max(1.0, stat.sums[1] / stat.n):
            raise ValueError("sum of squares is smaller than S_n^2 / n")
        return (mean, math.sqrt(max(var, 0.0)))

    def kl(self, theta, lam) -> float:
        (m1, s1), (m2, s2) = self.check_theta(theta), self.check_theta(lam)
        return math.log(s2 / s1) + (s1**2 + (m1 - m2) ** 2) / (2 * s2**2) - 0.5

    def constrained_kl(self, theta_hat, delta: float) -> float:
        mu, sigma = _as_theta(theta_hat)
        if sigma == 0:
            return 0.0 if mu == delta else math.inf
        return 0.5 * math.log1p(((mu - delta) / sigma) ** 2)

    def glr_batch(self, n, cum, delta):
        mean = cum[..., 0] / n
        var = np.maximum(cum[..., 1] / n - mean**2, 1e-300)
        return mean, 0.5 * np.log1p((mean - delta) ** 2 / var)

    def sample_cumulative(self, rng, theta, size, nmax):
        mu, sigma = self.check_theta(theta)
        x = rng.standard_normal((nmax, size)).T * sigma + mu
        return np.stack([np.cumsum(x, axis=1), np.cumsum(x * x, axis=1)], axis=-1)

    def null_theta(self, u0, nuisance=None):
        return (float(u0), 1.0 if nuisance is None else float(nuisance))


def _bernoulli_kl(p, q):
    return p * np.log(p / q) + (1 - p) * np.log((1 - p) / (1 - q))


def _binomial_profile_objective(p, p1, p2, delta):
    return _bernoulli_kl(p1, p) + _bernoulli_kl(p2, p + delta)


@dataclass(frozen=True)
class TwoSampleBinomial(Family):
    """Two arms observed in pairs; ``n`` counts pairs (per-group size)."""

    dimension: int = field(default=2, init=False, repr=False)
    name: str = field(default="binomial", init=False, repr=False)

    def check_theta(self, theta):
        theta = super().check_theta(theta)
        if not all(0 < p < 1 for p in theta):
            raise ValueError(f"binomial probabilities must lie in (0, 1), got {theta}")
        return theta

    def u(self, theta) -> float:
        p1, p2 = _as_theta(theta)
        return p2 - p1

    @staticmethod
    def clip(phat, n):
        """Keep proportions off {0, 1} so that every logarithm stays finite."""
        lo = 0.5 / np.asarray(n, dtype=float)
        return np.clip(phat, lo, 1 - lo)

    def raw_proportions(self, stat: SuffStat) -> tuple[float, float]:
        n1, n2 = stat.group_sizes
        if n1 < 1 or n2 < 1:
            raise InsufficientDataError("need at least one observation per group")
        s1, s2 = stat.sums
        if not (0 <= s1 <= n1 and 0 <= s2 <= n2):
            raise ValueError(f"success counts {stat.sums} outside [0, n]")
        return s1 / n1, s2 / n2

    def mle(self, stat: SuffStat) -> tuple[float, ...]:
        p1, p2 = self.raw_proportions(stat)
        n1, n2 = stat.group_sizes
        return (float(self.clip(p1, n1)), float(self.clip(p2, n2)))

    def kl(self, theta, lam) -> float:
        (p1, p2), (q1, q2) = self.check_theta(theta), self.check_theta(lam)
        return float(_bernoulli_kl(p1, q1) + _bernoulli_kl(p2, q2))

    @staticmethod
    def _feasible_interval(delta):
        lo, hi = max(0.0, -delta), min(1.0, 1.0 - delta)
        if not lo < hi:
            raise InfeasibleConstraintError(f"no (p1, p2) in (0,1)^2 has p2 - p1 = {delta}")
        return lo, hi

    def profile_p(self, theta_hat, delta: float) -> float:
        """MLE of p1 under ``p2 - p1 = delta`` (bounded Brent minimization)."""
        p1, p2 = self.check_theta(theta_hat)
        lo, hi = self._feasible_interval(delta)
        res = optimize.minimize_scalar(
            _binomial_profile_objective,
            bounds=(lo + 1e-9, hi - 1e-9),
            args=(p1, p2, delta),
            method="bounded",
            options={"xatol": 1e-10},
        )
        return float(res.x)

    def constrained_kl(self, theta_hat, delta: float) -> float:
        p1, p2 = self.check_theta(theta_hat)
        if p2 - p1 == delta:
            return 0.0
        p = self.profile_p(theta_hat, delta)
        return max(float(_binomial_profile_objective(p, p1, p2, delta)), 0.0)

    @staticmethod
    def profile_p_batch(p1, p2, delta, iters=60):
        """Vectorized profile MLE: bisection on the (monotone) score."""
        lo0, hi0 = max(0.0, -delta), min(1.0, 1.0 - delta)
        lo = np.full(np.shape(p1), lo0 + 1e-12)
        hi = np.full(np.shape(p1), hi0 - 1e-12)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            q = mid + delta
            score = (p1 - mid) / (mid * (1 - mid)) + (p2 - q) / (q * (1 - q))
            pos = score > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        return 0.5 * (lo + hi)

    def glr_batch(self, n, cum, delta):
        n = np.asarray(n, dtype=float)
        p1 = self.clip(cum[..., 0] / n, n)
        p2 = self.clip(cum[..., 1] / n, n)
        p = self.profile_p_batch(p1, p2, delta)
        info = np.maximum(_binomial_profile_objective(p, p1, p2, delta), 0.0)
        return p2 - p1, info

    def sample_cumulative(self, rng, theta, size, nmax):
        p1, p2 = self.check_theta(theta)
        u = rng.random((nmax, size, 2)).transpose(1, 0, 2)
        x = (u < np.array([p1, p2])).astype(np.int32)
        return np.cumsum(x, axis=1)

    def null_theta(self, u0, nuisance=None):
        """Parameter with ``p2 - p1 = u0`` centred on ``nuisance`` (default 0.5)."""
        centre = 0.5 if nuisance is None else float(nuisance)
        return self.check_theta((centre - u0 / 2, centre + u0 / 2))


FAMILIES = {
    "normal": NormalKnownVar,
    "normal_unknown_var": NormalUnknownVar,
    "binomial": TwoSampleBinomial,
}


def family_from_dict(d: dict) -> Family:
    name = d.get("family", "normal")
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    if name == "normal":
        return NormalKnownVar(float(d.get("sigma", 1.0)))
    return FAMILIES[name]()


# -- module-level operations ---------------------------------------------------


def mle(family: Family, stat: SuffStat) -> tuple[float, ...]:
    return family.mle(stat)


def kl(family: Family, theta, lam) -> float:
    return family.kl(theta, lam)


def constrained_kl(family: Family, theta_hat, delta: float) -> float:
    """``inf {I(theta_hat, theta) : u(theta) = delta}``."""
    return family.constrained_kl(theta_hat, delta)


def signed_root(family: Family, n: int, theta_hat, delta: float) -> float:
    """Signed-root likelihood ratio statistic, approximately N(0, 1) under u = delta."""
    diff = family.u(theta_hat) - delta
    if diff == 0:
        return 0.0
    return math.copysign(math.sqrt(2 * n * family.constrained_kl(theta_hat, delta)), diff)


def arcsine_stat(stat: SuffStat) -> float:
    """(2n)^{1/2} {arcsin(p1^{1/2}) - arcsin(p2^{1/2})}, each group at its own n.

    The leading factor uses ``stat.n``; proportions use each group's own size,
    so unequal groups are allowed.
    """
    p1, p2 = TwoSampleBinomial().raw_proportions(stat)
    return math.sqrt(2 * stat.n) * (math.asin(math.sqrt(p1)) - math.asin(math.sqrt(p2)))


def arcsine_stat_batch(n, cum: np.ndarray) -> np.ndarray:
    """Arcsine statistic oriented along ``u = p2 - p1`` (positive favours H1)."""
    n = np.asarray(n, dtype=float)
    p1 = cum[..., 0] / n
    p2 = cum[..., 1] / n
    return np.sqrt(2 * n) * (np.arcsin(np.sqrt(p2)) - np.arcsin(np.sqrt(p1)))


def cumulative(family: Family, X) -> np.ndarray:
    """Cumulative sufficient statistics of observation arrays.

    ``X`` has shape ``(trials, n)`` (``(trials, n, 2)`` for the binomial
    family); the result matches ``Family.sample_cumulative``.
    """
    X = np.asarray(X, dtype=float)
    if isinstance(family, TwoSampleBinomial):
        return np.cumsum(X, axis=1)
    if isinstance(family, NormalUnknownVar):
        return np.stack([np.cumsum(X, axis=1), np.cumsum(X * X, axis=1)], axis=-1)
    return np.cumsum(X, axis=1)[..., None]


def as_family(family: Family | str | None) -> Family:
    if family is None:
        return NormalKnownVar()
    if isinstance(family, Family):
        return family
    return family_from_dict({"family": family})


__all__ = [
    "Family",
    "NormalKnownVar",
    "NormalUnknownVar",
    "TwoSampleBinomial",
    "SuffStat",
    "InsufficientDataError",
    "InfeasibleConstraintError",
    "mle",
    "kl",
    "constrained_kl",
    "signed_root",
    "arcsine_stat",
    "arcsine_stat_batch",
    "cumulative",
    "as_family",
    "family_from_dict",
]
