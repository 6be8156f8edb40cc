"""Design parameters and the sample-size functions of the three-stage test."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import ndtri

from .exp_family import Family, NormalKnownVar, TwoSampleBinomial, as_family

MAX_SUGGESTED_M = 10**6


class DivergingSampleSizeError(ValueError):
    pass


class DesignWarning(UserWarning):
    pass


def z_upper(p):
    """Upper-tail standard normal quantile: P(Z >= z_p) = p."""
    return -ndtri(p)


@dataclass(frozen=True)
class DesignParams:
    """Full parameterization of one three-stage adaptive test.

    ``u0``/``u1`` are the null boundary and the alternative on the scale of the
    tested functional (theta itself for the known-variance normal).
    """

    family: Family = field(default_factory=NormalKnownVar)
    u0: float = 0.0
    u1: float = 0.3
    alpha: float = 0.025
    alpha_tilde: float = 0.1
    m: int = 40
    M: int = 120
    eps: float = 1 / 3
    eps_tilde: float = 1 / 3
    rho: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "family", as_family(self.family))
        for name in ("alpha", "alpha_tilde", "eps", "eps_tilde"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.alpha + self.alpha_tilde >= 1:
            raise ValueError("alpha + alpha_tilde must be < 1")
        if int(self.m) != self.m or int(self.M) != self.M or self.m < 1:
            raise ValueError(f"m and M must be positive integers, got m={self.m}, M={self.M}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "M", int(self.M))
        if self.m > self.M:
            raise ValueError(f"m={self.m} exceeds M={self.M}")
        if not self.u1 > self.u0:
            raise ValueError(f"u1={self.u1} must exceed u0={self.u0}")
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")
        for name in ("eps", "eps_tilde"):
            v = getattr(self, name)
            if not 0.2 <= v <= 0.8:
                warnings.warn(
                    f"{name}={v:g} is outside the recommended band [0.2, 0.8]",
                    DesignWarning,
                    stacklevel=3,
                )

    @property
    def log_alpha(self) -> float:
        return abs(math.log(self.alpha))

    @property
    def log_alpha_tilde(self) -> float:
        return abs(math.log(self.alpha_tilde))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.to_dict()
        return d


def hoeffding_n_from_info(params: DesignParams, info0, info1):
    """Vectorized n(theta) given the information distances to u0 and u1."""
    info0 = np.asarray(info0, dtype=float)
    info1 = np.asarray(info1, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        t0 = np.where(info0 > 0, params.log_alpha / np.where(info0 > 0, info0, 1.0), np.inf)
        t1 = np.where(info1 > 0, params.log_alpha_tilde / np.where(info1 > 0, info1, 1.0), np.inf)
    return np.minimum(t0, t1)


def hoeffding_n(params: DesignParams, theta) -> float:
    """Approximate Hoeffding lower bound on the expected sample size at ``theta``."""
    fam = params.family
    i0 = fam.constrained_kl(theta, params.u0)
    i1 = fam.constrained_kl(theta, params.u1)
    if i0 == 0 and i1 == 0:
        raise ValueError("theta lies on both hypotheses")
    return float(hoeffding_n_from_info(params, i0, i1))


def second_stage_sizes(params: DesignParams, info0, info1) -> np.ndarray:
    """Vectorized second-stage rule m v {M ^ ceil((1 + rho) n(theta_hat))}."""
    n = hoeffding_n_from_info(params, info0, info1)
    inflated = np.where(np.isfinite(n), np.ceil((1 + params.rho) * np.where(np.isfinite(n), n, 0)), params.M)
    return np.clip(inflated, params.m, params.M).astype(np.int64)


def second_stage_n(params: DesignParams, theta_hat) -> int:
    fam = params.family
    i0 = fam.constrained_kl(theta_hat, params.u0)
    i1 = fam.constrained_kl(theta_hat, params.u1)
    return int(second_stage_sizes(params, i0, i1))


def implied_alternative(family, M: int, alpha: float, alpha_tilde: float, u0: float = 0.0, nuisance=None) -> float:
    """Alternative at which the level-alpha fixed-sample test of size M has power 1 - alpha_tilde.

    Closed form for the known-variance normal; otherwise the signed-root
    statistic is treated as N(sqrt(2 M I), 1) and the equation is solved by
    bisection.
    """
    family = as_family(family)
    zsum = z_upper(alpha) + z_upper(alpha_tilde)
    if isinstance(family, NormalKnownVar):
        return u0 + family.sigma * zsum / math.sqrt(M)

    def alt_theta(u1):
        if isinstance(family, TwoSampleBinomial):
            return family.null_theta(u1, nuisance)
        return (u1, 1.0 if nuisance is None else float(nuisance))

    def gap(u1):
        return math.sqrt(2 * M * family.constrained_kl(alt_theta(u1), u0)) - zsum

    hi = u0 + 10.0
    if isinstance(family, TwoSampleBinomial):
        centre = 0.5 if nuisance is None else float(nuisance)
        hi = min(hi, 2 * min(centre, 1 - centre) - 1e-9)
    return float(optimize.bisect(gap, u0 + 1e-12, hi, xtol=1e-8))


def suggested_first_stage(params: DesignParams, theta_low, theta_high) -> int:
    """First-stage size n(theta_low) ^ n(theta_high), rounded up."""
    fam = params.family
    if not fam.u(theta_low) < params.u0:
        raise ValueError(f"theta_low must lie below u0={params.u0}")
    if not fam.u(theta_high) > params.u1:
        raise ValueError(f"theta_high must lie above u1={params.u1}")
    n = min(hoeffding_n(params, theta_low), hoeffding_n(params, theta_high))
    if n > MAX_SUGGESTED_M:
        raise DivergingSampleSizeError(f"suggested first stage {n:.3g} exceeds {MAX_SUGGESTED_M}")
    return math.ceil(n)
