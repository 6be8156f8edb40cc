"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .engine import Thresholds
from .exp_family import Family, NormalKnownVar, TwoSampleBinomial, family_from_dict


def check_family(family, sigma: float = 1.0) -> Family:
    if isinstance(family, Family):
        return family
    if family is None or family == "normal":
        return NormalKnownVar(float(sigma))
    return family_from_dict({"family": family})


def check_probability(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a number in (0, 1), got {value!r}") from None
    if not 0 < value < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return value


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (numbers.Integral, float, str)):
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    try:
        as_float = float(value)
    except ValueError:
        raise ValueError(f"{name} must be a positive integer, got {value!r}") from None
    if as_float != int(as_float) or as_float < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(as_float)


def check_seed(seed) -> int:
    if seed is None or isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise ValueError(f"an explicit nonnegative integer seed is required, got {seed!r}")
    return int(seed)


def check_thresholds(thr) -> Thresholds:
    if isinstance(thr, Thresholds):
        return thr
    if isinstance(thr, dict):
        return Thresholds(float(thr["b"]), float(thr["b_tilde"]), float(thr["c"]))
    b, b_tilde, c = (float(v) for v in thr)
    return Thresholds(b, b_tilde, c)


def check_observations(X, family: Family, min_n: int = 1) -> np.ndarray:
    """Coerce trial-by-observation data to a float array.

    Returns shape ``(trials, n)`` for the normal families and
    ``(trials, n, 2)`` for the binomial family.
    """
    X = np.asarray(X, dtype=float)
    want = 3 if isinstance(family, TwoSampleBinomial) else 2
    if X.ndim != want or (want == 3 and X.shape[2] != 2):
        shape = "(trials, n, 2)" if want == 3 else "(trials, n)"
        raise ValueError(f"expected observations of shape {shape}, got {X.shape}")
    if X.shape[1] < min_n:
        raise ValueError(f"need at least {min_n} observations per trial, got {X.shape[1]}")
    if not np.isfinite(X).all():
        raise ValueError("observations must be finite")
    if want == 3 and not np.isin(X, (0.0, 1.0)).all():
        raise ValueError("binomial observations must be 0 or 1")
    return X


def check_theta(theta, family: Family) -> tuple:
    return family.check_theta(theta)


def check_theta_grid(grid, family: Family) -> list[tuple]:
    grid = list(grid)
    if not grid:
        raise ValueError("theta grid is empty")
    return [family.check_theta(t) for t in grid]
