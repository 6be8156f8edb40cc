"""Estimator-style front end for the three-stage adaptive test."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_is_fitted

from . import validation
from .calibrate import calibrate
from .comparators import SequentialTest
from .design import DesignParams
from .engine import Decision, PathOutcomes, evaluate_paths, run


class AdaptiveTest(SequentialTest):
    """Three-stage adaptive test with KL-based boundaries.

    ``fit`` calibrates the thresholds (b, b_tilde, c) so that the error
    spending equations hold; pass ``thresholds`` to skip calibration.
    ``method="auto"`` uses quadrature for the known-variance normal family
    and Monte Carlo otherwise.

    Examples
    --------
    >>> test = AdaptiveTest().fit()
    >>> round(test.thresholds_.b, 2)
    3.26
    """

    def __init__(
        self,
        family="normal",
        sigma=1.0,
        u0=0.0,
        u1=0.3,
        alpha=0.025,
        alpha_tilde=0.1,
        m=40,
        M=120,
        eps=1 / 3,
        eps_tilde=1 / 3,
        rho=0.1,
        nuisance=None,
        method="auto",
        thresholds=None,
        reps=100_000,
        seed=0,
        nodes=16,
        threads=1,
    ):
        self.family = family
        self.sigma = sigma
        self.u0 = u0
        self.u1 = u1
        self.alpha = alpha
        self.alpha_tilde = alpha_tilde
        self.m = m
        self.M = M
        self.eps = eps
        self.eps_tilde = eps_tilde
        self.rho = rho
        self.nuisance = nuisance
        self.method = method
        self.thresholds = thresholds
        self.reps = reps
        self.seed = seed
        self.nodes = nodes
        self.threads = threads

    def design(self) -> DesignParams:
        return DesignParams(
            family=self._family(),
            u0=float(self.u0),
            u1=float(self.u1),
            alpha=self.alpha,
            alpha_tilde=self.alpha_tilde,
            m=validation.check_positive_int(self.m, "m"),
            M=validation.check_positive_int(self.M, "M"),
            eps=self.eps,
            eps_tilde=self.eps_tilde,
            rho=float(self.rho),
        )

    def fit(self, X=None, y=None):
        self.design_ = self.design()
        self.max_n_ = self.design_.M
        if self.thresholds is not None:
            self.thresholds_ = validation.check_thresholds(self.thresholds)
            self.calibration_ = None
            return self
        method = self.method
        if method == "auto":
            method = "quadrature" if self.design_.family.name == "normal" else "monte_carlo"
        report = calibrate(
            self.design_,
            method,
            reps=self.reps,
            seed=validation.check_seed(self.seed),
            nodes=self.nodes,
            nuisance=self.nuisance,
            threads=self.threads,
        )
        self.thresholds_ = report.thresholds
        self.calibration_ = report
        return self

    def evaluate(self, cum: np.ndarray) -> PathOutcomes:
        check_is_fitted(self)
        return evaluate_paths(self.design_, self.thresholds_, cum)

    def run(self, data_source) -> Decision:
        """Run one trial through the state machine; the trail is kept in ``trail_``."""
        check_is_fitted(self)
        decision, self.trail_ = run(self.design_, self.thresholds_, data_source)
        return decision
