"""Calibration, execution and benchmarking of three-stage adaptive tests."""

from .calibrate import CalibrationReport, calibrate_monte_carlo, calibrate_multiparam
from .comparators import (
    FixedSampleTest,
    LaiShihTest,
    LiTest,
    OBrienFlemingTest,
    ProschanHunsbergerTest,
    ShenFisherTest,
)
from .design import DesignParams, implied_alternative, second_stage_n
from .engine import Decision, Thresholds, run
from .estimator import AdaptiveTest
from .exp_family import NormalKnownVar, NormalUnknownVar, TwoSampleBinomial
from .simulate import OCTable, compare_suite, efficiency_ratio, simulate_oc

__version__ = "0.1.0"

__all__ = [
    "AdaptiveTest",
    "FixedSampleTest",
    "OBrienFlemingTest",
    "ProschanHunsbergerTest",
    "LiTest",
    "ShenFisherTest",
    "LaiShihTest",
    "DesignParams",
    "Thresholds",
    "Decision",
    "CalibrationReport",
    "OCTable",
    "NormalKnownVar",
    "NormalUnknownVar",
    "TwoSampleBinomial",
    "calibrate_monte_carlo",
    "calibrate_multiparam",
    "implied_alternative",
    "second_stage_n",
    "run",
    "simulate_oc",
    "compare_suite",
    "efficiency_ratio",
]
