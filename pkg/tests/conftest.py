import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from adaptrial import AdaptiveTest, FixedSampleTest  # noqa: E402
from adaptrial.design import DesignParams  # noqa: E402
from acceptance_log import ACCEPTANCE  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{label}: {d}{'' if good else ' (FAIL)'}" for label, good, d in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}  {detail}")


@pytest.fixture(scope="session")
def worked_params():
    return DesignParams()


@pytest.fixture(scope="session")
def worked_test():
    """The m=40, M=120 normal design with quadrature-calibrated thresholds."""
    return AdaptiveTest().fit()


@pytest.fixture(scope="session")
def rounded_test():
    return AdaptiveTest(thresholds=(3.26, 1.99, 2.05)).fit()


@pytest.fixture(scope="session")
def fss120():
    return FixedSampleTest(n=120).fit()


@pytest.fixture(scope="session")
def table1_suite():
    """All normal-case tests on common random numbers, 10^5 reps."""
    from adaptrial.cli import build_tests, load_config
    from adaptrial.simulate import compare_suite

    tests = build_tests(load_config("table1_desk"))
    return tests, compare_suite(tests, [0.0, 0.15, 0.3], 100_000, 7)
