import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from adaptrial import simulate as sim
from adaptrial.comparators import FixedSampleTest, LiTest
from adaptrial.engine import PathOutcomes
from adaptrial.simulate import OCRow, Tally


def row(power, mean_n, theta=(0.3,)):
    return OCRow(theta, power, 0.0, mean_n, 0, 0, 0, 1.0, 1)


def test_fss_rows_are_degenerate(fss120):
    tab = sim.simulate_oc(fss120, [0.0, 0.2, 0.4], 5000, 1)
    for r in tab.rows:
        assert r.pct25 == r.pct50 == r.pct75 == 120
        assert r.mean_n == 120 and r.mean_stages == 1


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=300), st.floats(0.1, 100))
def test_percentile_is_nearest_rank(ns, p):
    ns_arr = np.array(ns)
    out = PathOutcomes(
        reject=np.zeros(len(ns), bool),
        total_n=ns_arr,
        n_analyses=np.ones(len(ns), np.int64),
        early_reject=np.zeros(len(ns), bool),
        early_accept=np.zeros(len(ns), bool),
        final_reject=np.zeros(len(ns), bool),
    )
    t = Tally.from_outcomes(out, 50)
    assert t.percentile(p) == oracles.nearest_rank(ns, p)
    assert t.mean_n == pytest.approx(np.mean(ns))


def test_tally_merge_is_associative(fss120):
    rng = np.random.default_rng(2)
    parts = []
    for _ in range(3):
        cum = fss120.family_.sample_cumulative(rng, 0.2, 100, 120)
        parts.append(Tally.from_outcomes(fss120.evaluate(cum), 120))
    a = (parts[0] + parts[1]) + parts[2]
    b = parts[0] + (parts[1] + parts[2])
    c = parts[2] + parts[0] + parts[1]
    for x in (b, c):
        assert x.reps == a.reps and x.rejections == a.rejections
        np.testing.assert_array_equal(x.n_hist, a.n_hist)


def test_ratio_identities():
    r = row(0.8, 80)
    assert sim.efficiency_ratio(r, r, 0.025) == pytest.approx(100)
    assert sim.efficiency_ratio(row(0.8, 80), row(0.8, 100), 0.025) == pytest.approx(125)
    assert sim.efficiency_ratio(row(0.7, 90), row(0.85, 100), 0.025) == pytest.approx(
        oracles.efficiency_ratio(0.7, 90, 0.85, 100, 0.025)
    )


def test_fss_information_identity():
    # (z_a + z_b)^2 / theta^2 is the fixed sample size with power 1 - b at theta
    theta = 0.3
    n = 120
    power = 1 - oracles.stats.norm.cdf(oracles.z(0.025) - theta * math.sqrt(n))
    assert (oracles.z(0.025) + oracles.z(1 - power)) ** 2 / theta**2 == pytest.approx(n, rel=1e-9)


@pytest.mark.parametrize("power", [0.0, 1.0, 0.02, 0.025])
def test_ratio_undefined(power):
    with pytest.raises(sim.UndefinedRatioError):
        sim.efficiency_ratio(row(power, 80), row(0.8, 100), 0.025)


def test_suite_reference_ratios(table1_suite):
    tests, res = table1_suite
    ref = res.ratios[res.reference]
    assert ref[0] is None  # theta = 0 is not an alternative
    assert ref[1:] == pytest.approx([100.0, 100.0])


def test_adaptive_against_fixed_sample(table1_suite):
    _, res = table1_suite
    a, f = res.tables["ADAPT"].row_at(0.3), res.tables["FSS120"].row_at(0.3)
    assert f.power - 0.02 <= a.power <= f.power
    assert a.mean_n < f.mean_n


def test_power_monotone_and_bounded(table1_suite):
    tests, res = table1_suite
    for name in ("ADAPT", "FSS120"):
        rows = res.tables[name].rows
        for lo, hi in zip(rows, rows[1:]):
            assert hi.power >= lo.power - 2 * max(lo.mc_se_power, hi.mc_se_power)
    for name, t in tests.items():
        for r in res.tables[name].rows:
            assert r.mean_n <= t.max_n_
            assert r.pct25 <= r.pct50 <= r.pct75 <= t.max_n_
            assert 1 <= r.mean_stages <= 3


def test_adaptive_size_at_null(table1_suite):
    _, res = table1_suite
    r = res.tables["ADAPT"].row_at(0.0)
    assert abs(r.power - 0.025) <= 3 * math.sqrt(0.025 * 0.975 / r.reps)


def test_csv_round_trip(table1_suite, tmp_path):
    _, res = table1_suite
    tables = list(res.tables.values())
    path = tmp_path / "oc.csv"
    sim.write_csv(tables, path)
    assert sim.read_csv(path) == tables
    buf = io.StringIO()
    sim.write_csv(tables, buf)
    assert sim.read_csv(io.StringIO(buf.getvalue())) == tables
    header = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")][0]
    assert tuple(header.split(",")) == sim.CSV_COLUMNS


def test_fingerprint_detects_tampering(fss120):
    tab = sim.simulate_oc(fss120, [0.0], 1000, 1)
    tab.verify(fss120)
    with pytest.raises(sim.FingerprintMismatchError):
        tab.verify(FixedSampleTest(n=119).fit())
    assert sim.fingerprint(fss120) == sim.fingerprint(FixedSampleTest(n=120).fit())


def test_bit_identical_across_threads(worked_test, fss120):
    tests = {"ADAPT": worked_test, "FSS120": fss120, "L": LiTest().fit()}
    grid = [0.0, 0.3]
    a = sim.compare_suite(tests, grid, 20_000, 9, threads=1)
    b = sim.compare_suite(tests, grid, 20_000, 9, threads=4)
    assert a.tables == b.tables and a.ratios == b.ratios
    for name in tests:
        for x, y in zip(a.tables[name].tallies, b.tables[name].tallies):
            np.testing.assert_array_equal(x.n_hist, y.n_hist)
    c = sim.compare_suite(tests, grid, 20_000, 10)
    assert c.tables != a.tables


def test_common_random_numbers(worked_test, fss120):
    # a test simulated alone sees the same streams as inside a suite
    alone = sim.simulate_oc(fss120, [0.3], 8000, 4, name="FSS120")
    suite = sim.compare_suite({"ADAPT": worked_test, "FSS120": fss120}, [0.3], 8000, 4)
    assert alone.rows == suite.tables["FSS120"].rows


def test_suite_errors(worked_test, fss120):
    with pytest.raises(ValueError, match="empty"):
        sim.simulate_oc(fss120, [], 100, 1)
    with pytest.raises(sim.IncompatibleDesignError):
        sim.compare_suite({"A": fss120, "B": FixedSampleTest(family="binomial").fit()}, [0.0], 10, 1)
    with pytest.raises(ValueError):
        sim.simulate_oc(fss120, [0.0], 100, None)
    with pytest.raises(ValueError):
        sim.simulate_oc(fss120, [0.0], 0, 1)


def test_format_tables(table1_suite):
    _, res = table1_suite
    text = sim.format_tables(list(res.tables.values()), res.ratios)
    lines = text.splitlines()
    assert lines[0].split()[:3] == ["test", "theta", "power"]
    assert len(lines) == 2 + sum(len(t.rows) for t in res.tables.values())
