import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from adaptrial import engine
from adaptrial.design import DesignParams
from adaptrial.engine import (
    ContinueWith,
    DataExhaustedError,
    OutOfOrderError,
    Thresholds,
    TrialState,
    Trigger,
    Verdict,
    analyze,
    plan_second_stage,
)
from adaptrial.exp_family import NormalUnknownVar, SuffStat, TwoSampleBinomial, cumulative

THR = Thresholds(3.26, 1.99, 2.05)


def stage1(params, mean):
    return TrialState(params, THR, cum=SuffStat(params.m, (params.m * mean,)))


def test_early_reject_boundary(worked_params):
    edge = math.sqrt(2 * 3.26 / 40)
    assert edge == pytest.approx(0.4037, abs=1e-4)
    out = analyze(stage1(worked_params, edge + 1e-9))
    assert out.trigger is Trigger.EARLY_REJECT and out.total_n == 40
    assert isinstance(analyze(stage1(worked_params, edge - 1e-6)), ContinueWith)


def test_null_estimate_continues(worked_params):
    # 40 * .3^2 / 2 = 1.8 < 1.99
    out = analyze(stage1(worked_params, 0.0))
    assert isinstance(out, ContinueWith)


def test_ties_stop():
    # statistic exactly at the threshold
    p = DesignParams()
    st_ = TrialState(p, Thresholds(40 * 0.25**2 / 2, 1.0, 2.0), cum=SuffStat(40, (40 * 0.25,)))
    assert analyze(st_).trigger is Trigger.EARLY_REJECT
    st_ = TrialState(p, Thresholds(3.0, 40 * 0.25**2 / 2, 2.0), cum=SuffStat(40, (40 * 0.05,)))
    assert analyze(st_).trigger is Trigger.EARLY_ACCEPT


def test_estimate_on_hypothesis_fails_gate():
    p = DesignParams()
    # at u1 the futility gate is strict; nothing fires
    st_ = TrialState(p, Thresholds(3.0, 1e-9, 2.0), cum=SuffStat(40, (40 * 0.3,)))
    assert isinstance(analyze(st_), ContinueWith)


def test_final_sign_gate():
    p = DesignParams()
    state = TrialState(p, Thresholds(3.26, 1.99, 1e-6), cum=SuffStat(120, (-5.0,)), stage=3)
    out = analyze(state)
    assert out.verdict is Verdict.ACCEPT and out.trigger is Trigger.FINAL_ACCEPT


def test_plan_second_stage(worked_params):
    s = stage1(worked_params, 0.3)
    assert analyze(s) == ContinueWith(91)
    assert s.planned_n == [40, 91, 120] and s.stage == 2
    s = stage1(worked_params, 0.15)
    assert analyze(s) == ContinueWith(120)
    # n2 == M: the stage-2 look uses the final rule
    s.cum = SuffStat(120, (120 * 0.3,))
    assert analyze(s).trigger is Trigger.FINAL_REJECT
    huge = TrialState(worked_params, Thresholds(1e3, 999.0, 2.05), cum=SuffStat(40, (40 * 5.0,)))
    assert analyze(huge) == ContinueWith(120)
    assert huge.planned_n[1] == 40 and huge.stage == 3


def test_plan_out_of_order(worked_params):
    with pytest.raises(OutOfOrderError):
        plan_second_stage(TrialState(worked_params, THR, cum=SuffStat(10, (0.0,))))
    with pytest.raises(OutOfOrderError):
        analyze(TrialState(worked_params, THR, cum=SuffStat(39, (0.0,))))


def test_zero_stream_accepts(worked_params):
    d, trail = engine.run(worked_params, THR, iter([0.0] * 120))
    assert d.verdict is Verdict.ACCEPT
    assert d.total_n <= 120
    assert trail[-1].action in ("early_accept", "final_accept")
    assert [r.n for r in trail] == sorted(r.n for r in trail)


def test_exhaustion(worked_params):
    with pytest.raises(DataExhaustedError, match="n=57"):
        engine.run(worked_params, THR, iter([0.0] * 50))


def test_trail_replay(worked_params):
    rng = np.random.default_rng(8)
    for _ in range(30):
        xs = list(0.15 + rng.standard_normal(120))
        d1, t1 = engine.run(worked_params, THR, iter(xs))
        d2, t2 = engine.run(worked_params, THR, iter(xs))
        assert d1 == d2
        text = engine.trail_to_text(t1)
        assert engine.trail_from_text(text) == t2
        assert engine.trail_to_text(engine.trail_from_text(text)) == text
        assert t1[-1].action.startswith(("early", "final"))


def test_scalar_matches_literal_rules(worked_params):
    rng = np.random.default_rng(9)
    for theta in (0.0, 0.15, 0.3, 0.45):
        for _ in range(150):
            xs = theta + rng.standard_normal(120)
            d, _ = engine.run(worked_params, THR, iter(xs))
            rej, n, k = oracles.adapt_normal_decision(xs, 3.26, 1.99, 2.05)
            assert (d.rejected, d.total_n, d.n_analyses) == (rej, n, k)


@pytest.mark.parametrize(
    "params,theta",
    [
        (DesignParams(), (0.2,)),
        (DesignParams(), (0.0,)),
        (DesignParams(family=NormalUnknownVar(), u1=0.28016, m=34, alpha_tilde=0.2, eps=0.5, eps_tilde=0.75), (0.28, 1.0)),
        (
            DesignParams(family=TwoSampleBinomial(), u1=0.097, alpha=0.05, alpha_tilde=0.2, m=58, M=302, eps=0.5, eps_tilde=0.5, rho=0.0),
            (0.254, 0.351),
        ),
    ],
)
def test_vectorized_matches_scalar(params, theta):
    thr = Thresholds(2.5, 0.8, 2.0)
    rng = np.random.default_rng(12)
    cum = params.family.sample_cumulative(rng, theta, 300, params.M)
    out = engine.evaluate_paths(params, thr, cum)
    dim = cum.shape[-1]
    for i in range(cum.shape[0]):
        c = cum[i]
        x = np.diff(np.concatenate([np.zeros((1, dim)), c]), axis=0)
        if isinstance(params.family, NormalUnknownVar):
            obs = list(x[:, 0])
        elif isinstance(params.family, TwoSampleBinomial):
            obs = [tuple(r) for r in x]
        else:
            obs = list(x[:, 0])
        d, trail = engine.run(params, thr, iter(obs))
        assert (d.rejected, d.total_n, d.n_analyses) == (out.reject[i], out.total_n[i], out.n_analyses[i])
        assert d.n_analyses == len(trail)


def test_stage_count_and_sizes(worked_params):
    rng = np.random.default_rng(13)
    cum = worked_params.family.sample_cumulative(rng, 0.15, 20_000, 120)
    st_ = engine.path_statistics(worked_params, cum)
    out = engine.path_outcomes(worked_params, THR, st_)
    assert set(np.unique(out.n_analyses)) <= {1, 2, 3}
    assert np.all((out.total_n == 40) | (out.total_n == st_.n2) | (out.total_n == 120))
    early = out.early_reject | out.early_accept
    assert np.all(out.total_n[early] < 120)
    assert np.all(out.total_n[~early] == 120)


def test_shift_never_flips_reject(worked_params):
    rng = np.random.default_rng(14)
    x = rng.standard_normal((1000, 120)) + rng.uniform(-0.2, 0.5, (1000, 1))
    shift = rng.uniform(0, 0.5, (1000, 1))
    a = engine.evaluate_paths(worked_params, THR, cumulative(worked_params.family, x))
    b = engine.evaluate_paths(worked_params, THR, cumulative(worked_params.family, x + shift))
    assert not np.any(a.reject & ~b.reject)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=120, max_size=120))
def test_decision_is_function_of_prefix(xs):
    p = DesignParams()
    d, trail = engine.run(p, THR, iter(xs))
    d2, _ = engine.run(p, THR, iter(xs[: d.total_n]))
    assert d == d2
    assert 1 <= len(trail) <= 3


def test_m_equals_M_final_only():
    p = DesignParams(m=120, M=120)
    d, trail = engine.run(p, THR, iter([0.5] * 120))
    assert d.trigger is Trigger.FINAL_REJECT and len(trail) == 1
    out = engine.evaluate_paths(p, THR, np.cumsum(np.full((1, 120), 0.5), axis=1)[..., None])
    assert out.final_reject[0] and out.n_analyses[0] == 1
