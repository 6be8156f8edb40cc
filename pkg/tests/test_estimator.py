import doctest

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import adaptrial.estimator
from adaptrial import AdaptiveTest, LiTest, ProschanHunsbergerTest
from adaptrial.engine import DataExhaustedError, Verdict


def test_params_round_trip():
    t = AdaptiveTest(m=30, rho=0.05)
    p = t.get_params()
    assert p["m"] == 30 and p["rho"] == 0.05 and p["family"] == "normal"
    c = clone(t)
    assert c.get_params() == p and c is not t
    c.set_params(m=50)
    assert c.m == 50 and t.m == 30


def test_not_fitted():
    for t in (AdaptiveTest(), LiTest(), ProschanHunsbergerTest()):
        with pytest.raises(NotFittedError):
            t.predict(np.zeros((1, 120)))
        with pytest.raises(NotFittedError):
            t.run([0.0] * 120)


def test_predict_matches_run(rounded_test):
    rng = np.random.default_rng(1)
    X = 0.25 + rng.standard_normal((200, 120))
    pred = rounded_test.predict(X)
    assert set(np.unique(pred)) <= {0, 1}
    for i in range(0, 200, 20):
        assert pred[i] == int(rounded_test.run(iter(X[i])).verdict is Verdict.REJECT)


def test_predict_needs_enough_columns(rounded_test):
    with pytest.raises(DataExhaustedError):
        rounded_test.predict(np.zeros((2, 45)))
    # a strong signal stops at 40 and needs nothing more
    assert rounded_test.predict(np.ones((1, 40)))[0] == 1


@pytest.mark.parametrize(
    "X,match",
    [
        (np.zeros(120), "shape"),
        (np.full((1, 120), np.nan), "finite"),
        (np.zeros((1, 0)), "at least"),
    ],
)
def test_observation_checks(rounded_test, X, match):
    with pytest.raises(ValueError, match=match):
        rounded_test.predict(X)


def test_binomial_observation_checks():
    t = AdaptiveTest(family="binomial", u1=0.097, alpha=0.05, alpha_tilde=0.2, m=58, M=302, eps=0.5, eps_tilde=0.5, rho=0, thresholds=(2.36, 1.1, 1.55)).fit()
    with pytest.raises(ValueError, match="0 or 1"):
        t.predict(np.full((1, 302, 2), 0.5))
    with pytest.raises(ValueError, match="shape"):
        t.predict(np.zeros((1, 302)))
    assert t.predict(np.zeros((3, 302, 2))).shape == (3,)


def test_invalid_parameters_raise_at_fit():
    for kw in ({"alpha": 1.2}, {"m": 0}, {"m": 130}, {"eps": 0.0}, {"family": "poisson"}, {"thresholds": (1.0, 2.0, 2.0)}):
        with pytest.raises((ValueError, TypeError)):
            AdaptiveTest(**kw).fit()


def test_docstring_example():
    res = doctest.testmod(adaptrial.estimator)
    assert res.failed == 0 and res.attempted >= 2
