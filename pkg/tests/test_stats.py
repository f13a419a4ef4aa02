import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from dlshift.errors import InsufficientDataError, ParameterError, UndefinedStatisticError
from dlshift.stats import PairedSeries, format_lag_table, kendall, select_lag, spearman

from oracles import kendall_tau_b, spearman_rho


def tied_series(rng, n):
    x = rng.integers(0, max(2, n // 3), n).astype(float)
    y = rng.integers(0, max(2, n // 4), n).astype(float)
    return x, y


def test_kendall_examples():
    assert kendall([1, 2, 3], [3, 2, 1])[0] == -1.0
    assert kendall([1, 2, 3, 4], [1, 3, 2, 4])[0] == pytest.approx(2 / 3, abs=1e-15)


def test_spearman_examples():
    assert spearman([1, 2, 3, 4, 5], [2, 4, 8, 16, 32])[0] == 1.0
    assert spearman([1, 2, 3], [2, 1, 3])[0] == pytest.approx(0.5, abs=1e-15)


def test_kendall_no_ties_matches_pair_count(rng):
    x, y = rng.normal(size=50), rng.normal(size=50)
    assert abs(kendall(x, y)[0] - kendall_tau_b(x.tolist(), y.tolist())) < 1e-12


def test_with_ties_match_oracles(rng):
    for _ in range(100):
        n = int(rng.integers(3, 61))
        x, y = tied_series(rng, n)
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        tau, kp = kendall(x, y)
        rho, sp = spearman(x, y)
        assert abs(tau - kendall_tau_b(x.tolist(), y.tolist())) < 1e-12
        assert abs(rho - spearman_rho(x.tolist(), y.tolist())) < 1e-12
        ref = sps.kendalltau(x, y, method="asymptotic")
        assert kp == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-14)
        assert sp == pytest.approx(sps.spearmanr(x, y).pvalue, rel=1e-9, abs=1e-14)


def test_frozen_values():
    # computed once with the pair-count and rank oracles
    x = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]
    y = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0]
    assert kendall(x, y)[0] == pytest.approx(0.16051447078102563, abs=1e-12)
    assert spearman(x, y)[0] == pytest.approx(0.19885368120992464, abs=1e-12)


def test_undefined_statistics():
    with pytest.raises(UndefinedStatisticError):
        kendall([1, 1, 1, 1], [1, 2, 3, 4])
    with pytest.raises(UndefinedStatisticError):
        spearman([1, 2, 3, 4], [5, 5, 5, 5])
    with pytest.raises(ParameterError):
        PairedSeries([1, 2], [1, 2])
    with pytest.raises(ParameterError):
        PairedSeries([1, 2, math.nan], [1, 2, 3])


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=4, max_size=30))
def test_antisymmetry_and_monotone_invariance(pairs):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    tau, kp = kendall(x, y)
    rho, sp = spearman(x, y)
    assert kendall(x, -y)[0] == pytest.approx(-tau, abs=1e-12)
    assert spearman(x, -y)[0] == pytest.approx(-rho, abs=1e-12)
    z = np.exp(x / 1e6) * 3 + 1
    if len(set(z)) == len(set(x)):
        assert kendall(z, y)[0] == pytest.approx(tau, abs=1e-12)
        assert spearman(z, y)[0] == pytest.approx(rho, abs=1e-12)
    assert 0 <= kp <= 1 and 0 <= sp <= 1
    assert -1 <= tau <= 1 and -1 <= rho <= 1


def test_perfect_dependence_is_significant():
    x = np.arange(10.0)
    assert kendall(x, x)[1] < 0.001
    assert spearman(x, -x)[1] < 0.001


def planted(rng, n=40, lag=2, noise=0.5):
    r = rng.normal(size=n)
    g = {t: -r[t - lag] + noise * rng.normal() for t in range(lag, n)}
    return g, {t: float(r[t]) for t in range(n)}


def test_select_lag_planted():
    g, r = planted(np.random.default_rng(1), noise=0.01)
    best, reports = select_lag(g, r, [1, 2, 3, 4])
    assert best == 2
    assert [rep.lag for rep in reports] == [1, 2, 3, 4]


def test_select_lag_single_candidate_and_errors():
    g, r = planted(np.random.default_rng(2))
    assert select_lag(g, r, [3])[0] == 3
    with pytest.raises(InsufficientDataError):
        select_lag({0: 1.0, 1: 2.0, 2: 3.0}, {0: 1.0, 1: 1.5}, [1])


def test_lag_table_format():
    g, r = planted(np.random.default_rng(3))
    _, reports = select_lag(g, r, [1, 2])
    text = format_lag_table(reports)
    lines = text.splitlines()
    assert lines[0].split() == ["lag", "kendall_tau", "kendall_p", "spearman_rho", "spearman_p"]
    assert [ln.split()[0] for ln in lines[1:]] == ["1", "2"]
