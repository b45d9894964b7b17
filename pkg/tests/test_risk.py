import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from aparchpiv import (WTI_PARAMS, AparchParams, DomainError, SpivParams, aparch_filter,
                       aparch_simulate, backtest, christoffersen_independence,
                       conditional_coverage, dq_test, hit_sequence, kupiec_pof, lopez_loss,
                       sarma_losses, spiv_quantile, tail_measures, var_series)
from aparchpiv.risk import HitSequence, VarSeries, transition_counts

mpmath.mp.dps = 50


def hits_of(seq):
    h = np.asarray(seq, dtype=np.int64)
    return HitSequence(hits=h, n=h.size, x=int(h.sum()))


def const_var(value, n, level, side):
    return VarSeries(level=level, side=side, values=np.full(n, float(value)), quantile=value)


def xlogy(x, y):
    return mpmath.mpf(0) if x == 0 else x * mpmath.log(y)


def mp_kupiec(n, x, a):
    a = mpmath.mpf(a)
    pi = mpmath.mpf(x) / n
    return -2 * (xlogy(n - x, 1 - a) + xlogy(x, a) - xlogy(n - x, 1 - pi) - xlogy(x, pi))


def mp_independence(seq):
    n00 = n01 = n10 = n11 = 0
    for a, b in zip(seq[:-1], seq[1:]):
        if a == 0:
            n00 += b == 0
            n01 += b == 1
        else:
            n10 += b == 0
            n11 += b == 1
    mpf = mpmath.mpf
    p01 = mpf(n01) / (n00 + n01) if n00 + n01 else mpf(0)
    p11 = mpf(n11) / (n10 + n11) if n10 + n11 else mpf(0)
    p = mpf(n01 + n11) / (n00 + n01 + n10 + n11)
    restricted = xlogy(n00 + n10, 1 - p) + xlogy(n01 + n11, p)
    free = xlogy(n00, 1 - p01) + xlogy(n01, p01) + xlogy(n10, 1 - p11) + xlogy(n11, p11)
    return -2 * (restricted - free)


def test_kupiec_wti_five_percent_row():
    # WTI reference, 0.05 long: failure ratio 0.049323 with n = 6650 → x = 328, p = 0.7997.
    h = hits_of([1] * 328 + [0] * (6650 - 328))
    assert h.x / h.n == pytest.approx(0.049323, abs=1e-6)
    assert kupiec_pof(h, 0.05).p_value == pytest.approx(0.7997, abs=5e-4)


def test_kupiec_exact_coverage():
    h = hits_of([1] * 5 + [0] * 95)
    stat, p, _ = kupiec_pof(h, 0.05)
    assert stat == pytest.approx(0.0, abs=1e-12)
    assert p == pytest.approx(1.0)


def test_kupiec_high_precision_case():
    h = hits_of([1] * 10 + [0] * 240)
    stat = kupiec_pof(h, 0.01).stat
    assert stat == pytest.approx(float(mp_kupiec(250, 10, 0.01)), rel=1e-12)


@pytest.mark.parametrize("x", [0, 250])
def test_kupiec_degenerate_counts(x):
    h = hits_of([1] * x + [0] * (250 - x))
    stat, p, _ = kupiec_pof(h, 0.01)
    assert stat == pytest.approx(float(mp_kupiec(250, x, 0.01)), rel=1e-12)
    assert 0.0 <= p <= 1.0


def test_transition_counts_by_hand():
    # Seven observations give six transitions: 0→1, 1→1, 1→0, 0→1, 1→1, 1→0.
    assert transition_counts([0, 1, 1, 0, 1, 1, 0]) == (0, 2, 2, 2)
    h = hits_of([0, 1, 1, 0, 1, 1, 0])
    assert christoffersen_independence(h).stat == pytest.approx(
        float(mp_independence([0, 1, 1, 0, 1, 1, 0])), rel=1e-12)


def test_independence_equal_transition_rates():
    # π01 = π11 = 1/2.
    h = hits_of([0, 0, 1, 1, 0, 0, 1, 1, 0])
    n00, n01, n10, n11 = transition_counts(h.hits)
    assert n01 / (n00 + n01) == n11 / (n10 + n11)
    stat, p, _ = christoffersen_independence(h)
    assert stat == pytest.approx(0.0, abs=1e-12)
    assert p == pytest.approx(1.0)


def test_independence_without_violations_is_flagged():
    stat, p, flag = christoffersen_independence(hits_of([0] * 50))
    assert p == 1.0
    assert flag and "no violations" in flag


@settings(max_examples=80, deadline=None)
@given(seq=st.lists(st.integers(0, 1), min_size=2, max_size=50),
       a=st.sampled_from([0.01, 0.05, 0.1, 0.25]))
def test_tests_match_high_precision_oracles(seq, a):
    h = hits_of(seq)
    assert kupiec_pof(h, a).stat == pytest.approx(float(mp_kupiec(h.n, h.x, a)),
                                                  rel=1e-10, abs=1e-10)
    if h.x > 0:
        ind = float(mp_independence(seq))
        assert christoffersen_independence(h).stat == pytest.approx(ind, rel=1e-10, abs=1e-10)
    cc = conditional_coverage(h, a)
    assert cc.stat == kupiec_pof(h, a).stat + christoffersen_independence(h).stat
    assert cc.p_value == pytest.approx(stats.chi2.sf(cc.stat, 2))


def test_permutation_invariance_counterexample():
    clustered = hits_of([1, 1, 1, 0, 0, 0, 0, 0, 0, 0] * 4)
    spread = hits_of([1, 0, 0, 1, 0, 0, 1, 0, 0, 0] * 4)
    assert clustered.x == spread.x
    assert kupiec_pof(clustered, 0.3).p_value == kupiec_pof(spread, 0.3).p_value
    assert (christoffersen_independence(clustered).p_value
            != pytest.approx(christoffersen_independence(spread).p_value))


def test_lopez_and_sarma_by_hand():
    r = np.array([-3.0])
    var = const_var(-2.0, 1, 0.05, "long")
    assert lopez_loss(r, var) == 2.0
    assert sarma_losses(r, var) == (1.0, 1.0)


def test_losses_without_violations():
    r = np.array([0.5, 1.0, -0.5])
    var = const_var(-2.0, 3, 0.05, "long")
    assert lopez_loss(r, var) == 0.0
    assert sarma_losses(r, var, 0.0) == (0.0, 0.0)
    # Capital cost on quiet days: -a·VaR per day for long positions.
    assert sarma_losses(r, var, 0.1)[1] == pytest.approx(3 * 0.2)


def test_short_side_mirrors_condition():
    r = np.array([3.0, 1.0, 2.5])
    var = const_var(2.0, 3, 0.95, "short")
    h = hit_sequence(r, var)
    assert h.hits.tolist() == [1, 0, 1]
    assert lopez_loss(r, var) == pytest.approx(2 + 1.0 + 0.25)


def test_strict_inequality_at_boundary():
    var = const_var(-2.0, 2, 0.05, "long")
    assert hit_sequence(np.array([-2.0, -2.0000001]), var).hits.tolist() == [0, 1]


@settings(max_examples=60, deadline=None)
@given(r=st.lists(st.floats(-10, 10), min_size=1, max_size=40), v=st.floats(-3, 3),
       side=st.sampled_from(["long", "short"]))
def test_lopez_minus_sarma_is_violation_count(r, v, side):
    r = np.array(r)
    var = const_var(v, r.size, 0.05 if side == "long" else 0.95, side)
    h = hit_sequence(r, var)
    assert lopez_loss(r, var) - sarma_losses(r, var)[0] == pytest.approx(h.x, abs=1e-9)


def test_var_series_scales_with_sigma():
    sigma = np.array([0.5, 1.0, 2.0])
    v1 = var_series(0.1, sigma, WTI_PARAMS.spiv, 0.05)
    v2 = var_series(0.1, 2 * sigma, WTI_PARAMS.spiv, 0.05)
    np.testing.assert_allclose(v2.values - 0.1, 2 * (v1.values - 0.1), rtol=1e-15)
    assert v1.side == "long"
    assert v1.quantile == pytest.approx(spiv_quantile(WTI_PARAMS.spiv, 0.05))
    with pytest.raises(DomainError):
        var_series(0.0, sigma, WTI_PARAMS.spiv, 1.0)


def test_dq_without_violations_warns():
    var = const_var(-2.0, 200, 0.05, "long")
    with pytest.warns(RuntimeWarning):
        stat, p, flag = dq_test(hits_of([0] * 200), var, 0.05)
    assert p == 1.0 and "no violations" in flag


def test_dq_constant_var_drops_collinear_columns():
    rng = np.random.default_rng(0)
    h = hits_of((rng.random(1000) < 0.05).astype(int))
    stat, p, flag = dq_test(h, const_var(-1.6, 1000, 0.05, "long"), 0.05)
    assert "rank 6 of 11" in flag
    assert 0.0 < p <= 1.0


def test_dq_detects_clustering():
    hits = np.zeros(2000, dtype=int)
    hits[::40] = 1
    hits[1::40] = 1
    rng = np.random.default_rng(1)
    var = VarSeries(0.05, "long", -1.6 - rng.random(2000), -1.6)
    assert dq_test(hits_of(hits), var, 0.05).p_value < 1e-6


def test_dq_needs_enough_data():
    with pytest.raises(DomainError):
        dq_test(hits_of([1, 0] * 10), const_var(-1, 20, 0.05, "long"), 0.05, 5)


def test_dq_small_null_calibration():
    rng = np.random.default_rng(42)
    n, reps, a = 1000, 400, 0.05
    rejections = 0
    for _ in range(reps):
        var = VarSeries(a, "long", -1.6 * np.exp(0.3 * rng.standard_normal(n)), -1.6)
        h = hits_of((rng.random(n) < a).astype(int))
        rejections += dq_test(h, var, a).p_value < 0.05
    assert 0.02 <= rejections / reps <= 0.09


def test_tail_identities():
    # λ = 1 gives ES = TCE1.
    r = np.r_[np.full(5, -3.0), np.zeros(95)]
    var = const_var(-2.0, 100, 0.05, "long")
    t = tail_measures(r, var)
    assert t.lam == pytest.approx(1.0)
    assert t.es == t.tce1 == -3.0
    assert t.tce2 == pytest.approx(1.5)
    # Violations that sit on the reference VaR: TCE = VaR_ref, so ES = TCE for any λ.
    r = np.r_[np.full(10, -2.5), np.zeros(90)]
    var = VarSeries(0.05, "long", np.r_[np.full(10, -2.5 + 1e-12), np.full(90, -2.0)], -2.0)
    t = tail_measures(r, var)
    assert t.lam == pytest.approx(2.0)
    assert t.tce1 == pytest.approx(t.var_ref, abs=1e-11)
    assert t.es == pytest.approx(t.tce1, abs=1e-10)
    assert t.tce2 == pytest.approx(1.0, abs=1e-11)


def test_tail_without_violations():
    t = tail_measures(np.zeros(10), const_var(-2.0, 10, 0.05, "long"))
    assert not t.defined
    assert math.isnan(t.tce1) and t.lam == 0.0


# WTI reference violation counts (ratio × 6650) with their TCE1 and ES.
TABLE45_ROWS = [
    (0.9975, 19, 10.406, 11.4148),
    (0.999, 9, 11.483, 14.1187),
    (0.95, 330, 4.8593, 4.8593),
    (0.05, 328, -5.1431, -5.1431),
    (0.005, 34, -10.755, -10.9245),
    (0.0025, 22, -11.096, -13.4496),
    (0.001, 8, -15.104, -17.2211),
]


@pytest.mark.parametrize("level,x,tce1,es", TABLE45_ROWS)
def test_es_correction_reproduces_wti_reference(level, x, tce1, es):
    n = 6650
    side = "long" if level < 0.5 else "short"
    q = spiv_quantile(WTI_PARAMS.spiv, level)
    sign = -1.0 if side == "long" else 1.0
    # x breaks whose mean is TCE1, spread around it; the rest sit inside the VaR.
    spread = np.linspace(-0.5, 0.5, x)
    r = np.r_[tce1 + spread - spread.mean(), np.full(n - x, -sign * 0.1)]
    var = VarSeries(level, side, np.full(n, q), q)
    t = tail_measures(r, var, var_ref="quantile")
    assert t.tce1 == pytest.approx(tce1, abs=1e-12)
    # TCE1 is printed to 3-4 decimals; its rounding is amplified by λ.
    assert t.es == pytest.approx(es, abs=2e-3)


def test_reflection_symmetry_of_backtest():
    p = WTI_PARAMS
    r = aparch_simulate(p, 1500, seed=4)
    mirrored = AparchParams(-p.mu, p.omega, p.alpha, p.beta, -p.gamma, p.delta,
                            SpivParams(p.m, -p.nu))
    s1 = aparch_filter(p, r).sigma
    s2 = aparch_filter(mirrored, -r).sigma
    np.testing.assert_allclose(s1, s2, rtol=1e-13)
    for a in (0.05, 0.01):
        long = var_series(p.mu, s1, p.spiv, a)
        short = var_series(mirrored.mu, s2, mirrored.spiv, 1 - a)
        h1, h2 = hit_sequence(r, long), hit_sequence(-r, short)
        assert h1.x == h2.x
        assert lopez_loss(r, long) == pytest.approx(lopez_loss(-r, short), rel=1e-9)
        assert sarma_losses(r, long)[0] == pytest.approx(sarma_losses(-r, short)[0], rel=1e-9)


def test_backtest_order_independent():
    p = WTI_PARAMS
    r = aparch_simulate(p, 1200, seed=8)
    sigma = aparch_filter(p, r).sigma
    levels = (0.95, 0.01, 0.999)
    rows, tails = backtest(r, p.mu, sigma, p.spiv, levels)
    rows_rev, _ = backtest(r, p.mu, sigma, p.spiv, levels[::-1])
    assert [row.level for row in rows] == list(levels)
    by_level = {row.level: row for row in rows_rev}
    for row in rows:
        assert row == by_level[row.level]
    assert rows[0].ratio == pytest.approx(1 - rows[0].violations / rows[0].n)
