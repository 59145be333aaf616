import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pureconf.conformal import (
    CalibrationResult,
    PredictionSet,
    calibrate_self_supervised,
    calibrate_supervised,
    conformal_quantile,
    contains,
    coverage,
    coverage_from_scores,
    loo_quantile,
    prediction_set,
)
from pureconf.estimators import AffineSpectral, AnscombeSmooth, estimate
from pureconf.linops import LinearOperatorSpec
from pureconf.poisson import Measurement, PoissonForwardModel, sample_measurement
from pureconf.pure import ScoreMode

from conftest import image


def oracle_quantile(scores, alpha_str):
    """Sort-and-index with exact rational index arithmetic."""
    M = len(scores)
    k = math.ceil((M + 1) * (1 - Fraction(alpha_str)))
    return math.inf if k > M else sorted(scores)[k - 1]


def test_quantile_examples():
    assert conformal_quantile([3, 1, 2], 0.5) == 2
    s = list(range(1, 10))
    assert conformal_quantile(s, 0.1) == 9
    assert conformal_quantile(s, 0.05) == math.inf


def test_quantile_errors():
    with pytest.raises(ValueError):
        conformal_quantile([], 0.1)
    for a in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            conformal_quantile([1.0], a)
    with pytest.raises(ValueError):
        conformal_quantile([1.0, np.nan], 0.1)


def test_quantile_matches_oracle_small_grid(rng):
    for M in (1, 2, 3, 9, 19, 20, 99, 100):
        s = list(rng.standard_normal(M))
        for j in range(1, 100):
            a = f"0.{j:02d}"
            assert conformal_quantile(s, float(a)) == oracle_quantile(s, a)


def test_loo_examples():
    r = CalibrationResult((1.0, 2.0, 3.0), ScoreMode.SUPERVISED)
    assert loo_quantile(r, 2, 0.5) == 2.0
    with pytest.raises(ValueError):
        loo_quantile(CalibrationResult((1.0,), ScoreMode.SUPERVISED), 0, 0.5)
    with pytest.raises(IndexError):
        loo_quantile(r, 3, 0.5)


def test_loo_matches_recompute(rng):
    s = rng.standard_normal(50)
    r = CalibrationResult(tuple(s), ScoreMode.SELF_SUPERVISED)
    for i in range(50):
        rest = list(np.delete(s, i))
        for a in ("0.05", "0.1", "0.33", "0.5", "0.9"):
            k = math.ceil(50 * (1 - Fraction(a)))
            want = math.inf if k > 49 else sorted(rest)[k - 1]
            assert loo_quantile(r, i, float(a)) == want


def test_loo_removing_max_never_raises_quantile(rng):
    s = rng.random(30)
    r = CalibrationResult(tuple(s), ScoreMode.SUPERVISED)
    imax = int(np.argmax(s))
    for a in np.linspace(0.05, 0.95, 19):
        assert loo_quantile(r, imax, a) <= loo_quantile(r, (imax + 1) % 30, a)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_nestedness_property(scores, a1, a2):
    lo, hi = sorted((a1, a2))
    assert conformal_quantile(scores, hi) <= conformal_quantile(scores, lo)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.floats(0.001, 0.999), st.randoms())
def test_permutation_invariance_property(scores, alpha, rnd):
    shuffled = list(scores)
    rnd.shuffle(shuffled)
    assert conformal_quantile(shuffled, alpha) == conformal_quantile(scores, alpha)
    a = CalibrationResult(tuple(scores), ScoreMode.SUPERVISED)
    b = CalibrationResult(tuple(shuffled), ScoreMode.SUPERVISED)
    np.testing.assert_array_equal(a.scores, b.scores)


def test_calibration_result_invariants():
    r = CalibrationResult((3.0, -1.0, 2.0), "self")
    assert r.mode is ScoreMode.SELF_SUPERVISED
    np.testing.assert_array_equal(r.scores, [-1.0, 2.0, 3.0])
    assert r.M == 3
    assert CalibrationResult.from_dict(r.to_dict()) == r
    with pytest.raises(ValueError):
        CalibrationResult((), ScoreMode.SUPERVISED)
    with pytest.raises(ValueError):
        CalibrationResult((1.0, math.inf), ScoreMode.SUPERVISED)


@pytest.fixture
def id4():
    return PoissonForwardModel(LinearOperatorSpec.identity((2, 2, 1)), 4.0)


def test_supervised_single_pair(id4):
    # Estimate of y = 0 is 0, so x = e1 has error (1,0,0,0).
    y = Measurement(np.zeros(4), 4.0, 0)
    x = image([[1.0, 0.0], [0.0, 0.0]])
    r = calibrate_supervised([(x, y)], AffineSpectral(0.1), id4)
    assert r.sample_scores == (0.25,)


def test_supervised_perfect_estimates_give_zero_quantiles(id4):
    spec = AffineSpectral(0.1)
    pairs = []
    for s in range(5):
        y = Measurement(np.random.default_rng(s).poisson(3, 4), 4.0, s)
        pairs.append((estimate(spec, id4, y), y))
    r = calibrate_supervised(pairs, spec, id4)
    assert all(v == 0 for v in r.sample_scores)
    assert r.quantile(0.3) == 0


def test_supervised_matches_sort_and_index(id4, rng):
    spec = AffineSpectral(0.2)
    pairs = [(image(rng.random((2, 2))), Measurement(rng.poisson(2, 4), 4.0, i)) for i in range(23)]
    r = calibrate_supervised(pairs, spec, id4)
    raw = []
    for x, y in pairs:
        d = x.values - y.counts / (4.0 * 1.2)
        raw.append(np.dot(d, d) / 4)
    for a in ("0.1", "0.25", "0.5", "0.75"):
        assert r.quantile(float(a)) == pytest.approx(oracle_quantile(raw, a), rel=1e-14)


def test_self_supervised_single_and_deterministic(id4, rng):
    ys = [Measurement(rng.poisson(3, 4), 4.0, i) for i in range(4)]
    spec = AnscombeSmooth(0.5)
    one = calibrate_self_supervised(ys[:1], spec, id4, K=4, seed=3)
    assert one.M == 1
    a = calibrate_self_supervised(ys, spec, id4, K=4, seed=3)
    b = calibrate_self_supervised(ys, spec, id4, K=4, seed=3)
    assert a == b and a.mode is ScoreMode.SELF_SUPERVISED


def test_prediction_set_membership(id4):
    center = image(np.zeros((2, 2)))
    x = image([[1.0, 0.0], [0.0, 0.0]])
    op = id4.op
    assert contains(PredictionSet(center, op, 0.25, 0.1), x)
    assert not contains(PredictionSet(center, op, 0.2499, 0.1), x)
    assert contains(PredictionSet(center, op, 0.0, 0.1), center)
    assert not contains(PredictionSet(center, op, 0.0, 0.1), x)
    assert contains(PredictionSet(center, op, math.inf, 0.1), image([[1e9, 0], [0, 0]]))
    neg = PredictionSet(center, op, -1e-3, 0.1)
    assert neg.is_empty and not contains(neg, center)


def test_prediction_set_from_calibration(id4):
    y = Measurement([4, 0, 8, 2], 4.0, 0)
    spec = AffineSpectral(0.1)
    r = CalibrationResult(tuple(range(1, 10)), ScoreMode.SUPERVISED)
    ps = prediction_set(y, spec, id4, r, 0.05)
    assert ps.is_unbounded and ps.m == 4
    assert ps.center == estimate(spec, id4, y)
    assert prediction_set(y, spec, id4, r, 0.5).radius_sq == 5


def test_coverage_edge_cases(id4):
    cal = CalibrationResult((0.0,) * 9, ScoreMode.SUPERVISED)
    rep = coverage_from_scores(cal, [0.1, 0.2, 0.3], [0.05, 0.5])
    # alpha = 0.05 -> k = 10 > 9 -> unbounded -> full coverage.
    assert rep.rows[0].empirical == 1.0
    assert rep.rows[1].empirical == 0.0
    assert rep.to_csv().splitlines()[0] == "alpha,nominal,covered,total,empirical"


def test_coverage_with_pairs(id4, rng):
    spec = AffineSpectral(0.1)
    xs = [image(rng.random((2, 2))) for _ in range(40)]
    pairs = [(x, sample_measurement(id4, x, i)) for i, x in enumerate(xs)]
    cal = calibrate_supervised(pairs[:30], spec, id4)
    rep = coverage(cal, pairs[30:], spec, id4, [0.5, 0.1, 0.3])
    assert [r.alpha for r in rep.rows] == [0.1, 0.3, 0.5]
    emp = [r.empirical for r in rep.rows]
    assert emp == sorted(emp, reverse=True)
    assert all(r.total == 10 and 0 <= r.covered <= 10 for r in rep.rows)
    for a in (0.1, 0.3, 0.5):
        ps = [prediction_set(y, spec, id4, cal, a) for _, y in pairs[30:]]
        n = sum(contains(p, x) for p, (x, _) in zip(ps, pairs[30:]))
        assert n == next(r.covered for r in rep.rows if r.alpha == a)
