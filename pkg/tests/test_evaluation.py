import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gperrprop.evaluation import error_map_report, histogram_equalize, mae, pearson, r_squared, spearman
from gperrprop.gp import PredictionResult, Predictions


def test_mae():
    assert mae([1, 2], [1, 2]) == 0.0
    assert mae([1, 3], [2, 1]) == 1.5
    assert mae(np.array([1, 3]) + 7.25, np.array([2, 1]) + 7.25) == 1.5
    with pytest.raises(ValueError):
        mae([1], [1, 2])
    with pytest.raises(ValueError):
        mae([], [])


def test_r_squared():
    t = np.array([0.0, 1.0, 2.0])
    assert r_squared(t, t) == 1.0
    assert r_squared(np.full(3, t.mean()), t) == 0.0
    assert r_squared([0, 0, 3], t) == 0.0
    with pytest.raises(ValueError):
        r_squared([1, 2], [3, 3])


@given(arrays(float, 8, elements=st.floats(-10, 10)), arrays(float, 8, elements=st.floats(-10, 10)))
def test_r_squared_at_most_one(p, t):
    if np.ptp(t) > 1e-6:
        assert r_squared(p, t) <= 1.0


def test_histogram_equalize():
    np.testing.assert_allclose(histogram_equalize([5, 1, 3]), [1.0, 0.0, 0.5])
    np.testing.assert_allclose(histogram_equalize([0, 0.5, 1]), [0, 0.5, 1])
    np.testing.assert_allclose(histogram_equalize([2, 2, 2, 2]), [0.5] * 4)
    np.testing.assert_allclose(histogram_equalize([4.0]), [0.5])
    with pytest.raises(ValueError):
        histogram_equalize([1.0, np.nan])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30, unique=True))
def test_histogram_equalize_monotone_idempotent(vals):
    v = np.array(vals)
    e = histogram_equalize(v)
    order = np.argsort(v)
    assert np.all(np.diff(e[order]) > 0)
    np.testing.assert_allclose(histogram_equalize(e), e)
    assert e.min() == 0.0 and e.max() == 1.0


def test_correlation_affine_invariance(rng):
    a, b = rng.standard_normal(50), rng.standard_normal(50)
    assert pearson(3 * a + 2, 0.5 * b - 1) == pytest.approx(pearson(a, b), rel=1e-12)
    assert pearson(a, np.ones(50)) is None
    assert spearman(a, a**3) == pytest.approx(1.0)


def test_report_perfect_fit():
    pr = Predictions(np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3]))
    rep = error_map_report(pr, [1.0, 2.0, 3.0])
    assert rep.mae == 0.0 and rep.r_squared == 1.0
    assert rep.corr_predvar_abserr is None and rep.corr_combined_abserr is None
    assert rep.n_points == 3


def test_report_perfect_channel():
    results = [
        PredictionResult(mean=m, predictive_var=v, propagated_var=0.5, combined_var=v + 0.5)
        for m, v in [(1.0, 0.5), (2.0, 1.0), (3.0, 2.0)]
    ]
    rep = error_map_report(results, [1.5, 3.0, 1.0])
    assert rep.corr_predvar_abserr == pytest.approx(1.0)
    assert rep.corr_propvar_abserr is None
    assert rep.corr_combined_abserr == pytest.approx(1.0)


def test_report_mask():
    pr = Predictions(np.arange(6.0), np.arange(6.0))
    rep = error_map_report(pr, np.arange(6.0) + [0, 0, 0, 1, 2, 3], mask=[0, 0, 0, 1, 1, 1])
    assert rep.n_points == 3
    assert rep.mae == 2.0
    assert rep.corr_predvar_abserr == pytest.approx(1.0)
