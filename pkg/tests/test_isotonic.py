"""Pool-adjacent-violators fit, step prediction, and the canonical sort."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isorate.isotonic import IsotonicFit, loading_apply, pava_fit, sort_permutation

from .helpers import isotonic_exhaustive


class TestSortPermutation:
    def test_primary_order(self):
        p = np.array([3.0, 1.0, 2.0])
        idx = sort_permutation(p, np.zeros(3))
        assert list(idx) == [1, 2, 0]

    def test_ties_broken_by_secondary(self):
        p = np.array([1.0, 1.0, 0.0])
        tie = np.array([5.0, 2.0, 9.0])
        assert list(sort_permutation(p, tie)) == [2, 1, 0]

    def test_full_ties_keep_input_order(self):
        idx = sort_permutation(np.ones(4), np.ones(4))
        assert list(idx) == [0, 1, 2, 3]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            sort_permutation(np.ones(3), np.ones(2))


class TestPavaFit:
    def test_monotone_input_unchanged(self):
        x = np.array([1.0, 2.0, 3.0])
        y = np.array([1.0, 2.0, 5.0])
        fit = pava_fit(x, y)
        np.testing.assert_array_equal(fit.fitted, y)
        assert fit.n_blocks == 3

    def test_single_violation_pools_pair(self):
        fit = pava_fit([1.0, 2.0, 3.0], [1.0, 3.0, 2.0])
        np.testing.assert_allclose(fit.fitted, [1.0, 2.5, 2.5], rtol=1e-15)

    def test_weighted_pool_uses_weighted_mean(self):
        fit = pava_fit([1.0, 2.0], [2.0, 1.0], weights=[1.0, 3.0])
        np.testing.assert_allclose(fit.fitted, [1.25, 1.25], rtol=1e-15)

    def test_ties_on_x_pool_before_fit(self):
        fit = pava_fit([1.0, 1.0, 2.0], [5.0, 1.0, 2.0])
        np.testing.assert_allclose(fit.fitted, [8 / 3, 8 / 3, 8 / 3], rtol=1e-15)
        assert fit.x.size == 2

    def test_decreasing_input_pools_to_global_mean(self):
        y = np.array([4.0, 3.0, 2.0, 1.0])
        fit = pava_fit(np.arange(4.0), y)
        np.testing.assert_allclose(fit.fitted, np.full(4, 2.5), rtol=1e-15)
        assert fit.n_blocks == 1

    def test_unsorted_input_handled(self):
        x = np.array([3.0, 1.0, 2.0])
        y = np.array([2.0, 1.0, 3.0])
        fit = pava_fit(x, y)
        ref = pava_fit(np.sort(x), y[np.argsort(x)])
        np.testing.assert_allclose(np.sort(fit.fitted), np.sort(ref.fitted), rtol=1e-15)
        # fitted is reported in input order
        assert fit.fitted[1] <= fit.fitted[2] <= fit.fitted[0] + 1e-15

    @pytest.mark.parametrize(
        "bad",
        [
            lambda: pava_fit([], []),
            lambda: pava_fit([1.0, 2.0], [1.0]),
            lambda: pava_fit([1.0], [np.inf]),
            lambda: pava_fit([1.0, 2.0], [1.0, 2.0], weights=[1.0, 0.0]),
            lambda: pava_fit([1.0, 2.0], [1.0, 2.0], weights=[1.0, -1.0]),
            lambda: pava_fit([1.0, 2.0], [1.0, 2.0], weights=[1.0]),
        ],
    )
    def test_invalid_input_rejected(self, bad):
        with pytest.raises(ValueError):
            bad()

    def test_matches_exhaustive_oracle_on_fixture(self):
        rng = np.random.default_rng(314)
        for _ in range(50):
            n = rng.integers(1, 9)
            x = rng.uniform(0, 10, n)
            y = rng.normal(0, 2, n)
            w = rng.uniform(0.1, 3.0, n)
            fit = pava_fit(x, y, w)
            oracle = isotonic_exhaustive(x, y, w)
            np.testing.assert_allclose(fit.fitted, oracle, atol=1e-10)

    @settings(max_examples=80, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(0, 100), st.floats(-50, 50), st.floats(0.1, 5.0)),
            min_size=1,
            max_size=30,
        )
    )
    def test_property_fitted_is_monotone_and_mean_preserving(self, rows):
        x = np.array([r[0] for r in rows])
        y = np.array([r[1] for r in rows])
        w = np.array([r[2] for r in rows])
        fit = pava_fit(x, y, w)
        order = np.argsort(x, kind="stable")
        assert np.all(np.diff(fit.fitted[order]) >= -1e-9)
        assert np.dot(w, fit.fitted) == pytest.approx(np.dot(w, y), rel=1e-9, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(0, 100), st.floats(-50, 50)),
            min_size=1,
            max_size=20,
        )
    )
    def test_property_idempotent(self, rows):
        x = np.array([r[0] for r in rows])
        y = np.array([r[1] for r in rows])
        fit = pava_fit(x, y)
        again = pava_fit(x, fit.fitted)
        np.testing.assert_allclose(again.fitted, fit.fitted, atol=1e-9)


class TestPredict:
    def fit(self):
        return IsotonicFit(
            x=np.array([1.0, 2.0, 3.0]),
            values=np.array([10.0, 20.0, 30.0]),
            fitted=np.array([10.0, 20.0, 30.0]),
        )

    def test_right_continuous_at_knots(self):
        fit = self.fit()
        np.testing.assert_array_equal(fit.predict([1.0, 2.0, 3.0]), [10.0, 20.0, 30.0])
        np.testing.assert_array_equal(fit.predict([1.999999, 2.000001]), [10.0, 20.0])

    def test_flat_extrapolation(self):
        fit = self.fit()
        np.testing.assert_array_equal(fit.predict([-5.0, 0.99, 3.01, 100.0]), [10.0, 10.0, 30.0, 30.0])

    def test_loading_apply_delegates(self):
        fit = self.fit()
        np.testing.assert_array_equal(loading_apply(fit, [2.5]), [20.0])

    def test_predict_matches_fitted_at_training_points(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(0, 5, 25)
        y = rng.normal(0, 1, 25)
        fit = pava_fit(x, y)
        np.testing.assert_allclose(fit.predict(x), fit.fitted, rtol=1e-15)
