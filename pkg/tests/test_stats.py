import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from dualwave.errors import DataError, InputError
from dualwave.fbm import make_rng
from dualwave.stats import (
    Dataset,
    corrected_cv_ttest,
    deviance_test,
    logistic_fit,
    ols_fit,
    paired_ttest,
    stratified_folds,
    stratified_repeated_cv,
)

from oracles import (
    ACC_A,
    ACC_B,
    LOGIT_X,
    LOGIT_Y,
    PAIRED_X,
    PAIRED_Y,
    chi2_1_sf,
    corrected_t,
    newton_logistic,
    paired_t,
)


def _fixture():
    return Dataset(LOGIT_X, LOGIT_Y, ["x1", "x2"])


class TestOLS:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.integers(2, 30))
    def test_normal_equations(self, seed, n):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=n) * 3
        y = 0.7 * x + rng.normal(size=n)
        A = np.column_stack([np.ones(n), x])
        coef = np.linalg.solve(A.T @ A, A.T @ y)
        slope, intercept, rss = ols_fit(np.column_stack([x, y]))
        assert slope == pytest.approx(coef[1], rel=1e-8, abs=1e-10)
        assert intercept == pytest.approx(coef[0], rel=1e-8, abs=1e-10)
        assert rss == pytest.approx(np.sum((y - A @ coef) ** 2), rel=1e-8, abs=1e-10)

    def test_degenerate(self):
        with pytest.raises(InputError):
            ols_fit([[1.0, 2.0], [1.0, 3.0]])
        with pytest.raises(InputError):
            ols_fit([[1.0, 2.0]])


class TestLogistic:
    def test_matches_newton_oracle(self):
        beta, dev = newton_logistic(LOGIT_X, LOGIT_Y)
        fit = logistic_fit(_fixture())
        assert fit.converged
        np.testing.assert_allclose(fit.coefficients, beta, atol=1e-6)
        assert fit.deviance == pytest.approx(dev, abs=1e-6)

    def test_matches_statsmodels(self):
        sm = pytest.importorskip("statsmodels.api")
        res = sm.Logit(LOGIT_Y, sm.add_constant(LOGIT_X)).fit(disp=0, tol=1e-12)
        fit = logistic_fit(LOGIT_X, LOGIT_Y)
        np.testing.assert_allclose(fit.coefficients, res.params, atol=1e-6)
        assert fit.deviance == pytest.approx(-2 * res.llf, abs=1e-6)

    def test_score_is_zero_at_optimum(self):
        fit = logistic_fit(_fixture())
        A = np.column_stack([np.ones(20), LOGIT_X])
        p = fit.predict_proba(LOGIT_X)
        np.testing.assert_allclose(A.T @ (LOGIT_Y - p), 0, atol=1e-8)

    def test_separation_flagged(self):
        x = np.arange(10.0)
        fit = logistic_fit(x, (x > 4.5).astype(int), warn=False)
        assert not fit.converged
        assert fit.deviance < 1e-3
        pred = fit.predict_proba(x[:, None])
        assert np.all((pred >= 0.5) == (x > 4.5))

    def test_single_class_rejected(self):
        with pytest.raises(InputError):
            logistic_fit(np.arange(5.0), np.zeros(5, int))


class TestTests:
    def test_corrected_t_oracle(self):
        t_ref, p_ref = corrected_t(ACC_A, ACC_B, 5, 2, 80, 20)
        res = corrected_cv_ttest(ACC_A, ACC_B, 5, 2, 80, 20)
        assert res.statistic == pytest.approx(t_ref, abs=1e-6)
        assert res.p_value == pytest.approx(p_ref, abs=1e-6)
        assert res.df == 9

    def test_corrected_t_identical_inputs(self):
        res = corrected_cv_ttest(ACC_A, ACC_A, 5, 2, 80, 20)
        assert res.statistic == 0.0
        assert res.p_value == 0.5

    def test_corrected_t_shape_checks(self):
        with pytest.raises(InputError):
            corrected_cv_ttest(ACC_A, ACC_B, 10, 10, 80, 20)

    def test_paired_t_oracle(self):
        t_ref, p_ref = paired_t(PAIRED_X, PAIRED_Y)
        res = paired_ttest(PAIRED_X, PAIRED_Y)
        assert res.statistic == pytest.approx(t_ref, abs=1e-6)
        assert res.p_value == pytest.approx(p_ref, abs=1e-6)
        scipy_res = sps.ttest_rel(PAIRED_X, PAIRED_Y)
        assert res.p_value == pytest.approx(scipy_res.pvalue, abs=1e-12)

    def test_paired_t_zero_variance(self):
        assert paired_ttest([1.0, 2.0], [1.0, 2.0]).p_value == 1.0
        res = paired_ttest([2.0, 3.0], [1.0, 2.0])
        assert res.statistic == math.inf and res.p_value == 0.0

    def test_deviance_oracle(self):
        _, dev_reduced = newton_logistic(LOGIT_X[:, :1], LOGIT_Y)
        _, dev_full = newton_logistic(LOGIT_X, LOGIT_Y)
        res = deviance_test(_fixture(), ["x1"], ["x1", "x2"])
        assert res.statistic == pytest.approx(dev_reduced - dev_full, abs=1e-6)
        assert res.p_value == pytest.approx(chi2_1_sf(dev_reduced - dev_full), abs=1e-6)
        assert res.details["added"] == "x2"

    def test_deviance_requires_nesting(self):
        with pytest.raises(InputError):
            deviance_test(_fixture(), ["x1"], ["x2"])
        with pytest.raises(DataError):
            deviance_test(_fixture(), ["x1"], ["x1", "x9"])

    def test_label_column_as_feature(self):
        rng = np.random.default_rng(0)
        y = np.repeat([0, 1], 30)
        noise = rng.normal(size=60)
        data = Dataset(np.column_stack([noise, y]), y, ["noise", "oracle"])
        res = deviance_test(data, ["noise"], ["noise", "oracle"])
        assert res.p_value < 1e-10
        cv = stratified_repeated_cv(data.select(["oracle"]), 5, 2)
        assert cv.summary()["accuracy"]["mean"] == 1.0


class TestCrossValidation:
    def test_folds_are_stratified(self):
        labels = np.repeat([0, 1], [23, 17])
        folds = stratified_folds(labels, 5, make_rng(1))
        for f in range(5):
            assert np.sum((folds == f) & (labels == 0)) in (4, 5)
            assert np.sum((folds == f) & (labels == 1)) in (3, 4)

    def test_shared_splits_and_determinism(self):
        data = _fixture()
        a = stratified_repeated_cv(data.select(["x1"]), 5, 3, seed=4)
        b = stratified_repeated_cv(data.select(["x1"]), 5, 3, seed=4)
        assert [vars(f) for f in a.per_fold] == [vars(f) for f in b.per_fold]
        assert len(a.per_fold) == 15
        assert a.n_train == 16 and a.n_test == 4

    def test_duplicated_set_gives_half(self):
        data = _fixture()
        a = stratified_repeated_cv(data, 5, 2, seed=1)
        b = stratified_repeated_cv(data, 5, 2, seed=1)
        res = corrected_cv_ttest(a.metric("accuracy"), b.metric("accuracy"), 5, 2, a.n_train, a.n_test)
        assert res.p_value == 0.5

    def test_confusion_counts(self):
        rep = stratified_repeated_cv(_fixture(), 4, 2, seed=2)
        for f in rep.per_fold:
            assert f.tp + f.tn + f.fp + f.fn == 5
            assert f.accuracy == pytest.approx((f.tp + f.tn) / 5)
        s = rep.summary()
        assert set(s) == {"sensitivity", "specificity", "accuracy"}

    def test_too_few_per_class(self):
        data = Dataset(np.arange(6.0), [0, 0, 0, 1, 1, 1], ["x"])
        with pytest.raises(InputError):
            stratified_repeated_cv(data, 5, 1)


class TestDataset:
    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        data = Dataset(rng.normal(size=(7, 3)) * 1e-3, [0, 1, 0, 1, 1, 0, 1], ["a", "b", "c"])
        data.features[2, 1] = np.nan
        path = tmp_path / "d.csv"
        data.to_csv(path)
        back = Dataset.from_csv(path, allow_missing=True)
        np.testing.assert_array_equal(back.features, data.features)
        np.testing.assert_array_equal(back.labels, data.labels)
        assert back.feature_names == ["a", "b", "c"]
        with pytest.raises(DataError):
            Dataset.from_csv(path)
        assert back.complete_rows().n == 6

    def test_non_numeric_columns_skipped(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("path,H,label\nx.pgm,0.3,0\ny.pgm,0.5,1\n")
        data = Dataset.from_csv(path)
        assert data.feature_names == ["H"]

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataError):
            Dataset.from_csv(path)

    def test_validation(self):
        with pytest.raises(InputError):
            Dataset(np.zeros((3, 1)), [0, 1, 2], ["x"])
        with pytest.raises(InputError):
            Dataset(np.zeros((3, 2)), [0, 1, 1], ["x"])
