import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btcvol import evaluation

from conftest import fixture_path


def direct_metrics(y, y_hat):
    """Independent direct-summation evaluation of the four formulas."""
    n = len(y)
    mape = sum(abs((a - b) / a) for a, b in zip(y, y_hat)) / n
    mae = sum(abs(a - b) for a, b in zip(y, y_hat)) / n
    rmse = math.sqrt(sum((a - b) ** 2 for a, b in zip(y, y_hat)) / n)
    msle = sum((math.log(a + 1) - math.log(b + 1)) ** 2 for a, b in zip(y, y_hat)) / n
    return mape, mae, rmse, msle


class TestMetrics:
    def test_perfect_predictions(self, rng):
        y = np.abs(rng.standard_normal(20)) + 0.5
        m = evaluation.metrics(y, y.copy())
        assert (m.mape, m.mae, m.rmse, m.msle) == (0.0, 0.0, 0.0, 0.0)

    def test_hand_case(self):
        m = evaluation.metrics([2.0], [1.0])
        assert m.mape == pytest.approx(0.5, abs=1e-15)
        assert m.mae == pytest.approx(1.0, abs=1e-15)
        assert m.rmse == pytest.approx(1.0, abs=1e-15)
        assert m.msle == pytest.approx((math.log(3) - math.log(2)) ** 2, rel=1e-12)
        assert m.msle == pytest.approx(0.1644, abs=1e-4)

    def test_double_prediction_gives_unit_mape(self, rng):
        y = np.abs(rng.standard_normal(15)) + 0.5
        m = evaluation.metrics(y, 2 * y)
        assert m.mape == pytest.approx(1.0, rel=1e-12)

    def test_matches_direct_summation_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 40))
            y = np.abs(rng.standard_normal(n)) + 0.1
            y_hat = np.abs(rng.standard_normal(n)) + 0.1
            m = evaluation.metrics(y, y_hat)
            mape, mae, rmse, msle = direct_metrics(y, y_hat)
            assert m.mape == pytest.approx(mape, abs=1e-12)
            assert m.mae == pytest.approx(mae, abs=1e-12)
            assert m.rmse == pytest.approx(rmse, abs=1e-12)
            assert m.msle == pytest.approx(msle, abs=1e-12)

    def test_zero_true_value_marks_relative_metrics_undefined(self):
        m = evaluation.metrics([1.0, 0.0], [1.0, 1.0])
        assert math.isnan(m.mape) and math.isnan(m.msle)
        assert math.isfinite(m.mae) and math.isfinite(m.rmse)

    def test_rmse_at_least_mae(self, rng):
        for _ in range(30):
            y = np.abs(rng.standard_normal(12)) + 0.5
            y_hat = np.abs(rng.standard_normal(12)) + 0.5
            m = evaluation.metrics(y, y_hat)
            assert m.rmse >= m.mae - 1e-12

    def test_rmse_equals_mae_for_equal_absolute_errors(self):
        m = evaluation.metrics([1.0, 2.0, 3.0], [1.5, 1.5, 3.5])
        assert m.rmse == pytest.approx(m.mae, rel=1e-12)

    def test_permutation_invariance(self, rng):
        y = np.abs(rng.standard_normal(10)) + 0.5
        y_hat = np.abs(rng.standard_normal(10)) + 0.5
        m1 = evaluation.metrics(y, y_hat)
        perm = rng.permutation(10)
        m2 = evaluation.metrics(y[perm], y_hat[perm])
        for name in evaluation.METRIC_NAMES:
            assert getattr(m1, name) == pytest.approx(getattr(m2, name), rel=1e-12)

    def test_msle_symmetric_in_log1p_form(self, rng):
        y = np.abs(rng.standard_normal(8)) + 0.5
        y_hat = np.abs(rng.standard_normal(8)) + 0.5
        assert evaluation.metrics(y, y_hat).msle == pytest.approx(
            evaluation.metrics(y_hat, y).msle, rel=1e-12)

    def test_under_vs_over_prediction_penalty_ordering(self):
        # at realized-volatility scale an under-prediction by factor c is
        # penalized more than an over-prediction by the same factor
        for y, c in ((2.0, 1.5), (5.0, 2.0), (1.0, 3.0)):
            under = evaluation.metrics([y], [y / c]).msle
            over = evaluation.metrics([y], [y * c]).msle
            expected_under = (math.log(y / c + 1) - math.log(y + 1)) ** 2
            expected_over = (math.log(y * c + 1) - math.log(y + 1)) ** 2
            assert under == pytest.approx(expected_under, rel=1e-12)
            assert over == pytest.approx(expected_over, rel=1e-12)
            assert (under > over) == (expected_under > expected_over)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            evaluation.metrics([1.0, 2.0], [1.0])


class TestOneSidedT:
    def test_identical_means_give_half(self):
        a = [1.0, 2.0, 3.0]
        b = [1.5, 2.0, 2.5]
        assert evaluation.one_sided_t(a, b, kind="welch") == pytest.approx(0.5)
        assert evaluation.one_sided_t(a, b, kind="student") == pytest.approx(0.5)

    def test_extreme_separation(self, rng):
        baseline = 1.0
        model = 0.5 + 0.001 * rng.standard_normal(20)   # 500 sigma below
        p = evaluation.one_sided_t([baseline], model, kind="student")
        assert p < 1e-6

    def test_matches_fixture(self):
        with open(fixture_path("ttest_fixture.json")) as fh:
            fx = json.load(fh)
        assert evaluation.one_sided_t(fx["baseline_scores"], fx["model_scores"],
                                      kind="welch") == pytest.approx(fx["welch_p"],
                                                                     abs=1e-4)
        assert evaluation.one_sided_t(fx["baseline_scores"], fx["model_scores"],
                                      kind="student") == pytest.approx(
            fx["student_two_sample_p"], abs=1e-4)
        assert evaluation.one_sided_t([fx["baseline_fixed"]], fx["model_scores"],
                                      kind="student") == pytest.approx(
            fx["one_sample_p"], abs=1e-4)
        # tighter than the stated tolerance: the statistic path is exact
        assert evaluation.one_sided_t(fx["baseline_scores"], fx["model_scores"],
                                      kind="welch") == pytest.approx(fx["welch_p"],
                                                                     rel=1e-9)

    def test_zero_variance_in_both_samples_rejected(self):
        with pytest.raises(ValueError):
            evaluation.one_sided_t([1.0], [2.0, 2.0, 2.0], kind="student")
        with pytest.raises(ValueError):
            evaluation.one_sided_t([1.0, 1.0], [2.0, 2.0], kind="welch")

    def test_single_model_score_rejected(self):
        with pytest.raises(ValueError):
            evaluation.one_sided_t([1.0, 2.0], [1.0], kind="welch")

    def test_worse_model_gives_large_p(self, rng):
        baseline = 0.2
        model = 0.4 + 0.01 * rng.standard_normal(10)
        assert evaluation.one_sided_t([baseline], model, kind="student") > 0.999


class TestSignificanceCodes:
    @pytest.mark.parametrize("p,code", [
        (0.0005, "***"), (0.0009999, "***"),
        (0.001, "**"), (0.005, "**"),
        (0.01, "*"), (0.03, "*"),
        (0.05, "."), (0.09, "."),
        (0.1, ""), (0.5, ""),
    ])
    def test_thresholds(self, p, code):
        assert evaluation.significance_code(p) == code


class TestBootstrapBand:
    def test_identical_runs_zero_width(self):
        preds = np.tile([1.0, 2.0, 3.0], (5, 1))
        band = evaluation.bootstrap_band(preds, samples=200, seed=1)
        np.testing.assert_allclose(band.lower, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(band.upper, [1.0, 2.0, 3.0])

    def test_band_contains_cross_run_mean(self, rng):
        preds = rng.standard_normal((8, 12))
        band = evaluation.bootstrap_band(preds, samples=1000, seed=3)
        assert np.all(band.lower <= band.mean + 1e-12)
        assert np.all(band.mean <= band.upper + 1e-12)

    def test_two_run_band_within_support(self):
        preds = np.array([[0.0, 0.0], [1.0, 1.0]])
        band = evaluation.bootstrap_band(preds, samples=500, seed=5)
        assert np.all(band.lower >= 0.0) and np.all(band.upper <= 1.0)

    def test_deterministic_under_fixed_seed(self, rng):
        preds = rng.standard_normal((6, 10))
        a = evaluation.bootstrap_band(preds, samples=400, seed=11)
        b = evaluation.bootstrap_band(preds, samples=400, seed=11)
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.upper, b.upper)

    def test_single_run_rejected(self):
        with pytest.raises(ValueError):
            evaluation.bootstrap_band(np.ones((1, 5)))


class TestPercentileMape:
    def test_perfect_predictions_zero_everywhere(self, rng):
        y = np.abs(rng.standard_normal(48)) + 0.5
        out = evaluation.percentile_mape(y, {"m": y.copy()})
        assert out["m"] == [0.0, 0.0, 0.0, 0.0]

    def test_uniform_days_split_evenly(self):
        y = np.arange(1.0, 49.0)
        preds = y * 1.1
        out = evaluation.percentile_mape(y, {"m": preds})
        edges = np.percentile(y, [25, 50, 75])
        counts = [np.sum(np.searchsorted(edges, y, side="left") == b) for b in range(4)]
        assert counts == [12, 12, 12, 12]
        assert all(v == pytest.approx(0.1, rel=1e-9) for v in out["m"])

    def test_bucketed_values_recombine_to_global(self, rng):
        y = np.abs(rng.standard_normal(48)) + 0.5
        preds = y * (1 + 0.2 * rng.standard_normal(48))
        out = evaluation.percentile_mape(y, {"m": preds})
        edges = np.percentile(y, [25, 50, 75])
        assignment = np.searchsorted(edges, y, side="left")
        sizes = [int(np.sum(assignment == b)) for b in range(4)]
        combined = sum(v * s for v, s in zip(out["m"], sizes)) / sum(sizes)
        global_mape = evaluation.metrics(y, preds).mape
        assert combined == pytest.approx(global_mape, abs=1e-12)


class TestRenderTable:
    def _entries(self):
        baseline = evaluation.SignificanceEntry(
            label="arrv", runs=1,
            means={m: 0.3 for m in evaluation.METRIC_NAMES},
            stds={m: 0.0 for m in evaluation.METRIC_NAMES},
            pvalues=None)
        model = evaluation.SignificanceEntry(
            label="tcn", runs=20,
            means={m: 0.25 for m in evaluation.METRIC_NAMES},
            stds={m: 0.01 for m in evaluation.METRIC_NAMES},
            pvalues={"mape": 0.0005, "mae": 0.03, "rmse": 0.2, "msle": 0.07})
        return [baseline, model]

    def test_stars_follow_thresholds(self):
        text = evaluation.render_table(self._entries(), baseline="arrv")
        row = [line for line in text.splitlines() if line.startswith("tcn")][0]
        assert "***" in row and "*" in row and "." in row

    def test_baseline_row_unstarred(self):
        text = evaluation.render_table(self._entries(), baseline="arrv")
        row = [line for line in text.splitlines() if line.startswith("arrv")][0]
        assert "*" not in row

    def test_csv_emission(self, tmp_path):
        path = tmp_path / "table.csv"
        evaluation.write_table_csv(self._entries(), path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("model,runs,mape_mean")
        assert len(lines) == 3
        assert "***" in lines[2]


class TestPlot:
    def test_svg_written_with_and_without_band(self, tmp_path, rng):
        true = np.abs(rng.standard_normal(10)) + 1
        preds = np.abs(rng.standard_normal((4, 10))) + 1
        band = evaluation.bootstrap_band(preds, samples=100, seed=0)
        dates = [f"2021-03-{d:02d}" for d in range(1, 11)]
        p1 = tmp_path / "with_band.svg"
        evaluation.plot_predictions(dates, true, preds.mean(axis=0), band, p1, "tcn")
        p2 = tmp_path / "no_band.svg"
        evaluation.plot_predictions(dates, true, preds.mean(axis=0), None, p2, "arrv")
        assert p1.read_text().startswith("<?xml")
        assert "polygon" in p1.read_text() or "path" in p1.read_text()
        assert p2.stat().st_size > 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 50.0), min_size=1, max_size=30),
       st.integers(0, 2**31 - 1))
def test_metrics_always_non_negative(y, seed):
    rng = np.random.default_rng(seed)
    y = np.asarray(y)
    y_hat = np.abs(rng.standard_normal(len(y))) + 0.05
    m = evaluation.metrics(y, y_hat)
    for name in evaluation.METRIC_NAMES:
        assert getattr(m, name) >= 0.0
