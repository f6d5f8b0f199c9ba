import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btcvol import features, ingest


UTC = dt.timezone.utc


def make_record(ts, **overrides):
    base = dict(created_at=ts, gif_count=0, photo_count=0, video_count=0,
                is_quote_status=False, possibly_sensitive=False,
                tweet_text="bitcoin", favourites_count=0, followers_count=0,
                friends_count=0, listed_count=0, verified=False,
                default_profile=False, default_profile_image=False)
    base.update(overrides)
    return ingest.TweetRecord(**base)


class TestLogReturns:
    def test_natural_log_unit(self):
        r = features.log_returns(np.array([1.0, np.e]))
        np.testing.assert_allclose(r, [1.0], rtol=1e-15)

    def test_constant_prices_zero(self):
        r = features.log_returns(np.array([42.0, 42.0, 42.0]))
        np.testing.assert_array_equal(r, [0.0, 0.0])

    def test_hand_value(self):
        r = features.log_returns(np.array([100.0, 110.0]))
        assert r[0] == pytest.approx(np.log(1.1), rel=1e-14)
        assert r[0] == pytest.approx(0.09531, abs=1e-5)

    def test_length_shrinks_by_one(self, rng):
        p = np.abs(rng.standard_normal(20)) + 1.0
        assert len(features.log_returns(p)) == 19

    def test_non_positive_price_rejected(self):
        with pytest.raises(ValueError):
            features.log_returns(np.array([1.0, -2.0]))
        with pytest.raises(ValueError):
            features.log_returns(np.array([5.0]))


class TestRealizedVolatility:
    def test_all_zero(self):
        assert features.realized_volatility(np.zeros(96)) == 0.0

    def test_six_eight_ten_triangle(self):
        r = np.zeros(96)
        r[0], r[1] = 0.06, 0.08
        assert features.realized_volatility(r) == pytest.approx(0.1, abs=1e-15)

    def test_equals_norm(self, rng):
        r = rng.standard_normal(96)
        assert features.realized_volatility(r) == pytest.approx(np.linalg.norm(r),
                                                                rel=1e-14)

    def test_wrong_bin_count_rejected(self):
        with pytest.raises(ValueError):
            features.realized_volatility(np.zeros(95))

    def test_invariant_to_price_rescaling(self, rng):
        prices = np.exp(rng.standard_normal(97) * 0.01).cumsum() + 50
        rv1 = features.realized_volatility(features.log_returns(prices))
        rv2 = features.realized_volatility(features.log_returns(prices * 3.7))
        assert rv1 == pytest.approx(rv2, rel=1e-12)


class TestBinTweets:
    GRID = dt.datetime(2021, 3, 1, tzinfo=UTC)

    def test_mean_of_three_tweets(self):
        records = [make_record(self.GRID + dt.timedelta(minutes=m), followers_count=f)
                   for m, f in ((1, 10), (5, 20), (14, 30))]
        bins = features.bin_tweets(records, self.GRID, 4)
        assert bins[0].count == 3
        assert bins[0].followers_count == pytest.approx(20.0)
        assert bins[1].count == 0

    def test_empty_interval_convention(self):
        bins = features.bin_tweets([], self.GRID, 3)
        for fb in bins:
            assert fb.count == 0
            assert fb.followers_count == 0.0 and fb.vader_compound == 0.0

    def test_boolean_averaging(self):
        records = [make_record(self.GRID + dt.timedelta(minutes=i), verified=v)
                   for i, v in enumerate([True, False, False, True])]
        bins = features.bin_tweets(records, self.GRID, 1)
        assert bins[0].verified == pytest.approx(0.5)

    def test_half_open_intervals(self):
        records = [make_record(self.GRID + dt.timedelta(minutes=15))]
        bins = features.bin_tweets(records, self.GRID, 2)
        assert bins[0].count == 0 and bins[1].count == 1

    def test_binning_conserves_count(self, rng):
        records = []
        for _ in range(200):
            offset = dt.timedelta(seconds=int(rng.integers(0, 96 * 900)))
            records.append(make_record(self.GRID + offset))
        records.sort(key=lambda r: r.created_at)
        bins = features.bin_tweets(records, self.GRID, 96)
        assert sum(fb.count for fb in bins) == 200

    def test_compound_means(self):
        records = [make_record(self.GRID + dt.timedelta(minutes=i)) for i in range(3)]
        bins = features.bin_tweets(records, self.GRID, 1, compounds=[0.9, -0.3, 0.0])
        assert bins[0].vader_compound == pytest.approx(0.2)


class TestSelectFeatures:
    def _bins(self):
        return features.bin_tweets([], dt.datetime(2021, 3, 1, tzinfo=UTC), 96)

    def test_count_only(self):
        sel = features.FeatureSetSelector.parse("Count")
        assert features.select_features(self._bins(), sel).shape == (96, 1)

    def test_tweet_user_inventory(self):
        sel = features.FeatureSetSelector.parse("Tweet,User")
        assert sel.width == 12
        assert features.select_features(self._bins(), sel).shape == (96, 12)

    def test_full_inventory(self):
        sel = features.FeatureSetSelector.parse("VADER,Tweet,User,Count")
        assert sel.width == 14
        assert features.select_features(self._bins(), sel).shape == (96, 14)

    def test_fixed_column_order(self):
        sel = features.FeatureSetSelector.parse("User,Count")
        assert sel.columns()[0] == "count"
        assert sel.label() == "Count, User"

    def test_empty_selector_rejected(self):
        with pytest.raises(ValueError):
            features.FeatureSetSelector.parse("")

    def test_unknown_set_rejected(self):
        with pytest.raises(ValueError):
            features.FeatureSetSelector.parse("Count,Emoji")


class TestScaler:
    def test_endpoints(self):
        scaler = features.fit_scaler(np.array([0.0, 10.0]))
        scaled = features.apply_scaler(np.array([0.0, 10.0]), scaler)
        np.testing.assert_allclose(scaled, [-0.25, 0.25], atol=1e-15)

    def test_constant_column_warns_and_maps_low(self):
        with pytest.warns(UserWarning, match="constant"):
            scaler = features.fit_scaler(np.array([3.0, 3.0, 3.0]))
        scaled = features.apply_scaler(np.array([3.0]), scaler)
        np.testing.assert_allclose(scaled, [-0.25])

    def test_test_values_exceed_band_unclipped(self):
        scaler = features.fit_scaler(np.array([0.0, 10.0]))
        scaled = features.apply_scaler(np.array([20.0]), scaler)
        assert scaled[0] == pytest.approx(0.75)

    def test_round_trip(self, rng):
        data = rng.standard_normal((50, 3)) * 7 + 2
        scaler = features.fit_scaler(data)
        back = features.invert_scaler(features.apply_scaler(data, scaler), scaler)
        np.testing.assert_allclose(back, data, atol=1e-12)

    def test_training_data_lands_in_band(self, rng):
        data = rng.standard_normal(500)
        scaled = features.apply_scaler(data, features.fit_scaler(data))
        assert scaled.min() >= -0.25 - 1e-12
        assert scaled.max() <= 0.25 + 1e-12


class TestDayAssembly:
    def _candles(self, tmp_path, days=3, drop=None):
        start = dt.datetime(2021, 3, 1, tzinfo=UTC) - dt.timedelta(minutes=15)
        path = tmp_path / "candles.csv"
        with open(path, "w") as fh:
            fh.write("timestamp,close\n")
            price = 100.0
            for k in range(days * 96 + 1):
                ts = start + k * dt.timedelta(minutes=15)
                price *= 1.0005
                if drop and k in drop:
                    continue
                fh.write(f"{ts.strftime('%Y-%m-%dT%H:%M:%SZ')},{price!r}\n")
        return path

    def test_three_days_two_windows(self, tmp_path):
        series = features.load_candles(self._candles(tmp_path, days=3))
        table = features.days_from_candles(series)
        windows = features.make_day_windows(table)
        assert len(windows) == 2

    def test_gap_within_cap_forward_filled(self, tmp_path):
        path = self._candles(tmp_path, days=2, drop={10, 11, 12})
        series = features.load_candles(path)
        table = features.days_from_candles(series)
        assert bool(table.valid.all())
        # forward-filled candles produce zero returns at the gap
        assert table.returns[0][10] == 0.0

    def test_gap_beyond_cap_drops_day(self, tmp_path):
        path = self._candles(tmp_path, days=3, drop={10, 11, 12, 13, 14})
        series = features.load_candles(path)
        with pytest.warns(UserWarning, match="cap"):
            table = features.days_from_candles(series)
        assert not table.valid[0]
        windows = features.make_day_windows(table)
        assert [w.date for w in windows] == [table.dates[2]]

    def test_partial_trailing_day_discarded(self, tmp_path):
        path = self._candles(tmp_path, days=2)
        with open(path, "a") as fh:
            fh.write("2021-03-03T00:00:00Z,123.0\n2021-03-03T00:15:00Z,124.0\n")
        series = features.load_candles(path)
        with pytest.warns(UserWarning, match="partial"):
            table = features.days_from_candles(series)
        assert len(table.dates) == 2

    def test_off_grid_timestamp_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("timestamp,close\n"
                        "2021-03-01T00:00:00Z,10.0\n"
                        "2021-03-01T00:07:00Z,11.0\n")
        with pytest.raises(ValueError):
            features.load_candles(path)


class TestDayWindows:
    def _table(self, rng, n_days):
        dates = [dt.date(2021, 3, 1) + dt.timedelta(days=i) for i in range(n_days)]
        returns = rng.uniform(-0.01, 0.01, (n_days, 96))
        return features.DayTable(dates, returns, np.ones(n_days, dtype=bool))

    def test_window_counts_for_144_days(self, rng):
        table = self._table(rng, 144)
        windows = features.make_day_windows(table)
        assert len(windows) == 143
        horizon = 96
        train = [w for w in windows if (w.date - dt.date(2021, 3, 1)).days < horizon]
        test = [w for w in windows if (w.date - dt.date(2021, 3, 1)).days >= horizon]
        assert len(train) == 95
        assert len(test) == 48

    def test_no_leakage_property(self, rng):
        table = self._table(rng, 30)
        for w in features.make_day_windows(table):
            input_end = dt.datetime.combine(w.input_date, dt.time(23, 45), tzinfo=UTC)
            target_start = dt.datetime.combine(w.date, dt.time(0, 0), tzinfo=UTC)
            assert input_end < target_start

    def test_inputs_never_share_values_with_targets(self, rng):
        table = self._table(rng, 5)
        for w in features.make_day_windows(table):
            assert not np.shares_memory(w.inputs, w.target)
            assert w.input_date < w.date

    def test_scale_windows_keeps_raw_targets(self, rng):
        table = self._table(rng, 4)
        windows = features.make_day_windows(table)
        scaler = features.fit_scaler(table.returns.reshape(-1))
        scaled = features.scale_windows(windows, scaler)
        for raw, sw in zip(windows, scaled):
            np.testing.assert_array_equal(sw.target_raw, raw.target_raw)
            assert np.abs(sw.inputs).max() <= 0.25 + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 12), st.integers(0, 2**32 - 1))
def test_no_leakage_over_generated_windows(n_days, seed):
    rng = np.random.default_rng(seed)
    dates = [dt.date(2021, 1, 1) + dt.timedelta(days=i) for i in range(n_days)]
    table = features.DayTable(dates, rng.uniform(-0.02, 0.02, (n_days, 96)),
                              np.ones(n_days, dtype=bool))
    for w in features.make_day_windows(table):
        assert w.input_date < w.date
