import datetime as dt
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btcvol import ingest

from conftest import fixture_path


def general_tweet(text="bitcoin is good", **extra):
    raw = {
        "created_at": "Mon Mar 01 10:15:30 +0000 2021",
        "id": 1, "id_str": "1", "text": text,
        "entities": {"hashtags": []},
        "in_reply_to_status_id": None,
        "user": {"favourites_count": 4, "followers_count": 100,
                 "friends_count": 50, "listed_count": 2, "verified": True,
                 "default_profile": False, "default_profile_image": False,
                 "name": "x", "statuses_count": 10},
        "is_quote_status": False, "possibly_sensitive": False,
        "lang": "en", "retweet_count": 0,
    }
    raw.update(extra)
    return raw


class TestFilterRelevant:
    def test_direct_substring(self):
        assert ingest.filter_relevant("I love Bitcoin today")

    def test_no_match(self):
        assert not ingest.filter_relevant("ethereum only")

    def test_cashtag(self):
        assert ingest.filter_relevant("$BTC to the moon")

    def test_ticker_case_sensitivity(self):
        assert not ingest.filter_relevant("btc lowercase ticker")
        assert ingest.filter_relevant("btc lowercase ticker",
                                      case_sensitive_tickers=False)

    def test_name_matches_any_case(self):
        assert ingest.filter_relevant("BiTcOiN mixed case")


class TestRefactorPrune:
    def test_general_tweet_with_two_photos(self):
        raw = general_tweet(extended_entities={
            "media": [{"type": "photo"}, {"type": "photo"}]})
        rec = ingest.refactor_prune(json.dumps(raw))
        assert rec.photo_count == 2
        assert rec.gif_count == 0 and rec.video_count == 0
        assert rec.is_quote_status is False
        assert rec.created_at == dt.datetime(2021, 3, 1, 10, 15, 30,
                                             tzinfo=dt.timezone.utc)

    def test_retweet_collapses_to_flag(self):
        inner = general_tweet(text="original body")
        raw = general_tweet(text="RT @x: original body", retweeted_status=inner)
        rec = ingest.refactor_prune(json.dumps(raw))
        assert rec.is_quote_status is True
        assert rec.tweet_text == "RT @x: original body"
        assert not hasattr(rec, "retweeted_status")

    def test_reply_sets_flag(self):
        raw = general_tweet(in_reply_to_status_id=99)
        assert ingest.refactor_prune(json.dumps(raw)).is_quote_status is True

    def test_missing_numeric_defaults_zero(self):
        raw = general_tweet()
        del raw["user"]["listed_count"]
        stats = ingest.IngestStats()
        rec = ingest.refactor_prune(json.dumps(raw), stats)
        assert rec.listed_count == 0
        assert stats.defaults_applied == 1

    def test_missing_boolean_defaults_false(self):
        raw = general_tweet()
        del raw["possibly_sensitive"]
        rec = ingest.refactor_prune(json.dumps(raw))
        assert rec.possibly_sensitive is False

    def test_malformed_line_raises(self):
        with pytest.raises(ValueError):
            ingest.refactor_prune("{not json")
        with pytest.raises(ValueError):
            ingest.refactor_prune("[1, 2]")
        with pytest.raises(ValueError):
            ingest.refactor_prune(json.dumps({"id": 5}))

    def test_idempotent_on_flat_records(self):
        raw = general_tweet(extended_entities={"media": [{"type": "video"}]})
        rec = ingest.refactor_prune(json.dumps(raw))
        again = ingest.refactor_prune(json.dumps(ingest.record_as_flat_dict(rec)))
        assert again == rec

    def test_schema_has_exactly_fourteen_fields(self):
        assert len(ingest.TABLE_FIELDS) == 14
        rec = ingest.refactor_prune(json.dumps(general_tweet()))
        assert set(rec.__dataclass_fields__) == set(ingest.TABLE_FIELDS)


class TestIngestLines:
    def test_reject_accounting(self):
        lines = [json.dumps(general_tweet()) for _ in range(9)]
        lines.insert(4, "{broken json")
        records, stats = ingest.ingest_lines(lines)
        assert len(records) == 9
        assert stats.rejects == 1
        assert stats.lines == 10

    def test_irrelevant_filtered(self):
        lines = [json.dumps(general_tweet()),
                 json.dumps(general_tweet(text="ethereum gas price"))]
        records, stats = ingest.ingest_lines(lines)
        assert len(records) == 1
        assert stats.irrelevant == 1

    def test_empty_input(self):
        records, stats = ingest.ingest_lines([])
        assert records == [] and stats.lines == 0 and stats.rejects == 0


class TestWriteSorted:
    def _record(self, minute, second=0, text="bitcoin is good"):
        raw = general_tweet(text=text)
        raw["created_at"] = f"Mon Mar 01 10:{minute:02d}:{second:02d} +0000 2021"
        return ingest.refactor_prune(json.dumps(raw))

    def test_shuffled_input_sorted_by_timestamp(self, tmp_path):
        records = [self._record(30), self._record(5), self._record(59)]
        path = tmp_path / "t.csv"
        ingest.write_sorted(records, path)
        loaded, _ = ingest.read_table(path)
        minutes = [r.created_at.minute for r in loaded]
        assert minutes == [5, 30, 59]

    def test_duplicate_timestamps_keep_input_order(self, tmp_path):
        records = [self._record(10, text="bitcoin first"),
                   self._record(10, text="bitcoin second"),
                   self._record(10, text="bitcoin third")]
        path = tmp_path / "t.csv"
        ingest.write_sorted(records, path)
        loaded, _ = ingest.read_table(path)
        assert [r.tweet_text for r in loaded] == ["bitcoin first", "bitcoin second",
                                                  "bitcoin third"]

    def test_round_trip_many_records(self, tmp_path, rng):
        records = []
        for i in range(1000):
            raw = general_tweet(text=f"bitcoin tick {i}")
            raw["created_at"] = (
                f"Mon Mar 01 {int(rng.integers(24)):02d}:"
                f"{int(rng.integers(60)):02d}:{int(rng.integers(60)):02d} +0000 2021")
            raw["user"]["followers_count"] = int(rng.integers(1_000_000))
            records.append(ingest.refactor_prune(json.dumps(raw)))
        compounds = [float(v) for v in rng.uniform(-1, 1, 1000)]
        path = tmp_path / "t.csv"
        ingest.write_sorted(records, path, compounds)
        loaded, loaded_compounds = ingest.read_table(path)
        order = sorted(range(1000), key=lambda i: records[i].created_at)
        assert loaded == [records[i] for i in order]
        assert loaded_compounds == [compounds[i] for i in order]


class TestGoldenFixture:
    def test_fifty_tweet_fixture_matches_golden_table(self, tmp_path):
        with open(fixture_path("raw_tweets_50.jsonl")) as fh:
            records, stats = ingest.ingest_lines(fh)
        assert stats.kept == 50 and stats.rejects == 0

        from btcvol import vader
        lexicon = vader.load_lexicon()
        compounds = [vader.vader_compound(r.tweet_text, lexicon).compound
                     for r in records]
        out = tmp_path / "table.csv"
        ingest.write_sorted(records, out, compounds)
        with open(out, "rb") as fh:
            produced = fh.read()
        with open(fixture_path("golden_tweet_table.csv"), "rb") as fh:
            golden = fh.read()
        assert produced == golden


@settings(max_examples=150, deadline=None)
@given(st.dictionaries(
    keys=st.sampled_from(["text", "full_text", "possibly_sensitive",
                          "is_quote_status", "in_reply_to_status_id",
                          "entities", "extended_entities", "user", "lang",
                          "retweet_count", "geo"]),
    values=st.one_of(st.none(), st.booleans(), st.integers(-5, 5),
                     st.text(max_size=8),
                     st.dictionaries(st.sampled_from(
                         ["followers_count", "friends_count", "verified",
                          "favourites_count", "listed_count", "media"]),
                         st.one_of(st.none(), st.integers(0, 9), st.booleans())))))
def test_schema_closure_over_randomized_raw_inputs(extra):
    raw = {"created_at": "Mon Mar 01 00:00:05 +0000 2021"}
    raw.update(extra)
    record = ingest.refactor_prune(json.dumps(raw))
    for name in ingest.TABLE_FIELDS:
        assert hasattr(record, name)
    assert isinstance(record.gif_count, int)
    assert isinstance(record.is_quote_status, bool)
    assert isinstance(record.tweet_text, str)
