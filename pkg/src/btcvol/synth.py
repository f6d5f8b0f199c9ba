"""Synthetic desk-scale dataset: 15-minute candles plus a raw tweet stream.

Prices follow a stochastic-volatility process with persistence, a
deterministic signed intraday pattern, and a day-shape factor (how much
of the day's energy sits in the second half) that feeds next-day
volatility. Tweets are generated per 15-minute bin with per-day latent
factors behind the user statistics, media usage, sentiment and volume;
each factor can be coupled into next-day volatility independently, so a
feature set is informative exactly when its coupling is switched on.

Tweet objects are emitted in the raw streaming-API shape (nested user
object, entities, retweet/quote/reply nesting and a pile of fields the
ingest stage is expected to prune).
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np

from .features import BIN_DELTA, DAY_BINS

_CLASSIC_FORMAT = "%a %b %d %H:%M:%S +0000 %Y"


@dataclass
class SynthConfig:
    days: int = 144
    seed: int = 0
    start: dt.date = dt.date(2021, 1, 1)
    base_price: float = 30000.0
    daily_vol: float = 0.02
    persistence: float = 0.75        # day-to-day log-vol autocorrelation
    vol_noise: float = 0.06
    shape_coupling: float = 0.9      # weight of the day-shape factor in next-day vol
    location_share: float = 0.9      # deterministic fraction of intraday energy
    user_coupling: float = 0.0
    tweet_coupling: float = 0.0
    vader_coupling: float = 0.0
    count_coupling: float = 0.0
    tweets_per_bin: float = 3.0
    irrelevant_fraction: float = 0.08


@dataclass
class SynthData:
    candles: list            # (datetime, close) on the 15-minute grid
    tweet_lines: list        # raw JSON strings, one tweet each
    day_sigma: np.ndarray    # latent daily volatility
    day_factors: dict        # latent per-day factor arrays


def _intraday_pattern() -> tuple[np.ndarray, np.ndarray]:
    """Signed base pattern, normalized to unit mean square per half-day."""
    b = np.arange(DAY_BINS)
    raw = np.sin(2 * np.pi * b / DAY_BINS + 0.7) + 0.25 * np.cos(4 * np.pi * b / DAY_BINS)
    half = DAY_BINS // 2
    first = raw[:half] / np.sqrt(np.mean(raw[:half] ** 2))
    second = raw[half:] / np.sqrt(np.mean(raw[half:] ** 2))
    return first, second


POSITIVE_PHRASES = [
    "{tag} looking bullish today, great momentum",
    "huge gains on {tag}, love this rally",
    "{tag} to the moon, incredible strength",
    "so optimistic about {tag}, best asset this year",
    "{tag} breakout confirmed, amazing profits ahead",
]
NEGATIVE_PHRASES = [
    "{tag} crash incoming, terrible chart",
    "dumped all my {tag}, this is a scam",
    "{tag} looking bearish, fear everywhere",
    "brutal selloff on {tag}, massive losses",
    "{tag} bubble about to collapse, panic mode",
]
NEUTRAL_PHRASES = [
    "{tag} trading sideways on the 15m chart",
    "watching {tag} order books this afternoon",
    "daily {tag} volume report is out",
    "{tag} hashrate unchanged since yesterday",
    "new {tag} futures contract listed today",
]
IRRELEVANT_PHRASES = [
    "ethereum gas fees are wild today",
    "stock futures flat ahead of the open",
    "new phone battery lasts two days",
    "coffee prices keep climbing this winter",
]
TAGS = ["BTC", "$BTC", "Bitcoin", "bitcoin"]

SCREEN_NAMES = ["satstacker", "chartwatcher", "hodlqueen", "macrodan", "blockparty",
                "minerforty", "swingtina", "orderflowed", "nightcandle", "volhunter"]


def _user_object(rng: np.random.Generator, u: float) -> dict:
    followers = int(np.exp(5.5 + 1.2 * u + 0.5 * rng.standard_normal()))
    friends = int(np.exp(5.0 + 1.0 * u + 0.45 * rng.standard_normal()))
    favourites = int(np.exp(6.0 + 0.8 * u + 0.6 * rng.standard_normal()))
    listed = int(np.exp(1.5 + 1.0 * u + 0.5 * rng.standard_normal()))
    verified = bool(rng.random() < 1.0 / (1.0 + np.exp(1.5 - 2.0 * u)))
    default_profile = bool(rng.random() < 1.0 / (1.0 + np.exp(1.5 * u)))
    name = SCREEN_NAMES[int(rng.integers(len(SCREEN_NAMES)))]
    return {
        "id": int(rng.integers(10**8, 10**9)),
        "id_str": str(int(rng.integers(10**8, 10**9))),
        "name": name.capitalize(),
        "screen_name": name + str(int(rng.integers(100))),
        "location": None,
        "url": None,
        "description": "charts and coffee",
        "translator_type": "none",
        "protected": False,
        "verified": verified,
        "followers_count": followers,
        "friends_count": friends,
        "listed_count": listed,
        "favourites_count": favourites,
        "statuses_count": int(rng.integers(10, 50000)),
        "created_at": "Wed Mar 18 09:12:45 +0000 2015",
        "geo_enabled": False,
        "lang": None,
        "contributors_enabled": False,
        "is_translator": False,
        "profile_background_color": "F5F8FA",
        "profile_link_color": "1DA1F2",
        "profile_image_url_https": "https://example.invalid/avatar.png",
        "default_profile": default_profile,
        "default_profile_image": bool(rng.random() < 0.08),
        "following": None,
        "follow_request_sent": None,
        "notifications": None,
    }


def _media_entities(rng: np.random.Generator, w: float) -> tuple[dict, dict | None]:
    photos = int(rng.poisson(0.25 * np.exp(0.5 * w)))
    gifs = int(rng.poisson(0.06 * np.exp(0.4 * w)))
    videos = int(rng.poisson(0.10 * np.exp(0.5 * w)))
    media = ([{"id": int(rng.integers(10**9)), "type": "photo"}] * photos
             + [{"id": int(rng.integers(10**9)), "type": "animated_gif"}] * gifs
             + [{"id": int(rng.integers(10**9)), "type": "video"}] * videos)
    entities = {"hashtags": [{"text": "crypto"}], "urls": [], "user_mentions": []}
    if not media:
        return entities, None
    entities = dict(entities, media=media[:1])
    return entities, {"media": media}


def _tweet_text(rng: np.random.Generator, v: float, irrelevant: bool) -> str:
    if irrelevant:
        return IRRELEVANT_PHRASES[int(rng.integers(len(IRRELEVANT_PHRASES)))]
    polarity = 0.8 * v + rng.standard_normal()
    if polarity > 0.45:
        pool = POSITIVE_PHRASES
    elif polarity < -0.45:
        pool = NEGATIVE_PHRASES
    else:
        pool = NEUTRAL_PHRASES
    template = pool[int(rng.integers(len(pool)))]
    return template.format(tag=TAGS[int(rng.integers(len(TAGS)))])


def _raw_tweet(rng: np.random.Generator, ts: dt.datetime, factors: dict,
               irrelevant: bool) -> str:
    entities, extended = _media_entities(rng, factors["tweet"])
    base = {
        "created_at": ts.strftime(_CLASSIC_FORMAT),
        "id": int(rng.integers(10**17, 10**18)),
        "id_str": str(int(rng.integers(10**17, 10**18))),
        "text": _tweet_text(rng, factors["vader"], irrelevant),
        "truncated": False,
        "entities": entities,
        "source": "<a href=\"https://example.invalid\">web</a>",
        "in_reply_to_status_id": None,
        "in_reply_to_user_id": None,
        "in_reply_to_screen_name": None,
        "user": _user_object(rng, factors["user"]),
        "geo": None,
        "coordinates": None,
        "place": None,
        "contributors": None,
        "is_quote_status": False,
        "retweet_count": 0,
        "favorite_count": 0,
        "favorited": False,
        "retweeted": False,
        "filter_level": "low",
        "lang": "en",
    }
    if extended is not None:
        base["extended_entities"] = extended
    if rng.random() > 0.05:   # a few tweets omit the flag entirely
        base["possibly_sensitive"] = bool(
            rng.random() < 1.0 / (1.0 + np.exp(2.2 - 0.6 * factors["tweet"])))

    kind = rng.random()
    if kind < 0.60:
        pass                 # general tweet
    elif kind < 0.75:        # retweet wrapping an original
        inner = dict(base, id=int(rng.integers(10**17, 10**18)),
                     text=base["text"], is_quote_status=False)
        inner.pop("extended_entities", None)
        base = dict(base, text="RT @" + base["user"]["screen_name"] + ": " + base["text"],
                    retweeted_status=inner)
    elif kind < 0.90:        # quote tweet
        inner = dict(base, id=int(rng.integers(10**17, 10**18)))
        inner.pop("extended_entities", None)
        base = dict(base, is_quote_status=True, quoted_status=inner,
                    quoted_status_id=inner["id"])
    else:                    # reply
        base = dict(base, in_reply_to_status_id=int(rng.integers(10**17, 10**18)),
                    in_reply_to_user_id=int(rng.integers(10**8, 10**9)),
                    in_reply_to_screen_name="someone")
    return json.dumps(base, separators=(",", ":"))


def generate(config: SynthConfig) -> SynthData:
    """Produce the candle grid and raw tweet stream for ``config.days`` days."""
    rng = np.random.default_rng(config.seed)
    n = config.days

    shape = rng.uniform(0.3, 0.7, size=n)              # second-half energy share
    user = rng.standard_normal(n)
    tweet = rng.standard_normal(n)
    vader = rng.standard_normal(n)
    count = rng.standard_normal(n)
    vol_shock = rng.standard_normal(n)

    mu = np.log(config.daily_vol)
    log_sigma = np.empty(n)
    log_sigma[0] = mu
    for d in range(n - 1):
        log_sigma[d + 1] = (mu
                            + config.persistence * (log_sigma[d] - mu)
                            + config.shape_coupling * (shape[d] - 0.5)
                            + config.user_coupling * user[d]
                            + config.tweet_coupling * tweet[d]
                            + config.vader_coupling * vader[d]
                            + config.count_coupling * count[d]
                            + config.vol_noise * vol_shock[d])
    sigma = np.exp(log_sigma)

    first_half, second_half = _intraday_pattern()
    half = DAY_BINS // 2
    c = config.location_share
    noise_scale = np.sqrt(1.0 - c)

    returns = np.empty((n, DAY_BINS))
    for d in range(n):
        g = np.concatenate([
            np.sqrt(c * 2.0 * (1.0 - shape[d])) * first_half,
            np.sqrt(c * 2.0 * shape[d]) * second_half,
        ])
        z = rng.standard_normal(DAY_BINS)
        returns[d] = sigma[d] * (g + noise_scale * z) / np.sqrt(DAY_BINS)

    start_dt = dt.datetime.combine(config.start, dt.time(0, 0), tzinfo=dt.timezone.utc)
    candles = [(start_dt - BIN_DELTA, config.base_price)]
    log_price = np.log(config.base_price)
    for d in range(n):
        for b in range(DAY_BINS):
            log_price += returns[d, b]
            candles.append((start_dt + dt.timedelta(days=d) + b * BIN_DELTA,
                            float(np.exp(log_price))))

    tweet_lines = []
    profile = 1.0 + 0.3 * np.cos(2 * np.pi * (np.arange(DAY_BINS) - 64) / DAY_BINS)
    for d in range(n):
        factors = {"user": user[d], "tweet": tweet[d], "vader": vader[d]}
        rate = config.tweets_per_bin * np.exp(0.4 * count[d])
        for b in range(DAY_BINS):
            bin_start = start_dt + dt.timedelta(days=d) + b * BIN_DELTA
            k = int(rng.poisson(rate * profile[b]))
            offsets = np.sort(rng.uniform(0.0, BIN_DELTA.total_seconds(), size=k))
            for off in offsets:
                ts = bin_start + dt.timedelta(seconds=float(off))
                irrelevant = rng.random() < config.irrelevant_fraction
                tweet_lines.append(_raw_tweet(rng, ts, factors, irrelevant))

    return SynthData(
        candles=candles,
        tweet_lines=tweet_lines,
        day_sigma=sigma,
        day_factors={"shape": shape, "user": user, "tweet": tweet,
                     "vader": vader, "count": count},
    )


def write_candles_csv(candles, path) -> None:
    with open(path, "w") as fh:
        fh.write("timestamp,close\n")
        for ts, close in candles:
            fh.write(f"{ts.strftime('%Y-%m-%dT%H:%M:%SZ')},{close!r}\n")


def write_tweets_jsonl(tweet_lines, path) -> None:
    with open(path, "w") as fh:
        for line in tweet_lines:
            fh.write(line + "\n")
