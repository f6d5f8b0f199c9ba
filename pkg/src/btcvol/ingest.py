"""Offline tweet pipeline: relevance filter, schema flattening, sorted export.

Raw tweets arrive as JSON Lines in the streaming-API shape (general,
quote, retweet or reply objects with ~120 nested fields). Each relevant
line is flattened to the fixed 14-field record: media arrays become
counts, any quote/retweet/reply nesting collapses to a single flag, and
everything else is discarded. Records are exported as a typed CSV sorted
by creation time, optionally with the sentiment compound appended.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from dataclasses import dataclass, fields

log = logging.getLogger(__name__)

RELEVANT_CASED = ("BTC", "$BTC")
RELEVANT_ANYCASE = ("bitcoin",)

# Twitter's classic timestamp format, e.g. "Sat Oct 10 13:55:12 +0000 2020"
_CLASSIC_FORMAT = "%a %b %d %H:%M:%S %z %Y"


@dataclass(frozen=True)
class TweetRecord:
    """The pruned and refactored flat schema: 7 tweet-side fields
    (including the timestamp and text) and 7 user-side fields."""

    created_at: dt.datetime
    gif_count: int
    photo_count: int
    video_count: int
    is_quote_status: bool
    possibly_sensitive: bool
    tweet_text: str
    favourites_count: int
    followers_count: int
    friends_count: int
    listed_count: int
    verified: bool
    default_profile: bool
    default_profile_image: bool


TABLE_FIELDS = tuple(f.name for f in fields(TweetRecord))

_INT_FIELDS = ("gif_count", "photo_count", "video_count", "favourites_count",
               "followers_count", "friends_count", "listed_count")
_BOOL_FIELDS = ("is_quote_status", "possibly_sensitive", "verified",
                "default_profile", "default_profile_image")


def filter_relevant(text: str, case_sensitive_tickers: bool = True) -> bool:
    """True iff the text mentions one of the tracked strings.

    Ticker forms match case-sensitively by default; the currency name
    matches in any case.
    """
    if case_sensitive_tickers:
        if any(tag in text for tag in RELEVANT_CASED):
            return True
    else:
        lowered_tags = [t.lower() for t in RELEVANT_CASED]
        if any(tag in text.lower() for tag in lowered_tags):
            return True
    lowered = text.lower()
    return any(word in lowered for word in RELEVANT_ANYCASE)


def parse_created_at(value: str) -> dt.datetime:
    """Accept the classic streaming format or ISO-8601; normalize to UTC."""
    try:
        ts = dt.datetime.strptime(value, _CLASSIC_FORMAT)
    except ValueError:
        ts = dt.datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc)


def _media_counts(raw: dict) -> tuple[int, int, int]:
    """Count media objects by type; a retweet or quote without its own
    media falls back to the wrapped original's entities."""
    containers = [raw.get("extended_entities"), raw.get("entities")]
    nested = raw.get("retweeted_status") or raw.get("quoted_status")
    if isinstance(nested, dict):
        containers += [nested.get("extended_entities"), nested.get("entities")]
    media = None
    for container in containers:
        if isinstance(container, dict) and isinstance(container.get("media"), list):
            media = container["media"]
            break
    gifs = photos = videos = 0
    for item in media or []:
        kind = item.get("type") if isinstance(item, dict) else None
        if kind == "animated_gif":
            gifs += 1
        elif kind == "photo":
            photos += 1
        elif kind == "video":
            videos += 1
    return gifs, photos, videos


@dataclass
class IngestStats:
    """Accounting for one ingest pass."""

    lines: int = 0
    kept: int = 0
    irrelevant: int = 0
    rejects: int = 0
    defaults_applied: int = 0


def refactor_prune(raw_json_line: str, stats: IngestStats | None = None) -> TweetRecord:
    """Flatten one raw tweet object into the 14-field record.

    Raises ValueError on malformed input. Missing numeric fields default
    to 0 and missing booleans to false; each applied default is logged
    and counted when a stats object is supplied.
    """
    try:
        raw = json.loads(raw_json_line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON line: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError("tweet line must decode to an object")
    if "created_at" not in raw:
        raise ValueError("tweet object lacks created_at")
    created_at = parse_created_at(str(raw["created_at"]))

    if set(raw.keys()) == set(TABLE_FIELDS):
        # already in the flat schema: pruning is the identity
        return TweetRecord(created_at=created_at, **{
            name: (int(raw[name]) if name in _INT_FIELDS
                   else bool(raw[name]) if name in _BOOL_FIELDS
                   else str(raw[name]))
            for name in TABLE_FIELDS if name != "created_at"})

    text = raw.get("full_text") or raw.get("text") or ""
    user = raw.get("user") if isinstance(raw.get("user"), dict) else {}

    def take(container: dict, key: str, kind: str):
        if key in container and container[key] is not None:
            value = container[key]
            return int(value) if kind == "int" else bool(value)
        if stats is not None:
            stats.defaults_applied += 1
        log.debug("missing %s field %r, applying default", kind, key)
        return 0 if kind == "int" else False

    gifs, photos, videos = _media_counts(raw)
    is_quote = bool(raw.get("is_quote_status")) \
        or isinstance(raw.get("retweeted_status"), dict) \
        or raw.get("in_reply_to_status_id") is not None

    return TweetRecord(
        created_at=created_at,
        gif_count=gifs,
        photo_count=photos,
        video_count=videos,
        is_quote_status=is_quote,
        possibly_sensitive=take(raw, "possibly_sensitive", "bool"),
        tweet_text=str(text),
        favourites_count=take(user, "favourites_count", "int"),
        followers_count=take(user, "followers_count", "int"),
        friends_count=take(user, "friends_count", "int"),
        listed_count=take(user, "listed_count", "int"),
        verified=take(user, "verified", "bool"),
        default_profile=take(user, "default_profile", "bool"),
        default_profile_image=take(user, "default_profile_image", "bool"),
    )


def record_as_flat_dict(record: TweetRecord) -> dict:
    """JSON-serializable flat representation (timestamps in ISO form)."""
    out = {}
    for name in TABLE_FIELDS:
        value = getattr(record, name)
        out[name] = (_format_value(name, value) if name == "created_at" else value)
    return out


def ingest_lines(lines, stats: IngestStats | None = None,
                 case_sensitive_tickers: bool = True) -> tuple[list[TweetRecord], IngestStats]:
    """Filter and flatten a stream of raw JSON lines.

    Malformed lines are skipped and tallied; irrelevant tweets are
    dropped silently apart from the count.
    """
    stats = stats or IngestStats()
    records = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        stats.lines += 1
        try:
            record = refactor_prune(line, stats)
        except ValueError as exc:
            stats.rejects += 1
            log.warning("rejecting line: %s", exc)
            continue
        if not filter_relevant(record.tweet_text, case_sensitive_tickers):
            stats.irrelevant += 1
            continue
        records.append(record)
        stats.kept += 1
    return records, stats


def _format_value(name: str, value) -> str:
    if name == "created_at":
        return value.astimezone(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    if name in _BOOL_FIELDS:
        return "true" if value else "false"
    if name in _INT_FIELDS:
        return str(int(value))
    return str(value)


def write_sorted(records, path, compounds=None) -> None:
    """Write records as a typed CSV sorted by creation time.

    The sort is stable, so records sharing a timestamp keep their input
    order. When sentiment compounds are supplied (one per record, in
    input order) they travel as an extra trailing column.
    """
    records = list(records)
    order = sorted(range(len(records)), key=lambda i: records[i].created_at)
    header = list(TABLE_FIELDS) + (["vader_compound"] if compounds is not None else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in order:
            rec = records[i]
            row = [_format_value(name, getattr(rec, name)) for name in TABLE_FIELDS]
            if compounds is not None:
                row.append(repr(float(compounds[i])))
            writer.writerow(row)


def read_table(path) -> tuple[list[TweetRecord], list[float] | None]:
    """Read back a typed CSV produced by write_sorted, losslessly."""
    records: list[TweetRecord] = []
    compounds: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        base = list(TABLE_FIELDS)
        has_compound = header == base + ["vader_compound"]
        if not has_compound and header != base:
            raise ValueError(f"unexpected header {header}")
        for row in reader:
            if not row:
                continue
            values: dict = {}
            for name, cell in zip(TABLE_FIELDS, row):
                if name == "created_at":
                    values[name] = parse_created_at(cell)
                elif name in _BOOL_FIELDS:
                    values[name] = cell == "true"
                elif name in _INT_FIELDS:
                    values[name] = int(cell)
                else:
                    values[name] = cell
            records.append(TweetRecord(**values))
            if has_compound:
                compounds.append(float(row[len(TABLE_FIELDS)]))
    return records, (compounds if has_compound else None)
