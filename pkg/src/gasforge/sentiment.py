"""Off-chain sentiment: chat-export parsing, scoring, and interval aggregation."""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Protocol, Sequence

SIMPLEX_TOL = 1e-6
INTERVAL_SECONDS = {"hour": 3600, "day": 86400}


class SentimentError(ValueError):
    pass


class ScoringError(SentimentError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"scoring failed for message {index}: {cause}")
        self.index = index


@dataclass(frozen=True)
class SentimentScore:
    p_pos: float
    p_neg: float
    p_neu: float

    def __post_init__(self):
        for name in ("p_pos", "p_neg", "p_neu"):
            object.__setattr__(self, name, float(getattr(self, name)))
        vals = self.as_tuple()
        if any(not math.isfinite(v) or v < -SIMPLEX_TOL or v > 1 + SIMPLEX_TOL for v in vals):
            raise SentimentError(f"probabilities out of [0, 1]: {vals}")
        if abs(sum(vals) - 1.0) > SIMPLEX_TOL:
            raise SentimentError(f"probabilities sum to {sum(vals)!r}, not 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_pos, self.p_neg, self.p_neu)


@dataclass(frozen=True)
class Message:
    timestamp: int
    channel: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise SentimentError("message text is empty")


@dataclass(frozen=True)
class Bucket:
    chunk_start: int
    mean_score: SentimentScore
    message_count: int


@dataclass(frozen=True)
class SentimentSeries:
    interval: str
    buckets: tuple[Bucket, ...] = ()

    def __post_init__(self):
        if self.interval not in INTERVAL_SECONDS:
            raise SentimentError(f"unknown interval {self.interval!r}")
        object.__setattr__(self, "buckets", tuple(self.buckets))
        width = INTERVAL_SECONDS[self.interval]
        prev = None
        for b in self.buckets:
            if b.chunk_start % width:
                raise SentimentError(f"chunk {b.chunk_start} not aligned to {self.interval}")
            if prev is not None and b.chunk_start <= prev:
                raise SentimentError("chunk starts must be strictly increasing")
            prev = b.chunk_start


# --------------------------------------------------------------------------
# Scorers
# --------------------------------------------------------------------------

class Scorer(Protocol):
    def score(self, text: str) -> SentimentScore: ...


POSITIVE_WORDS = {
    "bullish": 2.0, "moon": 1.5, "pump": 1.0, "gain": 1.0, "gains": 1.0, "profit": 1.0,
    "up": 0.5, "good": 1.0, "great": 1.5, "strong": 1.0, "buy": 0.5, "rally": 1.5,
    "win": 1.0, "cheap": 0.5, "love": 1.0, "growth": 1.0, "surge": 1.5, "excited": 1.0,
}
NEGATIVE_WORDS = {
    "bearish": 2.0, "dump": 1.5, "crash": 2.0, "loss": 1.0, "losses": 1.0, "scam": 2.0,
    "down": 0.5, "bad": 1.0, "weak": 1.0, "sell": 0.5, "rug": 2.0, "fear": 1.0,
    "expensive": 1.0, "congested": 1.0, "fail": 1.0, "failed": 1.0, "hack": 2.0, "stuck": 1.0,
}
NEUTRAL_BIAS = 1.0

_TOKEN = re.compile(r"[a-z']+")


@dataclass(frozen=True)
class LexiconScorer:
    """Keyword-weight scorer, softmax-normalized over (pos, neg, neutral bias).

    Text with no lexicon hits scores as fully neutral.
    """

    positive: dict = field(default_factory=lambda: dict(POSITIVE_WORDS))
    negative: dict = field(default_factory=lambda: dict(NEGATIVE_WORDS))
    neutral_bias: float = NEUTRAL_BIAS

    def score(self, text: str) -> SentimentScore:
        tokens = _TOKEN.findall(text.lower())
        pos = sum(self.positive.get(t, 0.0) for t in tokens)
        neg = sum(self.negative.get(t, 0.0) for t in tokens)
        if pos == 0.0 and neg == 0.0:
            return SentimentScore(0.0, 0.0, 1.0)
        logits = (pos, neg, self.neutral_bias)
        top = max(logits)
        e = [math.exp(v - top) for v in logits]
        z = sum(e)
        p_pos, p_neg = e[0] / z, e[1] / z
        return SentimentScore(p_pos, p_neg, 1.0 - p_pos - p_neg)


def score_message(text: str, scorer: Scorer | None = None) -> SentimentScore:
    if not text.strip():
        raise SentimentError("cannot score empty text")
    return (scorer or LexiconScorer()).score(text)


def score_messages(messages: Sequence[Message], scorer: Scorer | None = None) -> list[tuple[int, SentimentScore]]:
    scorer = scorer or LexiconScorer()
    out = []
    for i, m in enumerate(messages):
        try:
            s = scorer.score(m.text)
            if not isinstance(s, SentimentScore):
                s = SentimentScore(*s)
        except Exception as e:
            raise ScoringError(i, e) from e
        out.append((m.timestamp, s))
    return out


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------

SCORE_COLUMNS = ("timestamp", "p_pos", "p_neg", "p_neu")
SERIES_COLUMNS = ("chunk_start", "interval", "p_pos", "p_neg", "p_neu", "count")


def import_scores(path: str | Path) -> list[tuple[int, SentimentScore]]:
    """Read externally computed scores; rows are validated and sorted by time."""
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SCORE_COLUMNS:
            raise SentimentError(f"line 1: header {reader.fieldnames} does not match {list(SCORE_COLUMNS)}")
        for row in reader:
            try:
                ts = int(row["timestamp"])
                score = SentimentScore(float(row["p_pos"]), float(row["p_neg"]), float(row["p_neu"]))
            except (ValueError, TypeError) as e:
                raise SentimentError(f"line {reader.line_num}: {e}") from None
            out.append((ts, score))
    out.sort(key=lambda r: r[0])
    return out


def export_scores(scored: Iterable[tuple[int, SentimentScore]], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCORE_COLUMNS)
        for ts, s in scored:
            w.writerow([ts, repr(s.p_pos), repr(s.p_neg), repr(s.p_neu)])


def export_series(series: SentimentSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for b in series.buckets:
            s = b.mean_score
            w.writerow([b.chunk_start, series.interval, repr(s.p_pos), repr(s.p_neg), repr(s.p_neu),
                        b.message_count])


def import_series(path: str | Path) -> SentimentSeries:
    buckets, interval = [], None
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SERIES_COLUMNS:
            raise SentimentError(f"series header {reader.fieldnames} does not match {list(SERIES_COLUMNS)}")
        for row in reader:
            if interval is None:
                interval = row["interval"]
            elif row["interval"] != interval:
                raise SentimentError(f"line {reader.line_num}: mixed intervals")
            buckets.append(Bucket(
                int(row["chunk_start"]),
                SentimentScore(float(row["p_pos"]), float(row["p_neg"]), float(row["p_neu"])),
                int(row["count"])))
    if interval is None:
        raise SentimentError(f"{path}: empty series file (interval unknown)")
    return SentimentSeries(interval, buckets)


_FRACTION = re.compile(r"(\.\d+)")


def parse_timestamp(text: str) -> int:
    """ISO-8601 to unix seconds (fractional seconds truncated; naive means UTC)."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    s = _FRACTION.sub("", s, count=1)
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise SentimentError(f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def parse_chat_export(path: str | Path) -> list[Message]:
    """Messages from a DiscordChatExporter JSON export.

    Entries with blank ``content`` (image-only posts etc.) are skipped;
    attachments and embeds are ignored.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SentimentError(f"{path}: malformed chat export: {e}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("messages"), list):
        raise SentimentError(f"{path}: expected an object with a messages array")
    channel = doc.get("channel") or {}
    channel_name = channel.get("name", "") if isinstance(channel, dict) else str(channel)
    out = []
    for i, m in enumerate(doc["messages"]):
        if not isinstance(m, dict) or "timestamp" not in m:
            raise SentimentError(f"{path}: message {i} lacks a timestamp")
        text = m.get("content") or ""
        if not text.strip():
            continue
        out.append(Message(parse_timestamp(m["timestamp"]), channel_name, text))
    return out


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------

def aggregate(scored: Iterable[tuple[int, SentimentScore]], interval: str) -> SentimentSeries:
    """Per-chunk arithmetic mean of each probability; empty chunks are omitted."""
    if interval not in INTERVAL_SECONDS:
        raise SentimentError(f"unknown interval {interval!r}")
    width = INTERVAL_SECONDS[interval]
    groups: dict[int, list[SentimentScore]] = {}
    for ts, s in scored:
        groups.setdefault(ts // width * width, []).append(s)
    buckets = []
    for start in sorted(groups):
        members = groups[start]
        n = len(members)
        sums = [math.fsum(s.as_tuple()[j] for s in members) for j in range(3)]
        buckets.append(Bucket(start, SentimentScore(*(v / n for v in sums)), n))
    return SentimentSeries(interval, buckets)
