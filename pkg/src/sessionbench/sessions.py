"""Session data model and the clickstream preparation pipeline.

Raw events arrive as JSONL, one event per line:

    {"session_user": "u1", "ts": "2018-06-29T10:00:00Z", "type": "view"}

Preparation groups events per user, splits each stream into sessions at
30-minute gaps, labels a session BUY when it contains at least one buy
event, truncates BUY sessions strictly before their first buy, keeps only
the event category per step, and filters sessions to 10..200 events.

Prepared datasets are exchanged as TSV, one session per line:

    BUY\tview click detail add-to-cart
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Iterator, Sequence

from .errors import CategoryError, OrderingError, ParseError

logger = logging.getLogger(__name__)

CATEGORIES = ("view", "click", "detail", "add-to-cart", "remove-from-cart", "buy")
BUY_CATEGORY = "buy"

# Alphabet of prepared sessions: the five non-buy categories.
SYMBOLS = CATEGORIES[:-1]
SYMBOL_TO_ID = {s: i for i, s in enumerate(SYMBOLS)}

LABEL_BUY = "BUY"
LABEL_NOBUY = "NOBUY"

DEFAULT_GAP = timedelta(minutes=30)
MIN_LENGTH = 10
MAX_LENGTH = 200


def parse_category(token: str) -> str:
    if token not in CATEGORIES:
        raise CategoryError(f"unknown event category {token!r}")
    return token


def parse_symbol(token: str) -> str:
    """A prepared-session token: any category except buy."""
    if token not in SYMBOL_TO_ID:
        raise CategoryError(f"invalid prepared-session symbol {token!r}")
    return token


@dataclass(frozen=True)
class RawEvent:
    user: str
    ts: datetime
    category: str


@dataclass(frozen=True)
class LabeledSession:
    """A symbolized session after labeling and buy-truncation."""

    symbols: tuple[str, ...]
    label: str

    def __len__(self) -> int:
        return len(self.symbols)

    def symbol_ids(self) -> list[int]:
        return [SYMBOL_TO_ID[s] for s in self.symbols]


@dataclass
class Dataset:
    sessions: list[LabeledSession]
    provenance: str
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self) -> Iterator[LabeledSession]:
        return iter(self.sessions)

    @property
    def n_buy(self) -> int:
        return sum(1 for s in self.sessions if s.label == LABEL_BUY)

    @property
    def n_nobuy(self) -> int:
        return len(self.sessions) - self.n_buy

    def by_label(self, label: str) -> list[LabeledSession]:
        return [s for s in self.sessions if s.label == label]


def _parse_instant(value: str) -> datetime:
    # ISO-8601; "Z" suffix normalized for pre-3.11 fromisoformat.
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def parse_events(lines: Iterable[str]) -> dict[str, list[RawEvent]]:
    """Parse JSONL event lines into per-user event streams.

    Each stream is sorted by timestamp ascending; events with equal
    timestamps keep their input order. Users appear in first-seen order.
    """
    streams: dict[str, list[RawEvent]] = {}
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict):
            raise ParseError(line_no, "event record must be a JSON object")
        try:
            user = record["session_user"]
            ts_raw = record["ts"]
            category_raw = record["type"]
        except KeyError as exc:
            raise ParseError(line_no, f"missing field {exc.args[0]!r}") from exc
        try:
            ts = _parse_instant(str(ts_raw))
        except ValueError as exc:
            raise ParseError(line_no, f"bad timestamp {ts_raw!r}") from exc
        try:
            category = parse_category(str(category_raw))
        except CategoryError as exc:
            raise CategoryError(f"line {line_no}: {exc}") from exc
        streams.setdefault(str(user), []).append(RawEvent(str(user), ts, category))
    for user, events in streams.items():
        events.sort(key=lambda e: e.ts)  # stable: equal timestamps keep input order
    return streams


def sessionize(
    events: Sequence[RawEvent], gap: timedelta = DEFAULT_GAP
) -> list[list[RawEvent]]:
    """Split one user's time-sorted events into sessions.

    Consecutive events belong to the same session iff their timestamp
    difference is <= gap (a gap of exactly 30 minutes does not split).
    """
    sessions: list[list[RawEvent]] = []
    current: list[RawEvent] = []
    prev_ts = None
    for event in events:
        if prev_ts is not None and event.ts < prev_ts:
            raise OrderingError(
                f"events not sorted by timestamp: {event.ts} after {prev_ts}"
            )
        if prev_ts is not None and event.ts - prev_ts > gap:
            sessions.append(current)
            current = []
        current.append(event)
        prev_ts = event.ts
    if current:
        sessions.append(current)
    return sessions


def label_and_truncate(categories: Sequence[str]) -> LabeledSession:
    """Label a session and cut it strictly before its first buy event.

    A session with at least one buy event is labeled BUY and keeps only
    the events before the first buy; otherwise it is labeled NOBUY and
    kept whole. A session starting with buy yields an empty BUY session
    (removed later by length filtering).
    """
    if not categories:
        raise OrderingError("cannot label an empty session")
    for i, c in enumerate(categories):
        if c == BUY_CATEGORY:
            return LabeledSession(tuple(categories[:i]), LABEL_BUY)
    return LabeledSession(tuple(categories), LABEL_NOBUY)


def filter_by_length(
    sessions: Iterable[LabeledSession],
    min_length: int = MIN_LENGTH,
    max_length: int = MAX_LENGTH,
    provenance: str = "ingested",
) -> Dataset:
    """Keep sessions with min_length <= length <= max_length (inclusive).

    Dropped counts are recorded in the dataset's meta and logged.
    """
    kept: list[LabeledSession] = []
    dropped_short = 0
    dropped_long = 0
    for s in sessions:
        n = len(s)
        if n < min_length:
            dropped_short += 1
        elif n > max_length:
            dropped_long += 1
        else:
            kept.append(s)
    dataset = Dataset(
        kept,
        provenance,
        meta={"dropped_short": dropped_short, "dropped_long": dropped_long},
    )
    logger.info(
        "length filter [%d, %d]: kept %d, dropped %d short / %d long",
        min_length,
        max_length,
        len(kept),
        dropped_short,
        dropped_long,
    )
    return dataset


def prepare(
    lines: Iterable[str],
    gap: timedelta = DEFAULT_GAP,
    min_length: int = MIN_LENGTH,
    max_length: int = MAX_LENGTH,
) -> Dataset:
    """Full preparation pipeline: JSONL lines -> filtered Dataset."""
    streams = parse_events(lines)
    labeled: list[LabeledSession] = []
    for user in streams:
        for session in sessionize(streams[user], gap):
            labeled.append(label_and_truncate([e.category for e in session]))
    return filter_by_length(labeled, min_length, max_length)


def write_tsv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for s in dataset.sessions:
            fh.write(f"{s.label}\t{' '.join(s.symbols)}\n")


def read_tsv(path, provenance: str = "ingested") -> Dataset:
    sessions: list[LabeledSession] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(line_no, "expected LABEL<TAB>symbols")
            label, body = parts
            if label not in (LABEL_BUY, LABEL_NOBUY):
                raise ParseError(line_no, f"unknown label {label!r}")
            try:
                symbols = tuple(parse_symbol(tok) for tok in body.split())
            except CategoryError as exc:
                raise CategoryError(f"line {line_no}: {exc}") from exc
            sessions.append(LabeledSession(symbols, label))
    return Dataset(sessions, provenance)
