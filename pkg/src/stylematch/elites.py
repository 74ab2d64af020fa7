"""Time-varying elite status from write-permission events.

A developer becomes (or stays) elite for 90 days after every action that
requires the repository "write" permission; overlapping grants merge, so
status lapses only after 90 quiet days.  The default write-action set is a
reconstruction (the platform permission model is not fully enumerable from
event data alone) and can be overridden in config.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta

from .events import (
    KIND_COLLABORATOR_ADDED,
    KIND_COMMENT_DELETED,
    KIND_ISSUE_CLOSED,
    KIND_ISSUE_LABELED,
    KIND_MILESTONE_EDITED,
    KIND_PR_MERGED,
    KIND_PUSH_DEFAULT,
    KIND_RELEASE_PUBLISHED,
    RawEvent,
)
from .timeutil import add_months, iso_utc, parse_utc

logger = logging.getLogger(__name__)

ELITE_WINDOW = timedelta(days=90)

# Kinds that require write permission.  IssueClosed and CommentDeleted count
# only when performed on someone else's issue/comment (any reporter may close
# their own issue); with no recorded original author they do not count.
DEFAULT_WRITE_ACTIONS = frozenset(
    {
        KIND_ISSUE_CLOSED,
        KIND_ISSUE_LABELED,
        KIND_PR_MERGED,
        KIND_PUSH_DEFAULT,
        KIND_COLLABORATOR_ADDED,
        KIND_MILESTONE_EDITED,
        KIND_RELEASE_PUBLISHED,
        KIND_COMMENT_DELETED,
    }
)

_SELF_EXEMPT_KINDS = (KIND_ISSUE_CLOSED, KIND_COMMENT_DELETED)

ELITE = "Elite"
NON_ELITE = "NonElite"


@dataclass(frozen=True)
class EliteInterval:
    """Half-open span [start, end) during which a developer is elite."""

    developer: str
    start: datetime
    end: datetime


def is_write_action(event: RawEvent, write_actions: frozenset | None = None) -> bool:
    """True iff the event is in the configured write-permission set."""
    actions = DEFAULT_WRITE_ACTIONS if write_actions is None else write_actions
    if event.kind not in actions:
        return False
    if event.kind in _SELF_EXEMPT_KINDS:
        author = event.payload.get("author")
        return bool(author) and author != event.actor
    return True


def compute_elite_intervals(
    events: list[RawEvent],
    write_actions: frozenset | None = None,
    window: timedelta = ELITE_WINDOW,
) -> dict[str, list[EliteInterval]]:
    """Merge per-developer [t, t+window) grants into maximal disjoint intervals.

    Events must be time-ordered; unsorted input is a contract violation.
    """
    intervals: dict[str, list[EliteInterval]] = {}
    last_ts: datetime | None = None
    for ev in events:
        if last_ts is not None and ev.timestamp < last_ts:
            raise ValueError("compute_elite_intervals requires time-sorted events")
        last_ts = ev.timestamp
        if not is_write_action(ev, write_actions):
            continue
        start, end = ev.timestamp, ev.timestamp + window
        spans = intervals.setdefault(ev.actor, [])
        if spans and start <= spans[-1].end:
            last = spans[-1]
            if end > last.end:
                spans[-1] = EliteInterval(ev.actor, last.start, end)
        else:
            spans.append(EliteInterval(ev.actor, start, end))
    return intervals


def status_at(developer: str, t: datetime, intervals: dict[str, list[EliteInterval]]) -> str:
    """Elite iff some interval of the developer contains t (start-inclusive)."""
    for span in intervals.get(developer, ()):
        if span.start <= t < span.end:
            return ELITE
        if span.start > t:
            break
    return NON_ELITE


def _overlaps(spans: list[EliteInterval], start: datetime, end: datetime) -> bool:
    return any(span.start < end and start < span.end for span in spans)


def elite_ratio(
    buckets: dict[int, list[RawEvent]],
    intervals: dict[str, list[EliteInterval]],
    created_at: datetime,
) -> tuple[dict[int, float | None], float | None]:
    """Monthly elite/non-elite headcount ratios and their mean (Control_1).

    A month's elites are developers whose status overlaps the month at any
    point; the denominator is developers active in the month (>= 1 event)
    who were never elite during it.  Months with no such non-elites are
    excluded from the mean; if all months are degenerate the mean is None
    and the project should be flagged.
    """
    monthly: dict[int, float | None] = {}
    usable: list[float] = []
    for m in sorted(buckets):
        span_start = add_months(created_at, m)
        span_end = add_months(created_at, m + 1)
        elites = {dev for dev, spans in intervals.items() if _overlaps(spans, span_start, span_end)}
        actives = {ev.actor for ev in buckets[m]}
        nonelites = actives - elites
        if not nonelites:
            monthly[m] = None
            continue
        ratio = len(elites) / len(nonelites)
        monthly[m] = ratio
        usable.append(ratio)
    mean = sum(usable) / len(usable) if usable else None
    if mean is None:
        logger.warning("all months degenerate for elite ratio; control recorded as missing")
    return monthly, mean


def write_intervals_json(intervals: dict[str, list[EliteInterval]], path) -> None:
    rows = [
        {"login": span.developer, "start": iso_utc(span.start), "end": iso_utc(span.end)}
        for dev in sorted(intervals)
        for span in intervals[dev]
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_intervals_json(path) -> dict[str, list[EliteInterval]]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = json.load(fh)
    intervals: dict[str, list[EliteInterval]] = {}
    for row in rows:
        intervals.setdefault(row["login"], []).append(
            EliteInterval(row["login"], parse_utc(row["start"]), parse_utc(row["end"]))
        )
    for spans in intervals.values():
        spans.sort(key=lambda s: s.start)
    return intervals
