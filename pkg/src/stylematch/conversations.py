"""Conversation threads, cross-status filtering, and corpus aggregation.

Threads are rebuilt from issue/PR bodies and comment events.  Platforms
expose flat comment lists, so the reply structure is reconstructed: a
comment replies to the immediately preceding message unless it @-mentions
an earlier participant, in which case it replies to that participant's
latest prior message.

A thread enters the cross-status corpora only when its messages carry both
statuses.  Within such a thread, a reply whose author shares the status of
the message it replies to is removed, unless it @-mentions someone whose
status differs from the author's at that moment.  Every admitted message is
labeled by its author's status at its own timestamp, so a mid-thread status
change splits one person's words across the two sides.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import datetime
from functools import lru_cache

from .elites import ELITE, EliteInterval, status_at
from .events import (
    KIND_COMMENT_CREATED,
    KIND_COMMENT_DELETED,
    KIND_COMMENT_EDITED,
    KIND_COMMIT,
    KIND_ISSUE_OPENED,
    KIND_PR_OPENED,
    RawEvent,
)
from .textprep import strip_code, strip_se_artifacts
from .timeutil import iso_utc

logger = logging.getLogger(__name__)

DEFAULT_BOT_PATTERNS = ("*[bot]",)

_MENTION_HANDLE = re.compile(r"(?<![\w.])@([A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?)")


@dataclass
class Message:
    """One utterance in a thread, with resolved mention routing metadata."""

    author: str
    timestamp: datetime
    body: str
    mentions: set[str] = field(default_factory=set)
    raw_mentions: set[str] = field(default_factory=set)
    source_id: str = ""
    is_initiator: bool = False


@dataclass
class ConversationThread:
    id: str
    kind: str  # Issue | PullRequest | Commit
    messages: list[Message] = field(default_factory=list)


@dataclass
class CorpusTriple:
    """Aggregated per-project texts: the two cross-status sides plus the
    within-status corpora used for the three-corpora comparison."""

    cross_elite: str = ""
    cross_nonelite: str = ""
    within_elite: str = ""
    within_nonelite: str = ""
    # (thread id, timestamp, cleaned single-line body) per corpus, in order
    lines: dict = field(default_factory=dict)


@lru_cache(maxsize=64)
def _glob_regex(pattern: str) -> re.Pattern:
    # simple glob: * and ? wildcards, everything else literal (so the
    # default pattern's brackets mean a literal "[bot]" suffix)
    body = "".join(".*" if c == "*" else "." if c == "?" else re.escape(c) for c in pattern)
    return re.compile("^" + body + "$")


def is_bot(login: str, patterns: tuple[str, ...] = DEFAULT_BOT_PATTERNS) -> bool:
    return any(_glob_regex(pat).match(login) for pat in patterns)


def extract_mentions(body: str, roster: dict) -> tuple[set[str], set[str]]:
    """Resolve @-handles at word boundaries, ignoring code spans/blocks.

    Returns (resolved canonical logins, unresolved raw handles).  Handles
    resolve case-insensitively against canonical logins and their aliases.
    """
    lookup: dict[str, str] = {}
    for login, dev in roster.items():
        lookup.setdefault(login.lower(), login)
        for alias in getattr(dev, "aliases", ()):  # roster may map to DeveloperId or None
            lookup.setdefault(str(alias).lower(), login)
    resolved: set[str] = set()
    unresolved: set[str] = set()
    for match in _MENTION_HANDLE.finditer(strip_code(body)):
        handle = match.group(1)
        canon = lookup.get(handle.lower())
        if canon is not None:
            resolved.add(canon)
        else:
            unresolved.add(handle)
    return resolved, unresolved


_THREAD_KINDS = {"issues": "Issue", "pulls": "PullRequest", "commits": "Commit"}


def build_threads(
    events: list[RawEvent],
    roster: dict,
    bot_patterns: tuple[str, ...] = DEFAULT_BOT_PATTERNS,
) -> list[ConversationThread]:
    """Reconstruct threads from normalized, identity-resolved events.

    The issue/PR body is the initiator message; comments attach by target
    reference, edits replace bodies, deletions drop them.  Comments whose
    parent never appears among the events are logged and excluded.  Bot
    messages never enter threads.
    """
    known_targets: set[str] = set()
    openers: dict[str, Message] = {}
    comments: dict[str, dict] = {}  # comment_id -> state
    order: dict[str, int] = {}

    for pos, ev in enumerate(events):
        if ev.kind in (KIND_ISSUE_OPENED, KIND_PR_OPENED) and ev.target:
            known_targets.add(ev.target)
            body = str(ev.payload.get("body", "") or "")
            if body.strip() and not is_bot(ev.actor, bot_patterns):
                openers[ev.target] = Message(
                    author=ev.actor,
                    timestamp=ev.timestamp,
                    body=body,
                    source_id=ev.event_id,
                )
                order[ev.event_id] = pos
        elif ev.kind == KIND_COMMIT and ev.target:
            known_targets.add(ev.target)
        elif ev.kind == KIND_COMMENT_CREATED:
            cid = str(ev.payload.get("comment_id", ev.event_id))
            comments[cid] = {
                "author": ev.actor,
                "timestamp": ev.timestamp,
                "body": str(ev.payload.get("body", "") or ""),
                "thread": ev.target,
                "source_id": ev.event_id,
                "deleted": False,
            }
            order[ev.event_id] = pos
        elif ev.kind == KIND_COMMENT_EDITED:
            cid = str(ev.payload.get("comment_id", ""))
            if cid in comments:
                comments[cid]["body"] = str(ev.payload.get("body", "") or "")
        elif ev.kind == KIND_COMMENT_DELETED:
            cid = str(ev.payload.get("comment_id", ""))
            if cid in comments:
                comments[cid]["deleted"] = True

    grouped: dict[str, list[Message]] = {}
    for target, msg in openers.items():
        grouped.setdefault(target, []).append(msg)
    for state in comments.values():
        if state["deleted"] or not state["body"].strip():
            continue
        target = state["thread"]
        if not target or target not in known_targets:
            logger.info("orphan comment %s references unknown target %r", state["source_id"], target)
            continue
        if is_bot(state["author"], bot_patterns):
            continue
        grouped.setdefault(target, []).append(
            Message(
                author=state["author"],
                timestamp=state["timestamp"],
                body=state["body"],
                source_id=state["source_id"],
            )
        )

    threads: list[ConversationThread] = []
    for target in sorted(grouped):
        msgs = grouped[target]
        msgs.sort(key=lambda m: (m.timestamp, m.source_id))
        for msg in msgs:
            msg.mentions, msg.raw_mentions = extract_mentions(msg.body, roster)
            msg.is_initiator = False
        msgs[0].is_initiator = True
        prefix = target.split("/", 1)[0]
        threads.append(ConversationThread(id=target, kind=_THREAD_KINDS.get(prefix, "Issue"), messages=msgs))
    return threads


def _reply_target(messages: list[Message], idx: int) -> int | None:
    """Index of the message that messages[idx] replies to, None for initiator."""
    if idx == 0:
        return None
    msg = messages[idx]
    if msg.mentions:
        for j in range(idx - 1, -1, -1):
            if messages[j].author in msg.mentions:
                return j
    return idx - 1


def filter_cross_status(
    thread: ConversationThread,
    intervals: dict[str, list[EliteInterval]],
) -> list[tuple[Message, str]] | None:
    """Admit a thread's cross-status messages, labeled by speaker status.

    Returns None for threads whose messages all carry one status.
    """
    msgs = thread.messages
    labels = [status_at(m.author, m.timestamp, intervals) for m in msgs]
    if len(set(labels)) < 2:
        return None
    admitted: list[tuple[Message, str]] = []
    for i, msg in enumerate(msgs):
        target = _reply_target(msgs, i)
        if target is None:
            admitted.append((msg, labels[i]))
            continue
        if labels[i] != labels[target]:
            admitted.append((msg, labels[i]))
            continue
        crosses = any(
            status_at(dev, msg.timestamp, intervals) != labels[i] for dev in msg.mentions
        )
        if crosses:
            admitted.append((msg, labels[i]))
    return admitted


def _clean_line(body: str) -> str:
    return " ".join(strip_se_artifacts(body).split())


def aggregate_corpora(
    threads: list[ConversationThread],
    intervals: dict[str, list[EliteInterval]],
) -> CorpusTriple:
    """Build the two cross-status corpora plus the two within-status corpora.

    Message order is thread id, then timestamp.  Bodies pass through the
    artifact stripper before concatenation; acronym expansion and
    tokenization happen at scoring time.
    """
    lines: dict[str, list[tuple[str, str, str]]] = {
        "cross_elite": [],
        "cross_nonelite": [],
        "within_elite": [],
        "within_nonelite": [],
    }
    for thread in sorted(threads, key=lambda t: t.id):
        admitted = filter_cross_status(thread, intervals)
        if admitted is None:
            label = status_at(thread.messages[0].author, thread.messages[0].timestamp, intervals)
            corpus = "within_elite" if label == ELITE else "within_nonelite"
            for msg in thread.messages:
                lines[corpus].append((thread.id, iso_utc(msg.timestamp), _clean_line(msg.body)))
            continue
        for msg, label in admitted:
            corpus = "cross_elite" if label == ELITE else "cross_nonelite"
            lines[corpus].append((thread.id, iso_utc(msg.timestamp), _clean_line(msg.body)))

    triple = CorpusTriple(lines=lines)
    triple.cross_elite = "\n".join(text for _, _, text in lines["cross_elite"])
    triple.cross_nonelite = "\n".join(text for _, _, text in lines["cross_nonelite"])
    triple.within_elite = "\n".join(text for _, _, text in lines["within_elite"])
    triple.within_nonelite = "\n".join(text for _, _, text in lines["within_nonelite"])
    return triple


def write_corpora(triple: CorpusTriple, out_dir) -> list[str]:
    """Emit the four corpus files, one message per line with
    `<thread-id>\\t<timestamp>\\t` prefixes."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for corpus, rows in triple.lines.items():
        path = out_dir / f"{corpus}.txt"
        with open(path, "w", encoding="utf-8") as fh:
            for thread_id, ts, text in rows:
                fh.write(f"{thread_id}\t{ts}\t{text}\n")
        written.append(str(path))
    return written
