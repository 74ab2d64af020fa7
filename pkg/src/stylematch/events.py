"""Event ingestion: archive/API parsing, dedup, identity resolution, windowing.

Two on-disk source formats are supported:

Archive JSONL (`ArchiveJsonl`) -- one JSON object per line:

    {"id": "...", "type": "<event type>", "actor": {"login": "..."},
     "created_at": "YYYY-MM-DDTHH:MM:SSZ", "repo": "owner/name",
     "payload": {...}}

Recognized `type` values and their payload fields:

    CommitEvent        {sha, message?, author_email?, author_name?}
    IssuesEvent        {action: opened|closed|labeled, number, title?,
                        body?, labels?, author?, label?}
    PullRequestEvent   {action: opened|merged|closed, number, title?, body?}
    IssueCommentEvent  {action: created|edited|deleted, comment_id,
                        thread: "issues/N"|"pulls/N", body?, author?}
    CommitCommentEvent same, thread: "commits/SHA"
    PullRequestReviewCommentEvent  same, thread: "pulls/N"
    MemberEvent        {action: added, member}
    MilestoneEvent     {action: created|edited}
    ReleaseEvent       {action: published}
    PushEvent          {branch, default_branch: bool}

Unrecognized types (or unrecognized actions of known types) map to kind
`Other` with the raw tag preserved in `kind_detail`; nothing is dropped.

API export (`ApiExportJson`) -- a directory of nested JSON documents, one
per endpoint, as written by `stylematch.fetch`: `meta.json`,
`contributors.json`, `issues.json`, `pulls.json`, `commits.json`,
`issue_comments.json`, `pull_comments.json`, `commit_comments.json`.
"""

from __future__ import annotations

import csv
import json
import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .timeutil import add_months, ensure_utc, iso_utc, parse_utc

logger = logging.getLogger(__name__)

KIND_COMMIT = "Commit"
KIND_ISSUE_OPENED = "IssueOpened"
KIND_ISSUE_CLOSED = "IssueClosed"
KIND_ISSUE_LABELED = "IssueLabeled"
KIND_PR_OPENED = "PROpened"
KIND_PR_MERGED = "PRMerged"
KIND_PR_CLOSED = "PRClosed"
KIND_COMMENT_CREATED = "CommentCreated"
KIND_COMMENT_EDITED = "CommentEdited"
KIND_COMMENT_DELETED = "CommentDeleted"
KIND_COLLABORATOR_ADDED = "CollaboratorAdded"
KIND_MILESTONE_EDITED = "MilestoneEdited"
KIND_RELEASE_PUBLISHED = "ReleasePublished"
KIND_PUSH_DEFAULT = "PushDefaultBranch"
KIND_OTHER = "Other"

KNOWN_KINDS = (
    KIND_COMMIT,
    KIND_ISSUE_OPENED,
    KIND_ISSUE_CLOSED,
    KIND_ISSUE_LABELED,
    KIND_PR_OPENED,
    KIND_PR_MERGED,
    KIND_PR_CLOSED,
    KIND_COMMENT_CREATED,
    KIND_COMMENT_EDITED,
    KIND_COMMENT_DELETED,
    KIND_COLLABORATOR_ADDED,
    KIND_MILESTONE_EDITED,
    KIND_RELEASE_PUBLISHED,
    KIND_PUSH_DEFAULT,
    KIND_OTHER,
)


class IngestError(Exception):
    """Fatal ingestion problem (bad format, bad config)."""


class ParseError(IngestError):
    """A malformed record, carrying its source location."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        super().__init__(f"{path}:{line}: {message}" if path else message)
        self.path = path
        self.line = line


@dataclass
class RawEvent:
    """One timestamped repository event with a (possibly unresolved) actor."""

    event_id: str
    kind: str
    actor: str
    timestamp: datetime
    target: str | None = None
    payload: dict = field(default_factory=dict)
    kind_detail: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "id": self.event_id,
            "kind": self.kind,
            "kind_detail": self.kind_detail,
            "actor": self.actor,
            "timestamp": iso_utc(self.timestamp),
            "target": self.target,
            "payload": self.payload,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RawEvent":
        return cls(
            event_id=str(obj["id"]),
            kind=str(obj["kind"]),
            actor=str(obj.get("actor", "")),
            timestamp=parse_utc(obj["timestamp"]),
            target=obj.get("target"),
            payload=obj.get("payload") or {},
            kind_detail=obj.get("kind_detail"),
        )


@dataclass(frozen=True)
class DeveloperId:
    """Canonical developer identity with known aliases."""

    canonical_login: str
    aliases: frozenset = frozenset()
    account_created_at: datetime | None = None


@dataclass
class ProjectMeta:
    """Project metadata: creation instant plus manually coded controls."""

    name: str
    created_at: datetime
    sponsorship: bool | None = None
    main_language: str = ""
    domain: str = ""
    validation: dict = field(default_factory=dict)

    @classmethod
    def from_toml(cls, path: str | Path) -> "ProjectMeta":
        import sys

        if sys.version_info >= (3, 11):
            import tomllib as toml_mod
        else:
            import tomli as toml_mod
        with open(path, "rb") as fh:
            doc = toml_mod.load(fh)
        if "name" not in doc or "created_at" not in doc:
            raise IngestError(f"{path}: project meta requires 'name' and 'created_at'")
        created = doc["created_at"]
        if isinstance(created, datetime):
            from .timeutil import UTC

            created = created.astimezone(UTC) if created.tzinfo else created.replace(tzinfo=UTC)
        else:
            created = parse_utc(str(created))
        return cls(
            name=str(doc["name"]),
            created_at=created,
            sponsorship=doc.get("sponsorship"),
            main_language=str(doc.get("main_language", "")),
            domain=str(doc.get("domain", "")),
            validation=dict(doc.get("validation", {})),
        )


# --- archive / API parsing -------------------------------------------------

_ISSUE_ACTIONS = {"opened": KIND_ISSUE_OPENED, "closed": KIND_ISSUE_CLOSED, "labeled": KIND_ISSUE_LABELED}
_PR_ACTIONS = {"opened": KIND_PR_OPENED, "merged": KIND_PR_MERGED, "closed": KIND_PR_CLOSED}
_COMMENT_ACTIONS = {
    "created": KIND_COMMENT_CREATED,
    "edited": KIND_COMMENT_EDITED,
    "deleted": KIND_COMMENT_DELETED,
}


def _classify(type_tag: str, payload: dict) -> tuple[str, str | None, str | None]:
    """Map an archive record onto (kind, kind_detail, target)."""
    action = str(payload.get("action", ""))
    if type_tag == "CommitEvent":
        sha = payload.get("sha", "")
        return KIND_COMMIT, None, f"commits/{sha}" if sha else None
    if type_tag == "IssuesEvent":
        kind = _ISSUE_ACTIONS.get(action)
        target = f"issues/{payload['number']}" if "number" in payload else None
        if kind:
            return kind, None, target
        return KIND_OTHER, f"{type_tag}:{action}", target
    if type_tag == "PullRequestEvent":
        kind = _PR_ACTIONS.get(action)
        target = f"pulls/{payload['number']}" if "number" in payload else None
        if kind:
            return kind, None, target
        return KIND_OTHER, f"{type_tag}:{action}", target
    if type_tag in ("IssueCommentEvent", "CommitCommentEvent", "PullRequestReviewCommentEvent"):
        kind = _COMMENT_ACTIONS.get(action)
        target = payload.get("thread")
        if kind:
            return kind, None, target
        return KIND_OTHER, f"{type_tag}:{action}", target
    if type_tag == "MemberEvent" and action == "added":
        return KIND_COLLABORATOR_ADDED, None, None
    if type_tag == "MilestoneEvent" and action in ("created", "edited"):
        return KIND_MILESTONE_EDITED, None, None
    if type_tag == "ReleaseEvent" and action == "published":
        return KIND_RELEASE_PUBLISHED, None, None
    if type_tag == "PushEvent":
        if payload.get("default_branch"):
            return KIND_PUSH_DEFAULT, None, None
        return KIND_OTHER, "PushEvent:non-default", None
    detail = f"{type_tag}:{action}" if action else type_tag
    return KIND_OTHER, detail, payload.get("thread")


def _parse_archive_line(line: str, path: str, lineno: int) -> RawEvent:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", path, lineno) from exc
    try:
        type_tag = str(obj["type"])
        actor = str((obj.get("actor") or {}).get("login", "") or "")
        ts = parse_utc(obj["created_at"])
        payload = dict(obj.get("payload") or {})
        event_id = str(obj["id"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"missing or malformed field: {exc}", path, lineno) from exc
    kind, detail, target = _classify(type_tag, payload)
    return RawEvent(event_id, kind, actor, ts, target, payload, detail)


def _read_archive_jsonl(path: Path, on_error: str) -> list[RawEvent]:
    events: list[RawEvent] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                events.append(_parse_archive_line(line, str(path), lineno))
            except ParseError as exc:
                if on_error == "skip":
                    logger.warning("skipping malformed record: %s", exc)
                    continue
                raise
    return events


def _api_events(doc_dir: Path) -> list[RawEvent]:
    """Flatten an API export directory into RawEvents (file order)."""

    def load(name: str) -> list[dict]:
        path = doc_dir / name
        if not path.exists():
            return []
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise ParseError("expected a JSON array", str(path), 0)
        return data

    events: list[RawEvent] = []
    for issue in load("issues.json"):
        num = issue["number"]
        target = f"issues/{num}"
        opener = str(issue.get("user", ""))
        events.append(
            RawEvent(
                f"api:issue:{num}:opened",
                KIND_ISSUE_OPENED,
                opener,
                parse_utc(issue["created_at"]),
                target,
                {
                    "number": num,
                    "title": issue.get("title", ""),
                    "body": issue.get("body", ""),
                    "labels": list(issue.get("labels", [])),
                },
            )
        )
        if issue.get("closed_at"):
            closer = str(issue.get("closed_by") or "")
            if closer:
                events.append(
                    RawEvent(
                        f"api:issue:{num}:closed",
                        KIND_ISSUE_CLOSED,
                        closer,
                        parse_utc(issue["closed_at"]),
                        target,
                        {"number": num, "author": opener},
                    )
                )
            else:
                logger.warning("issue %s has closed_at but no closed_by; close not emitted", num)
    for pull in load("pulls.json"):
        num = pull["number"]
        target = f"pulls/{num}"
        opener = str(pull.get("user", ""))
        events.append(
            RawEvent(
                f"api:pull:{num}:opened",
                KIND_PR_OPENED,
                opener,
                parse_utc(pull["created_at"]),
                target,
                {"number": num, "title": pull.get("title", ""), "body": pull.get("body", "")},
            )
        )
        if pull.get("merged_at") and pull.get("merged_by"):
            events.append(
                RawEvent(
                    f"api:pull:{num}:merged",
                    KIND_PR_MERGED,
                    str(pull["merged_by"]),
                    parse_utc(pull["merged_at"]),
                    target,
                    {"number": num, "author": opener},
                )
            )
        elif pull.get("closed_at") and pull.get("closed_by"):
            events.append(
                RawEvent(
                    f"api:pull:{num}:closed",
                    KIND_PR_CLOSED,
                    str(pull["closed_by"]),
                    parse_utc(pull["closed_at"]),
                    target,
                    {"number": num, "author": opener},
                )
            )
    for commit in load("commits.json"):
        sha = commit["sha"]
        events.append(
            RawEvent(
                f"api:commit:{sha}",
                KIND_COMMIT,
                str(commit.get("author_login", "") or ""),
                parse_utc(commit["date"]),
                f"commits/{sha}",
                {
                    "sha": sha,
                    "message": commit.get("message", ""),
                    "author_email": commit.get("author_email", ""),
                    "author_name": commit.get("author_name", ""),
                },
            )
        )
    for name, prefix in (
        ("issue_comments.json", "issues"),
        ("pull_comments.json", "pulls"),
        ("commit_comments.json", "commits"),
    ):
        for com in load(name):
            thread = com.get("thread") or f"{prefix}/{com.get('parent', '')}"
            events.append(
                RawEvent(
                    f"api:comment:{com['id']}",
                    KIND_COMMENT_CREATED,
                    str(com.get("user", "")),
                    parse_utc(com["created_at"]),
                    thread,
                    {"comment_id": str(com["id"]), "thread": thread, "body": com.get("body", "")},
                )
            )
    return events


def read_event_stream(path: str | Path, format: str, on_error: str = "abort") -> list[RawEvent]:
    """Read one source into RawEvents in file order.

    `format` is "ArchiveJsonl" or "ApiExportJson".  `on_error` selects the
    malformed-record policy: "abort" raises ParseError with the line number,
    "skip" logs and continues.
    """
    path = Path(path)
    if on_error not in ("abort", "skip"):
        raise IngestError(f"unknown on_error policy: {on_error!r}")
    if format == "ArchiveJsonl":
        if not path.is_file():
            raise IngestError(f"archive file not found: {path}")
        return _read_archive_jsonl(path, on_error)
    if format == "ApiExportJson":
        if not path.is_dir():
            raise IngestError(f"API export directory not found: {path}")
        return _api_events(path)
    raise IngestError(f"unknown event stream format: {format!r}")


# --- dedup ------------------------------------------------------------------


def dedup_events(events: list[RawEvent]) -> list[RawEvent]:
    """Drop duplicates, keeping the first occurrence in stable order.

    Two events are duplicates when they share a source event_id or the full
    (kind, actor, timestamp, target) key; the two sources share no id space,
    so the fuzzy key is what catches the same event retrieved twice.
    """
    seen_ids: set[str] = set()
    seen_keys: set[tuple] = set()
    out: list[RawEvent] = []
    for ev in events:
        key = (ev.kind, ev.kind_detail, ev.actor, ev.timestamp, ev.target)
        if ev.event_id in seen_ids or key in seen_keys:
            continue
        seen_ids.add(ev.event_id)
        seen_keys.add(key)
        out.append(ev)
    return out


# --- identity resolution -----------------------------------------------------


def read_alias_map(path: str | Path) -> dict[tuple[str, str], str]:
    """Load alias CSV rows `canonical_login,alias_kind,alias_value`.

    Returns {(kind, value_lower): canonical}.  Overlapping groups (one alias
    claimed by two canonicals) are a fatal config error.
    """
    mapping: dict[tuple[str, str], str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise IngestError(f"alias map row needs 3 fields, got {row!r}")
            canonical, kind, value = (c.strip() for c in row)
            if kind not in ("login", "email", "name"):
                raise IngestError(f"alias kind must be login|email|name, got {kind!r}")
            key = (kind, value.lower())
            if key in mapping and mapping[key] != canonical:
                raise IngestError(
                    f"alias map is not a partition: {kind} {value!r} claimed by "
                    f"{mapping[key]!r} and {canonical!r}"
                )
            mapping[key] = canonical
    return mapping


def _normalize_name(name: str) -> str:
    return " ".join("".join(c for c in name.lower() if c.isalnum() or c.isspace()).split())


def resolve_identities(
    events: list[RawEvent],
    alias_map: dict[tuple[str, str], str] | None = None,
    contributors: list[dict] | None = None,
) -> tuple[list[RawEvent], dict[str, DeveloperId]]:
    """Replace actor fields with canonical logins; return (events, roster).

    Resolution order: exact login, then (for commit authors without a login)
    email, then normalized display name; the alias map overrides the
    heuristics.  Email/name observations come from the contributors export
    and from commit events that carry both a login and an email, and are
    discarded when ambiguous (precision over recall).  Authors that stay
    unresolved get a synthetic `~`-prefixed canonical id so they never
    collide with real logins.
    """
    alias_map = alias_map or {}
    contributors = contributors or []

    email_to_login: dict[str, str] = {}
    name_to_login: dict[str, str] = {}
    ambiguous_emails: set[str] = set()
    ambiguous_names: set[str] = set()

    def observe(table: dict, ambiguous: set, key: str, login: str) -> None:
        if not key or not login:
            return
        if key in table and table[key] != login:
            ambiguous.add(key)
            return
        table[key] = login

    account_created: dict[str, datetime] = {}
    for con in sorted(contributors, key=lambda c: str(c.get("login", ""))):
        login = str(con.get("login", ""))
        if not login:
            continue
        for email in sorted(con.get("emails", []) or []):
            observe(email_to_login, ambiguous_emails, str(email).lower(), login)
        if con.get("name"):
            observe(name_to_login, ambiguous_names, _normalize_name(str(con["name"])), login)
        if con.get("account_created_at"):
            account_created[login] = parse_utc(str(con["account_created_at"]))
    for ev in events:
        if ev.kind == KIND_COMMIT and ev.actor:
            email = str(ev.payload.get("author_email", "")).lower()
            name = _normalize_name(str(ev.payload.get("author_name", "")))
            observe(email_to_login, ambiguous_emails, email, ev.actor)
            observe(name_to_login, ambiguous_names, name, ev.actor)
    for key in ambiguous_emails:
        email_to_login.pop(key, None)
    for key in ambiguous_names:
        name_to_login.pop(key, None)

    def canonical_for_login(login: str) -> str:
        return alias_map.get(("login", login.lower()), login)

    aliases: dict[str, set[str]] = {}

    def record_alias(canonical: str, alias: str) -> None:
        if alias and alias != canonical:
            aliases.setdefault(canonical, set()).add(alias)

    def resolve(ev: RawEvent) -> str:
        if ev.actor:
            canon = canonical_for_login(ev.actor)
            record_alias(canon, ev.actor)
            return canon
        email = str(ev.payload.get("author_email", "")).lower()
        name = _normalize_name(str(ev.payload.get("author_name", "")))
        if email and ("email", email) in alias_map:
            canon = alias_map[("email", email)]
        elif name and ("name", name) in alias_map:
            canon = alias_map[("name", name)]
        elif email and email in email_to_login:
            canon = canonical_for_login(email_to_login[email])
        elif name and name in name_to_login:
            canon = canonical_for_login(name_to_login[name])
        elif email:
            canon = "~" + email.split("@", 1)[0]
        elif name:
            canon = "~" + name.replace(" ", "-")
        else:
            canon = "~unknown"
        record_alias(canon, email)
        record_alias(canon, name)
        return canon

    resolved: list[RawEvent] = []
    for ev in events:
        canon = resolve(ev)
        payload = ev.payload
        if "author" in payload and payload["author"]:
            author_canon = canonical_for_login(str(payload["author"]))
            if author_canon != payload["author"]:
                payload = dict(payload)
                payload["author"] = author_canon
        if canon == ev.actor and payload is ev.payload:
            resolved.append(ev)
        else:
            resolved.append(
                RawEvent(ev.event_id, ev.kind, canon, ev.timestamp, ev.target, payload, ev.kind_detail)
            )

    roster: dict[str, DeveloperId] = {}
    seen_logins = {ev.actor for ev in resolved}
    for con_login in account_created:
        seen_logins.add(canonical_for_login(con_login))
    for login in sorted(seen_logins):
        created = account_created.get(login)
        if created is None:
            # the account date may be recorded under a pre-canonical login
            for raw, dt in account_created.items():
                if canonical_for_login(raw) == login:
                    created = dt
                    break
        roster[login] = DeveloperId(
            canonical_login=login,
            aliases=frozenset(aliases.get(login, ())),
            account_created_at=created,
        )
    return resolved, roster


# --- windowing ---------------------------------------------------------------

WINDOW_MONTHS = 36


def window_and_bucket(
    events: list[RawEvent], meta: ProjectMeta, months: int = WINDOW_MONTHS
) -> dict[int, list[RawEvent]]:
    """Keep events in [created_at, created_at + `months`) and bucket monthly.

    All month keys 0..months-1 are present, possibly empty.
    """
    if meta.created_at is None:
        raise IngestError("project meta has no created_at")
    start = ensure_utc(meta.created_at)
    boundaries = [add_months(start, m) for m in range(months + 1)]
    end = boundaries[-1]
    buckets: dict[int, list[RawEvent]] = {m: [] for m in range(months)}
    for ev in events:
        t = ev.timestamp
        if t < start or t >= end:
            continue
        buckets[bisect_right(boundaries, t) - 1].append(ev)
    return buckets


def write_events_jsonl(events: list[RawEvent], path: str | Path) -> None:
    """Write normalized events one JSON object per line, fields in fixed order."""
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_json_obj(), ensure_ascii=False) + "\n")


def read_events_jsonl(path: str | Path) -> list[RawEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                events.append(RawEvent.from_json_obj(json.loads(line)))
    return events


def normalize_events(
    events: list[RawEvent],
    meta: ProjectMeta,
    alias_map: dict[tuple[str, str], str] | None = None,
    contributors: list[dict] | None = None,
) -> tuple[list[RawEvent], dict[str, DeveloperId], dict[int, list[RawEvent]]]:
    """Dedup, resolve, window, and time-sort a project's merged event list."""
    deduped = dedup_events(events)
    resolved, roster = resolve_identities(deduped, alias_map, contributors)
    buckets = window_and_bucket(resolved, meta)
    retained = [ev for bucket in buckets.values() for ev in bucket]
    retained.sort(key=lambda ev: (ev.timestamp, ev.event_id))
    buckets = {m: sorted(evs, key=lambda ev: (ev.timestamp, ev.event_id)) for m, evs in buckets.items()}
    return retained, roster, buckets
