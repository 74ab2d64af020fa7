from __future__ import annotations

from datetime import timedelta

import pytest

from stylematch.events import ProjectMeta, RawEvent
from stylematch.timeutil import parse_utc

T0 = parse_utc("2020-01-01T00:00:00Z")


def ev(kind, actor, offset_seconds=0, target=None, payload=None, event_id=None):
    """Shorthand event builder anchored at T0."""
    ts = T0 + timedelta(seconds=offset_seconds)
    return RawEvent(
        event_id=event_id or f"e{kind}-{actor}-{offset_seconds}",
        kind=kind,
        actor=actor,
        timestamp=ts,
        target=target,
        payload=payload or {},
    )


@pytest.fixture
def meta():
    return ProjectMeta(
        name="acme/widget",
        created_at=T0,
        sponsorship=False,
        main_language="rust",
        domain="devtools",
        validation={"pull_requests": 150, "contributors": 60, "history_months": 40},
    )
