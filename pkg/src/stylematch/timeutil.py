"""UTC instants and calendar-month arithmetic shared across the pipeline.

All timestamps in the pipeline are timezone-aware UTC datetimes at second
precision.  Month offsets are whole calendar months from a project's
creation instant; adding months clamps the day-of-month to the last valid
day of the target month (Jan 31 + 1 month = Feb 28/29).
"""

from __future__ import annotations

import calendar
from datetime import datetime, timezone

UTC = timezone.utc


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 instant into an aware UTC datetime (second precision)."""
    raw = value.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC).replace(microsecond=0)


def iso_utc(dt: datetime) -> str:
    """Render an aware datetime as `YYYY-MM-DDTHH:MM:SSZ`."""
    return dt.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


def ensure_utc(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        raise ValueError("naive datetime where a UTC instant is required")
    return dt.astimezone(UTC)


def add_months(dt: datetime, months: int) -> datetime:
    """Shift `dt` by whole calendar months, clamping the day to month end."""
    carry, month0 = divmod(dt.month - 1 + months, 12)
    year = dt.year + carry
    month = month0 + 1
    day = min(dt.day, calendar.monthrange(year, month)[1])
    return dt.replace(year=year, month=month, day=day)


def month_index(origin: datetime, t: datetime) -> int:
    """Number of whole calendar months between `origin` and `t` (t >= origin).

    Equivalently the largest k with origin + k months <= t.
    """
    k = (t.year - origin.year) * 12 + (t.month - origin.month)
    if add_months(origin, k) > t:
        k -= 1
    return k
