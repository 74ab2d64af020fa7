"""Style-matching scores, outcome variables, controls, and project records.

Per-category matching is 1 - |a-b| / (a+b+0.0001); the composite is the
mean of the 12 category scores.  The four outcomes are monthly means over
the 36-month window: new commits, bug cycle time in days, newly found bugs,
and the fixed-to-new bug ratio.  Degenerate months (no new bugs for the
ratio, no closed bugs for cycle time) are skipped, not imputed, and the
number of months actually used is recorded.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime
from functools import lru_cache
from pathlib import Path

import numpy as np

from .elites import EliteInterval, elite_ratio
from .events import (
    KIND_COMMIT,
    KIND_ISSUE_CLOSED,
    KIND_ISSUE_LABELED,
    KIND_ISSUE_OPENED,
    ProjectMeta,
    RawEvent,
)
from .lexicon import FUNCTION_CATEGORIES, SUMMARY_VARIABLES, CategoryProfile
from .timeutil import add_months

logger = logging.getLogger(__name__)

LSM_EPSILON = 0.0001

# lsm index 0 is the composite; 1..8 the function-word categories in
# dictionary order; 9..12 the summary variables.
LSM_COMPONENTS = tuple(FUNCTION_CATEGORIES) + tuple(SUMMARY_VARIABLES)
LSM_NAMES = ("lsm0",) + tuple(f"lsm{i}" for i in range(1, 13))

DEFAULT_BUG_KEYWORDS = ("bug", "defect", "error", "fault", "crash", "fix")
DEFAULT_MIN_CORPUS_TOKENS = 50

FLAG_LSM_UNDEFINED = "lsm-undefined"
FLAG_DEGENERATE_MONTHS = "degenerate-months"


class MetricsError(Exception):
    pass


class LsmUndefinedError(MetricsError):
    """One side's corpus is below the minimum word threshold."""


def lsm_category(cat_a, cat_b):
    """Similarity 1 - |a-b|/(a+b+0.0001) on scalars or arrays."""
    a = np.asarray(cat_a, dtype=np.float64)
    b = np.asarray(cat_b, dtype=np.float64)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("category values must be non-negative")
    out = 1.0 - np.abs(a - b) / (a + b + LSM_EPSILON)
    if out.ndim == 0:
        return float(out)
    return out


def lsm_vector(
    profile_elite: CategoryProfile,
    profile_nonelite: CategoryProfile,
    min_tokens: int = DEFAULT_MIN_CORPUS_TOKENS,
) -> list[float]:
    """The 13 matching values: composite first, then the 12 components.

    Raises LsmUndefinedError when either side is below the word threshold.
    """
    if profile_elite.total_words < min_tokens or profile_nonelite.total_words < min_tokens:
        raise LsmUndefinedError(
            f"corpus below {min_tokens}-token threshold "
            f"(elite={profile_elite.total_words}, nonelite={profile_nonelite.total_words})"
        )
    values = []
    for name in LSM_COMPONENTS:
        if name in profile_elite.function_pct:
            a, b = profile_elite.function_pct[name], profile_nonelite.function_pct[name]
        else:
            a, b = profile_elite.summary[name], profile_nonelite.summary[name]
        values.append(lsm_category(a, b))
    composite = sum(values) / len(values)
    return [composite] + values


@lru_cache(maxsize=8)
def _keyword_pattern(keywords: tuple[str, ...]) -> re.Pattern:
    return re.compile(r"\b(?:" + "|".join(re.escape(k) for k in keywords) + r")\b", re.IGNORECASE)


def detect_bug_issue(
    title: str, labels, keywords: tuple[str, ...] = DEFAULT_BUG_KEYWORDS
) -> bool:
    """True iff any keyword appears as a whole word in the title or a label."""
    pattern = _keyword_pattern(tuple(keywords))
    if pattern.search(title or ""):
        return True
    return any(pattern.search(str(label)) for label in labels or ())


@dataclass
class IssueRecord:
    """One issue's lifecycle as observed inside the window."""

    target: str
    opened_at: datetime
    title: str = ""
    labels: set = field(default_factory=set)
    closed_at: datetime | None = None  # final close wins for re-opened issues


def extract_issues(events: list[RawEvent]) -> list[IssueRecord]:
    """Collect issue open/close/label history from windowed events.

    Issues whose open event is outside the window are invisible here and do
    not contribute to any bug metric.
    """
    issues: dict[str, IssueRecord] = {}
    for ev in events:
        if ev.kind == KIND_ISSUE_OPENED and ev.target:
            rec = issues.setdefault(ev.target, IssueRecord(ev.target, ev.timestamp))
            rec.opened_at = ev.timestamp
            rec.title = str(ev.payload.get("title", "") or "")
            rec.labels.update(str(lab) for lab in ev.payload.get("labels", []) or [])
        elif ev.kind == KIND_ISSUE_LABELED and ev.target in issues:
            label = ev.payload.get("label")
            if label:
                issues[ev.target].labels.add(str(label))
        elif ev.kind == KIND_ISSUE_CLOSED and ev.target in issues:
            rec = issues[ev.target]
            if rec.closed_at is None or ev.timestamp > rec.closed_at:
                rec.closed_at = ev.timestamp
    return [issues[t] for t in sorted(issues)]


@dataclass
class OutcomeSet:
    """The four 36-month outcome means and their usable-month counts."""

    new_c: float | None
    bct: float | None
    new_b: float | None
    bfr: float | None
    months_used: dict[str, int] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


def compute_outcomes(
    buckets: dict[int, list[RawEvent]],
    issues: list[IssueRecord],
    meta: ProjectMeta,
    bug_keywords: tuple[str, ...] = DEFAULT_BUG_KEYWORDS,
) -> OutcomeSet:
    """Monthly means for commits, bug cycle time, new bugs, and fix ratio."""
    from bisect import bisect_right

    months = sorted(buckets)
    n_months = len(months)
    created = meta.created_at
    boundaries = [add_months(created, m) for m in range(n_months + 1)]

    def month_of(t: datetime) -> int:
        return bisect_right(boundaries, t) - 1

    new_c_monthly = [sum(1 for ev in buckets[m] if ev.kind == KIND_COMMIT) for m in months]

    bugs = [iss for iss in issues if detect_bug_issue(iss.title, iss.labels, bug_keywords)]
    opened_per_month = [0] * n_months
    closed_per_month = [0] * n_months
    cycle_days_per_month: list[list[float]] = [[] for _ in months]
    for bug in bugs:
        opened_per_month[month_of(bug.opened_at)] += 1
        if bug.closed_at is not None:
            m = month_of(bug.closed_at)
            if 0 <= m < n_months:
                closed_per_month[m] += 1
                cycle_days_per_month[m].append(
                    (bug.closed_at - bug.opened_at).total_seconds() / 86400.0
                )

    bfr_monthly = [
        closed_per_month[m] / opened_per_month[m] for m in months if opened_per_month[m] > 0
    ]
    bct_monthly = [
        sum(days) / len(days) for days in cycle_days_per_month if days
    ]

    flags: list[str] = []
    months_used = {
        "new_c": n_months,
        "new_b": n_months,
        "bfr": len(bfr_monthly),
        "bct": len(bct_monthly),
    }
    new_c = sum(new_c_monthly) / n_months
    new_b = sum(opened_per_month) / n_months
    bfr = sum(bfr_monthly) / len(bfr_monthly) if bfr_monthly else None
    bct = sum(bct_monthly) / len(bct_monthly) if bct_monthly else None
    if bfr is None or bct is None:
        flags.append(FLAG_DEGENERATE_MONTHS)
    return OutcomeSet(new_c=new_c, bct=bct, new_b=new_b, bfr=bfr, months_used=months_used, flags=flags)


@dataclass
class ControlSet:
    """The six controls: elite ratio, size, sponsorship, experience,
    language, domain."""

    elite_ratio: float | None
    project_size: float
    sponsorship: bool
    avg_experience: float | None
    main_language: str
    domain: str
    flags: list[str] = field(default_factory=list)


def compute_controls(
    buckets: dict[int, list[RawEvent]],
    intervals: dict[str, list[EliteInterval]],
    meta: ProjectMeta,
    roster: dict,
) -> ControlSet:
    """Controls from events, status intervals, and manually coded metadata."""
    if meta.sponsorship is None:
        raise MetricsError(
            f"project {meta.name}: sponsorship must be set in the project meta (manual input)"
        )
    flags: list[str] = []
    _, ratio_mean = elite_ratio(buckets, intervals, meta.created_at)
    if ratio_mean is None:
        flags.append("elite-ratio-missing")

    months = sorted(buckets)
    size = sum(len({ev.actor for ev in buckets[m]}) for m in months) / len(months)

    ages = []
    for login in sorted({ev.actor for m in months for ev in buckets[m]}):
        dev = roster.get(login)
        created = getattr(dev, "account_created_at", None) if dev else None
        if created is not None:
            days = (meta.created_at - created).total_seconds() / 86400.0
            ages.append(max(0.0, days))
    avg_experience = sum(ages) / len(ages) if ages else None
    if avg_experience is None:
        flags.append("experience-missing")

    return ControlSet(
        elite_ratio=ratio_mean,
        project_size=size,
        sponsorship=bool(meta.sponsorship),
        avg_experience=avg_experience,
        main_language=meta.main_language,
        domain=meta.domain,
        flags=flags,
    )


CSV_HEADER = (
    ["project", "new_c", "bct", "new_b", "bfr"]
    + list(LSM_NAMES)
    + [f"control{i}" for i in range(1, 7)]
    + ["flags"]
)


@dataclass
class ProjectRecord:
    """The per-project analysis row: 4 outcomes + 13 LSM values + 6 controls."""

    project: str
    outcomes: OutcomeSet | None = None
    lsm: list[float] | None = None
    controls: ControlSet | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.flags

    def to_csv_row(self) -> list[str]:
        def num(value) -> str:
            return "" if value is None else repr(float(value))

        out = self.outcomes
        ctl = self.controls
        row = [self.project]
        row += [num(out.new_c if out else None), num(out.bct if out else None)]
        row += [num(out.new_b if out else None), num(out.bfr if out else None)]
        lsm = self.lsm if self.lsm is not None else [None] * 13
        row += [num(v) for v in lsm]
        row += [
            num(ctl.elite_ratio if ctl else None),
            num(ctl.project_size if ctl else None),
            "" if ctl is None else ("1" if ctl.sponsorship else "0"),
            num(ctl.avg_experience if ctl else None),
            ctl.main_language if ctl else "",
            ctl.domain if ctl else "",
        ]
        row.append(";".join(sorted(set(self.flags))))
        return row


def assemble_record(
    project_id: str,
    outcomes: OutcomeSet,
    lsm: list[float] | None,
    controls: ControlSet,
) -> ProjectRecord:
    """Join the pieces into one record, propagating every flag."""
    flags = list(outcomes.flags) + list(controls.flags)
    if lsm is None:
        flags.append(FLAG_LSM_UNDEFINED)
    return ProjectRecord(
        project=project_id,
        outcomes=outcomes,
        lsm=list(lsm) if lsm is not None else None,
        controls=controls,
        flags=sorted(set(flags)),
    )


def write_records_csv(records: list[ProjectRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in sorted(records, key=lambda r: r.project):
            writer.writerow(rec.to_csv_row())


@dataclass
class RecordRow:
    """One parsed projects.csv row, as consumed by the regression suite."""

    project: str
    outcomes: dict[str, float | None]
    lsm: list[float | None]
    controls: dict[str, object]
    flags: list[str]

    @property
    def complete(self) -> bool:
        return not self.flags


def read_records_csv(path: str | Path) -> list[RecordRow]:
    rows: list[RecordRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise MetricsError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            def num(key: str) -> float | None:
                return float(row[key]) if row[key] != "" else None

            rows.append(
                RecordRow(
                    project=row["project"],
                    outcomes={k: num(k) for k in ("new_c", "bct", "new_b", "bfr")},
                    lsm=[num(name) for name in LSM_NAMES],
                    controls={
                        "elite_ratio": num("control1"),
                        "project_size": num("control2"),
                        "sponsorship": row["control3"] == "1" if row["control3"] != "" else None,
                        "avg_experience": num("control4"),
                        "main_language": row["control5"],
                        "domain": row["control6"],
                    },
                    flags=[f for f in row["flags"].split(";") if f],
                )
            )
    return rows


def record_to_row(rec: ProjectRecord) -> RecordRow:
    """In-memory equivalent of a CSV round trip."""
    out = rec.outcomes
    ctl = rec.controls
    return RecordRow(
        project=rec.project,
        outcomes={
            "new_c": out.new_c if out else None,
            "bct": out.bct if out else None,
            "new_b": out.new_b if out else None,
            "bfr": out.bfr if out else None,
        },
        lsm=list(rec.lsm) if rec.lsm is not None else [None] * 13,
        controls={
            "elite_ratio": ctl.elite_ratio if ctl else None,
            "project_size": ctl.project_size if ctl else None,
            "sponsorship": ctl.sponsorship if ctl else None,
            "avg_experience": ctl.avg_experience if ctl else None,
            "main_language": ctl.main_language if ctl else "",
            "domain": ctl.domain if ctl else "",
        },
        flags=list(rec.flags),
    )
