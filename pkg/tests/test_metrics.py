import math
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stylematch.elites import compute_elite_intervals
from stylematch.events import (
    KIND_COMMENT_CREATED,
    KIND_COMMIT,
    KIND_ISSUE_CLOSED,
    KIND_ISSUE_OPENED,
    KIND_PR_MERGED,
    DeveloperId,
    ProjectMeta,
    window_and_bucket,
)
from stylematch.lexicon import CategoryProfile, FUNCTION_CATEGORIES
from stylematch.metrics import (
    CSV_HEADER,
    IssueRecord,
    LsmUndefinedError,
    MetricsError,
    assemble_record,
    compute_controls,
    compute_outcomes,
    detect_bug_issue,
    extract_issues,
    lsm_category,
    lsm_vector,
    read_records_csv,
    record_to_row,
    write_records_csv,
)
from stylematch.timeutil import add_months

from conftest import T0, ev


def _profile(values, summary=None, total=100):
    pct = {cat: v for cat, v in zip(FUNCTION_CATEGORIES, values)}
    summary = summary or {"analytic": 50.0, "clout": 50.0, "authentic": 50.0, "tone": 50.0}
    return CategoryProfile(function_pct=pct, summary=summary, total_words=total)


class TestLsmCategory:
    def test_zero_zero(self):
        assert lsm_category(0.0, 0.0) == 1.0

    def test_equal_positive(self):
        for c in (0.5, 7.0, 99.0):
            assert lsm_category(c, c) == 1.0

    def test_hand_computed(self):
        # 1 - 5/20.0001, evaluated by hand
        assert lsm_category(12.5, 7.5) == pytest.approx(0.7500012499937500, abs=1e-12)

    def test_near_zero_floor(self):
        # 1 - 5/5.0001
        assert lsm_category(5.0, 0.0) == pytest.approx(1.9999600007999814e-05, abs=1e-11)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            lsm_category(-1.0, 2.0)

    def test_vectorized(self):
        a = np.array([0.0, 12.5, 5.0])
        b = np.array([0.0, 7.5, 0.0])
        out = lsm_category(a, b)
        assert out.shape == (3,)
        assert out[0] == 1.0

    @given(
        a=st.floats(min_value=0, max_value=1e6, allow_nan=False),
        b=st.floats(min_value=0, max_value=1e6, allow_nan=False),
    )
    @settings(max_examples=500, deadline=None)
    def test_symmetry_and_bounds(self, a, b):
        x = lsm_category(a, b)
        assert lsm_category(b, a) == x
        assert 0.0 <= x <= 1.0
        if a == b:
            assert x == 1.0


class TestLsmVector:
    def test_identical_profiles_all_ones(self):
        p = _profile([5, 4, 6, 12, 8, 5, 6, 2])
        vec = lsm_vector(p, p)
        assert vec == [1.0] * 13

    def test_single_category_difference(self):
        base = [5, 4, 6, 12, 8, 5, 6, 2]
        other = list(base)
        other[0] = 9.0
        pa, pb = _profile(base), _profile(other)
        vec = lsm_vector(pa, pb)
        lsm_k = lsm_category(5.0, 9.0)
        assert vec[0] == pytest.approx((11 + lsm_k) / 12, abs=1e-12)

    def test_threshold_flags(self):
        pa = _profile([1] * 8, total=40)
        pb = _profile([1] * 8, total=100)
        with pytest.raises(LsmUndefinedError):
            lsm_vector(pa, pb, min_tokens=50)

    def test_composite_is_mean(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            pa = _profile(rng.uniform(0, 20, size=8), summary=dict(zip(("analytic", "clout", "authentic", "tone"), rng.uniform(0, 99, size=4))))
            pb = _profile(rng.uniform(0, 20, size=8), summary=dict(zip(("analytic", "clout", "authentic", "tone"), rng.uniform(0, 99, size=4))))
            vec = lsm_vector(pa, pb)
            assert abs(vec[0] - sum(vec[1:]) / 12) < 1e-12


class TestDetectBugIssue:
    def test_title_keyword(self):
        assert detect_bug_issue("Crash when saving", set())

    def test_enhancement_not_bug(self):
        assert not detect_bug_issue("Add dark mode", {"enhancement"})

    def test_label_keyword(self):
        assert detect_bug_issue("anything", {"bug"})

    def test_whole_word_only(self):
        assert not detect_bug_issue("Debugger improvements", set())
        assert detect_bug_issue("fix the debugger", set())

    def test_custom_keywords(self):
        assert detect_bug_issue("regression in parser", set(), keywords=("regression",))


def _meta():
    return ProjectMeta(
        name="p",
        created_at=T0,
        sponsorship=True,
        main_language="go",
        domain="web",
    )


class TestComputeOutcomes:
    def test_constant_commits(self):
        events = []
        for m in range(36):
            start = add_months(T0, m)
            for k in range(5):
                events.append(
                    ev(KIND_COMMIT, "a", int((start - T0).total_seconds()) + k, f"commits/{m}-{k}")
                )
        buckets = window_and_bucket(events, _meta())
        out = compute_outcomes(buckets, [], _meta())
        assert out.new_c == 5.0
        assert out.months_used["new_c"] == 36

    def test_bct_mean(self):
        issues = [
            IssueRecord("issues/1", T0, "bug one", set(), T0 + timedelta(days=10)),
            IssueRecord("issues/2", T0, "bug two", set(), T0 + timedelta(days=20)),
        ]
        buckets = window_and_bucket([], _meta())
        out = compute_outcomes(buckets, issues, _meta())
        assert out.bct == pytest.approx(15.0)

    def test_bfr_direct_count(self):
        issues = [
            IssueRecord(f"issues/{i}", T0 + timedelta(hours=i), f"bug {i}", set(),
                        T0 + timedelta(days=1) if i < 3 else None)
            for i in range(4)
        ]
        buckets = window_and_bucket([], _meta())
        out = compute_outcomes(buckets, issues, _meta())
        assert out.bfr == pytest.approx(0.75)

    def test_zero_new_bug_month_excluded(self):
        # bugs opened only in month 0; 2 of them closed in month 1:
        # month 1 has closes but no opens -> excluded from the BFR mean
        issues = [
            IssueRecord("issues/1", T0, "bug a", set(), add_months(T0, 1) + timedelta(days=1)),
            IssueRecord("issues/2", T0 + timedelta(hours=1), "bug b", set(), add_months(T0, 1) + timedelta(days=2)),
        ]
        buckets = window_and_bucket([], _meta())
        out = compute_outcomes(buckets, issues, _meta())
        assert out.bfr == pytest.approx(0.0)  # month 0: 0 fixed / 2 new
        assert out.months_used["bfr"] == 1

    def test_no_bugs_flags_missing(self):
        buckets = window_and_bucket([], _meta())
        out = compute_outcomes(buckets, [], _meta())
        assert out.bct is None and out.bfr is None
        assert "degenerate-months" in out.flags

    @given(data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_matches_naive_recount(self, data):
        rng_months = data.draw(
            st.lists(st.integers(min_value=0, max_value=6), min_size=36, max_size=36)
        )
        issues = []
        counter = 0
        for m, n_bugs in enumerate(rng_months):
            start = add_months(T0, m)
            for k in range(n_bugs):
                counter += 1
                opened = start + timedelta(days=2, minutes=k)
                closed = None
                if data.draw(st.booleans()):
                    closed = opened + timedelta(days=data.draw(st.integers(1, 40)))
                    if closed >= add_months(T0, 36):
                        closed = None
                issues.append(IssueRecord(f"issues/{counter}", opened, "bug", set(), closed))
        commit_events = []
        for m, n_commits in enumerate(rng_months):
            start = add_months(T0, m)
            for k in range(n_commits):
                commit_events.append(
                    ev(KIND_COMMIT, "a", int((start - T0).total_seconds()) + k, f"commits/{m}-{k}")
                )
        buckets = window_and_bucket(commit_events, _meta())
        out = compute_outcomes(buckets, issues, _meta())

        # naive per-month recount, written independently of the implementation
        from stylematch.timeutil import month_index

        opens = [0] * 36
        closes = [0] * 36
        cycles = [[] for _ in range(36)]
        for iss in issues:
            opens[month_index(T0, iss.opened_at)] += 1
            if iss.closed_at is not None:
                mm = month_index(T0, iss.closed_at)
                closes[mm] += 1
                cycles[mm].append((iss.closed_at - iss.opened_at).total_seconds() / 86400)
        assert out.new_c == pytest.approx(sum(rng_months) / 36)
        assert out.new_b == pytest.approx(sum(opens) / 36)
        ratios = [closes[m] / opens[m] for m in range(36) if opens[m] > 0]
        if ratios:
            assert out.bfr == pytest.approx(sum(ratios) / len(ratios), abs=1e-9)
        else:
            assert out.bfr is None
        bcts = [sum(c) / len(c) for c in cycles if c]
        if bcts:
            assert out.bct == pytest.approx(sum(bcts) / len(bcts), abs=1e-9)
        else:
            assert out.bct is None


class TestExtractIssues:
    def test_reopened_issue_final_close(self):
        events = [
            ev(KIND_ISSUE_OPENED, "a", 0, "issues/1", {"number": 1, "title": "bug here"}),
            ev(KIND_ISSUE_CLOSED, "b", 100, "issues/1", {"number": 1, "author": "a"}),
            ev(KIND_ISSUE_CLOSED, "b", 500, "issues/1", {"number": 1, "author": "a"}),
        ]
        (issue,) = extract_issues(events)
        assert issue.closed_at == T0 + timedelta(seconds=500)

    def test_labels_accumulate(self):
        from stylematch.events import KIND_ISSUE_LABELED

        events = [
            ev(KIND_ISSUE_OPENED, "a", 0, "issues/1", {"number": 1, "title": "t", "labels": ["x"]}),
            ev(KIND_ISSUE_LABELED, "b", 50, "issues/1", {"number": 1, "label": "bug"}),
        ]
        (issue,) = extract_issues(events)
        assert issue.labels == {"x", "bug"}

    def test_close_without_open_ignored(self):
        events = [ev(KIND_ISSUE_CLOSED, "b", 100, "issues/9", {"number": 9})]
        assert extract_issues(events) == []


class TestComputeControls:
    def _buckets_and_intervals(self):
        events = [
            ev(KIND_PR_MERGED, "boss", 0, "pulls/1", {"author": "worker"}),
            ev(KIND_COMMENT_CREATED, "worker", 100, "issues/1", {"comment_id": "c", "body": "hi"}),
        ]
        events.sort(key=lambda e: e.timestamp)
        meta = _meta()
        return window_and_bucket(events, meta), compute_elite_intervals(events), meta

    def test_experience_mean(self):
        buckets, intervals, meta = self._buckets_and_intervals()
        roster = {
            "boss": DeveloperId("boss", frozenset(), T0 - timedelta(days=100)),
            "worker": DeveloperId("worker", frozenset(), T0 - timedelta(days=300)),
        }
        controls = compute_controls(buckets, intervals, meta, roster)
        assert controls.avg_experience == pytest.approx(200.0)

    def test_sponsorship_required(self):
        buckets, intervals, meta = self._buckets_and_intervals()
        meta.sponsorship = None
        with pytest.raises(MetricsError):
            compute_controls(buckets, intervals, meta, {})

    def test_project_size_constant(self):
        events = []
        for m in range(36):
            start = add_months(T0, m)
            for d in range(10):
                events.append(
                    ev(KIND_COMMENT_CREATED, f"dev{d}", int((start - T0).total_seconds()) + d,
                       "issues/1", {"comment_id": f"{m}-{d}", "body": "x"})
                )
        meta = _meta()
        buckets = window_and_bucket(events, meta)
        controls = compute_controls(buckets, {}, meta, {})
        assert controls.project_size == pytest.approx(10.0)

    def test_no_account_dates_flagged(self):
        buckets, intervals, meta = self._buckets_and_intervals()
        controls = compute_controls(buckets, intervals, meta, {})
        assert controls.avg_experience is None
        assert "experience-missing" in controls.flags


class TestAssembleRecord:
    def _parts(self):
        meta = _meta()
        buckets = window_and_bucket(
            [ev(KIND_COMMENT_CREATED, "worker", 10, "issues/1", {"comment_id": "c", "body": "x"})],
            meta,
        )
        issues = [IssueRecord("issues/1", T0, "bug", set(), T0 + timedelta(days=3))]
        outcomes = compute_outcomes(buckets, issues, meta)
        roster = {"worker": DeveloperId("worker", frozenset(), T0 - timedelta(days=50))}
        controls = compute_controls(buckets, {}, meta, roster)
        return outcomes, controls

    def test_complete_record_field_count(self):
        outcomes, controls = self._parts()
        record = assemble_record("acme/widget", outcomes, [1.0] * 13, controls)
        row = record.to_csv_row()
        assert len(row) == len(CSV_HEADER) == 25  # project + 23 values + flags
        assert record.complete

    def test_lsm_undefined_flag_propagates(self):
        outcomes, controls = self._parts()
        record = assemble_record("acme/widget", outcomes, None, controls)
        assert "lsm-undefined" in record.flags
        row = record.to_csv_row()
        assert row[5] == ""  # lsm0 empty

    def test_determinism(self):
        outcomes, controls = self._parts()
        a = assemble_record("p", outcomes, [0.5] * 13, controls)
        b = assemble_record("p", outcomes, [0.5] * 13, controls)
        assert a.to_csv_row() == b.to_csv_row()


def test_records_csv_roundtrip(tmp_path):
    meta = _meta()
    buckets = window_and_bucket([], meta)
    outcomes = compute_outcomes(buckets, [IssueRecord("issues/1", T0, "bug", set(), T0 + timedelta(days=2))], meta)
    roster = {}
    controls = compute_controls(buckets, {}, meta, roster)
    record = assemble_record("acme/widget", outcomes, [0.25] * 13, controls)
    path = tmp_path / "projects.csv"
    write_records_csv([record], path)
    (row,) = read_records_csv(path)
    assert row.project == "acme/widget"
    assert row.lsm[0] == 0.25
    assert row.flags == sorted(set(record.flags))
    in_memory = record_to_row(record)
    assert in_memory.lsm == row.lsm
    assert in_memory.outcomes == row.outcomes
