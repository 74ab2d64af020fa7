"""Synthetic fixture corpora with planted outcome effects.

The generator builds, per project, conversation text whose token category
frequencies realize drawn per-side profiles, then schedules commit and bug
events so the four outcome variables follow a planted linear (optionally
quadratic) model of the composite matching score plus Gaussian noise.  The
composite used for planting is computed with the real scoring code on the
generated tokens, so a correct pipeline re-derives it exactly and a
regression on the resulting records recovers the planted coefficients.

Noise can be given explicitly per outcome or derived from a target
theoretical power for the planted effect (two-sided t-test at alpha=0.05).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

import numpy as np
from scipy import stats as sstats

from .events import (
    KIND_COMMENT_CREATED,
    KIND_COMMIT,
    KIND_ISSUE_CLOSED,
    KIND_ISSUE_OPENED,
    KIND_PR_MERGED,
    KIND_PR_OPENED,
    ProjectMeta,
    RawEvent,
)
from .lexicon import (
    ApproxSummaryScorer,
    CategoryDictionary,
    FUNCTION_CATEGORIES,
    bundled_acronyms_path,
    bundled_dictionary_path,
    load_dictionary,
    score_corpus,
)
from .metrics import lsm_vector
from .textprep import TokenStream, load_acronyms, prepare_tokens
from .timeutil import add_months, iso_utc, parse_utc

BASE_CREATED_AT = parse_utc("2018-01-01T00:00:00Z")

DEFAULT_CATEGORY_BASE = {
    "personal_pronouns": 8.0,
    "impersonal_pronouns": 5.0,
    "articles": 7.0,
    "prepositions": 13.0,
    "auxiliary_verbs": 9.0,
    "common_adverbs": 5.0,
    "conjunctions": 6.0,
    "negations": 2.0,
}

_FILLER_CANDIDATES = (
    "window garden yellow mountain river stone basket copper maple violet "
    "harbor meadow lantern pepper walnut marble cedar amber canyon breeze "
    "fabric pigeon saddle timber velvet willow barrel candle falcon harvest "
    "lavender mirror nutmeg orchard pebble quartz ribbon sparrow thimble "
    "tunnel umbrella vessel wagon anchor blanket compass dolphin feather"
).split()

_LANGUAGE_POOL = ("python", "rust", "go", "javascript")
_DOMAIN_POOL = ("devtools", "web", "data", "infra")


class SynthError(Exception):
    pass


@dataclass
class PlantedModel:
    """Outcome = intercept + lin*lsm0 + quad*(lsm0 - quad_center)^2 + noise."""

    intercept: float
    lin: float = 0.0
    quad: float = 0.0
    quad_center: float = 0.0


@dataclass
class SynthSpec:
    n_projects: int = 20
    seed: int = 7
    tokens_per_side: tuple[int, int] = (600, 1200)
    message_tokens: tuple[int, int] = (30, 70)
    devs_range: tuple[int, int] = (6, 10)
    elite_fraction: float = 0.25
    category_base: dict = field(default_factory=lambda: dict(DEFAULT_CATEGORY_BASE))
    category_spread: float = 1.5
    prs_per_month: int = 3
    planted: dict = field(
        default_factory=lambda: {
            "new_c": PlantedModel(intercept=10.0, lin=4.0),
            "bct": PlantedModel(intercept=8.0),
            "new_b": PlantedModel(intercept=6.0),
            "bfr": PlantedModel(intercept=0.7),
        }
    )
    noise_scales: dict = field(default_factory=dict)
    power_target: float | None = None
    languages: tuple[str, ...] = _LANGUAGE_POOL
    domains: tuple[str, ...] = _DOMAIN_POOL

    def validate(self) -> None:
        if self.n_projects < 1:
            raise SynthError("n_projects must be positive")
        if not (0.0 < self.elite_fraction < 1.0):
            raise SynthError("elite_fraction must be in (0, 1): cross-status threads need both sides")
        for cat, base in self.category_base.items():
            if base < 0:
                raise SynthError(f"negative target percentage for {cat}")
        if self.tokens_per_side[0] < 100:
            raise SynthError("tokens_per_side must allow at least 100 tokens")


@dataclass
class ProjectTruth:
    project: str
    lsm: list[float]
    outcomes_planted: dict[str, float]
    outcomes_realized: dict[str, float]


@dataclass
class ProjectData:
    meta: ProjectMeta
    events: list[RawEvent]
    contributors: list[dict]
    truth: ProjectTruth


@dataclass
class SynthCorpus:
    projects: list[ProjectData]
    noise_scales: dict[str, float]
    spec: SynthSpec


def _unique_markers(dictionary: CategoryDictionary) -> dict[str, str]:
    """One word per category that matches that category alone."""
    markers: dict[str, str] = {}
    for cat in FUNCTION_CATEGORIES:
        for word in sorted(dictionary.literals[cat]):
            if dictionary.match_categories(word) == frozenset({cat}):
                markers[cat] = word
                break
        if cat not in markers:
            raise SynthError(f"dictionary has no word unique to category {cat}")
    return markers


def _safe_fillers(dictionary: CategoryDictionary, acronyms: dict[str, str]) -> list[str]:
    """Filler words that survive text prep untouched and match no category."""
    from .lexicon import _NEGATIVE_WORDS, _POSITIVE_WORDS

    safe = []
    for word in _FILLER_CANDIDATES:
        if dictionary.match_categories(word):
            continue
        if word in acronyms or word in _POSITIVE_WORDS or word in _NEGATIVE_WORDS:
            continue
        stream = prepare_tokens(word, acronyms)
        if stream.tokens == [word]:
            safe.append(word)
    if len(safe) < 10:
        raise SynthError("not enough safe filler words")
    return safe


# personal-pronoun submarkers (each unique to that category) let the
# approximate clout/authentic scores vary across sides; the sentiment pair
# does the same for tone.  None of these words belongs to any other category.
_PPRON_SUBMARKERS = ("i", "we", "you", "him")
_SENTIMENT_WORDS = ("thanks", "broken")


def _side_tokens(
    rng: np.random.Generator,
    n_tokens: int,
    targets: dict[str, float],
    markers: dict[str, str],
    fillers: list[str],
) -> list[str]:
    tokens: list[str] = []
    for cat in FUNCTION_CATEGORIES:
        count = int(round(targets[cat] * n_tokens / 100.0))
        if cat == "personal_pronouns":
            weights = rng.dirichlet(np.ones(len(_PPRON_SUBMARKERS)))
            split = (weights * count).astype(int)
            split[0] += count - int(split.sum())
            for word, k in zip(_PPRON_SUBMARKERS, split):
                tokens.extend([word] * int(k))
        else:
            tokens.extend([markers[cat]] * count)
    for word in _SENTIMENT_WORDS:
        rate = max(0.0, rng.normal(1.5, 0.8))
        tokens.extend([word] * int(round(rate * n_tokens / 100.0)))
    n_fill = n_tokens - len(tokens)
    if n_fill < 0:
        raise SynthError("category targets exceed 100% of tokens")
    tokens.extend(rng.choice(fillers, size=n_fill).tolist())
    rng.shuffle(tokens)
    return tokens


def _chunk(tokens: list[str], k: int) -> list[list[str]]:
    """Split tokens into exactly k non-empty contiguous chunks."""
    n = len(tokens)
    bounds = [round(i * n / k) for i in range(k + 1)]
    return [tokens[bounds[i] : bounds[i + 1]] for i in range(k)]


def noise_for_power(
    effect: float, effect_column: np.ndarray, power: float = 0.95, alpha: float = 0.05
) -> float:
    """Noise sigma so a two-sided t-test on `effect` has the target power.

    `effect_column` is the planted regressor (already residualized against
    any other planted terms where relevant); the small 0.95 factor absorbs
    variance soaked up by the control covariates.
    """
    lam = sstats.norm.ppf(1 - alpha / 2) + sstats.norm.ppf(power)
    sd = float(np.std(effect_column, ddof=1)) * 0.95
    n = effect_column.size
    return abs(effect) * sd * math.sqrt(n) / lam


def _derive_noise(spec: SynthSpec, lsm0: np.ndarray) -> dict[str, float]:
    scales = {k: 1.0 for k in ("new_c", "bct", "new_b", "bfr")}
    scales.update(spec.noise_scales)
    if spec.power_target is None:
        return scales
    for outcome, model in spec.planted.items():
        if model.quad != 0.0:
            sq = (lsm0 - lsm0.mean()) ** 2
            design = np.column_stack([np.ones_like(lsm0), lsm0])
            coef, *_ = np.linalg.lstsq(design, sq, rcond=None)
            resid = sq - design @ coef
            scales[outcome] = noise_for_power(model.quad, resid, spec.power_target)
        elif model.lin != 0.0:
            scales[outcome] = noise_for_power(model.lin, lsm0 - lsm0.mean(), spec.power_target)
    return scales


def _spread_total(total: int, months: int) -> list[int]:
    base, extra = divmod(total, months)
    return [base + (1 if m < extra else 0) for m in range(months)]


def generate_corpus(spec: SynthSpec) -> SynthCorpus:
    """Build all projects in memory: texts, profiles, planted outcomes, events."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    dictionary = load_dictionary(bundled_dictionary_path())
    acronyms = load_acronyms(bundled_acronyms_path())
    markers = _unique_markers(dictionary)
    fillers = _safe_fillers(dictionary, acronyms)
    for word in _PPRON_SUBMARKERS:
        if dictionary.match_categories(word) != frozenset({"personal_pronouns"}):
            raise SynthError(f"submarker {word!r} is not unique to personal_pronouns")
    for word in _SENTIMENT_WORDS:
        if dictionary.match_categories(word):
            raise SynthError(f"sentiment word {word!r} collides with a function category")
    scorer = ApproxSummaryScorer()

    # pass 1: texts and matching scores
    sides: list[tuple[list[str], list[str]]] = []
    lsm_vectors: list[list[float]] = []
    for _ in range(spec.n_projects):
        targets = {}
        for side in ("elite", "nonelite"):
            targets[side] = {
                cat: float(np.clip(base + rng.normal(0.0, spec.category_spread), 0.2, 30.0))
                for cat, base in spec.category_base.items()
            }
        n_e = int(rng.integers(spec.tokens_per_side[0], spec.tokens_per_side[1] + 1))
        n_n = int(rng.integers(spec.tokens_per_side[0], spec.tokens_per_side[1] + 1))
        tok_e = _side_tokens(rng, n_e, targets["elite"], markers, fillers)
        tok_n = _side_tokens(rng, n_n, targets["nonelite"], markers, fillers)
        prof_e = score_corpus(TokenStream(list(tok_e)), dictionary, scorer)
        prof_n = score_corpus(TokenStream(list(tok_n)), dictionary, scorer)
        lsm_vectors.append(lsm_vector(prof_e, prof_n, min_tokens=1))
        sides.append((tok_e, tok_n))

    lsm0 = np.array([v[0] for v in lsm_vectors])
    scales = _derive_noise(spec, lsm0)

    # pass 2: outcomes and event schedules
    projects: list[ProjectData] = []
    for i in range(spec.n_projects):
        name = f"synth/project-{i:03d}"
        planted: dict[str, float] = {}
        for outcome, model in spec.planted.items():
            value = (
                model.intercept
                + model.lin * lsm0[i]
                + model.quad * (lsm0[i] - model.quad_center) ** 2
                + rng.normal(0.0, scales[outcome])
            )
            planted[outcome] = float(value)
        projects.append(
            _build_project(name, sides[i], lsm_vectors[i], planted, spec, rng)
        )
    return SynthCorpus(projects=projects, noise_scales=scales, spec=spec)


def _build_project(
    name: str,
    side_tokens: tuple[list[str], list[str]],
    lsm: list[float],
    planted: dict[str, float],
    spec: SynthSpec,
    rng: np.random.Generator,
) -> ProjectData:
    created = BASE_CREATED_AT
    months = 36
    tok_e, tok_n = side_tokens

    n_devs = int(rng.integers(spec.devs_range[0], spec.devs_range[1] + 1))
    n_elites = min(max(1, round(spec.elite_fraction * n_devs)), n_devs - 1)
    elites = [f"elite{k}" for k in range(n_elites)]
    nonelites = [f"dev{k}" for k in range(n_devs - n_elites)]

    contributors = []
    for login in elites + nonelites:
        age_days = int(rng.integers(100, 2000))
        contributors.append(
            {
                "login": login,
                "account_created_at": iso_utc(created - timedelta(days=age_days)),
            }
        )

    events: list[RawEvent] = []
    eid = 0

    def emit(kind: str, actor: str, ts, target=None, payload=None) -> None:
        nonlocal eid
        events.append(RawEvent(f"{name}#{eid}", kind, actor, ts, target, payload or {}))
        eid += 1

    issue_no = 0
    pr_no = 0

    # monthly write actions keep every elite's status alive: each elite
    # merges one PR opened by a non-elite, padded to 3+ PRs per month
    for m in range(months):
        m_start = add_months(created, m)
        prs_this_month = max(spec.prs_per_month, n_elites)
        for k in range(prs_this_month):
            pr_no += 1
            opener = nonelites[(m + k) % len(nonelites)]
            merger = elites[k % n_elites]
            opened = m_start + timedelta(seconds=10 + 60 * k)
            emit(KIND_PR_OPENED, opener, opened, f"pulls/{pr_no}", {"number": pr_no, "title": f"change {pr_no}", "body": ""})
            emit(KIND_PR_MERGED, merger, opened + timedelta(seconds=30), f"pulls/{pr_no}", {"number": pr_no, "author": opener})

    # commits realize the monthly new-commit outcome
    total_commits = max(0, int(round(months * planted["new_c"])))
    commit_counter = 0
    for m, count in enumerate(_spread_total(total_commits, months)):
        m_start = add_months(created, m)
        for k in range(count):
            commit_counter += 1
            author = nonelites[commit_counter % len(nonelites)]
            sha = f"c{commit_counter:06d}x"
            emit(
                KIND_COMMIT,
                author,
                m_start + timedelta(hours=1, seconds=137 * k),
                f"commits/{sha}",
                {"sha": sha, "message": f"work item {commit_counter}"},
            )

    # bug issues realize new-bug rate, fix ratio, and cycle time
    bct_days = float(np.clip(planted["bct"], 0.05, 20.0))
    fix_ratio = float(np.clip(planted["bfr"], 0.2, 1.0))
    total_bugs = max(months, int(round(months * max(0.5, planted["new_b"]))))
    for m, count in enumerate(_spread_total(total_bugs, months)):
        m_start = add_months(created, m)
        # at least one close per month so cycle time is always defined
        to_fix = min(count, max(1, int(round(fix_ratio * count))))
        for k in range(count):
            issue_no += 1
            opener = nonelites[issue_no % len(nonelites)]
            opened = m_start + timedelta(days=1, minutes=7 * k)
            emit(
                KIND_ISSUE_OPENED,
                opener,
                opened,
                f"issues/{issue_no}",
                {"number": issue_no, "title": f"bug report {issue_no}", "body": "", "labels": ["bug"]},
            )
            if k < to_fix:
                emit(
                    KIND_ISSUE_CLOSED,
                    opener,
                    opened + timedelta(days=bct_days),
                    f"issues/{issue_no}",
                    {"number": issue_no, "author": opener},
                )

    # cross-status conversations: strictly alternating non-elite/elite threads
    msg_len = int(rng.integers(spec.message_tokens[0], spec.message_tokens[1] + 1))
    k_chunks = max(2, math.ceil(max(len(tok_e), len(tok_n)) / msg_len))
    chunks_e = _chunk(tok_e, k_chunks)
    chunks_n = _chunk(tok_n, k_chunks)
    pairs_per_thread = 3
    comment_id = 0
    for t_idx in range(0, k_chunks, pairs_per_thread):
        month = (t_idx // pairs_per_thread) % months
        m_start = add_months(created, month)
        base_ts = m_start + timedelta(days=2, hours=(t_idx % 20))
        issue_no += 1
        target = f"issues/{issue_no}"
        pair_slice = range(t_idx, min(t_idx + pairs_per_thread, k_chunks))
        first = True
        step = 0
        for j in pair_slice:
            n_author = nonelites[j % len(nonelites)]
            e_author = elites[j % len(elites)]
            n_body = " ".join(chunks_n[j])
            e_body = " ".join(chunks_e[j])
            if first:
                emit(
                    KIND_ISSUE_OPENED,
                    n_author,
                    base_ts,
                    target,
                    {"number": issue_no, "title": f"discussion thread {issue_no}", "body": n_body},
                )
                first = False
            else:
                comment_id += 1
                emit(
                    KIND_COMMENT_CREATED,
                    n_author,
                    base_ts + timedelta(minutes=step),
                    target,
                    {"comment_id": f"c{comment_id}", "thread": target, "body": n_body},
                )
            step += 5
            comment_id += 1
            emit(
                KIND_COMMENT_CREATED,
                e_author,
                base_ts + timedelta(minutes=step),
                target,
                {"comment_id": f"c{comment_id}", "thread": target, "body": e_body},
            )
            step += 5

    # two single-speaker threads feed the within-status corpora
    filler_line = " ".join(rng.choice(_FILLER_CANDIDATES[:20], size=60).tolist())
    for author in (elites[0], nonelites[0]):
        issue_no += 1
        emit(
            KIND_ISSUE_OPENED,
            author,
            add_months(created, 1) + timedelta(days=3),
            f"issues/{issue_no}",
            {"number": issue_no, "title": f"notes {issue_no}", "body": filler_line},
        )

    meta = ProjectMeta(
        name=name,
        created_at=created,
        sponsorship=bool(rng.random() < 0.4),
        main_language=str(rng.choice(list(spec.languages))),
        domain=str(rng.choice(list(spec.domains))),
        validation={
            "pull_requests": pr_no,
            "contributors": max(50, n_devs),
            "history_months": months,
            "has_status_system": True,
        },
    )
    realized = {
        "new_c": total_commits / months,
        "new_b": total_bugs / months,
        "bct": bct_days,
        "bfr": fix_ratio,
    }
    truth = ProjectTruth(
        project=name,
        lsm=list(lsm),
        outcomes_planted=planted,
        outcomes_realized=realized,
    )
    return ProjectData(meta=meta, events=events, contributors=contributors, truth=truth)


# --- archive serialization ----------------------------------------------------

_KIND_TO_ARCHIVE = {
    KIND_COMMIT: ("CommitEvent", None),
    KIND_ISSUE_OPENED: ("IssuesEvent", "opened"),
    KIND_ISSUE_CLOSED: ("IssuesEvent", "closed"),
    KIND_PR_OPENED: ("PullRequestEvent", "opened"),
    KIND_PR_MERGED: ("PullRequestEvent", "merged"),
    KIND_COMMENT_CREATED: ("IssueCommentEvent", "created"),
}


def _to_archive_obj(ev: RawEvent, repo: str) -> dict:
    type_tag, action = _KIND_TO_ARCHIVE[ev.kind]
    payload = dict(ev.payload)
    if action is not None:
        payload["action"] = action
    return {
        "id": ev.event_id,
        "type": type_tag,
        "actor": {"login": ev.actor},
        "created_at": iso_utc(ev.timestamp),
        "repo": repo,
        "payload": payload,
    }


def _meta_toml(meta: ProjectMeta) -> str:
    lines = [
        f'name = "{meta.name}"',
        f'created_at = "{iso_utc(meta.created_at)}"',
        f"sponsorship = {'true' if meta.sponsorship else 'false'}",
        f'main_language = "{meta.main_language}"',
        f'domain = "{meta.domain}"',
        "",
        "[validation]",
        f"pull_requests = {meta.validation['pull_requests']}",
        f"contributors = {meta.validation['contributors']}",
        f"history_months = {meta.validation['history_months']}",
        f"has_status_system = {'true' if meta.validation['has_status_system'] else 'false'}",
    ]
    return "\n".join(lines) + "\n"


def generate_synthetic(spec: SynthSpec, out_dir: str | Path) -> SynthCorpus:
    """Generate the corpus and write archives, metadata, ground truth, and a
    ready-to-run pipeline config under `out_dir`."""
    corpus = generate_corpus(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    project_entries = []
    for proj in corpus.projects:
        slug = proj.meta.name.replace("/", "__")
        pdir = out / slug
        pdir.mkdir(parents=True, exist_ok=True)
        with open(pdir / "events.jsonl", "w", encoding="utf-8") as fh:
            for ev in proj.events:
                fh.write(json.dumps(_to_archive_obj(ev, proj.meta.name), ensure_ascii=False) + "\n")
        with open(pdir / "contributors.json", "w", encoding="utf-8") as fh:
            json.dump(proj.contributors, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(pdir / "meta.toml", "w", encoding="utf-8") as fh:
            fh.write(_meta_toml(proj.meta))
        project_entries.append({"meta": f"{slug}/meta.toml", "archive": slug})

    truth = {
        "noise_scales": corpus.noise_scales,
        "projects": [
            {
                "project": p.truth.project,
                "lsm": p.truth.lsm,
                "outcomes_planted": p.truth.outcomes_planted,
                "outcomes_realized": p.truth.outcomes_realized,
            }
            for p in corpus.projects
        ],
    }
    with open(out / "ground_truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")

    config_lines = [
        f"seed = {spec.seed}",
        'dictionary = "bundled"',
        'acronyms = "bundled"',
        'out_dir = "results"',
        "",
        "[summary]",
        'mode = "approx"',
        "",
    ]
    for entry in project_entries:
        config_lines += [
            "[[projects]]",
            f'meta = "{entry["meta"]}"',
            f'archive = "{entry["archive"]}"',
            "",
        ]
    with open(out / "run.toml", "w", encoding="utf-8") as fh:
        fh.write("\n".join(config_lines))
    return corpus
