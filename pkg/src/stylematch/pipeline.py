"""Full pipeline orchestration and report emission.

Per project: ingest -> elite status -> conversation filtering -> text prep
-> lexicon scoring -> record assembly.  Projects run independently on a
bounded worker pool; a failing project is flagged and isolated.  After a
barrier, the regression suite and descriptive statistics run over the
assembled records.  Outputs are deterministic: given identical inputs,
config, and seed, every emitted file is byte-identical across runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import RunConfig
from .conversations import aggregate_corpora, build_threads, write_corpora
from .elites import compute_elite_intervals, write_intervals_json
from .events import (
    ProjectMeta,
    RawEvent,
    normalize_events,
    read_alias_map,
    read_event_stream,
    write_events_jsonl,
)
from .lexicon import (
    ApproxSummaryScorer,
    FUNCTION_CATEGORIES,
    ImportSummaryScorer,
    SUMMARY_VARIABLES,
    load_dictionary,
    score_corpus,
)
from .metrics import (
    LsmUndefinedError,
    ProjectRecord,
    RecordRow,
    assemble_record,
    compute_controls,
    compute_outcomes,
    extract_issues,
    lsm_vector,
    record_to_row,
    write_records_csv,
)
from .regression import (
    DescribeResult,
    RegressionError,
    SuiteResult,
    describe_lsm,
    model_suite,
    quadratic_model,
)
from .textprep import load_acronyms, prepare_tokens

logger = logging.getLogger(__name__)

SAMPLING_CRITERIA = (
    ("pull-request model", lambda v: v.get("pull_requests", 0) >= 1, "no pull requests"),
    ("status system", lambda v: bool(v.get("has_status_system", True)), "no elite/non-elite status system"),
    ("history >= 36 months", lambda v: v.get("history_months", 0) >= 36, "history < 36 months"),
    (
        "scale (>=100 PRs, >=50 contributors)",
        lambda v: v.get("pull_requests", 0) >= 100 and v.get("contributors", 0) >= 50,
        None,  # reason built per failing count
    ),
)


def validate_sample(metas: list[ProjectMeta]) -> list[dict]:
    """Check each project against the four sampling criteria."""
    results = []
    for meta in metas:
        v = meta.validation or {}
        reasons = []
        for name, check, reason in SAMPLING_CRITERIA:
            if check(v):
                continue
            if reason is None:
                if v.get("pull_requests", 0) < 100:
                    reasons.append("pull-requests < 100")
                if v.get("contributors", 0) < 50:
                    reasons.append("contributors < 50")
            else:
                reasons.append(reason)
        results.append({"project": meta.name, "passed": not reasons, "reasons": reasons})
    return results


@dataclass
class ProjectInputs:
    meta: ProjectMeta
    events: list[RawEvent]
    contributors: list[dict] = field(default_factory=list)
    alias_map: dict | None = None


@dataclass
class ProjectOutput:
    record: ProjectRecord
    corpus_profiles: list[dict] = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)


def load_project_inputs(entry) -> ProjectInputs:
    """Read one project's meta, archives, and optional API export from disk."""
    meta = ProjectMeta.from_toml(entry.meta_path)
    events: list[RawEvent] = []
    archive = Path(entry.archive_dir)
    for path in sorted(archive.glob("*.jsonl")):
        events.extend(read_event_stream(path, "ArchiveJsonl"))
    api_dir = archive / "api"
    if api_dir.is_dir():
        events.extend(read_event_stream(api_dir, "ApiExportJson"))
    contributors: list[dict] = []
    contrib_path = archive / "contributors.json"
    if api_dir.is_dir() and (api_dir / "contributors.json").exists():
        contrib_path = api_dir / "contributors.json"
    if contrib_path.exists():
        with open(contrib_path, "r", encoding="utf-8") as fh:
            contributors = json.load(fh)
    alias = read_alias_map(entry.alias_map) if entry.alias_map else None
    return ProjectInputs(meta=meta, events=events, contributors=contributors, alias_map=alias)


def _profile_rows(project: str, tokens_by_corpus: dict, dictionary, scorer) -> list[dict]:
    rows = []
    for corpus, tokens in tokens_by_corpus.items():
        if tokens.total_count < 1:
            continue
        profile = score_corpus(tokens, dictionary, scorer, corpus_id=f"{project}:{corpus}")
        row = {"project": project, "corpus": corpus, "total_words": profile.total_words}
        row.update({cat: profile.function_pct[cat] for cat in FUNCTION_CATEGORIES})
        row.update({var: profile.summary[var] for var in SUMMARY_VARIABLES})
        rows.append(row)
    return rows


def process_project(inputs: ProjectInputs, config: RunConfig, dictionary, scorer) -> ProjectOutput:
    """Run the per-project stages and assemble the analysis record."""
    meta = inputs.meta
    retained, roster, buckets = normalize_events(
        inputs.events, meta, inputs.alias_map, inputs.contributors
    )
    intervals = compute_elite_intervals(retained, write_actions=config.write_actions)
    threads = build_threads(retained, roster, config.bot_patterns)
    triple = aggregate_corpora(threads, intervals)

    acronyms = load_acronyms(config.acronyms_path)
    tokens_elite = prepare_tokens(triple.cross_elite, acronyms)
    tokens_nonelite = prepare_tokens(triple.cross_nonelite, acronyms)

    lsm = None
    try:
        profile_elite = None
        profile_nonelite = None
        if tokens_elite.total_count >= 1 and tokens_nonelite.total_count >= 1:
            profile_elite = score_corpus(
                tokens_elite, dictionary, scorer, corpus_id=f"{meta.name}:cross_elite"
            )
            profile_nonelite = score_corpus(
                tokens_nonelite, dictionary, scorer, corpus_id=f"{meta.name}:cross_nonelite"
            )
            lsm = lsm_vector(profile_elite, profile_nonelite, config.min_corpus_tokens)
    except LsmUndefinedError as exc:
        logger.warning("project %s: %s", meta.name, exc)
        lsm = None

    outcomes = compute_outcomes(buckets, extract_issues(retained), meta, config.bug_keywords)
    controls = compute_controls(buckets, intervals, meta, roster)
    record = assemble_record(meta.name, outcomes, lsm, controls)

    cross_tokens = prepare_tokens(
        triple.cross_elite + "\n" + triple.cross_nonelite, acronyms
    )
    within_elite = prepare_tokens(triple.within_elite, acronyms)
    within_nonelite = prepare_tokens(triple.within_nonelite, acronyms)
    profile_rows = _profile_rows(
        meta.name,
        {"cross": cross_tokens, "within_elite": within_elite, "within_nonelite": within_nonelite},
        dictionary,
        scorer,
    )
    return ProjectOutput(
        record=record,
        corpus_profiles=profile_rows,
        artifacts={
            "events": retained,
            "intervals": intervals,
            "corpora": triple,
        },
    )


@dataclass
class RunResult:
    records: list[ProjectRecord]
    rows: list[RecordRow]
    suite: SuiteResult | None
    describe: DescribeResult | None
    flagged: list[str]
    out_dir: Path
    exit_code: int


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_plot_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _suite_to_json(suite: SuiteResult, quad_entries: dict) -> dict:
    def entry_obj(entry) -> dict:
        fit = entry.fit
        obj = {
            "outcome": fit.outcome,
            "n": fit.n,
            "m": fit.m,
            "r_squared": fit.r_squared,
            "adj_r_squared": fit.adj_r_squared,
            "coefficients": fit.coef_table(),
            "vif": {k: v for k, v in sorted(entry.diagnostics.vif.items())},
            "vif_flagged": entry.diagnostics.vif_flagged,
            "diagnostics": {
                "leverage_cutoff": entry.diagnostics.leverage_cutoff,
                "leverage_flagged_rows": entry.diagnostics.leverage_flagged,
                "skewness": entry.diagnostics.skewness,
                "excess_kurtosis": entry.diagnostics.excess_kurtosis,
                "breusch_pagan": {
                    "statistic": entry.diagnostics.bp_statistic,
                    "p": entry.diagnostics.bp_p_value,
                },
            },
        }
        if entry.f_vs_baseline is not None:
            obj["f_vs_baseline"] = entry.f_vs_baseline
        if entry.vif_refit is not None:
            obj["vif_refit"] = {
                "columns": entry.vif_refit.columns,
                "coefficients": entry.vif_refit.coef_table(),
                "r_squared": entry.vif_refit.r_squared,
            }
        return obj

    return {
        "n_records": suite.n_records,
        "n_used": suite.n_used,
        "dropped": suite.dropped,
        "vif_threshold": suite.vif_threshold,
        "models": {mid: entry_obj(entry) for mid, entry in sorted(suite.models.items())},
        "quadratic": {tag: entry_obj(entry) for tag, entry in sorted(quad_entries.items())},
    }


def _models_markdown(suite: SuiteResult, quad_entries: dict) -> str:
    lines = ["# Regression suite", ""]
    lines.append(f"Records: {suite.n_records} total, {suite.n_used} used, dropped: {len(suite.dropped)}")
    if suite.dropped:
        lines.append("Dropped (flagged): " + ", ".join(suite.dropped))
    lines.append("")
    for mid, entry in sorted(suite.models.items()):
        fit = entry.fit
        lines.append(f"## {mid}")
        lines.append(
            f"n={fit.n}, m={fit.m}, R2={fit.r_squared:.4f}, adj R2={fit.adj_r_squared:.4f}"
        )
        if entry.f_vs_baseline:
            f = entry.f_vs_baseline
            lines.append(
                f"F vs baseline: F({f['df_num']},{f['df_den']})={f['f']:.3f}, p={f['p']:.4g}"
            )
        lines.append("")
        lines.append("| term | beta | SE | t | p |")
        lines.append("|---|---|---|---|---|")
        for row in fit.coef_table():
            lines.append(
                f"| {row['name']} | {row['beta']:.6g} | {row['se']:.6g} "
                f"| {row['t']:.3f} | {row['p']:.4g} |"
            )
        if entry.diagnostics.vif_flagged:
            lines.append("")
            lines.append(
                "VIF above threshold: "
                + ", ".join(entry.diagnostics.vif_flagged)
                + " (re-fit excluding them reported in models.json)"
            )
        lines.append("")
    lines.append("## Quadratic supplements (composite + centered square)")
    lines.append("")
    for tag, entry in sorted(quad_entries.items()):
        fit = entry.fit
        sq = next((r for r in fit.coef_table() if r["name"] == "lsm0_sq"), None)
        if sq:
            lines.append(
                f"- {tag}: squared-term beta={sq['beta']:.6g}, p={sq['p']:.4g} "
                f"(n={fit.n}, R2={fit.r_squared:.4f})"
            )
    lines.append("")
    return "\n".join(lines)


def run_pipeline(config: RunConfig) -> RunResult:
    """Execute the full study pipeline and write the result tree."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "projects").mkdir(exist_ok=True)
    (out_dir / "plots").mkdir(exist_ok=True)

    dictionary = load_dictionary(config.dictionary_path)
    scorer = (
        ImportSummaryScorer(config.summary_csv)
        if config.summary_mode == "import"
        else ApproxSummaryScorer()
    )

    def project_name(entry) -> str:
        try:
            return ProjectMeta.from_toml(entry.meta_path).name
        except Exception:
            return Path(entry.meta_path).parent.name

    entries = list(config.projects)
    if config.validate_sampling:
        named = [(entry, project_name(entry)) for entry in entries]
        metas = []
        for entry, _ in named:
            try:
                metas.append(ProjectMeta.from_toml(entry.meta_path))
            except Exception:
                continue
        verdicts = {v["project"]: v for v in validate_sample(metas)}
        kept = []
        for entry, name in named:
            verdict = verdicts.get(name)
            if verdict is None or verdict["passed"]:
                kept.append(entry)
            else:
                logger.warning(
                    "project %s excluded by sampling filter: %s",
                    name,
                    "; ".join(verdict["reasons"]),
                )
        entries = kept

    def worker(entry):
        name = project_name(entry)
        try:
            inputs = load_project_inputs(entry)
            return name, process_project(inputs, config, dictionary, scorer), None
        except Exception as exc:  # isolate per-project failures
            logger.exception("project %s failed", name)
            return name, None, exc

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(worker, entries))
    else:
        results = [worker(entry) for entry in entries]

    records: list[ProjectRecord] = []
    profile_rows: list[dict] = []
    for name, output, exc in sorted(results, key=lambda r: r[0]):
        if exc is not None:
            records.append(ProjectRecord(project=name, flags=["pipeline-error"]))
            continue
        records.append(output.record)
        profile_rows.extend(output.corpus_profiles)
        slug = name.replace("/", "__")
        pdir = out_dir / "projects" / slug
        pdir.mkdir(parents=True, exist_ok=True)
        write_events_jsonl(output.artifacts["events"], pdir / "normalized.jsonl")
        write_intervals_json(output.artifacts["intervals"], pdir / "intervals.json")
        write_corpora(output.artifacts["corpora"], pdir)

    write_records_csv(records, out_dir / "projects.csv")

    profile_header = ["project", "corpus", "total_words"] + list(FUNCTION_CATEGORIES) + list(
        SUMMARY_VARIABLES
    )
    profile_rows.sort(key=lambda r: (r["project"], r["corpus"]))
    _write_plot_csv(
        out_dir / "corpus_profiles.csv",
        profile_header,
        [[row[k] for k in profile_header] for row in profile_rows],
    )

    rows = [record_to_row(rec) for rec in records]
    suite = None
    stats_error: str | None = None
    try:
        suite = model_suite(rows, config.vif_threshold)
        quad_entries = {
            tag: quadratic_model(rows, tag, config.vif_threshold)
            for tag in ("newc", "bct", "newb", "bfr")
        }
    except RegressionError as exc:
        # too few usable records for the model inventory: keep the record
        # outputs and record the reason instead of failing the whole run
        stats_error = str(exc)
        logger.warning("regression stage skipped: %s", stats_error)
    desc = describe_lsm(rows, profile_rows)

    if suite is not None:
        with open(out_dir / "models.json", "w", encoding="utf-8") as fh:
            json.dump(_suite_to_json(suite, quad_entries), fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
        with open(out_dir / "models.md", "w", encoding="utf-8") as fh:
            fh.write(_models_markdown(suite, quad_entries))
        _write_regression_plots(suite, out_dir / "plots")
    else:
        with open(out_dir / "models.json", "w", encoding="utf-8") as fh:
            json.dump({"error": stats_error, "models": {}}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out_dir / "models.md", "w", encoding="utf-8") as fh:
            fh.write(f"# Regression suite\n\nNot fitted: {stats_error}\n")

    _write_describe_outputs(desc, out_dir / "plots")
    if config.svg:
        from .svgplots import render_describe_svgs, render_regression_svgs

        render_describe_svgs(desc, out_dir / "plots" / "svg")
        if suite is not None:
            render_regression_svgs(suite, out_dir / "plots" / "svg")

    flagged = sorted(rec.project for rec in records if rec.flags)
    manifest = {
        "config_sha256": config.config_hash(),
        "package_version": __version__,
        "seed": config.seed,
        "summary_mode": config.summary_mode,
        "n_projects": len(records),
        "flagged_projects": flagged,
        "files": {},
    }
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "run_manifest.json":
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            manifest["files"][str(path.relative_to(out_dir))] = digest
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    exit_code = 3 if (flagged or stats_error) else 0
    return RunResult(
        records=records,
        rows=rows,
        suite=suite,
        describe=desc,
        flagged=flagged,
        out_dir=out_dir,
        exit_code=exit_code,
    )


def _write_describe_outputs(desc: DescribeResult, plots_dir: Path) -> None:
    quant_rows = []
    hist_rows = []
    kde_rows = []
    for s in desc.variables:
        quant_rows.append(
            [
                s.name,
                s.n,
                s.mean,
                s.sd,
                s.quantiles["min"],
                s.quantiles["q1"],
                s.quantiles["median"],
                s.quantiles["q3"],
                s.quantiles["max"],
                "" if s.point_mass is None else s.point_mass,
            ]
        )
        for i, count in enumerate(s.hist_counts):
            hist_rows.append([s.name, float(s.hist_edges[i]), float(s.hist_edges[i + 1]), int(count)])
        if s.kde_x is not None:
            for x, y in zip(s.kde_x, s.kde_y):
                kde_rows.append([s.name, float(x), float(y)])
    _write_plot_csv(
        plots_dir / "lsm_quantiles.csv",
        ["variable", "n", "mean", "sd", "min", "q1", "median", "q3", "max", "point_mass"],
        quant_rows,
    )
    _write_plot_csv(plots_dir / "lsm_hist.csv", ["variable", "bin_left", "bin_right", "count"], hist_rows)
    _write_plot_csv(plots_dir / "lsm_kde.csv", ["variable", "x", "density"], kde_rows)
    corpora_rows = [
        [
            c["variable"],
            c["groups"].get("cross", 0),
            c["groups"].get("within_elite", 0),
            c["groups"].get("within_nonelite", 0),
            c["kruskal_h"],
            c["p"],
        ]
        for c in desc.three_corpora
    ]
    _write_plot_csv(
        plots_dir / "three_corpora.csv",
        ["variable", "n_cross", "n_within_elite", "n_within_nonelite", "kruskal_h", "p"],
        corpora_rows,
    )


def _write_regression_plots(suite: SuiteResult, plots_dir: Path) -> None:
    rvf_rows = []
    qq_rows = []
    for mid, entry in sorted(suite.models.items()):
        for fitted, resid in entry.diagnostics.residuals_vs_fitted:
            rvf_rows.append([mid, float(fitted), float(resid)])
        for theo, obs in zip(entry.diagnostics.qq_theoretical, entry.diagnostics.qq_observed):
            qq_rows.append([mid, float(theo), float(obs)])
    _write_plot_csv(plots_dir / "residuals_vs_fitted.csv", ["model", "fitted", "residual"], rvf_rows)
    _write_plot_csv(plots_dir / "qq.csv", ["model", "theoretical", "observed"], qq_rows)
