"""Command-line interface.

Subcommands mirror the pipeline stages (fetch, ingest, elites,
conversations, textprep, score, metrics, regress, describe), plus synth
(fixture generation), validate (sampling filter), and run (full pipeline).

Exit codes: 0 success, 2 config error, 3 completed with flagged projects,
4 fatal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_FATAL = 4

logger = logging.getLogger(__name__)


def _load_toml(path) -> dict:
    if sys.version_info >= (3, 11):
        import tomllib as toml_mod
    else:
        import tomli as toml_mod
    with open(path, "rb") as fh:
        return toml_mod.load(fh)


def _cmd_fetch(args) -> int:
    from .fetch import AuthError, FetchError, fetch_project

    token = os.environ.get(args.token_env, "")
    if not token:
        print(f"error: environment variable {args.token_env} is empty", file=sys.stderr)
        return EXIT_CONFIG
    try:
        counts = fetch_project(args.repo, token, args.out, api_base=args.api_base)
    except AuthError as exc:
        print(f"auth error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except FetchError as exc:
        print(f"fetch error: {exc} (cursor retained for resumption)", file=sys.stderr)
        return EXIT_FATAL
    for endpoint, count in sorted(counts.items()):
        print(f"{endpoint}: {count}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    from .config import ProjectEntry
    from .events import ProjectMeta, write_events_jsonl
    from .pipeline import load_project_inputs
    from .events import normalize_events

    entry = ProjectEntry(
        meta_path=Path(args.project),
        archive_dir=Path(args.archive),
        alias_map=Path(args.alias_map) if args.alias_map else None,
    )
    inputs = load_project_inputs(entry)
    retained, _, _ = normalize_events(
        inputs.events, inputs.meta, inputs.alias_map, inputs.contributors
    )
    write_events_jsonl(retained, args.out)
    print(f"{len(retained)} events -> {args.out}")
    return EXIT_OK


def _cmd_elites(args) -> int:
    from .elites import DEFAULT_WRITE_ACTIONS, compute_elite_intervals, write_intervals_json
    from .events import read_events_jsonl

    write_actions = DEFAULT_WRITE_ACTIONS
    if args.config:
        doc = _load_toml(args.config)
        if "write_actions" in doc:
            write_actions = frozenset(doc["write_actions"])
    events = read_events_jsonl(args.events)
    intervals = compute_elite_intervals(events, write_actions=write_actions)
    write_intervals_json(intervals, args.out)
    n = sum(len(v) for v in intervals.values())
    print(f"{n} intervals over {len(intervals)} developers -> {args.out}")
    return EXIT_OK


def _cmd_conversations(args) -> int:
    from .conversations import DEFAULT_BOT_PATTERNS, aggregate_corpora, build_threads, write_corpora
    from .elites import read_intervals_json
    from .events import read_events_jsonl

    events = read_events_jsonl(args.events)
    intervals = read_intervals_json(args.intervals)
    roster = {ev.actor: None for ev in events}
    bots = tuple(args.bots) if args.bots else DEFAULT_BOT_PATTERNS
    threads = build_threads(events, roster, bots)
    triple = aggregate_corpora(threads, intervals)
    written = write_corpora(triple, args.out_dir)
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_textprep(args) -> int:
    from .textprep import load_acronyms, prepare_tokens

    acronyms = load_acronyms(args.acronyms) if args.acronyms else {}
    with open(args.infile, "r", encoding="utf-8") as fh, open(
        args.out, "w", encoding="utf-8"
    ) as out:
        for line in fh:
            line = line.rstrip("\n")
            if args.prefixed:
                parts = line.split("\t", 2)
                line = parts[2] if len(parts) == 3 else line
            stream = prepare_tokens(line, acronyms)
            out.write(json.dumps({"tokens": stream.tokens, "count": stream.total_count}) + "\n")
    return EXIT_OK


def _cmd_score(args) -> int:
    from .lexicon import (
        ApproxSummaryScorer,
        FUNCTION_CATEGORIES,
        ImportSummaryScorer,
        SUMMARY_VARIABLES,
        load_dictionary,
        score_corpus,
    )
    from .textprep import TokenStream

    dictionary = load_dictionary(args.dict)
    tokens: list[str] = []
    with open(args.tokens, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                tokens.extend(json.loads(line)["tokens"])
    if args.summary_csv:
        scorer = ImportSummaryScorer(args.summary_csv)
        if not args.corpus_id:
            print("error: --summary-csv requires --corpus-id", file=sys.stderr)
            return EXIT_CONFIG
    else:
        scorer = ApproxSummaryScorer()
    profile = score_corpus(TokenStream(tokens), dictionary, scorer, corpus_id=args.corpus_id)
    obj = {
        "total_words": profile.total_words,
        "scorer": profile.scorer,
        "function_pct": {k: profile.function_pct[k] for k in FUNCTION_CATEGORIES},
        "summary": {k: profile.summary[k] for k in SUMMARY_VARIABLES},
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"profile ({profile.total_words} words) -> {args.out}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    from .config import ProjectEntry, load_run_config
    from .lexicon import ApproxSummaryScorer, ImportSummaryScorer, load_dictionary
    from .metrics import write_records_csv
    from .pipeline import load_project_inputs, process_project

    config = load_run_config(args.config)
    dictionary = load_dictionary(config.dictionary_path)
    scorer = (
        ImportSummaryScorer(config.summary_csv)
        if config.summary_mode == "import"
        else ApproxSummaryScorer()
    )
    entry = ProjectEntry(
        meta_path=Path(args.project),
        archive_dir=Path(args.archive),
        alias_map=Path(args.alias_map) if args.alias_map else None,
    )
    output = process_project(load_project_inputs(entry), config, dictionary, scorer)
    write_records_csv([output.record], args.out)
    print(f"record for {output.record.project} -> {args.out}")
    return EXIT_PARTIAL if output.record.flags else EXIT_OK


def _cmd_regress(args) -> int:
    from .config import load_run_config
    from .metrics import read_records_csv
    from .pipeline import _suite_to_json, _models_markdown, _write_regression_plots
    from .regression import model_suite, quadratic_model

    config = load_run_config(args.config)
    rows = read_records_csv(args.records)
    out_dir = Path(args.out_dir)
    (out_dir / "plots").mkdir(parents=True, exist_ok=True)
    suite = model_suite(rows, config.vif_threshold)
    quads = {tag: quadratic_model(rows, tag, config.vif_threshold) for tag in ("newc", "bct", "newb", "bfr")}
    with open(out_dir / "models.json", "w", encoding="utf-8") as fh:
        json.dump(_suite_to_json(suite, quads), fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    with open(out_dir / "models.md", "w", encoding="utf-8") as fh:
        fh.write(_models_markdown(suite, quads))
    _write_regression_plots(suite, out_dir / "plots")
    print(f"{len(suite.models)} models -> {out_dir}")
    return EXIT_OK


def _cmd_describe(args) -> int:
    import csv as _csv

    from .metrics import read_records_csv
    from .pipeline import _write_describe_outputs
    from .regression import describe_lsm

    rows = read_records_csv(args.records)
    profiles = []
    if args.corpus_profiles:
        with open(args.corpus_profiles, "r", encoding="utf-8", newline="") as fh:
            profiles = list(_csv.DictReader(fh))
    desc = describe_lsm(rows, profiles)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_describe_outputs(desc, out_dir)
    if args.svg:
        from .svgplots import render_describe_svgs

        render_describe_svgs(desc, out_dir / "svg")
    print(f"descriptive outputs -> {out_dir}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    from .synth import SynthError, SynthSpec, generate_synthetic

    kwargs = {}
    if args.spec:
        doc = _load_toml(args.spec)
        for key in ("n_projects", "seed", "elite_fraction", "category_spread", "power_target"):
            if key in doc:
                kwargs[key] = doc[key]
        for key in ("tokens_per_side", "message_tokens", "devs_range"):
            if key in doc:
                kwargs[key] = tuple(doc[key])
        if "planted" in doc:
            from .synth import PlantedModel

            kwargs["planted"] = {
                outcome: PlantedModel(**params) for outcome, params in doc["planted"].items()
            }
        if "noise_scales" in doc:
            kwargs["noise_scales"] = dict(doc["noise_scales"])
    if args.projects is not None:
        kwargs["n_projects"] = args.projects
    if args.seed is not None:
        kwargs["seed"] = args.seed
    try:
        spec = SynthSpec(**kwargs)
        corpus = generate_synthetic(spec, args.out_dir)
    except SynthError as exc:
        print(f"synth error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{len(corpus.projects)} synthetic projects -> {args.out_dir}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .config import load_run_config
    from .events import ProjectMeta
    from .pipeline import validate_sample

    config = load_run_config(args.config)
    metas = [ProjectMeta.from_toml(entry.meta_path) for entry in config.projects]
    results = validate_sample(metas)
    failed = 0
    for res in results:
        status = "pass" if res["passed"] else "FAIL"
        reasons = f" ({'; '.join(res['reasons'])})" if res["reasons"] else ""
        print(f"{res['project']}: {status}{reasons}")
        failed += 0 if res["passed"] else 1
    return EXIT_OK if failed == 0 else EXIT_PARTIAL


def _cmd_run(args) -> int:
    from .config import load_run_config
    from .pipeline import run_pipeline

    config = load_run_config(args.config)
    result = run_pipeline(config)
    print(f"projects.csv: {len(result.records)} rows -> {result.out_dir}")
    if result.flagged:
        print(f"flagged projects: {', '.join(result.flagged)}")
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylematch",
        description="Cross-status language style matching analytics for repository data",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download a repository export over the API")
    p.add_argument("--repo", required=True, help="owner/name")
    p.add_argument("--token-env", required=True, help="env var holding the API token")
    p.add_argument("--out", required=True)
    p.add_argument("--api-base", default="https://api.github.com")
    p.set_defaults(func=_cmd_fetch)

    p = sub.add_parser("ingest", help="normalize archives into events JSONL")
    p.add_argument("--project", required=True, help="project meta TOML")
    p.add_argument("--archive", required=True, help="archive directory")
    p.add_argument("--alias-map", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("elites", help="compute elite status intervals")
    p.add_argument("--events", required=True)
    p.add_argument("--config", default=None, help="TOML with write_actions override")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_elites)

    p = sub.add_parser("conversations", help="emit cross/within-status corpora")
    p.add_argument("--events", required=True)
    p.add_argument("--intervals", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bots", nargs="*", default=None, help="bot login glob patterns")
    p.set_defaults(func=_cmd_conversations)

    p = sub.add_parser("textprep", help="clean and tokenize a corpus file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--acronyms", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--prefixed", action="store_true", help="strip thread/timestamp prefixes")
    p.set_defaults(func=_cmd_textprep)

    p = sub.add_parser("score", help="score a token stream against the dictionary")
    p.add_argument("--tokens", required=True)
    p.add_argument("--dict", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--summary-csv", default=None, help="import summary scores from CSV")
    group.add_argument("--summary", choices=["approx"], default=None, help="use the open approximation")
    p.add_argument("--corpus-id", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("metrics", help="assemble one project's record")
    p.add_argument("--config", required=True)
    p.add_argument("--project", required=True, help="project meta TOML")
    p.add_argument("--archive", required=True)
    p.add_argument("--alias-map", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("regress", help="fit the 20-model suite from projects.csv")
    p.add_argument("--records", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_regress)

    p = sub.add_parser("describe", help="descriptive statistics and plot data")
    p.add_argument("--records", required=True)
    p.add_argument("--corpus-profiles", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--svg", action="store_true", help="also render static SVG charts")
    p.set_defaults(func=_cmd_describe)

    p = sub.add_parser("synth", help="generate a synthetic fixture corpus")
    p.add_argument("--spec", default=None, help="synth spec TOML")
    p.add_argument("--projects", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check projects against sampling criteria")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="run the full pipeline from a run config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    from .config import ConfigError

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # fatal: anything unhandled
        logger.exception("fatal error")
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
