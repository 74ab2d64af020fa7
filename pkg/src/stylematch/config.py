"""Run configuration: TOML loading and validation.

A run config names the project list (meta + archive per project), the
dictionary and acronym files (or "bundled"), the summary scorer mode,
thresholds, and the seed.  Every referenced path must exist at validation
time; a bad config aborts before any work starts (exit code 2).
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .elites import DEFAULT_WRITE_ACTIONS
from .conversations import DEFAULT_BOT_PATTERNS
from .lexicon import bundled_acronyms_path, bundled_dictionary_path
from .metrics import DEFAULT_BUG_KEYWORDS, DEFAULT_MIN_CORPUS_TOKENS
from .regression import DEFAULT_VIF_THRESHOLD

if sys.version_info >= (3, 11):
    import tomllib as toml_mod
else:
    import tomli as toml_mod


class ConfigError(Exception):
    pass


@dataclass
class ProjectEntry:
    meta_path: Path
    archive_dir: Path
    alias_map: Path | None = None


@dataclass
class RunConfig:
    projects: list[ProjectEntry]
    dictionary_path: Path
    acronyms_path: Path
    summary_mode: str = "import"
    summary_csv: Path | None = None
    min_corpus_tokens: int = DEFAULT_MIN_CORPUS_TOKENS
    vif_threshold: float = DEFAULT_VIF_THRESHOLD
    bug_keywords: tuple[str, ...] = DEFAULT_BUG_KEYWORDS
    write_actions: frozenset = DEFAULT_WRITE_ACTIONS
    bot_patterns: tuple[str, ...] = DEFAULT_BOT_PATTERNS
    seed: int = 0
    out_dir: Path = Path("results")
    workers: int = 1
    validate_sampling: bool = False
    svg: bool = False
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        """Stable digest of the semantic configuration for the run manifest."""
        parts = [
            ";".join(f"{p.meta_path}|{p.archive_dir}|{p.alias_map}" for p in self.projects),
            str(self.dictionary_path),
            str(self.acronyms_path),
            self.summary_mode,
            str(self.summary_csv),
            str(self.min_corpus_tokens),
            str(self.vif_threshold),
            ",".join(self.bug_keywords),
            ",".join(sorted(self.write_actions)),
            ",".join(self.bot_patterns),
            str(self.seed),
        ]
        return hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            doc = toml_mod.load(fh)
        except toml_mod.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    base = path.parent

    def resolve(raw: str) -> Path:
        p = Path(raw)
        return p if p.is_absolute() else base / p

    entries: list[ProjectEntry] = []
    for i, proj in enumerate(doc.get("projects", [])):
        if "meta" not in proj or "archive" not in proj:
            raise ConfigError(f"{path}: projects[{i}] needs 'meta' and 'archive'")
        meta_path = resolve(proj["meta"])
        archive_dir = resolve(proj["archive"])
        alias = resolve(proj["alias_map"]) if proj.get("alias_map") else None
        if not meta_path.is_file():
            raise ConfigError(f"{path}: project meta not found: {meta_path}")
        if not archive_dir.is_dir():
            raise ConfigError(f"{path}: archive dir not found: {archive_dir}")
        if alias is not None and not alias.is_file():
            raise ConfigError(f"{path}: alias map not found: {alias}")
        entries.append(ProjectEntry(meta_path=meta_path, archive_dir=archive_dir, alias_map=alias))
    if not entries:
        raise ConfigError(f"{path}: no projects configured")

    dict_raw = doc.get("dictionary", "bundled")
    dictionary = bundled_dictionary_path() if dict_raw == "bundled" else resolve(dict_raw)
    if not Path(dictionary).is_file():
        raise ConfigError(f"{path}: dictionary not found: {dictionary}")
    acr_raw = doc.get("acronyms", "bundled")
    acronyms = bundled_acronyms_path() if acr_raw == "bundled" else resolve(acr_raw)
    if not Path(acronyms).is_file():
        raise ConfigError(f"{path}: acronym file not found: {acronyms}")

    summary = doc.get("summary", {})
    mode = summary.get("mode", "import")
    if mode not in ("import", "approx"):
        raise ConfigError(f"{path}: summary.mode must be 'import' or 'approx'")
    summary_csv = None
    if mode == "import":
        if "csv" not in summary:
            raise ConfigError(f"{path}: summary.mode='import' requires summary.csv")
        summary_csv = resolve(summary["csv"])
        if not summary_csv.is_file():
            raise ConfigError(f"{path}: summary csv not found: {summary_csv}")

    thresholds = doc.get("thresholds", {})
    write_actions = doc.get("write_actions")
    return RunConfig(
        projects=entries,
        dictionary_path=Path(dictionary),
        acronyms_path=Path(acronyms),
        summary_mode=mode,
        summary_csv=summary_csv,
        min_corpus_tokens=int(thresholds.get("min_corpus_tokens", DEFAULT_MIN_CORPUS_TOKENS)),
        vif_threshold=float(thresholds.get("vif", DEFAULT_VIF_THRESHOLD)),
        bug_keywords=tuple(doc.get("bug_keywords", DEFAULT_BUG_KEYWORDS)),
        write_actions=frozenset(write_actions) if write_actions else DEFAULT_WRITE_ACTIONS,
        bot_patterns=tuple(doc.get("bot_patterns", DEFAULT_BOT_PATTERNS)),
        seed=int(doc.get("seed", 0)),
        out_dir=resolve(doc.get("out_dir", "results")),
        workers=int(doc.get("workers", 1)),
        validate_sampling=bool(doc.get("validate", False)),
        svg=bool(doc.get("svg", False)),
        raw=doc,
    )
