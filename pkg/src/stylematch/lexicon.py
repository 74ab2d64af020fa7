"""Word-category dictionaries and per-corpus category profiles.

The dictionary covers the 8 function-word categories; percentages are
category match counts over total words.  The four summary scores (analytic,
clout, authentic, tone) have no open formulas, so they come from a pluggable
scorer: `import` reads them from a CSV produced by licensed scoring
software, `approx` is the documented open approximation below.  Results
must record which scorer produced them.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .textprep import TokenStream

logger = logging.getLogger(__name__)

FUNCTION_CATEGORIES = (
    "personal_pronouns",
    "impersonal_pronouns",
    "articles",
    "prepositions",
    "auxiliary_verbs",
    "common_adverbs",
    "conjunctions",
    "negations",
)

SUMMARY_VARIABLES = ("analytic", "clout", "authentic", "tone")


class LexiconError(Exception):
    """Dictionary or scorer input that violates the format contract."""


@dataclass
class CategoryDictionary:
    """Literal words and prefix wildcards for the 8 function-word categories."""

    literals: dict[str, frozenset]
    prefixes: dict[str, tuple[str, ...]]
    source: str = ""
    _match_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def categories(self) -> tuple[str, ...]:
        return FUNCTION_CATEGORIES

    def match_categories(self, token: str) -> frozenset:
        """Categories the token belongs to (literal or wildcard prefix)."""
        cached = self._match_cache.get(token)
        if cached is not None:
            return cached
        cats = []
        for cat in FUNCTION_CATEGORIES:
            if token in self.literals[cat] or any(
                token.startswith(p) for p in self.prefixes[cat]
            ):
                cats.append(cat)
        result = frozenset(cats)
        self._match_cache[token] = result
        return result


def load_dictionary(path: str | Path) -> CategoryDictionary:
    """Parse a `[category]` sectioned dictionary file.

    Errors (with line numbers) on unknown category names, non-lowercase
    patterns, or any of the 8 categories missing; duplicate patterns within
    a category collapse.
    """
    literals: dict[str, set] = {cat: set() for cat in FUNCTION_CATEGORIES}
    prefixes: dict[str, set] = {cat: set() for cat in FUNCTION_CATEGORIES}
    current: str | None = None
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip()
                if name not in FUNCTION_CATEGORIES:
                    raise LexiconError(f"{path}:{lineno}: unknown category {name!r}")
                current = name
                seen.add(name)
                continue
            if current is None:
                raise LexiconError(f"{path}:{lineno}: pattern before any [category] header")
            if line != line.lower():
                raise LexiconError(f"{path}:{lineno}: pattern must be lowercase: {line!r}")
            if line.endswith("*"):
                stem = line[:-1]
                if not stem:
                    raise LexiconError(f"{path}:{lineno}: bare '*' is not a valid pattern")
                prefixes[current].add(stem)
            else:
                literals[current].add(line)
    missing = [cat for cat in FUNCTION_CATEGORIES if cat not in seen]
    if missing:
        raise LexiconError(f"{path}: missing categories: {', '.join(missing)}")
    return CategoryDictionary(
        literals={cat: frozenset(words) for cat, words in literals.items()},
        prefixes={cat: tuple(sorted(pats)) for cat, pats in prefixes.items()},
        source=str(path),
    )


def bundled_dictionary_path() -> Path:
    return Path(str(resources.files("stylematch").joinpath("data/function_words.dict")))


def bundled_acronyms_path() -> Path:
    return Path(str(resources.files("stylematch").joinpath("data/acronyms.txt")))


@dataclass
class CategoryProfile:
    """Per-corpus function-word percentages plus the 4 summary scores."""

    function_pct: dict[str, float]
    summary: dict[str, float]
    total_words: int
    scorer: str = ""


def category_percentages(tokens: TokenStream, dictionary: CategoryDictionary) -> dict[str, float]:
    """Percent of total words matching each category (each token counts once
    per matched category)."""
    total = tokens.total_count
    if total < 1:
        raise LexiconError("cannot compute category percentages on an empty token stream")
    counts = {cat: 0 for cat in FUNCTION_CATEGORIES}
    for token in tokens.tokens:
        for cat in dictionary.match_categories(token):
            counts[cat] += 1
    return {cat: 100.0 * counts[cat] / total for cat in FUNCTION_CATEGORIES}


# --- summary scorers ---------------------------------------------------------

_FIRST_SINGULAR = frozenset({"i", "me", "my", "mine", "myself", "i'm", "i've", "i'll", "i'd"})
_FIRST_PLURAL = frozenset({"we", "us", "our", "ours", "ourselves", "we're", "we've", "we'll", "we'd"})
_SECOND_PERSON = frozenset(
    {"you", "your", "yours", "yourself", "yourselves", "you're", "you've", "you'll", "you'd"}
)
_POSITIVE_WORDS = frozenset(
    {
        "good", "great", "nice", "love", "like", "thanks", "thank", "awesome",
        "excellent", "perfect", "happy", "glad", "helpful", "works", "fixed",
        "clean", "easy", "fast", "better", "best", "correct", "useful", "solid",
        "agree", "appreciate", "wonderful", "cheers", "neat", "cool", "super",
    }
)
_NEGATIVE_WORDS = frozenset(
    {
        "bad", "wrong", "broken", "fails", "fail", "failed", "hate", "ugly",
        "worse", "worst", "annoying", "terrible", "awful", "problem", "problems",
        "bug", "bugs", "crash", "crashes", "slow", "confusing", "sorry",
        "unfortunately", "disagree", "messy", "painful", "horrible", "regression",
    }
)


class ApproxSummaryScorer:
    """Deterministic open approximation of the four summary scores.

    These are transparent recipes over function-word rates, not the licensed
    formulas, and make no claim of reproducing them:

    - analytic: 30 + articles + prepositions - pronouns - auxiliaries -
      conjunctions - adverbs - negations (a categorical-vs-dynamic contrast).
    - clout: 50 + we-rate + you-rate - i-rate (other- vs self-focus).
    - authentic: 50 + i-rate - impersonal-pronoun rate (self-reference).
    - tone: 50 + positive-word rate - negative-word rate (small built-in
      sentiment lists).

    All outputs clamp at zero.
    """

    name = "approx"

    def score(self, tokens: TokenStream, function_pct: dict[str, float]) -> dict[str, float]:
        total = max(tokens.total_count, 1)
        counts = {"i": 0, "we": 0, "you": 0, "pos": 0, "neg": 0}
        for token in tokens.tokens:
            if token in _FIRST_SINGULAR:
                counts["i"] += 1
            elif token in _FIRST_PLURAL:
                counts["we"] += 1
            elif token in _SECOND_PERSON:
                counts["you"] += 1
            if token in _POSITIVE_WORDS:
                counts["pos"] += 1
            elif token in _NEGATIVE_WORDS:
                counts["neg"] += 1
        rate = {k: 100.0 * v / total for k, v in counts.items()}
        pct = function_pct
        analytic = (
            30.0
            + pct["articles"]
            + pct["prepositions"]
            - pct["personal_pronouns"]
            - pct["impersonal_pronouns"]
            - pct["auxiliary_verbs"]
            - pct["conjunctions"]
            - pct["common_adverbs"]
            - pct["negations"]
        )
        clout = 50.0 + rate["we"] + rate["you"] - rate["i"]
        authentic = 50.0 + rate["i"] - pct["impersonal_pronouns"]
        tone = 50.0 + rate["pos"] - rate["neg"]
        return {
            "analytic": max(0.0, analytic),
            "clout": max(0.0, clout),
            "authentic": max(0.0, authentic),
            "tone": max(0.0, tone),
        }


class ImportSummaryScorer:
    """Summary scores read from a per-corpus CSV produced by licensed software.

    CSV header: corpus_id,analytic,clout,authentic,tone
    """

    name = "import"

    def __init__(self, csv_path: str | Path):
        self.csv_path = str(csv_path)
        self._rows: dict[str, dict[str, float]] = {}
        with open(csv_path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"corpus_id", *SUMMARY_VARIABLES}
            if reader.fieldnames is None or not required.issubset(set(reader.fieldnames)):
                raise LexiconError(
                    f"{csv_path}: summary CSV must have header corpus_id,analytic,clout,authentic,tone"
                )
            for row in reader:
                values = {}
                for var in SUMMARY_VARIABLES:
                    value = float(row[var])
                    if value < 0:
                        raise LexiconError(
                            f"{csv_path}: negative {var} for corpus {row['corpus_id']!r}"
                        )
                    values[var] = value
                self._rows[row["corpus_id"]] = values

    def score_corpus_id(self, corpus_id: str) -> dict[str, float]:
        if corpus_id not in self._rows:
            raise LexiconError(f"{self.csv_path}: no summary row for corpus {corpus_id!r}")
        return dict(self._rows[corpus_id])


def summary_scores(
    tokens: TokenStream,
    function_pct: dict[str, float],
    scorer,
    corpus_id: str | None = None,
) -> dict[str, float]:
    """Produce the 4 summary values via the configured scorer plugin."""
    if isinstance(scorer, ImportSummaryScorer):
        if corpus_id is None:
            raise LexiconError("import scorer requires a corpus_id")
        return scorer.score_corpus_id(corpus_id)
    return scorer.score(tokens, function_pct)


def score_corpus(
    tokens: TokenStream,
    dictionary: CategoryDictionary,
    scorer,
    corpus_id: str | None = None,
) -> CategoryProfile:
    """Full profile for one corpus: 8 percentages plus 4 summary scores."""
    pct = category_percentages(tokens, dictionary)
    summary = summary_scores(tokens, pct, scorer, corpus_id)
    return CategoryProfile(
        function_pct=pct,
        summary=summary,
        total_words=tokens.total_count,
        scorer=getattr(scorer, "name", "unknown"),
    )
