"""SE-aware cleaning and tokenization of conversation text.

Cleaning removes the things that would otherwise pollute word counts in
developer conversations: code blocks and spans, URLs, file paths, long hex
strings (commit hashes), stack-trace lines, quoted-reply lines, and
@-mention handles (already consumed for routing upstream).  Tokenization
lowercases, keeps contractions as single tokens, and drops anything that
is punctuation-only or contains a digit (version strings, ids, numbers).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

_FENCED_CODE = re.compile(r"```.*?(?:```|\Z)|~~~.*?(?:~~~|\Z)", re.DOTALL)
_INLINE_CODE = re.compile(r"`[^`\n]*`")
_QUOTED_LINE = re.compile(r"^\s*>.*$", re.MULTILINE)
_STACK_LINE = re.compile(
    r"^\s*(?:at\s+\S+\(.*\)\s*$"
    r"|File \".*\", line \d+.*$"
    r"|Traceback \(most recent call last\).*$"
    r"|Caused by: .*$"
    r"|\S+(?:Error|Exception)(?::.*)?$)",
    re.MULTILINE,
)
_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
# path-like tokens: absolute/relative/home prefixes, two or more slashes,
# slash plus dotted extension, or windows drive paths
_PATH = re.compile(
    r"(?<!\S)(?:~?/|\./|\.\./)[^\s]+"
    r"|(?<!\S)[A-Za-z]:\\[^\s]+"
    r"|(?<!\S)\S+/\S+/\S+"
    r"|(?<!\S)\S*/\S*\.\w+"
)
_HEX_WORD = re.compile(r"\b[0-9a-fA-F]{7,}\b")
_MENTION = re.compile(r"(?<![\w.])@[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?")
_WS = re.compile(r"\s+")

_APOSTROPHES = str.maketrans({"’": "'", "ʼ": "'"})
_TOKEN = re.compile(r"[^\W_]+(?:'[^\W_]+)*", re.UNICODE)
_HAS_DIGIT = re.compile(r"\d")


@dataclass
class TokenStream:
    """Ordered lowercase word tokens ready for lexicon scoring."""

    tokens: list[str] = field(default_factory=list)

    @property
    def total_count(self) -> int:
        return len(self.tokens)


def strip_se_artifacts(body: str) -> str:
    """Remove code, URLs, paths, hashes, traces, quotes, and mentions.

    Idempotent: a second pass leaves the output unchanged.
    """
    text = _FENCED_CODE.sub(" ", body)
    text = _INLINE_CODE.sub(" ", text)
    text = _QUOTED_LINE.sub(" ", text)
    text = _STACK_LINE.sub(" ", text)
    text = _URL.sub(" ", text)
    text = _PATH.sub(" ", text)
    text = _HEX_WORD.sub(" ", text)
    text = _MENTION.sub(" ", text)
    return _WS.sub(" ", text).strip()


def strip_code(text: str) -> str:
    """Remove fenced blocks and inline code spans only.

    Used before @-mention scanning: handles inside code are code, not address.
    """
    return _INLINE_CODE.sub(" ", _FENCED_CODE.sub(" ", text))


def load_acronyms(path: str | Path) -> dict[str, str]:
    """Load `ACRONYM<TAB>expansion` lines; `#` starts a comment."""
    table: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected ACRONYM<TAB>expansion")
            acronym, expansion = line.split("\t", 1)
            table[acronym.strip().lower()] = expansion.strip()
    return table


def expand_acronyms(text: str, acronym_dict: dict[str, str]) -> str:
    """Replace whole-word acronyms (case-insensitive) in a single pass.

    Expansions are not re-scanned, so an expansion containing another
    acronym is left as written.
    """
    if not acronym_dict:
        return text
    table = {k.lower(): v for k, v in acronym_dict.items()}
    keys = sorted(table, key=len, reverse=True)
    pattern = re.compile(r"\b(?:" + "|".join(re.escape(k) for k in keys) + r")\b", re.IGNORECASE)
    return pattern.sub(lambda m: table[m.group(0).lower()], text)


def tokenize(text: str) -> TokenStream:
    """Lowercase word tokens; contractions stay whole; digit-bearing and
    punctuation-only chunks are dropped."""
    normalized = text.translate(_APOSTROPHES)
    tokens = [
        match.group(0).lower()
        for match in _TOKEN.finditer(normalized)
        if not _HAS_DIGIT.search(match.group(0))
    ]
    return TokenStream(tokens)


def prepare_tokens(body: str, acronym_dict: dict[str, str] | None = None) -> TokenStream:
    """Full cleaning pass: strip artifacts, expand acronyms, tokenize."""
    cleaned = strip_se_artifacts(body)
    if acronym_dict:
        cleaned = expand_acronyms(cleaned, acronym_dict)
    return tokenize(cleaned)
