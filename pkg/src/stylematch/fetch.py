"""Paginated, rate-limit-aware repository archive fetcher.

Downloads contributors, issue/PR/commit comment streams, and repository
metadata into the API export layout consumed by the ingest stage.  The
client keeps at most one request in flight, honors rate-limit reset
headers by sleeping, and checkpoints a cursor file after every completed
page so an interrupted run resumes where it stopped.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import requests

logger = logging.getLogger(__name__)

DEFAULT_API_BASE = "https://api.github.com"
PER_PAGE = 100

ENDPOINTS = (
    ("contributors", "contributors.json"),
    ("issues", "issues.json"),
    ("pulls", "pulls.json"),
    ("commits", "commits.json"),
    ("issue_comments", "issue_comments.json"),
    ("pull_comments", "pull_comments.json"),
    ("commit_comments", "commit_comments.json"),
)


class FetchError(Exception):
    pass


class AuthError(FetchError):
    pass


class RateLimitError(FetchError):
    """Rate limit exhausted with no usable reset header."""


@dataclass
class FetchClient:
    repo: str
    token: str
    out_dir: Path
    api_base: str = DEFAULT_API_BASE
    max_wait: float = 3600.0
    sleep = staticmethod(time.sleep)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.session = requests.Session()
        if self.token:
            self.session.headers["Authorization"] = f"token {self.token}"
        self.session.headers["Accept"] = "application/json"

    # cursor file: {"endpoint": ..., "page": next page to request}
    @property
    def cursor_path(self) -> Path:
        return self.out_dir / ".cursor.json"

    def _load_cursor(self) -> dict:
        if self.cursor_path.exists():
            with open(self.cursor_path, "r", encoding="utf-8") as fh:
                return json.load(fh)
        return {}

    def _save_cursor(self, cursor: dict) -> None:
        tmp = self.cursor_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(cursor, fh)
        tmp.replace(self.cursor_path)

    def _get(self, url: str, params: dict) -> requests.Response:
        while True:
            resp = self.session.get(url, params=params, timeout=30)
            if resp.status_code == 401:
                raise AuthError(f"authentication failed for {url}")
            if resp.status_code in (403, 429) or (
                resp.status_code == 200 and resp.headers.get("X-RateLimit-Remaining") == "0"
            ):
                reset = resp.headers.get("X-RateLimit-Reset")
                retry_after = resp.headers.get("Retry-After")
                if resp.status_code == 200:
                    wait = self._reset_wait(reset)
                    if wait is not None:
                        logger.info("rate limit reached; sleeping %.0fs", wait)
                        self.sleep(wait)
                    return resp
                if retry_after is not None:
                    self.sleep(min(float(retry_after), self.max_wait))
                    continue
                wait = self._reset_wait(reset)
                if wait is None:
                    raise RateLimitError(f"rate limited at {url} with no reset header")
                logger.info("rate limited; sleeping %.0fs until reset", wait)
                self.sleep(wait)
                continue
            if resp.status_code >= 500:
                self.sleep(1.0)
                continue
            if resp.status_code != 200:
                raise FetchError(f"unexpected status {resp.status_code} for {url}")
            return resp

    def _reset_wait(self, reset_header: str | None) -> float | None:
        if reset_header is None or not reset_header.isdigit():
            return None
        return min(max(0.0, int(reset_header) - time.time()) + 1.0, self.max_wait)

    def fetch_all(self) -> dict[str, int]:
        """Download every endpoint, resuming from the cursor file.

        Returns item counts per endpoint.  On auth failure nothing is
        written; on other failures completed pages stay on disk alongside
        the cursor so a re-run resumes from the next page.
        """
        owner, name = self.repo.split("/", 1)
        meta_resp = self._get(f"{self.api_base}/repos/{owner}/{name}", {})
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.out_dir / "meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta_resp.json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

        cursor = self._load_cursor()
        counts: dict[str, int] = {}
        for endpoint, filename in ENDPOINTS:
            target = self.out_dir / filename
            partial_path = self.out_dir / (filename + ".partial")
            state = cursor.get(endpoint, {})
            if state.get("done") and target.exists():
                with open(target, "r", encoding="utf-8") as fh:
                    counts[endpoint] = len(json.load(fh))
                continue
            partial: list = []
            page = state.get("page", 1)
            if partial_path.exists() and page > 1:
                with open(partial_path, "r", encoding="utf-8") as fh:
                    partial = json.load(fh)
            url = f"{self.api_base}/repos/{owner}/{name}/{endpoint}"
            while True:
                resp = self._get(url, {"per_page": PER_PAGE, "page": page})
                batch = resp.json()
                if not isinstance(batch, list):
                    raise FetchError(f"{endpoint} page {page}: expected a JSON array")
                if not batch:
                    break
                partial.extend(batch)
                page += 1
                with open(partial_path, "w", encoding="utf-8") as fh:
                    json.dump(partial, fh)
                cursor[endpoint] = {"page": page, "done": False}
                self._save_cursor(cursor)
                if len(batch) < PER_PAGE:
                    break
            with open(target, "w", encoding="utf-8") as fh:
                json.dump(partial, fh, indent=2, sort_keys=True)
                fh.write("\n")
            partial_path.unlink(missing_ok=True)
            cursor[endpoint] = {"page": 1, "done": True}
            self._save_cursor(cursor)
            counts[endpoint] = len(partial)
        self.cursor_path.unlink(missing_ok=True)
        return counts


def fetch_project(
    repo: str,
    token: str,
    out_dir: str | Path,
    api_base: str = DEFAULT_API_BASE,
) -> dict[str, int]:
    """Fetch one repository's export; see FetchClient for resumption rules."""
    client = FetchClient(repo=repo, token=token, out_dir=Path(out_dir), api_base=api_base)
    return client.fetch_all()
