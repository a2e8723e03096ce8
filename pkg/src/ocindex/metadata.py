"""Bibliographic metadata lookups for the ``/metadata`` operation.

Titles, authors and venues are not part of the citation index; they come
from a Crossref-shaped works API. Every answer is cached on disk keyed by
normalized DOI, so ``cache-only`` mode can serve them with no network.
"""

from __future__ import annotations

import json
import logging
import sqlite3
import threading
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from urllib.parse import quote

import httpx

log = logging.getLogger(__name__)


class ResolverMode(str, Enum):
    LIVE = "live"
    CACHE_ONLY = "cache-only"
    OFF = "off"


class Outcome(str, Enum):
    LIVE = "live"
    CACHED = "cached"
    MISSING = "missing"
    TIMEOUT = "timeout"
    FAILED = "failed"
    DISABLED = "disabled"


@dataclass
class MetadataRecord:
    doi: str
    title: str = ""
    author: str = ""
    year: str = ""
    source_title: str = ""
    volume: str = ""
    issue: str = ""
    page: str = ""
    reference_count: str = "0"
    citation_count: str = "0"

    def to_dict(self) -> dict[str, str]:
        return asdict(self)


def _first(value) -> str:
    if isinstance(value, list):
        value = value[0] if value else ""
    return "" if value is None else str(value)


def bibliographic_fields(message: dict) -> dict[str, str]:
    """Pick the fields we expose from a Crossref ``works`` message."""
    authors = []
    for a in message.get("author") or ():
        family, given = a.get("family", ""), a.get("given", "")
        name = ", ".join(x for x in (family, given) if x) or a.get("name", "")
        if name:
            authors.append(name)
    year = ""
    parts = (message.get("issued") or {}).get("date-parts") or []
    if parts and parts[0] and parts[0][0] is not None:
        year = str(parts[0][0])
    return {
        "title": _first(message.get("title")),
        "author": "; ".join(authors),
        "year": year,
        "source_title": _first(message.get("container-title")),
        "volume": _first(message.get("volume")),
        "issue": _first(message.get("issue")),
        "page": _first(message.get("page")),
    }


class MetadataCache:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._db = sqlite3.connect(self.path, check_same_thread=False)
        self._db.execute("CREATE TABLE IF NOT EXISTS cache(doi TEXT PRIMARY KEY, body TEXT)")
        self._db.commit()
        self._write = threading.Lock()

    def get(self, doi: str) -> dict | None:
        row = self._db.execute("SELECT body FROM cache WHERE doi=?", (doi,)).fetchone()
        return json.loads(row[0]) if row else None

    def put(self, doi: str, fields: dict) -> None:
        with self._write:
            self._db.execute(
                "INSERT OR REPLACE INTO cache VALUES (?,?)", (doi, json.dumps(fields, sort_keys=True))
            )
            self._db.commit()

    def close(self) -> None:
        self._db.close()


class MetadataResolver:
    def __init__(
        self,
        mode: ResolverMode | str = ResolverMode.OFF,
        base_url: str | None = None,
        cache: MetadataCache | str | Path | None = None,
        timeout: float = 10.0,
        client: httpx.Client | None = None,
    ):
        self.mode = ResolverMode(mode)
        if self.mode is ResolverMode.LIVE and not base_url:
            raise ValueError("live metadata mode needs a base URL")
        self.base_url = (base_url or "").rstrip("/")
        if isinstance(cache, (str, Path)):
            cache = MetadataCache(cache)
        self.cache = cache
        self.timeout = timeout
        self._client = client
        self._inflight: dict[str, threading.Lock] = {}
        self._inflight_guard = threading.Lock()

    @property
    def client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout)
        return self._client

    def _lock_for(self, doi: str) -> threading.Lock:
        with self._inflight_guard:
            return self._inflight.setdefault(doi, threading.Lock())

    def resolve(self, doi: str) -> tuple[dict | None, Outcome]:
        if self.mode is ResolverMode.OFF:
            return None, Outcome.DISABLED
        cached = self.cache.get(doi) if self.cache else None
        if cached is not None:
            return cached, Outcome.CACHED
        if self.mode is ResolverMode.CACHE_ONLY:
            return None, Outcome.MISSING
        # one outbound call per DOI: late arrivals wait, then hit the cache
        with self._lock_for(doi):
            cached = self.cache.get(doi) if self.cache else None
            if cached is not None:
                return cached, Outcome.CACHED
            return self._fetch(doi)

    def _fetch(self, doi: str) -> tuple[dict | None, Outcome]:
        url = f"{self.base_url}/works/{quote(doi, safe='/')}"
        try:
            resp = self.client.get(url, timeout=self.timeout)
        except httpx.TimeoutException:
            log.warning("metadata lookup timed out for %s", doi)
            return None, Outcome.TIMEOUT
        except httpx.HTTPError as exc:
            log.warning("metadata lookup failed for %s: %s", doi, exc)
            return None, Outcome.FAILED
        if resp.status_code != 200:
            return None, Outcome.FAILED
        try:
            body = resp.json()
        except ValueError:
            return None, Outcome.FAILED
        message = body.get("message", body) if isinstance(body, dict) else {}
        fields = bibliographic_fields(message if isinstance(message, dict) else {})
        if self.cache:
            self.cache.put(doi, fields)
        return fields, Outcome.LIVE

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
        if self.cache:
            self.cache.close()
