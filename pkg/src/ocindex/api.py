"""HTTP service over a loaded citation index.

Routes: ``/references/{doi}``, ``/citations/{doi}``, ``/citation/{oci}``,
``/metadata/{doi__doi...}`` and direct access ``/ci/{oci}`` with content
negotiation between JSON, CSV and N-Triples.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .build import CITATION_HEADER, record_from_row
from .metadata import MetadataRecord, MetadataResolver, Outcome, ResolverMode
from .oci import MalformedDoi, OciError, normalize_doi, parse_oci
from .rdf import IriScheme, citation_to_ntriples, format_triple
from .store import DEFAULT_LIMIT, CitationIndex, IndexNotLoaded

log = logging.getLogger("ocindex.api")

CSV = "text/csv"
JSON = "application/json"
NTRIPLES = "application/n-triples"
DOI_SEPARATOR = "__"


@dataclass
class ApiConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    index: str | None = None
    default_page_size: int = DEFAULT_LIMIT
    max_page_size: int = 10000
    metadata_mode: str = "off"
    metadata_base_url: str | None = None
    cache_path: str | None = None
    timeout: float = 10.0

    def __post_init__(self):
        if self.max_page_size < self.default_page_size:
            raise ValueError("max_page_size must be >= default_page_size")
        ResolverMode(self.metadata_mode)
        if self.metadata_mode == "live" and not self.metadata_base_url:
            raise ValueError("metadata_mode=live requires metadata_base_url")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ApiConfig":
        """Read a flat ``key=value`` file; blank lines and ``#`` comments are skipped."""
        types = {"port": int, "default_page_size": int, "max_page_size": int, "timeout": float}
        values: dict = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = types.get(key, str)(value)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def rows_to_csv(rows: list[dict[str, str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CITATION_HEADER)
    for row in rows:
        w.writerow([row[k] for k in CITATION_HEADER])
    return buf.getvalue()


def _media_ranges(accept: str | None) -> list[tuple[str, float]]:
    if not accept:
        return [("*/*", 1.0)]
    ranges = []
    for part in accept.split(","):
        bits = [b.strip() for b in part.split(";")]
        media = bits[0].lower()
        if not media:
            continue
        q = 1.0
        for b in bits[1:]:
            if b.startswith("q="):
                try:
                    q = float(b[2:])
                except ValueError:
                    q = 0.0
        ranges.append((media, q))
    return ranges


def negotiate(accept: str | None, offered: list[str]) -> str | None:
    """Best of ``offered`` for an Accept header (first offer wins ties); None if nothing fits."""
    best, best_q = None, 0.0
    for media, q in _media_ranges(accept):
        if q <= 0:
            continue
        for offer in offered:
            major = offer.split("/")[0]
            if media in (offer, "*/*", f"{major}/*") and q > best_q:
                best, best_q = offer, q
                break
    return best


class AccessLog:
    """One log line per request: method, path, status, latency."""

    def __init__(self, app):
        self.app = app

    async def __call__(self, scope, receive, send):
        if scope["type"] != "http":
            return await self.app(scope, receive, send)
        start = time.perf_counter()
        status = [500]

        async def capture(message):
            if message["type"] == "http.response.start":
                status[0] = message["status"]
            await send(message)

        try:
            await self.app(scope, receive, capture)
        finally:
            log.info(
                "%s %s %d %.1fms",
                scope["method"],
                scope["path"],
                status[0],
                (time.perf_counter() - start) * 1000,
            )


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def create_app(
    config: ApiConfig | None = None,
    index: CitationIndex | None = None,
    resolver: MetadataResolver | None = None,
    scheme: IriScheme | None = None,
) -> FastAPI:
    config = config or ApiConfig()
    scheme = scheme or IriScheme()
    if resolver is None:
        resolver = MetadataResolver(
            config.metadata_mode,
            config.metadata_base_url,
            config.cache_path,
            config.timeout,
        )
    app = FastAPI(title="ocindex", version="1")
    state = {"index": index}

    def get_index() -> CitationIndex | None:
        if state["index"] is None and config.index:
            try:
                state["index"] = CitationIndex(config.index)
            except IndexNotLoaded:
                return None
        return state["index"]

    app.state.resolver = resolver
    app.state.get_index = get_index

    app.add_middleware(AccessLog)

    def wants_csv(request: Request, fmt: str | None) -> bool:
        if fmt:
            return fmt.lower() == "csv"
        return negotiate(request.headers.get("accept"), [JSON, CSV]) == CSV

    def list_response(request, rows, total, fmt):
        headers = {"X-Total-Count": str(total)}
        if wants_csv(request, fmt):
            return PlainTextResponse(rows_to_csv(rows), media_type=CSV, headers=headers)
        return JSONResponse(rows, headers=headers)

    def listing(request: Request, doi: str, direction: str, offset: int, limit: int | None, fmt):
        idx = get_index()
        if idx is None:
            return _error(503, "citation index not loaded")
        try:
            doi = normalize_doi(doi)
        except MalformedDoi as exc:
            return _error(400, str(exc))
        limit = config.default_page_size if limit is None else limit
        if limit > config.max_page_size:
            return _error(400, f"limit exceeds {config.max_page_size}")
        if direction == "out":
            rows, total = idx.outgoing_rows(doi, offset, limit), idx.count_outgoing(doi)
        else:
            rows, total = idx.incoming_rows(doi, offset, limit), idx.count_incoming(doi)
        return list_response(request, rows, total, fmt)

    @app.get("/references/{doi:path}")
    async def references(
        request: Request,
        doi: str,
        offset: int = Query(0, ge=0),
        limit: int | None = Query(None, ge=1),
        format: str | None = None,
    ):
        return listing(request, doi, "out", offset, limit, format)

    @app.get("/citations/{doi:path}")
    async def citations(
        request: Request,
        doi: str,
        offset: int = Query(0, ge=0),
        limit: int | None = Query(None, ge=1),
        format: str | None = None,
    ):
        return listing(request, doi, "in", offset, limit, format)

    def lookup(oci_text: str):
        idx = get_index()
        if idx is None:
            return None, _error(503, "citation index not loaded")
        try:
            oci = parse_oci(oci_text)
        except OciError as exc:
            return None, _error(400, str(exc))
        row = idx.row_by_oci(oci)
        if row is None:
            return None, _error(404, f"no citation {oci}")
        return row, None

    @app.get("/citation/{oci}")
    async def citation(request: Request, oci: str, format: str | None = None):
        row, err = lookup(oci)
        if err is not None:
            return err
        if wants_csv(request, format):
            return PlainTextResponse(rows_to_csv([row]), media_type=CSV)
        return JSONResponse(row)

    @app.get("/ci/{oci}")
    async def direct(request: Request, oci: str):
        row, err = lookup(oci)
        if err is not None:
            return err
        media = negotiate(request.headers.get("accept"), [JSON, CSV, NTRIPLES])
        if media is None:
            return _error(406, "supported: application/json, text/csv, application/n-triples")
        if media == NTRIPLES:
            triples = citation_to_ntriples(record_from_row(row), scheme)
            body = "".join(format_triple(t) for t in triples)
            return Response(body, media_type=NTRIPLES)
        if media == CSV:
            return PlainTextResponse(rows_to_csv([row]), media_type=CSV)
        return JSONResponse(row)

    @app.get("/metadata/{dois:path}")
    def metadata(dois: str):
        idx = get_index()
        if idx is None:
            return _error(503, "citation index not loaded")
        try:
            wanted = [normalize_doi(d) for d in dois.split(DOI_SEPARATOR)]
        except MalformedDoi as exc:
            return _error(400, f"malformed DOI list: {exc}")
        records, outcomes = [], []
        for doi in wanted:
            rec = MetadataRecord(
                doi=doi,
                reference_count=str(idx.count_outgoing(doi)),
                citation_count=str(idx.count_incoming(doi)),
            )
            fields, outcome = resolver.resolve(doi)
            outcomes.append(outcome)
            if fields:
                for k, v in fields.items():
                    if hasattr(rec, k) and k not in ("doi", "reference_count", "citation_count"):
                        setattr(rec, k, v)
            records.append(rec.to_dict())
        if resolver.mode is ResolverMode.LIVE and all(o is Outcome.TIMEOUT for o in outcomes):
            return _error(504, "metadata service timed out")
        return JSONResponse(records)

    return app
