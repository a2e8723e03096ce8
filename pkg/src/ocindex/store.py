"""Queryable on-disk citation index plus corpus statistics.

Loads never modify the live database file: the current snapshot is copied,
the new rows are upserted into the copy and the copy is renamed over the
original. Readers that opened the old file keep seeing it.
"""

from __future__ import annotations

import csv
import os
import sqlite3
import threading
from dataclasses import asdict, dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping

from .build import CITATION_HEADER, CITATIONS_CSV, citation_row, record_from_row
from .model import CitationRecord
from .oci import MalformedDoi, Oci, OciError, normalize_doi, parse_oci

INDEX_DB = "index.sqlite"
DEFAULT_LIMIT = 1000
OTHER = "other"

_SCHEMA = """
CREATE TABLE IF NOT EXISTS citations(
    oci TEXT PRIMARY KEY,
    citing TEXT NOT NULL,
    cited TEXT NOT NULL,
    creation TEXT NOT NULL,
    timespan TEXT NOT NULL,
    journal_sc TEXT NOT NULL,
    author_sc TEXT NOT NULL
) WITHOUT ROWID;
CREATE INDEX IF NOT EXISTS by_citing ON citations(citing, cited);
CREATE INDEX IF NOT EXISTS by_cited ON citations(cited, citing);
"""

_COLUMNS = ", ".join(CITATION_HEADER)


class SchemaMismatch(ValueError):
    pass


class IndexNotLoaded(RuntimeError):
    pass


@dataclass
class LoadReport:
    rows: int = 0
    inserted: int = 0
    updated: int = 0
    unchanged: int = 0
    corrupt: int = 0
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CorpusStats:
    citations: int
    entities: int
    journal_sc: int
    journal_sc_share: float
    author_sc: int
    author_sc_share: float
    with_timespan: int
    without_timespan: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PublisherRow:
    label: str
    prefixes: frozenset[str]
    outgoing: int
    incoming: int

    @property
    def volume(self) -> int:
        return self.outgoing + self.incoming


@dataclass(frozen=True)
class PublisherStats:
    rows: list[PublisherRow]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "label": r.label,
                    "prefixes": sorted(r.prefixes),
                    "outgoing": r.outgoing,
                    "incoming": r.incoming,
                }
                for r in self.rows
            ]
        }


def share(count: int, total: int) -> float:
    """Percentage rounded half-up to one decimal; 0.0 for an empty corpus."""
    if not total:
        return 0.0
    pct = Decimal(count) * 100 / Decimal(total)
    return float(pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def doi_prefix(doi: str) -> str:
    return doi.split("/", 1)[0]


def load_prefix_map(path: str | Path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"prefix", "label"} <= set(reader.fieldnames):
            raise SchemaMismatch(f"{path}: expected columns prefix,label")
        return {row["prefix"].strip().lower(): row["label"].strip() for row in reader}


def _row_dict(row: tuple) -> dict[str, str]:
    return dict(zip(CITATION_HEADER, row))


class CitationIndex:
    """Read side of the index: lookups by citing DOI, cited DOI and OCI."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.path = self.directory / INDEX_DB
        if not self.path.exists():
            raise IndexNotLoaded(f"no citation index at {self.directory}")
        self._local = threading.local()
        self._conns: list[sqlite3.Connection] = []
        self._conns_lock = threading.Lock()

    @property
    def _db(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            # immutable: the file is never written in place once published
            conn = sqlite3.connect(
                f"file:{self.path}?mode=ro&immutable=1", uri=True, check_same_thread=False
            )
            self._local.conn = conn
            with self._conns_lock:
                self._conns.append(conn)
        return conn

    def close(self) -> None:
        with self._conns_lock:
            for conn in self._conns:
                conn.close()
            self._conns.clear()
        self._local = threading.local()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @classmethod
    def load(
        cls, csv_paths: Iterable[str | Path] | str | Path, directory: str | Path
    ) -> tuple["CitationIndex", LoadReport]:
        """Upsert citation CSVs into the index at ``directory`` (created if missing).

        A directory argument in ``csv_paths`` means its ``citations.csv``.
        """
        if isinstance(csv_paths, (str, Path)):
            csv_paths = [csv_paths]
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        live = directory / INDEX_DB
        staging = directory / (INDEX_DB + ".loading")
        if staging.exists():
            staging.unlink()

        new = sqlite3.connect(staging)
        try:
            if live.exists():
                old = sqlite3.connect(f"file:{live}?mode=ro", uri=True)
                try:
                    old.backup(new)
                finally:
                    old.close()
            new.executescript(_SCHEMA)
            report = LoadReport()
            for p in csv_paths:
                p = Path(p)
                if p.is_dir():
                    p = p / CITATIONS_CSV
                _load_file(new, p, report)
            new.commit()
        except BaseException:
            new.close()
            staging.unlink(missing_ok=True)
            raise
        new.close()
        os.replace(staging, live)
        return cls(directory), report

    # queries

    def _select(self, where: str, args: tuple, order: str, offset: int, limit: int | None):
        sql = f"SELECT {_COLUMNS} FROM citations WHERE {where} ORDER BY {order}"
        if limit is not None:
            sql += " LIMIT ? OFFSET ?"
            args = args + (limit, offset)
        elif offset:
            sql += " LIMIT -1 OFFSET ?"
            args = args + (offset,)
        return [_row_dict(r) for r in self._db.execute(sql, args)]

    def outgoing_rows(self, doi: str, offset: int = 0, limit: int | None = None) -> list[dict]:
        return self._select("citing=?", (_key(doi),), "cited", offset, limit)

    def incoming_rows(self, doi: str, offset: int = 0, limit: int | None = None) -> list[dict]:
        return self._select("cited=?", (_key(doi),), "citing", offset, limit)

    def outgoing(self, doi: str, offset: int = 0, limit: int | None = None) -> list[CitationRecord]:
        return [record_from_row(r) for r in self.outgoing_rows(doi, offset, limit)]

    def incoming(self, doi: str, offset: int = 0, limit: int | None = None) -> list[CitationRecord]:
        return [record_from_row(r) for r in self.incoming_rows(doi, offset, limit)]

    def count_outgoing(self, doi: str) -> int:
        return self._db.execute(
            "SELECT count(*) FROM citations WHERE citing=?", (_key(doi),)
        ).fetchone()[0]

    def count_incoming(self, doi: str) -> int:
        return self._db.execute(
            "SELECT count(*) FROM citations WHERE cited=?", (_key(doi),)
        ).fetchone()[0]

    def row_by_oci(self, oci: Oci | str) -> dict[str, str] | None:
        if isinstance(oci, str):
            oci = parse_oci(oci)
        row = self._db.execute(
            f"SELECT {_COLUMNS} FROM citations WHERE oci=?", (oci.bare,)
        ).fetchone()
        return _row_dict(row) if row else None

    def by_oci(self, oci: Oci | str) -> CitationRecord | None:
        row = self.row_by_oci(oci)
        return record_from_row(row) if row else None

    def all_rows(self) -> Iterable[dict[str, str]]:
        for row in self._db.execute(f"SELECT {_COLUMNS} FROM citations ORDER BY citing, cited"):
            yield _row_dict(row)

    def __len__(self) -> int:
        return self._db.execute("SELECT count(*) FROM citations").fetchone()[0]

    # statistics

    def corpus_stats(self) -> CorpusStats:
        db = self._db
        total, jsc, asc, with_ts = db.execute(
            "SELECT count(*), "
            "coalesce(sum(journal_sc='yes'), 0), "
            "coalesce(sum(author_sc='yes'), 0), "
            "coalesce(sum(timespan<>''), 0) FROM citations"
        ).fetchone()
        entities = db.execute(
            "SELECT count(*) FROM (SELECT citing FROM citations UNION SELECT cited FROM citations)"
        ).fetchone()[0]
        return CorpusStats(
            citations=total,
            entities=entities,
            journal_sc=jsc,
            journal_sc_share=share(jsc, total),
            author_sc=asc,
            author_sc_share=share(asc, total),
            with_timespan=with_ts,
            without_timespan=total - with_ts,
        )

    def timespan_values(self) -> list[str]:
        return [r[0] for r in self._db.execute("SELECT timespan FROM citations WHERE timespan<>''")]

    def publisher_stats(self, prefix_map: Mapping[str, str] | None = None) -> PublisherStats:
        prefix_map = {k.lower(): v for k, v in (prefix_map or {}).items()}
        outgoing: dict[str, int] = {}
        incoming: dict[str, int] = {}
        prefixes: dict[str, set[str]] = {}
        for column, counter in (("citing", outgoing), ("cited", incoming)):
            sql = (
                f"SELECT substr({column}, 1, instr({column}, '/') - 1) AS p, count(*) "
                f"FROM citations GROUP BY p"
            )
            for prefix, n in self._db.execute(sql):
                label = prefix_map.get(prefix, OTHER)
                counter[label] = counter.get(label, 0) + n
                prefixes.setdefault(label, set()).add(prefix)
        rows = [
            PublisherRow(label, frozenset(prefixes[label]), outgoing.get(label, 0), incoming.get(label, 0))
            for label in prefixes
        ]
        rows.sort(key=lambda r: (-r.volume, r.label))
        return PublisherStats(rows)


def _key(doi: str) -> str:
    try:
        return normalize_doi(doi)
    except MalformedDoi:
        return doi.strip().lower()


def _load_file(db: sqlite3.Connection, path: Path, report: LoadReport) -> None:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CITATION_HEADER:
            raise SchemaMismatch(f"{path}: header {header!r} != {CITATION_HEADER!r}")
        for lineno, raw in enumerate(reader, start=2):
            report.rows += 1
            try:
                if len(raw) != len(CITATION_HEADER):
                    raise ValueError(f"expected {len(CITATION_HEADER)} fields, got {len(raw)}")
                rec = record_from_row(dict(zip(CITATION_HEADER, raw)))
                values = tuple(citation_row(_normalized(rec)))
            except (ValueError, OciError) as exc:
                report.corrupt += 1
                report.errors.append(f"{path}:{lineno}: {exc}")
                continue
            existing = db.execute(
                f"SELECT {_COLUMNS} FROM citations WHERE oci=?", (values[0],)
            ).fetchone()
            if existing is None:
                db.execute(f"INSERT INTO citations({_COLUMNS}) VALUES (?,?,?,?,?,?,?)", values)
                report.inserted += 1
            elif tuple(existing) != values:
                db.execute(
                    "UPDATE citations SET citing=?, cited=?, creation=?, timespan=?, "
                    "journal_sc=?, author_sc=? WHERE oci=?",
                    values[1:] + values[:1],
                )
                report.updated += 1
            else:
                report.unchanged += 1


def _normalized(rec: CitationRecord) -> CitationRecord:
    return replace(rec, citing=normalize_doi(rec.citing), cited=normalize_doi(rec.cited))
