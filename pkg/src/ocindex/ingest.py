"""Phase one: stream a Crossref dump and build the auxiliary per-DOI datasets.

The dump is a directory of ``*.json`` / ``*.json.gz`` files (or one such
file), each an object with an ``items`` array of work objects. Items are
streamed one at a time, so memory does not grow with file size.
"""

from __future__ import annotations

import csv
import gzip
import json
import logging
import queue
import re
import sqlite3
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import ijson

from .model import (
    EntityAux,
    InvalidDate,
    PartialDate,
    normalize_issn,
    normalize_orcid,
    parse_partial_date,
)
from .oci import MalformedDoi, normalize_doi

log = logging.getLogger(__name__)

AUX_DB = "aux.sqlite"
REPORT_NAME = "ingest-report.json"


class IngestError(Exception):
    pass


class UnreadableFile(IngestError):
    pass


class MalformedJson(IngestError):
    pass


class StoreWriteFailure(IngestError):
    pass


@dataclass(frozen=True)
class ReferenceEntry:
    doi: str | None = None
    year: int | None = None


@dataclass(frozen=True)
class WorkRecord:
    doi: str
    issued: tuple | None = None
    issns: tuple[str, ...] = ()
    orcids: tuple[str, ...] = ()
    pub_type: str | None = None
    references: tuple[ReferenceEntry, ...] = ()

    @property
    def pub_date(self) -> PartialDate | None:
        if not self.issued:
            return None
        try:
            return parse_partial_date(list(self.issued))
        except InvalidDate:
            return None


@dataclass
class IngestReport:
    files: int = 0
    skipped_files: int = 0
    works: int = 0
    items_without_doi: int = 0
    malformed_items: int = 0
    references: int = 0
    references_with_doi: int = 0
    references_with_doi_and_year: int = 0
    dates: int = 0
    issn_entries: int = 0
    orcid_entries: int = 0
    date_conflicts: int = 0
    invalid_issns: int = 0
    invalid_orcids: int = 0
    invalid_dates: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def aux_entries(self) -> int:
        return self.dates + self.issn_entries + self.orcid_entries

    def to_dict(self) -> dict:
        data = asdict(self)
        data["aux_entries"] = self.aux_entries
        return data

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


_YEAR = re.compile(r"(\d{4})")


def _reference_year(value) -> int | None:
    if value is None:
        return None
    if isinstance(value, int):
        return value
    m = _YEAR.match(str(value).strip())
    return int(m.group(1)) if m else None


def _as_tuple(value) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


def work_from_item(item: dict) -> WorkRecord | None:
    """Map one Crossref work object to a WorkRecord; None when it has no usable DOI."""
    raw = item.get("DOI")
    if not raw:
        return None
    try:
        doi = normalize_doi(raw)
    except MalformedDoi:
        return None

    issued = None
    parts = (item.get("issued") or {}).get("date-parts") or []
    if parts and parts[0] and parts[0][0] is not None:
        issued = tuple(parts[0])

    orcids = tuple(a["ORCID"] for a in item.get("author") or () if a.get("ORCID"))

    refs = []
    for ref in item.get("reference") or ():
        ref_doi = ref.get("DOI")
        if ref_doi:
            try:
                ref_doi = normalize_doi(ref_doi)
            except MalformedDoi:
                ref_doi = None
        refs.append(ReferenceEntry(ref_doi or None, _reference_year(ref.get("year"))))

    return WorkRecord(
        doi=doi,
        issued=issued,
        issns=tuple(str(s) for s in _as_tuple(item.get("ISSN"))),
        orcids=orcids,
        pub_type=item.get("type"),
        references=tuple(refs),
    )


def dump_files(path: str | Path) -> list[Path]:
    path = Path(path)
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise FileNotFoundError(f"dump not found: {path}")
    files = [p for p in path.iterdir() if p.name.endswith((".json", ".json.gz"))]
    return sorted(files, key=lambda p: p.name)


def _open(path: Path):
    if path.name.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _iter_file(path: Path) -> Iterator[dict]:
    """Yield raw work objects; raises UnreadableFile / MalformedJson."""
    try:
        f = _open(path)
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    with f:
        try:
            yield from ijson.items(f, "items.item", use_float=True)
        except ijson.JSONError as exc:
            raise MalformedJson(f"{path}: {exc}") from exc
        except (OSError, EOFError, gzip.BadGzipFile) as exc:
            raise UnreadableFile(f"{path}: {exc}") from exc


def _scan_file(path: Path, report: IngestReport) -> Iterator[WorkRecord]:
    report.files += 1
    try:
        for item in _iter_file(path):
            try:
                work = work_from_item(item) if isinstance(item, dict) else None
            except (AttributeError, TypeError):
                report.malformed_items += 1
                continue
            if work is None:
                report.items_without_doi += 1
                continue
            yield work
    except IngestError as exc:
        # Records already yielded from this file stay; the file is reported.
        report.skipped_files += 1
        report.errors.append(f"{type(exc).__name__}: {exc}")
        log.warning("skipping %s", exc)


_DONE = object()


def _prefetch(path: Path, out: "queue.Queue", stop: threading.Event) -> None:
    local = IngestReport()
    try:
        for work in _scan_file(path, local):
            while not stop.is_set():
                try:
                    out.put(work, timeout=0.1)
                    break
                except queue.Full:
                    continue
            if stop.is_set():
                return
    finally:
        while not stop.is_set():
            try:
                out.put((_DONE, local), timeout=0.1)
                break
            except queue.Full:
                continue


def _merge_scan(into: IngestReport, part: IngestReport) -> None:
    into.files += part.files
    into.skipped_files += part.skipped_files
    into.items_without_doi += part.items_without_doi
    into.malformed_items += part.malformed_items
    into.errors.extend(part.errors)


def scan_dump(
    path: str | Path,
    report: IngestReport | None = None,
    jobs: int = 1,
    queue_size: int = 1024,
) -> Iterator[WorkRecord]:
    """Stream WorkRecords from a dump, in file order then item order.

    With ``jobs > 1`` up to ``jobs`` files are parsed ahead by worker threads,
    each into its own bounded queue; records are still yielded in file
    order, so output is identical to the sequential path.
    """
    report = report if report is not None else IngestReport()
    files = dump_files(path)
    if jobs <= 1:
        for f in files:
            yield from _scan_file(f, report)
        return

    stop = threading.Event()
    queues = [queue.Queue(maxsize=queue_size) for _ in files]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        try:
            for f, q in zip(files, queues):
                pool.submit(_prefetch, f, q, stop)
            for q in queues:
                while True:
                    got = q.get()
                    if isinstance(got, tuple) and got and got[0] is _DONE:
                        _merge_scan(report, got[1])
                        break
                    yield got
        finally:
            stop.set()


class AuxStore:
    """On-disk map from normalized DOI to the Dates / ISSN / ORCID datasets.

    Writes go through the ``put_*`` methods, which apply the priority rules:
    a date from an indexed item beats any date that came from a reference;
    between indexed items the more precise date wins (first on ties);
    between references the first date wins.
    """

    def __init__(self, directory: str | Path, readonly: bool = False):
        self.directory = Path(directory)
        self.path = self.directory / AUX_DB
        if readonly:
            if not self.path.exists():
                raise FileNotFoundError(f"no aux store at {self.directory}")
            self._db = sqlite3.connect(
                f"file:{self.path}?mode=ro", uri=True, check_same_thread=False
            )
        else:
            self.directory.mkdir(parents=True, exist_ok=True)
            self._db = sqlite3.connect(self.path, check_same_thread=False)
            self._db.executescript(
                """
                PRAGMA journal_mode=WAL;
                PRAGMA synchronous=OFF;
                CREATE TABLE IF NOT EXISTS dates(
                    doi TEXT PRIMARY KEY, date TEXT NOT NULL,
                    precision INTEGER NOT NULL, indexed INTEGER NOT NULL
                ) WITHOUT ROWID;
                CREATE TABLE IF NOT EXISTS issn(
                    doi TEXT PRIMARY KEY, issns TEXT NOT NULL, type TEXT
                ) WITHOUT ROWID;
                CREATE TABLE IF NOT EXISTS orcid(
                    doi TEXT PRIMARY KEY, orcids TEXT NOT NULL
                ) WITHOUT ROWID;
                """
            )
        self._lock = threading.Lock()

    def close(self) -> None:
        self._db.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if exc[0] is None:
            self.commit()
        self.close()

    def commit(self) -> None:
        try:
            self._db.commit()
        except sqlite3.Error as exc:
            raise StoreWriteFailure(str(exc)) from exc

    def _exec(self, sql: str, args: tuple = ()):
        try:
            return self._db.execute(sql, args)
        except sqlite3.Error as exc:
            raise StoreWriteFailure(f"{exc} ({sql.split()[0]})") from exc

    # writes

    def put_indexed_date(self, doi: str, date: PartialDate) -> bool:
        """Record an indexed item's date. Returns True if a prior entry existed."""
        row = self._exec(
            "SELECT precision, indexed FROM dates WHERE doi=?", (doi,)
        ).fetchone()
        if row is None:
            self._exec(
                "INSERT INTO dates VALUES (?,?,?,1)", (doi, date.isoformat(), int(date.precision))
            )
            return False
        precision, indexed = row
        if not indexed or date.precision > precision:
            self._exec(
                "UPDATE dates SET date=?, precision=?, indexed=1 WHERE doi=?",
                (date.isoformat(), int(date.precision), doi),
            )
        return True

    def put_reference_date(self, doi: str, date: PartialDate) -> bool:
        """Record a reference-only date unless anything is already there."""
        cur = self._exec(
            "INSERT OR IGNORE INTO dates VALUES (?,?,?,0)",
            (doi, date.isoformat(), int(date.precision)),
        )
        return cur.rowcount == 0

    def put_issns(self, doi: str, issns: Iterable[str], pub_type: str | None) -> None:
        issns = set(issns)
        row = self._exec("SELECT issns, type FROM issn WHERE doi=?", (doi,)).fetchone()
        if row is not None:
            issns |= set(filter(None, row[0].split(";")))
            pub_type = row[1] or pub_type
        self._exec(
            "INSERT OR REPLACE INTO issn VALUES (?,?,?)",
            (doi, ";".join(sorted(issns)), pub_type),
        )

    def put_orcids(self, doi: str, orcids: Iterable[str]) -> None:
        orcids = set(orcids)
        row = self._exec("SELECT orcids FROM orcid WHERE doi=?", (doi,)).fetchone()
        if row is not None:
            orcids |= set(filter(None, row[0].split(";")))
        self._exec("INSERT OR REPLACE INTO orcid VALUES (?,?)", (doi, ";".join(sorted(orcids))))

    # reads

    def get_date(self, doi: str) -> PartialDate | None:
        with self._lock:
            row = self._db.execute("SELECT date FROM dates WHERE doi=?", (doi,)).fetchone()
        return parse_partial_date(row[0]) if row else None

    def get_issns(self, doi: str) -> frozenset[str]:
        with self._lock:
            row = self._db.execute("SELECT issns FROM issn WHERE doi=?", (doi,)).fetchone()
        return frozenset(filter(None, row[0].split(";"))) if row else frozenset()

    def get_orcids(self, doi: str) -> frozenset[str]:
        with self._lock:
            row = self._db.execute("SELECT orcids FROM orcid WHERE doi=?", (doi,)).fetchone()
        return frozenset(filter(None, row[0].split(";"))) if row else frozenset()

    def get(self, doi: str) -> EntityAux:
        with self._lock:
            row = self._db.execute("SELECT type FROM issn WHERE doi=?", (doi,)).fetchone()
        return EntityAux(
            doi=doi,
            pub_date=self.get_date(doi),
            issns=self.get_issns(doi),
            orcids=self.get_orcids(doi),
            pub_type=row[0] if row else None,
        )

    def counts(self) -> dict[str, int]:
        return {
            t: self._db.execute(f"SELECT count(*) FROM {t}").fetchone()[0]
            for t in ("dates", "issn", "orcid")
        }

    def export(self, directory: str | Path) -> list[Path]:
        """Write ``dates.csv``, ``issn.csv`` and ``orcid.csv`` sorted by DOI."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        layout = {
            "dates.csv": ("SELECT doi, date FROM dates ORDER BY doi", ["doi", "date"]),
            "issn.csv": ("SELECT doi, issns, type FROM issn ORDER BY doi", ["doi", "issns", "type"]),
            "orcid.csv": ("SELECT doi, orcids FROM orcid ORDER BY doi", ["doi", "orcids"]),
        }
        written = []
        for name, (sql, header) in layout.items():
            target = directory / name
            with open(target, "w", newline="", encoding="utf-8") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(header)
                for row in self._db.execute(sql):
                    w.writerow(["" if v is None else v for v in row])
            written.append(target)
        return written


def build_aux(
    works: Iterable[WorkRecord],
    sink: AuxStore,
    report: IngestReport | None = None,
    commit_every: int = 20000,
) -> IngestReport:
    report = report if report is not None else IngestReport()
    pending = 0
    for work in works:
        report.works += 1
        date = work.pub_date
        if work.issued and date is None:
            report.invalid_dates += 1
        if date is not None:
            report.date_conflicts += sink.put_indexed_date(work.doi, date)

        issns = set()
        for raw in work.issns:
            norm = normalize_issn(raw)
            if norm is None:
                report.invalid_issns += 1
            else:
                issns.add(norm)
        if issns or work.pub_type:
            sink.put_issns(work.doi, issns, work.pub_type)

        orcids = set()
        for raw in work.orcids:
            norm = normalize_orcid(raw)
            if norm is None:
                report.invalid_orcids += 1
            else:
                orcids.add(norm)
        if orcids:
            sink.put_orcids(work.doi, orcids)

        for ref in work.references:
            report.references += 1
            if ref.doi is None:
                continue
            report.references_with_doi += 1
            if ref.year is None:
                continue
            try:
                year = PartialDate(ref.year)
            except InvalidDate:
                report.invalid_dates += 1
                continue
            report.references_with_doi_and_year += 1
            report.date_conflicts += sink.put_reference_date(ref.doi, year)

        pending += 1
        if pending >= commit_every:
            sink.commit()
            pending = 0
    sink.commit()
    counts = sink.counts()
    report.dates = counts["dates"]
    report.issn_entries = counts["issn"]
    report.orcid_entries = counts["orcid"]
    return report


def ingest(dump: str | Path, aux_dir: str | Path, jobs: int = 1) -> IngestReport:
    """Run phase one end to end and write ``ingest-report.json`` next to the store."""
    files = dump_files(dump)
    report = IngestReport()
    with AuxStore(aux_dir) as store:
        build_aux(scan_dump(dump, report, jobs=jobs), store, report)
    report.write(Path(aux_dir) / REPORT_NAME)
    log.info("ingested %d works from %d files", report.works, len(files))
    return report

