"""Phase two: turn reference lists into citation and provenance CSVs."""

from __future__ import annotations

import csv
import logging
import sqlite3
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator
from urllib.parse import quote

from .ingest import AuxStore, WorkRecord, scan_dump
from .model import (
    CitationRecord,
    ProvenanceRecord,
    compute_timespan,
    format_duration,
    format_timestamp,
    intersects,
    parse_duration,
    parse_partial_date,
    parse_timestamp,
)
from .oci import OciError, build_oci, decode_numeral, parse_oci

log = logging.getLogger(__name__)

CITATION_HEADER = ["oci", "citing", "cited", "creation", "timespan", "journal_sc", "author_sc"]
PROVENANCE_HEADER = ["oci", "agent", "source", "created"]
CITATIONS_CSV = "citations.csv"
PROVENANCE_CSV = "provenance.csv"

DEFAULT_AGENT_IRI = "https://w3id.org/oc/index/prov/pa/1"
DEFAULT_SOURCE_TEMPLATE = "https://api.crossref.org/works/{doi}"


class SinkWriteFailure(OSError):
    pass


@dataclass
class BuildConfig:
    agent_iri: str = DEFAULT_AGENT_IRI
    source_url_template: str = DEFAULT_SOURCE_TEMPLATE
    run_timestamp: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc).replace(microsecond=0)
    )
    supplier: str = "020"

    def source_url(self, doi: str) -> str:
        return self.source_url_template.format(doi=quote(doi, safe="/:;()"))


@dataclass
class BuildReport:
    works: int = 0
    references: int = 0
    references_without_doi: int = 0
    citations: int = 0
    duplicates: int = 0
    self_references: int = 0
    unencodable: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def generate_citations(
    work: WorkRecord,
    aux: AuxStore,
    config: BuildConfig | None = None,
    report: BuildReport | None = None,
) -> list[tuple[CitationRecord, ProvenanceRecord]]:
    """Citations made by one work, one per distinct cited DOI."""
    config = config or BuildConfig()
    report = report if report is not None else BuildReport()
    citing = work.doi
    citing_date = aux.get_date(citing)
    citing_issns = aux.get_issns(citing)
    citing_orcids = aux.get_orcids(citing)
    source = config.source_url(citing)

    out = []
    seen: set[str] = set()
    for ref in work.references:
        report.references += 1
        cited = ref.doi
        if cited is None:
            report.references_without_doi += 1
            continue
        if cited in seen:
            report.duplicates += 1
            continue
        seen.add(cited)
        try:
            oci = build_oci(citing, cited, config.supplier)
        except OciError as exc:
            report.unencodable += 1
            log.warning("skipping citation %s -> %s: %s", citing, cited, exc)
            continue
        cited_date = aux.get_date(cited)
        timespan = None
        if citing_date is not None and cited_date is not None:
            timespan = compute_timespan(citing_date, cited_date)
        rec = CitationRecord(
            oci=oci,
            citing=citing,
            cited=cited,
            creation=citing_date,
            timespan=timespan,
            journal_sc=intersects(citing_issns, aux.get_issns(cited)),
            author_sc=intersects(citing_orcids, aux.get_orcids(cited)),
        )
        prov = ProvenanceRecord(oci, config.agent_iri, source, config.run_timestamp)
        out.append((rec, prov))
    return out


def _yn(flag: bool) -> str:
    return "yes" if flag else "no"


def citation_row(rec: CitationRecord) -> list[str]:
    return [
        rec.oci.bare,
        rec.citing,
        rec.cited,
        rec.creation.isoformat() if rec.creation else "",
        format_duration(rec.timespan) if rec.timespan else "",
        _yn(rec.journal_sc),
        _yn(rec.author_sc),
    ]


def provenance_row(prov: ProvenanceRecord) -> list[str]:
    return [prov.oci.bare, prov.agent, prov.source, format_timestamp(prov.created_at)]


def _flag(value: str) -> bool:
    if value == "yes":
        return True
    if value == "no":
        return False
    raise ValueError(f"flag must be yes/no, got {value!r}")


def record_from_row(row: dict[str, str]) -> CitationRecord:
    """Inverse of :func:`citation_row`; raises ValueError on a corrupt row."""
    return CitationRecord(
        oci=parse_oci(row["oci"]),
        citing=row["citing"],
        cited=row["cited"],
        creation=parse_partial_date(row["creation"]) if row["creation"] else None,
        timespan=parse_duration(row["timespan"]) if row["timespan"] else None,
        journal_sc=_flag(row["journal_sc"]),
        author_sc=_flag(row["author_sc"]),
    )


def provenance_from_row(row: dict[str, str]) -> ProvenanceRecord:
    return ProvenanceRecord(
        oci=parse_oci(row["oci"]),
        agent=row["agent"],
        source=row["source"],
        created_at=parse_timestamp(row["created"]),
    )


def _write_rows(out: IO[str] | str | Path, header: list[str], rows: Iterable[list[str]]) -> int:
    def write(f):
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        n = 0
        for row in rows:
            w.writerow(row)
            n += 1
        return n

    try:
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="", encoding="utf-8") as f:
                return write(f)
        return write(out)
    except OSError as exc:
        raise SinkWriteFailure(str(exc)) from exc


def emit_citations_csv(
    records: Iterable[CitationRecord], out: IO[str] | str | Path, presorted: bool = False
) -> int:
    if not presorted:
        records = sorted(records, key=lambda r: (r.citing, r.cited))
    return _write_rows(out, CITATION_HEADER, map(citation_row, records))


def emit_provenance_csv(
    records: Iterable[ProvenanceRecord], out: IO[str] | str | Path, presorted: bool = False
) -> int:
    if not presorted:
        records = sorted(records, key=lambda p: _doi_pair(p.oci))
    return _write_rows(out, PROVENANCE_HEADER, map(provenance_row, records))


def _doi_pair(oci) -> tuple[str, str]:
    # numeral order differs from DOI order, so sort on the decoded pair
    try:
        return decode_numeral(oci.citing_numeral)[1], decode_numeral(oci.cited_numeral)[1]
    except OciError:
        return oci.citing_numeral, oci.cited_numeral


def read_citations_csv(path: str | Path) -> Iterator[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        yield from csv.DictReader(f)


class CitationCollector:
    """Run-wide dedup on (citing, cited) and ordered output.

    Rows are spilled into a temporary on-disk table keyed by the pair, so
    the first occurrence wins and the final read comes back sorted.
    """

    def __init__(self, workdir: str | Path | None = None):
        self._tmp = tempfile.TemporaryDirectory(dir=workdir, prefix="ocindex-build-")
        self._db = sqlite3.connect(Path(self._tmp.name) / "rows.sqlite")
        self._db.executescript(
            """
            PRAGMA journal_mode=OFF;
            PRAGMA synchronous=OFF;
            CREATE TABLE rows(
                citing TEXT, cited TEXT, oci TEXT, creation TEXT, timespan TEXT,
                journal_sc TEXT, author_sc TEXT, agent TEXT, source TEXT, created TEXT,
                PRIMARY KEY (citing, cited)
            ) WITHOUT ROWID;
            """
        )

    def add(self, rec: CitationRecord, prov: ProvenanceRecord) -> bool:
        c = citation_row(rec)
        p = provenance_row(prov)
        cur = self._db.execute(
            "INSERT OR IGNORE INTO rows VALUES (?,?,?,?,?,?,?,?,?,?)",
            (c[1], c[2], c[0], c[3], c[4], c[5], c[6], p[1], p[2], p[3]),
        )
        return cur.rowcount == 1

    def citation_rows(self) -> Iterator[list[str]]:
        for row in self._db.execute(
            "SELECT oci, citing, cited, creation, timespan, journal_sc, author_sc "
            "FROM rows ORDER BY citing, cited"
        ):
            yield list(row)

    def provenance_rows(self) -> Iterator[list[str]]:
        for row in self._db.execute(
            "SELECT oci, agent, source, created FROM rows ORDER BY citing, cited"
        ):
            yield list(row)

    def write(self, out_dir: str | Path) -> tuple[int, int]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self._db.commit()
        n = _write_rows(out_dir / CITATIONS_CSV, CITATION_HEADER, self.citation_rows())
        m = _write_rows(out_dir / PROVENANCE_CSV, PROVENANCE_HEADER, self.provenance_rows())
        return n, m

    def close(self) -> None:
        self._db.close()
        self._tmp.cleanup()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def build(
    dump: str | Path,
    aux_dir: str | Path,
    out_dir: str | Path,
    config: BuildConfig | None = None,
    jobs: int = 1,
) -> BuildReport:
    config = config or BuildConfig()
    report = BuildReport()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    aux = AuxStore(aux_dir, readonly=True)
    try:
        with CitationCollector(out_dir) as collector:
            for work in scan_dump(dump, jobs=jobs):
                report.works += 1
                for rec, prov in generate_citations(work, aux, config, report):
                    if collector.add(rec, prov):
                        report.citations += 1
                        report.self_references += rec.is_self_reference
                    else:
                        report.duplicates += 1
            collector.write(out_dir)
    finally:
        aux.close()
    return report
