"""Phase three: N-Triples for citations (CiTO) and their provenance (PROV-O)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Union
from urllib.parse import quote, urlsplit

from .build import CITATIONS_CSV, PROVENANCE_CSV, SinkWriteFailure, provenance_from_row, record_from_row
from .model import (
    CitationRecord,
    Precision,
    ProvenanceRecord,
    format_duration,
    format_timestamp,
)
from .oci import Oci, parse_oci

CITO = "http://purl.org/spar/cito/"
PROV = "http://www.w3.org/ns/prov#"
XSD = "http://www.w3.org/2001/XMLSchema#"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

CITATION = CITO + "Citation"
JOURNAL_SELF_CITATION = CITO + "JournalSelfCitation"
AUTHOR_SELF_CITATION = CITO + "AuthorSelfCitation"
HAS_CITING_ENTITY = CITO + "hasCitingEntity"
HAS_CITED_ENTITY = CITO + "hasCitedEntity"
HAS_CREATION_DATE = CITO + "hasCitationCreationDate"
HAS_TIME_SPAN = CITO + "hasCitationTimeSpan"
WAS_ATTRIBUTED_TO = PROV + "wasAttributedTo"
HAD_PRIMARY_SOURCE = PROV + "hadPrimarySource"
GENERATED_AT_TIME = PROV + "generatedAtTime"

DATE_TYPES = {
    Precision.YEAR: XSD + "gYear",
    Precision.MONTH: XSD + "gYearMonth",
    Precision.DAY: XSD + "date",
}

DATA_NT = "citations.nt"
PROV_NT = "citations-prov.nt"


class Iri(str):
    pass


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str | None = None


Term = Union[Iri, Literal]
Triple = tuple[Iri, Iri, Term]


@dataclass(frozen=True)
class IriScheme:
    citation_base: str = "https://w3id.org/oc/index/coci/ci/"
    entity_base: str = "http://dx.doi.org/"

    def __post_init__(self):
        for base in (self.citation_base, self.entity_base):
            parts = urlsplit(base)
            if not parts.scheme or not parts.netloc or not base.endswith(("/", "#")):
                raise ValueError(f"IRI base must be absolute and end in a separator: {base!r}")

    def citation_iri(self, oci: Oci) -> Iri:
        return Iri(self.citation_base + oci.bare)

    def entity_iri(self, doi: str) -> Iri:
        return Iri(self.entity_base + quote(doi, safe="/:"))

    def oci_from_iri(self, iri: str) -> Oci:
        if not iri.startswith(self.citation_base):
            raise ValueError(f"{iri!r} is not under {self.citation_base!r}")
        return parse_oci(iri[len(self.citation_base):])


# characters that may not appear raw inside <...> in N-Triples
_IRI_FORBIDDEN = set('<>"{}|^`\\')


def escape_iri(iri: str) -> str:
    out = []
    for ch in iri:
        if ord(ch) <= 0x20 or ch in _IRI_FORBIDDEN:
            out.append("".join(f"%{b:02X}" for b in ch.encode("utf-8")))
        else:
            out.append(ch)
    return "".join(out)


_LITERAL_ESCAPES = {
    "\\": "\\\\",
    '"': '\\"',
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
    "\b": "\\b",
    "\f": "\\f",
}


def escape_literal(text: str) -> str:
    out = []
    for ch in text:
        if ch in _LITERAL_ESCAPES:
            out.append(_LITERAL_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def format_term(term: Term) -> str:
    if isinstance(term, Literal):
        text = f'"{escape_literal(term.lexical)}"'
        if term.datatype:
            text += f"^^<{escape_iri(term.datatype)}>"
        return text
    return f"<{escape_iri(term)}>"


def format_triple(triple: Triple) -> str:
    s, p, o = triple
    return f"{format_term(s)} {format_term(p)} {format_term(o)} .\n"


def citation_to_ntriples(rec: CitationRecord, scheme: IriScheme | None = None) -> list[Triple]:
    scheme = scheme or IriScheme()
    s = scheme.citation_iri(rec.oci)
    triples: list[Triple] = [
        (s, Iri(RDF_TYPE), Iri(CITATION)),
        (s, Iri(HAS_CITING_ENTITY), scheme.entity_iri(rec.citing)),
        (s, Iri(HAS_CITED_ENTITY), scheme.entity_iri(rec.cited)),
    ]
    if rec.creation is not None:
        triples.append(
            (s, Iri(HAS_CREATION_DATE), Literal(rec.creation.isoformat(), DATE_TYPES[rec.creation.precision]))
        )
    if rec.timespan is not None:
        triples.append((s, Iri(HAS_TIME_SPAN), Literal(format_duration(rec.timespan), XSD + "duration")))
    if rec.journal_sc:
        triples.append((s, Iri(RDF_TYPE), Iri(JOURNAL_SELF_CITATION)))
    if rec.author_sc:
        triples.append((s, Iri(RDF_TYPE), Iri(AUTHOR_SELF_CITATION)))
    return triples


def provenance_to_ntriples(prov: ProvenanceRecord, scheme: IriScheme | None = None) -> list[Triple]:
    scheme = scheme or IriScheme()
    s = scheme.citation_iri(prov.oci)
    return [
        (s, Iri(WAS_ATTRIBUTED_TO), Iri(prov.agent)),
        (s, Iri(HAD_PRIMARY_SOURCE), Iri(prov.source)),
        (s, Iri(GENERATED_AT_TIME), Literal(format_timestamp(prov.created_at), XSD + "dateTime")),
    ]


def write_ntriples(triples: Iterable[Triple], out: IO[str] | str | Path) -> int:
    def write(f) -> int:
        n = 0
        for t in triples:
            f.write(format_triple(t))
            n += 1
        return n

    try:
        if isinstance(out, (str, Path)):
            with open(out, "w", encoding="utf-8", newline="\n") as f:
                return write(f)
        return write(out)
    except OSError as exc:
        raise SinkWriteFailure(str(exc)) from exc


def _rows(path: Path) -> Iterator[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        yield from csv.DictReader(f)


def export_rdf(
    csv_dir: str | Path, out_dir: str | Path, scheme: IriScheme | None = None
) -> dict[str, int]:
    """Convert ``citations.csv`` / ``provenance.csv`` into the two N-Triples files."""
    scheme = scheme or IriScheme()
    csv_dir, out_dir = Path(csv_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = {"citations": 0, "provenance_records": 0}

    def data():
        for row in _rows(csv_dir / CITATIONS_CSV):
            counts["citations"] += 1
            yield from citation_to_ntriples(record_from_row(row), scheme)

    def prov():
        for row in _rows(csv_dir / PROVENANCE_CSV):
            counts["provenance_records"] += 1
            yield from provenance_to_ntriples(provenance_from_row(row), scheme)

    counts["data_triples"] = write_ntriples(data(), out_dir / DATA_NT)
    counts["provenance_triples"] = write_ntriples(prov(), out_dir / PROV_NT)
    return counts
