import csv
import io
from datetime import datetime, timezone
from pathlib import Path

import pytest
import rdflib
from hypothesis import given
from hypothesis import strategies as st

from ocindex.model import CitationRecord, PartialDate, ProvenanceRecord, parse_duration
from ocindex.oci import build_oci, default_table
from ocindex.rdf import (
    AUTHOR_SELF_CITATION,
    JOURNAL_SELF_CITATION,
    Iri,
    IriScheme,
    Literal,
    citation_to_ntriples,
    escape_literal,
    format_term,
    format_triple,
    provenance_to_ntriples,
    write_ntriples,
)

from . import golden_records
from .conftest import CITED, CITING, EXAMPLE_OCI

GOLDEN = Path(__file__).parent / "golden"
RUN = datetime(2018, 11, 12, tzinfo=timezone.utc)


def parse_nt(text: str) -> rdflib.Graph:
    # rdflib cannot normalize negative xsd:duration values, so keep literals as written
    rdflib.NORMALIZE_LITERALS = False
    g = rdflib.Graph()
    g.parse(data=text, format="nt")
    return g


def _full(journal=False, author=False, creation=PartialDate(2013), span="P1Y"):
    return CitationRecord(
        build_oci(CITING, CITED), CITING, CITED, creation,
        parse_duration(span) if span else None, journal, author,
    )


def test_full_non_self_citation_is_five_triples():
    triples = citation_to_ntriples(_full())
    assert len(triples) == 5
    assert triples[0][0] == "https://w3id.org/oc/index/coci/ci/" + EXAMPLE_OCI
    assert triples[1][2] == "http://dx.doi.org/10.1186/1756-8722-6-59"


def test_both_flags_add_two_triples():
    triples = citation_to_ntriples(_full(journal=True, author=True))
    assert len(triples) == 7
    assert {t[2] for t in triples[5:]} == {JOURNAL_SELF_CITATION, AUTHOR_SELF_CITATION}


def test_no_dates_three_triples():
    assert len(citation_to_ntriples(_full(creation=None, span=None))) == 3


@pytest.mark.parametrize(
    "date, datatype",
    [(PartialDate(2013), "gYear"), (PartialDate(2013, 2), "gYearMonth"), (PartialDate(2013, 2, 3), "date")],
)
def test_creation_datatype_follows_precision(date, datatype):
    lit = citation_to_ntriples(_full(creation=date, span=None))[3][2]
    assert lit == Literal(str(date), "http://www.w3.org/2001/XMLSchema#" + datatype)


def test_provenance_is_three_triples():
    prov = ProvenanceRecord(build_oci(CITING, CITED), "https://w3id.org/oc", "https://api.crossref.org/works/x", RUN)
    triples = provenance_to_ntriples(prov)
    assert len(triples) == 3
    line = format_triple(triples[0])
    assert line == (
        f"<https://w3id.org/oc/index/coci/ci/{EXAMPLE_OCI}> "
        "<http://www.w3.org/ns/prov#wasAttributedTo> <https://w3id.org/oc> .\n"
    )
    assert format_term(triples[2][2]) == '"2018-11-12T00:00:00Z"^^<http://www.w3.org/2001/XMLSchema#dateTime>'


def test_source_with_space_is_percent_encoded():
    prov = ProvenanceRecord(build_oci(CITING, CITED), "https://w3id.org/oc", "https://x.org/works/a b", RUN)
    text = "".join(map(format_triple, provenance_to_ntriples(prov)))
    assert "<https://x.org/works/a%20b>" in text
    assert len(parse_nt(text)) == 3


def test_literal_escaping():
    assert escape_literal('say "hi"\\\n\t\x01') == 'say \\"hi\\"\\\\\\n\\t\\u0001'
    line = format_triple((Iri("http://a/s"), Iri("http://a/p"), Literal('a "q" \\ b\n')))
    g = parse_nt(line)
    [(_, _, o)] = list(g)
    assert str(o) == 'a "q" \\ b\n'


def test_zero_triples_empty_output(tmp_path):
    assert write_ntriples([], tmp_path / "e.nt") == 0
    assert (tmp_path / "e.nt").read_bytes() == b""


def test_golden_files_byte_identical():
    data, prov = io.StringIO(), io.StringIO()
    write_ntriples((t for r in golden_records.records() for t in citation_to_ntriples(r)), data)
    write_ntriples((t for p in golden_records.provenance() for t in provenance_to_ntriples(p)), prov)
    assert data.getvalue() == (GOLDEN / "ten.nt").read_text(encoding="utf-8")
    assert prov.getvalue() == (GOLDEN / "ten-prov.nt").read_text(encoding="utf-8")


def test_golden_files_parse_with_rdflib():
    assert len(parse_nt((GOLDEN / "ten.nt").read_text())) == 53
    assert len(parse_nt((GOLDEN / "ten-prov.nt").read_text())) == 30


def test_iri_scheme_validation():
    with pytest.raises(ValueError):
        IriScheme(citation_base="https://example.org/ci")
    with pytest.raises(ValueError):
        IriScheme(entity_base="dx.doi.org/")
    s = IriScheme("https://example.org/ci/", "https://doi.org/")
    assert s.entity_iri("10.1/a<b") == "https://doi.org/10.1/a%3Cb"


mapped = st.sampled_from(sorted(default_table().entries))
dois = st.builds(lambda s: "10." + s, st.text(mapped, min_size=1, max_size=25))


@given(dois, dois)
def test_iri_roundtrip(a, b):
    scheme = IriScheme()
    rec = CitationRecord(build_oci(a, b), a, b)
    subject = citation_to_ntriples(rec, scheme)[0][0]
    assert scheme.oci_from_iri(subject) == rec.oci


@given(dois)
def test_entity_iri_only_safe_characters(doi):
    iri = IriScheme().entity_iri(doi)
    tail = iri[len("http://dx.doi.org/"):]
    assert all(c.isalnum() or c in "/:._-~%" for c in tail)


def test_synthetic_triple_count_law(synthetic):
    expected = 0
    with open(synthetic["csv"] / "citations.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    for r in rows:
        expected += 5 + (r["journal_sc"] == "yes") + (r["author_sc"] == "yes")
        expected -= (r["creation"] == "") + (r["timespan"] == "")
    counts = synthetic["rdf_counts"]
    assert counts["data_triples"] == expected
    assert counts["provenance_triples"] == 3 * len(rows)
