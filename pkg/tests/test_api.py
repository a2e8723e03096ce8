import csv
import io
import threading

import pytest
from fastapi.testclient import TestClient

from ocindex.api import ApiConfig, create_app, negotiate
from ocindex.build import CITATION_HEADER, emit_citations_csv, read_citations_csv
from ocindex.metadata import MetadataResolver, Outcome, bibliographic_fields
from ocindex.model import CitationRecord, PartialDate, parse_duration
from ocindex.oci import build_oci
from ocindex.store import CitationIndex

from .conftest import CITED, CITING, EXAMPLE_OCI
from .stubs import StubCrossref


@pytest.fixture
def stub():
    with StubCrossref() as s:
        yield s


@pytest.fixture
def example_client(example_pipeline, stub):
    app = create_app(ApiConfig(index=str(example_pipeline["index_dir"]), metadata_base_url=stub.url))
    with TestClient(app) as client:
        yield client


def test_references_example(example_client):
    r = example_client.get(f"/references/{CITING}")
    assert r.status_code == 200
    [obj] = r.json()
    assert obj == {
        "oci": EXAMPLE_OCI, "citing": CITING, "cited": CITED, "creation": "2013",
        "timespan": "P1Y", "journal_sc": "yes", "author_sc": "no",
    }
    assert r.headers["x-total-count"] == "1"


def test_unknown_doi_is_empty_list(example_client):
    assert example_client.get("/references/10.0000/unknown").json() == []
    assert example_client.get(f"/citations/{CITING}").json() == []


def test_csv_format(example_client):
    for r in (
        example_client.get(f"/references/{CITING}?format=csv"),
        example_client.get(f"/references/{CITING}", headers={"Accept": "text/csv"}),
    ):
        assert r.headers["content-type"].startswith("text/csv")
        lines = r.text.splitlines()
        assert lines[0] == ",".join(CITATION_HEADER)
        assert lines[1].startswith(EXAMPLE_OCI)


def test_citations_example(example_client):
    [obj] = example_client.get(f"/citations/{CITED}").json()
    assert obj["oci"] == EXAMPLE_OCI


def test_malformed_doi(example_client):
    assert example_client.get("/references/not-a-doi").status_code == 400


def test_citation_by_oci(example_client):
    r = example_client.get(f"/citation/{EXAMPLE_OCI}")
    assert r.status_code == 200 and r.json()["citing"] == CITING
    assert example_client.get(f"/citation/oci:{EXAMPLE_OCI}").json() == r.json()
    assert example_client.get("/citation/1-2-3").status_code == 400
    assert example_client.get("/citation/0301-03018").status_code == 404


def test_direct_access_negotiation(example_client):
    nt = example_client.get(f"/ci/{EXAMPLE_OCI}", headers={"Accept": "application/n-triples"})
    assert nt.status_code == 200
    assert nt.headers["content-type"].startswith("application/n-triples")
    # journal self-citation on top of the five base statements
    assert len(nt.text.splitlines()) == 6
    c = example_client.get(f"/ci/{EXAMPLE_OCI}", headers={"Accept": "text/csv"})
    assert len(c.text.splitlines()) == 2
    j = example_client.get(f"/ci/{EXAMPLE_OCI}")
    assert j.json()["oci"] == EXAMPLE_OCI
    assert example_client.get(f"/ci/{EXAMPLE_OCI}", headers={"Accept": "image/png"}).status_code == 406
    assert example_client.get("/ci/020-020").status_code == 404


def test_five_line_ntriples_for_plain_citation(tmp_path):
    rec = CitationRecord(build_oci(CITING, CITED), CITING, CITED, PartialDate(2013), parse_duration("P1Y"))
    emit_citations_csv([rec], tmp_path / "c.csv")
    index, _ = CitationIndex.load(tmp_path / "c.csv", tmp_path / "idx")
    with TestClient(create_app(index=index)) as client:
        r = client.get(f"/ci/{EXAMPLE_OCI}", headers={"Accept": "application/n-triples"})
    assert len(r.text.splitlines()) == 5
    index.close()


def test_pagination_total_count(tmp_path):
    target = "10.5/t"
    recs = [CitationRecord(build_oci(f"10.5/c{i}", target), f"10.5/c{i}", target) for i in range(3)]
    emit_citations_csv(recs, tmp_path / "c.csv")
    index, _ = CitationIndex.load(tmp_path / "c.csv", tmp_path / "idx")
    with TestClient(create_app(ApiConfig(default_page_size=2, max_page_size=5), index=index)) as client:
        r = client.get(f"/citations/{target}?limit=1")
        assert len(r.json()) == 1 and r.headers["x-total-count"] == "3"
        assert len(client.get(f"/citations/{target}").json()) == 2
        assert [o["citing"] for o in client.get(f"/citations/{target}?offset=1&limit=5").json()] == ["10.5/c1", "10.5/c2"]
        assert client.get(f"/citations/{target}?limit=6").status_code == 400
        assert client.get(f"/citations/{target}?offset=-1").status_code == 422
    index.close()


def test_no_index_is_503(tmp_path):
    with TestClient(create_app(ApiConfig(index=str(tmp_path / "none")))) as client:
        assert client.get(f"/references/{CITING}").status_code == 503
        assert client.get(f"/citation/{EXAMPLE_OCI}").status_code == 503
        assert client.get(f"/metadata/{CITING}").status_code == 503


def test_metadata_off_mode_makes_no_calls(example_client, stub):
    r = example_client.get(f"/metadata/{CITING}")
    [rec] = r.json()
    assert rec["reference_count"] == "1" and rec["citation_count"] == "0"
    assert rec["title"] == ""
    two = example_client.get(f"/metadata/{CITED}__{CITING}").json()
    assert [x["doi"] for x in two] == [CITED, CITING]
    assert two[0]["citation_count"] == "1"
    assert stub.calls == []


def test_metadata_bad_list(example_client):
    assert example_client.get(f"/metadata/{CITING}__junk").status_code == 400


def test_metadata_live_then_cached(tmp_path, example_pipeline, stub):
    cfg = ApiConfig(
        index=str(example_pipeline["index_dir"]), metadata_mode="live",
        metadata_base_url=stub.url, cache_path=str(tmp_path / "meta.sqlite"),
    )
    with TestClient(create_app(cfg)) as client:
        first = client.get(f"/metadata/{CITING}").json()
        second = client.get(f"/metadata/{CITING}").json()
    assert first == second
    assert first[0]["title"] == f"Title of {CITING}"
    assert first[0]["author"] == "Doe, Jane; Roe"
    assert first[0]["source_title"] == "Journal of Hematology & Oncology"
    assert first[0]["reference_count"] == "1"
    assert stub.calls == [f"/works/{CITING}"]

    # cache-only mode serves the same answer with the stub gone
    cfg_cache = ApiConfig(index=cfg.index, metadata_mode="cache-only", cache_path=cfg.cache_path)
    with TestClient(create_app(cfg_cache)) as client:
        assert client.get(f"/metadata/{CITING}").json() == first
        assert client.get(f"/metadata/{CITED}").json()[0]["title"] == ""


def test_metadata_timeout_is_504(tmp_path, example_pipeline):
    with StubCrossref(delay=1.0) as slow:
        cfg = ApiConfig(
            index=str(example_pipeline["index_dir"]), metadata_mode="live",
            metadata_base_url=slow.url, timeout=0.1,
        )
        with TestClient(create_app(cfg)) as client:
            assert client.get(f"/metadata/{CITING}").status_code == 504


def test_resolver_coalesces_concurrent_lookups(tmp_path):
    with StubCrossref(delay=0.2) as s:
        resolver = MetadataResolver("live", s.url, tmp_path / "c.sqlite", timeout=5)
        results = []
        threads = [threading.Thread(target=lambda: results.append(resolver.resolve("10.1/a"))) for _ in range(5)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        resolver.close()
    assert len(s.calls) == 1
    assert sorted(o for _, o in results) == sorted([Outcome.LIVE] + [Outcome.CACHED] * 4)


def test_bibliographic_fields_sparse():
    assert bibliographic_fields({}) == {
        "title": "", "author": "", "year": "", "source_title": "", "volume": "", "issue": "", "page": "",
    }


def test_config_validation_and_file(tmp_path):
    with pytest.raises(ValueError):
        ApiConfig(default_page_size=10, max_page_size=5)
    with pytest.raises(ValueError):
        ApiConfig(metadata_mode="live")
    with pytest.raises(ValueError):
        ApiConfig(metadata_mode="sometimes")
    p = tmp_path / "serve.conf"
    p.write_text("# service\nport = 9000\nmax-page-size=5000\nmetadata_mode=cache-only\n\n")
    cfg = ApiConfig.from_file(p, index="/x")
    assert (cfg.port, cfg.max_page_size, cfg.metadata_mode, cfg.index) == (9000, 5000, "cache-only", "/x")
    p.write_text("colour=blue\n")
    with pytest.raises(ValueError):
        ApiConfig.from_file(p)


@pytest.mark.parametrize(
    "accept, expected",
    [
        (None, "application/json"),
        ("text/csv", "text/csv"),
        ("application/n-triples;q=0.9, text/csv;q=0.5", "application/n-triples"),
        ("text/*", "text/csv"),
        ("image/png", None),
        ("text/csv;q=0", None),
    ],
)
def test_negotiate(accept, expected):
    assert negotiate(accept, ["application/json", "text/csv", "application/n-triples"]) == expected


def test_access_log_one_line_per_request(example_client, caplog):
    with caplog.at_level("INFO", logger="ocindex.api"):
        example_client.get(f"/references/{CITING}")
        example_client.get("/citation/1-2-3")
    lines = [r.getMessage() for r in caplog.records if r.name == "ocindex.api"]
    assert len(lines) == 2
    assert lines[0].startswith(f"GET /references/{CITING} 200")
    assert " 400 " in lines[1]


def test_api_store_equivalence_sweep(synthetic):
    index = synthetic["index"]
    rows = list(read_citations_csv(synthetic["csv"] / "citations.csv"))
    with TestClient(create_app(ApiConfig(max_page_size=100000), index=index)) as client:
        refs, cits = {}, {}
        for doi in sorted({r["citing"] for r in rows}):
            refs[doi] = client.get(f"/references/{doi}?limit=100000").json()
        for doi in sorted({r["cited"] for r in rows}):
            cits[doi] = client.get(f"/citations/{doi}?limit=100000").json()
        for row in rows[:300]:
            assert client.get(f"/citation/{row['oci']}").json() == row
    for row in rows:
        assert sum(o["oci"] == row["oci"] for o in refs[row["citing"]]) == 1
        assert sum(o["oci"] == row["oci"] for o in cits[row["cited"]]) == 1
    assert sum(map(len, refs.values())) == sum(map(len, cits.values())) == len(rows)


def test_rows_roundtrip_through_csv_endpoint(example_client):
    body = example_client.get(f"/citation/{EXAMPLE_OCI}?format=csv").text
    [row] = list(csv.DictReader(io.StringIO(body)))
    assert row == example_client.get(f"/citation/{EXAMPLE_OCI}").json()
