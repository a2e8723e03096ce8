from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import pytest

from ocindex.build import BuildConfig, build
from ocindex.ingest import ingest
from ocindex.rdf import export_rdf
from ocindex.store import CitationIndex
from ocindex.synth import SynthConfig, generate_dump

CITING = "10.1186/1756-8722-6-59"
CITED = "10.1186/1756-8722-5-31"
EXAMPLE_OCI = (
    "02001010806360107050663080702026306630509-02001010806360107050663080702026305630301"
)
RUN_TS = datetime(2018, 11, 12, tzinfo=timezone.utc)


def write_dump(directory: Path, files: list[list[dict]]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for i, items in enumerate(files):
        (directory / f"part-{i:02d}.json").write_text(json.dumps({"items": items}))
    return directory


def example_items() -> list[dict]:
    return [
        {
            "DOI": CITING,
            "issued": {"date-parts": [[2013]]},
            "ISSN": ["1756-8722"],
            "type": "journal-article",
            "author": [{"family": "Doe", "given": "J"}],
            "reference": [{"key": "r1", "DOI": CITED, "year": "2012"}, {"key": "r2", "unstructured": "x"}],
        },
        {
            "DOI": CITED,
            "issued": {"date-parts": [[2012]]},
            "ISSN": ["1756-8722"],
            "type": "journal-article",
        },
    ]


@pytest.fixture
def example_dump(tmp_path) -> Path:
    return write_dump(tmp_path / "dump", [example_items()])


@pytest.fixture
def example_pipeline(tmp_path, example_dump):
    """ingest -> build -> export-rdf -> load over the two-work example."""
    aux, out, idx = tmp_path / "aux", tmp_path / "csv", tmp_path / "index"
    ingest(example_dump, aux)
    build(example_dump, aux, out, BuildConfig(run_timestamp=RUN_TS))
    export_rdf(out, out)
    index, _ = CitationIndex.load(out, idx)
    yield {"dump": example_dump, "aux": aux, "csv": out, "index_dir": idx, "index": index}
    index.close()


SYNTH = SynthConfig(works=1000, files=4, refs_per_work=10, seed=7)


@pytest.fixture(scope="session")
def synthetic(tmp_path_factory):
    """Full pipeline over a 10^3-work synthetic dump, shared across tests."""
    root = tmp_path_factory.mktemp("synthetic")
    dump, aux, out, idx = root / "dump", root / "aux", root / "csv", root / "index"
    generate_dump(dump, SYNTH)
    ingest_report = ingest(dump, aux)
    build_report = build(dump, aux, out, BuildConfig(run_timestamp=RUN_TS))
    rdf_counts = export_rdf(out, out)
    index, load_report = CitationIndex.load(out, idx)
    yield {
        "root": root,
        "dump": dump,
        "aux": aux,
        "csv": out,
        "index_dir": idx,
        "index": index,
        "ingest_report": ingest_report,
        "build_report": build_report,
        "rdf_counts": rdf_counts,
        "load_report": load_report,
    }
    index.close()


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
