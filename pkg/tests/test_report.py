from ocindex.report import corpus_table, plot_publishers, plot_timespans, publisher_table, timespan_years
from ocindex.store import CorpusStats, PublisherRow, PublisherStats


def test_corpus_table_alignment():
    stats = CorpusStats(1000, 1500, 67, 6.7, 1, 0.1, 900, 100)
    lines = corpus_table(stats).splitlines()
    assert lines[0] == "citations               1,000"
    assert lines[2] == "journal self-citations  67 (6.7%)"
    assert len({line.index("  ") for line in lines if "  " in line}) >= 1


def test_publisher_table_layout():
    stats = PublisherStats([
        PublisherRow("Elsevier", frozenset({"10.1016"}), 10, 12345),
        PublisherRow("other", frozenset({"10.9"}), 2, 0),
    ])
    lines = publisher_table(stats).splitlines()
    assert lines[0].startswith("Publisher")
    assert lines[2].endswith("12,345")
    assert len({len(line) for line in lines}) == 1


def test_timespan_years():
    assert timespan_years(["P1Y", "P1Y2M", "-P3Y", "P0Y", "P3M"]) == {1: 2, -3: 1, 0: 2}


def test_figures_are_png(tmp_path):
    stats = PublisherStats([PublisherRow("A", frozenset({"10.1"}), 3, 1)])
    for p in (plot_publishers(stats, tmp_path / "p.png"), plot_timespans(["P1Y", "-P2Y"], tmp_path / "t.png"),
              plot_timespans([], tmp_path / "empty.png")):
        assert p.read_bytes()[:4] == b"\x89PNG"
