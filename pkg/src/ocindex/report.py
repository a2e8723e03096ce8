"""Text tables and figures for corpus statistics."""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .model import parse_duration  # noqa: E402
from .store import CorpusStats, PublisherStats  # noqa: E402


def corpus_table(stats: CorpusStats) -> str:
    rows = [
        ("citations", f"{stats.citations:,}"),
        ("entities", f"{stats.entities:,}"),
        ("journal self-citations", f"{stats.journal_sc:,} ({stats.journal_sc_share:.1f}%)"),
        ("author self-citations", f"{stats.author_sc:,} ({stats.author_sc_share:.1f}%)"),
        ("with timespan", f"{stats.with_timespan:,}"),
        ("without timespan", f"{stats.without_timespan:,}"),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


def publisher_table(stats: PublisherStats) -> str:
    header = ("Publisher", "Outgoing citations", "Incoming citations")
    body = [(r.label, f"{r.outgoing:,}", f"{r.incoming:,}") for r in stats.rows]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(3)]
    lines = [
        f"{header[0]:<{widths[0]}}  {header[1]:>{widths[1]}}  {header[2]:>{widths[2]}}",
        "  ".join("-" * w for w in widths),
    ]
    for label, out, inc in body:
        lines.append(f"{label:<{widths[0]}}  {out:>{widths[1]}}  {inc:>{widths[2]}}")
    return "\n".join(lines) + "\n"


def timespan_years(values: Iterable[str]) -> Counter:
    """Histogram of signed whole years over ISO duration strings."""
    counts: Counter = Counter()
    for text in values:
        t = parse_duration(text)
        counts[-t.years if t.negative else t.years] += 1
    return counts


def plot_publishers(stats: PublisherStats, path: str | Path, top: int = 10) -> Path:
    rows = stats.rows[:top]
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.45 * len(rows) + 1)))
    labels = [r.label for r in rows][::-1]
    y = range(len(rows))
    h = 0.4
    ax.barh([i + h / 2 for i in y], [r.outgoing for r in rows][::-1], h, label="outgoing")
    ax.barh([i - h / 2 for i in y], [r.incoming for r in rows][::-1], h, label="incoming")
    ax.set_yticks(list(y))
    ax.set_yticklabels(labels)
    ax.set_xlabel("citations")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_timespans(values: Iterable[str], path: str | Path) -> Path:
    counts = timespan_years(values)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    if counts:
        xs = sorted(counts)
        ax.bar(xs, [counts[x] for x in xs], width=0.9, color="tab:gray")
    ax.set_xlabel("citation timespan (years)")
    ax.set_ylabel("citations")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
