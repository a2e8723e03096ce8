"""``ocindex`` command line: ingest, build, export-rdf, load, serve, resolve, stats."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .build import CITATION_HEADER, BuildConfig, build
from .ingest import IngestReport, dump_files, ingest
from .model import parse_timestamp
from .oci import OciError, decode_numeral, parse_oci
from .rdf import IriScheme, citation_to_ntriples, export_rdf, format_triple

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_USAGE = 2

log = logging.getLogger("ocindex")


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_ingest(args) -> int:
    try:
        files = dump_files(args.dump)
    except FileNotFoundError as exc:
        _err(f"error: {exc}")
        return EXIT_FATAL
    if not files:
        _err(f"error: no .json or .json.gz files in {args.dump}")
        return EXIT_FATAL
    try:
        report = ingest(args.dump, args.aux, jobs=args.jobs)
    except Exception as exc:  # persistence failures are fatal
        _err(f"error: {exc}")
        return EXIT_FATAL
    if args.export:
        from .ingest import AuxStore

        with AuxStore(args.aux, readonly=True) as store:
            store.export(args.export)
    _summary(report)
    return EXIT_OK


def _summary(report: IngestReport) -> None:
    _err(
        f"works={report.works} references={report.references} "
        f"aux_entries={report.aux_entries} date_conflicts={report.date_conflicts} "
        f"files={report.files} skipped_files={report.skipped_files}"
    )
    for e in report.errors:
        _err(f"warning: {e}")


def _build_config(args) -> BuildConfig:
    cfg = BuildConfig()
    if args.agent_iri:
        cfg.agent_iri = args.agent_iri
    if args.source_url_template:
        cfg.source_url_template = args.source_url_template
    if args.run_timestamp:
        cfg.run_timestamp = parse_timestamp(args.run_timestamp)
    return cfg


def cmd_build(args) -> int:
    try:
        dump_files(args.dump)
        cfg = _build_config(args)
        report = build(args.dump, args.aux, args.out, cfg, jobs=args.jobs)
    except (FileNotFoundError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_FATAL
    print(f"citations.csv rows={report.citations}")
    print(f"provenance.csv rows={report.citations}")
    _err(
        f"works={report.works} references={report.references} duplicates={report.duplicates} "
        f"self_references={report.self_references} unencodable={report.unencodable}"
    )
    return EXIT_OK


def cmd_export_rdf(args) -> int:
    try:
        scheme = IriScheme(args.citation_base, args.entity_base)
        counts = export_rdf(args.csv, args.out, scheme)
    except (FileNotFoundError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_FATAL
    print(f"citations.nt triples={counts['data_triples']}")
    print(f"citations-prov.nt triples={counts['provenance_triples']}")
    return EXIT_OK


def cmd_load(args) -> int:
    from .store import CitationIndex, SchemaMismatch

    paths = [Path(p) for p in args.csv]
    try:
        index, report = CitationIndex.load(paths, args.index)
    except (FileNotFoundError, SchemaMismatch) as exc:
        _err(f"error: {exc}")
        return EXIT_FATAL
    with index:
        total = len(index)
    print(
        f"rows={report.rows} inserted={report.inserted} updated={report.updated} "
        f"unchanged={report.unchanged} corrupt={report.corrupt} total={total}"
    )
    for e in report.errors:
        _err(f"warning: {e}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .api import ApiConfig, create_app

    try:
        if args.config:
            config = ApiConfig.from_file(args.config, index=args.index, host=args.host, port=args.port)
        else:
            config = ApiConfig(
                index=args.index, host=args.host or "127.0.0.1", port=args.port or 8000
            )
    except (OSError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_FATAL
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, access_log=False, log_level="info")
    return EXIT_OK


def cmd_resolve(args) -> int:
    try:
        oci = parse_oci(args.oci)
        citing_supplier, citing = decode_numeral(oci.citing_numeral)
        cited_supplier, cited = decode_numeral(oci.cited_numeral)
    except OciError as exc:
        _err(f"error: cannot parse {args.oci!r}: {exc}")
        return EXIT_USAGE

    row = None
    if args.index:
        from .store import CitationIndex, IndexNotLoaded

        try:
            with CitationIndex(args.index) as index:
                row = index.row_by_oci(oci)
        except IndexNotLoaded as exc:
            _err(f"error: {exc}")
            return EXIT_FATAL
        if row is None:
            _err(f"warning: {oci} is not in the index")

    if args.format == "json":
        out = {
            "oci": str(oci),
            "supplier": citing_supplier.name,
            "supplier_prefix": citing_supplier.digits,
            "citing": citing,
            "cited": cited,
        }
        if cited_supplier != citing_supplier:
            out["cited_supplier"] = cited_supplier.name
        if row is not None:
            out["record"] = row
        print(json.dumps(out, indent=2))
    elif args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        if row is not None:
            w.writerow(CITATION_HEADER)
            w.writerow([row[k] for k in CITATION_HEADER])
        else:
            w.writerow(["oci", "supplier", "citing", "cited"])
            w.writerow([oci.bare, citing_supplier.name, citing, cited])
    else:
        from .build import record_from_row
        from .model import CitationRecord

        if row is not None:
            rec = record_from_row(row)
        elif citing_supplier.decodable and cited_supplier.decodable:
            rec = CitationRecord(oci, citing, cited)
        else:
            _err("error: N-Triples need DOI identifiers or an --index holding the citation")
            return EXIT_FATAL
        sys.stdout.write("".join(format_triple(t) for t in citation_to_ntriples(rec)))
    return EXIT_OK


def cmd_stats(args) -> int:
    from .report import corpus_table, plot_publishers, plot_timespans, publisher_table
    from .store import CitationIndex, IndexNotLoaded, load_prefix_map

    try:
        index = CitationIndex(args.index)
    except IndexNotLoaded as exc:
        _err(f"error: {exc}")
        return EXIT_FATAL
    with index:
        corpus = index.corpus_stats()
        publishers = None
        if args.publishers:
            publishers = index.publisher_stats(load_prefix_map(args.publishers))
        if args.json:
            payload = {"corpus": corpus.to_dict()}
            if publishers is not None:
                payload["publishers"] = publishers.to_dict()["rows"]
            print(json.dumps(payload, indent=2))
        else:
            sys.stdout.write(corpus_table(corpus))
            if publishers is not None:
                sys.stdout.write("\n" + publisher_table(publishers))
        if args.figures:
            fig_dir = Path(args.figures)
            fig_dir.mkdir(parents=True, exist_ok=True)
            written = [plot_timespans(index.timespan_values(), fig_dir / "timespans.png")]
            if publishers is not None:
                written.append(plot_publishers(publishers, fig_dir / "publishers.png"))
            for p in written:
                _err(f"wrote {p}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import SynthConfig, generate_dump

    cfg = SynthConfig(
        works=args.works, files=args.files, refs_per_work=args.refs, gzip=args.gzip, seed=args.seed
    )
    paths = generate_dump(args.out, cfg)
    print(f"wrote {len(paths)} files to {args.out}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ocindex", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="stream a dump into the auxiliary datasets")
    s.add_argument("--dump", required=True)
    s.add_argument("--aux", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--export", help="also write dates/issn/orcid CSVs to this directory")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("build", help="generate citations.csv and provenance.csv")
    s.add_argument("--dump", required=True)
    s.add_argument("--aux", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--run-timestamp", help="freeze provenance time, e.g. 2018-11-12T00:00:00Z")
    s.add_argument("--agent-iri")
    s.add_argument("--source-url-template")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("export-rdf", help="convert the CSVs to N-Triples")
    s.add_argument("--csv", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--citation-base", default=IriScheme.citation_base)
    s.add_argument("--entity-base", default=IriScheme.entity_base)
    s.set_defaults(func=cmd_export_rdf)

    s = sub.add_parser("load", help="load citation CSVs into the index")
    s.add_argument("--csv", required=True, nargs="+")
    s.add_argument("--index", required=True)
    s.set_defaults(func=cmd_load)

    s = sub.add_parser("serve", help="run the REST service")
    s.add_argument("--index")
    s.add_argument("--config")
    s.add_argument("--host")
    s.add_argument("--port", type=int)
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("resolve", help="decode an OCI offline")
    s.add_argument("oci")
    s.add_argument("--format", choices=["json", "csv", "nt"], default="json")
    s.add_argument("--index")
    s.set_defaults(func=cmd_resolve)

    s = sub.add_parser("stats", help="corpus and publisher statistics")
    s.add_argument("--index", required=True)
    s.add_argument("--publishers", help="CSV with prefix,label columns")
    s.add_argument("--json", action="store_true")
    s.add_argument("--figures", help="directory for PNG figures")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("synth", help="write a synthetic dump")
    s.add_argument("--out", required=True)
    s.add_argument("--works", type=int, default=1000)
    s.add_argument("--files", type=int, default=4)
    s.add_argument("--refs", type=int, default=10)
    s.add_argument("--gzip", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
