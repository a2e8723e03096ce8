"""Deterministic synthetic Crossref-style dumps for tests and benchmarks.

Dumps are written incrementally, one item at a time, so generating a
million works needs no more memory than generating ten.
"""

from __future__ import annotations

import gzip
import json
import random
from dataclasses import dataclass
from pathlib import Path

PUBLISHER_PREFIXES = {
    "10.1007": "Springer Nature",
    "10.1002": "Wiley",
    "10.1080": "Informa UK Limited",
    "10.1109": "Institute of Electrical and Electronics Engineers (IEEE)",
    "10.1177": "SAGE Publications",
    "10.1103": "American Physical Society (APS)",
    "10.1063": "AIP Publishing",
    "10.1097": "Ovid Technologies (Wolters Kluwer Health)",
    "10.1093": "Oxford University Press (OUP)",
    "10.1016": "Elsevier",
}


def issn_with_check(seven: str) -> str:
    total = sum(int(c) * w for c, w in zip(seven, range(8, 1, -1)))
    check = (11 - total % 11) % 11
    return f"{seven[:4]}-{seven[4:]}{'X' if check == 10 else check}"


def orcid_with_check(fifteen: str) -> str:
    total = 0
    for c in fifteen:
        total = (total + int(c)) * 2
    check = (12 - total % 11) % 11
    digits = fifteen + ("X" if check == 10 else str(check))
    return "-".join(digits[i:i + 4] for i in range(0, 16, 4))


@dataclass
class SynthConfig:
    works: int = 1000
    files: int = 4
    refs_per_work: int = 10
    journals: int = 40
    authors: int = 400
    external_dois: int = 500
    p_missing_date: float = 0.1
    p_year_only: float = 0.2
    p_month_only: float = 0.2
    p_doiless_ref: float = 0.1
    p_duplicate_ref: float = 0.05
    p_external_ref: float = 0.25
    p_ref_year: float = 0.7
    p_orcid: float = 0.5
    p_uppercase: float = 0.1
    p_bad_issn: float = 0.02
    p_item_without_doi: float = 0.01
    gzip: bool = False
    seed: int = 0


_SUFFIX_PUNCT = ["-", ".", "_", "(", ")", ";", ":"]


def _doi(rng: random.Random, prefix: str, i: int, tag: str) -> str:
    p = rng.choice(_SUFFIX_PUNCT)
    return f"{prefix}/{tag}{p}{i:x}{rng.choice('abcdefghij')}"


def _date(rng: random.Random, cfg: SynthConfig) -> list[int] | None:
    r = rng.random()
    if r < cfg.p_missing_date:
        return None
    year = rng.randint(1990, 2018)
    r = rng.random()
    if r < cfg.p_year_only:
        return [year]
    month = rng.randint(1, 12)
    if r < cfg.p_year_only + cfg.p_month_only:
        return [year, month]
    # bias toward month ends and leap days so calendar borrowing gets exercised
    last = [31, 29 if year % 4 == 0 and (year % 100 or year % 400 == 0) else 28,
            31, 30, 31, 30, 31, 31, 30, 31, 30, 31][month - 1]
    day = rng.choice([1, last, rng.randint(1, last)])
    return [year, month, day]


def generate_dump(directory: str | Path, cfg: SynthConfig | None = None) -> list[Path]:
    cfg = cfg or SynthConfig()
    rng = random.Random(cfg.seed)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    prefixes = list(PUBLISHER_PREFIXES)

    journals = []
    for _ in range(cfg.journals):
        n = rng.randint(1, 2)
        journals.append([issn_with_check(f"{rng.randrange(10**7):07d}") for _ in range(n)])
    authors = [orcid_with_check(f"{rng.randrange(10**15):015d}") for _ in range(cfg.authors)]
    work_dois = [_doi(rng, rng.choice(prefixes), i, "w") for i in range(cfg.works)]
    external = [_doi(rng, rng.choice(prefixes), i, "x") for i in range(cfg.external_dois)]

    per_file = -(-cfg.works // cfg.files)
    paths = []
    for f in range(cfg.files):
        name = f"part-{f:04d}.json" + (".gz" if cfg.gzip else "")
        path = directory / name
        opener = gzip.open if cfg.gzip else open
        with opener(path, "wt", encoding="utf-8") as out:
            out.write('{"items": [')
            first = True
            for i in range(f * per_file, min((f + 1) * per_file, cfg.works)):
                item = _work(rng, cfg, i, work_dois, external, journals, authors)
                if not first:
                    out.write(",\n")
                out.write(json.dumps(item))
                first = False
            out.write("]}\n")
        paths.append(path)
    return paths


def _work(rng, cfg, i, work_dois, external, journals, authors) -> dict:
    doi = work_dois[i]
    item: dict = {"type": rng.choice(["journal-article", "journal-article", "book-chapter"])}
    if rng.random() >= cfg.p_item_without_doi:
        item["DOI"] = doi.upper() if rng.random() < cfg.p_uppercase else doi
    date = _date(rng, cfg)
    if date is not None:
        item["issued"] = {"date-parts": [date]}
    issns = list(rng.choice(journals))
    if rng.random() < cfg.p_bad_issn:
        issns.append("1234-5678")
    item["ISSN"] = issns
    people = []
    for _ in range(rng.randint(1, 3)):
        person = {"family": f"F{rng.randrange(1000)}", "given": "G"}
        if rng.random() < cfg.p_orcid:
            person["ORCID"] = "http://orcid.org/" + rng.choice(authors)
        people.append(person)
    item["author"] = people

    refs = []
    for _ in range(rng.randint(0, 2 * cfg.refs_per_work)):
        r = rng.random()
        if r < cfg.p_doiless_ref:
            refs.append({"key": f"ref{len(refs)}", "unstructured": "Some book (1999)"})
            continue
        if refs and rng.random() < cfg.p_duplicate_ref:
            prior = [x for x in refs if "DOI" in x]
            if prior:
                refs.append(dict(rng.choice(prior)))
                continue
        if rng.random() < cfg.p_external_ref:
            target = rng.choice(external)
        else:
            target = rng.choice(work_dois)
        ref = {"key": f"ref{len(refs)}", "DOI": target, "doi-asserted-by": "crossref"}
        if rng.random() < cfg.p_ref_year:
            ref["year"] = str(rng.randint(1985, 2018))
        refs.append(ref)
    if refs:
        item["reference"] = refs
    return item
