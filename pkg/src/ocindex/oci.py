"""Open Citation Identifiers.

An OCI is ``oci:`` followed by two numerals joined by a dash, one for the
citing and one for the cited entity. Each numeral is a supplier prefix
followed by the identifier of the entity, encoded two digits per character
through a fixed lookup table.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

OCI_SCHEME = "oci:"
DOI_LEAD = "10."

_DIGITS = re.compile(r"^[0-9]+$")


class OciError(ValueError):
    """Base class for identifier encoding and parsing failures."""


class MalformedDoi(OciError):
    pass


class UnmappedCharacter(OciError):
    def __init__(self, char: str, doi: str | None = None):
        self.char = char
        self.doi = doi
        where = f" in {doi!r}" if doi else ""
        super().__init__(f"character {char!r}{where} has no lookup code")


class UnknownSupplier(OciError):
    pass


class OddLengthBody(OciError):
    pass


class UnmappedCode(OciError):
    def __init__(self, code: str):
        self.code = code
        super().__init__(f"code {code!r} is not in the lookup table")


class MalformedOci(OciError):
    pass


class LookupTable:
    """Bidirectional character <-> two-digit code map."""

    def __init__(self, entries: Mapping[str, str]):
        codes: dict[str, str] = {}
        for char, code in entries.items():
            if len(char) != 1:
                raise ValueError(f"lookup key must be a single character: {char!r}")
            if len(code) != 2 or not code.isdigit():
                raise ValueError(f"lookup code must be two digits: {code!r}")
            if code in codes:
                raise ValueError(f"code {code} assigned to both {codes[code]!r} and {char!r}")
            codes[code] = char
        self.entries = dict(entries)
        self.reverse = codes

    @classmethod
    def from_csv(cls, path: str | Path) -> "LookupTable":
        with open(path, newline="", encoding="utf-8") as f:
            return cls._from_rows(csv.DictReader(f))

    @classmethod
    def _from_rows(cls, rows: Iterable[dict[str, str]]) -> "LookupTable":
        return cls({row["c"]: row["code"] for row in rows})

    def encode_char(self, char: str) -> str:
        try:
            return self.entries[char]
        except KeyError:
            raise UnmappedCharacter(char) from None

    def decode_code(self, code: str) -> str:
        try:
            return self.reverse[code]
        except KeyError:
            raise UnmappedCode(code) from None

    def __contains__(self, char: str) -> bool:
        return char in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SupplierPrefix:
    digits: str
    name: str
    id_scheme: str

    def __post_init__(self):
        if not _DIGITS.match(self.digits) or not self.digits.endswith("0"):
            raise ValueError(f"supplier prefix must be digits ending in 0: {self.digits!r}")

    @property
    def decodable(self) -> bool:
        return self.id_scheme == "doi"

    def __str__(self) -> str:
        return self.digits


class SupplierRegistry:
    """Prefix-free set of supplier prefixes."""

    def __init__(self, suppliers: Iterable[SupplierPrefix]):
        self._by_digits: dict[str, SupplierPrefix] = {}
        for s in suppliers:
            if s.digits in self._by_digits:
                raise ValueError(f"duplicate supplier prefix {s.digits}")
            self._by_digits[s.digits] = s
        for a in self._by_digits:
            for b in self._by_digits:
                if a != b and b.startswith(a):
                    raise ValueError(f"supplier prefix {a} is a prefix of {b}")

    @classmethod
    def from_csv(cls, path: str | Path) -> "SupplierRegistry":
        with open(path, newline="", encoding="utf-8") as f:
            return cls(
                SupplierPrefix(row["prefix"], row["name"], row["scheme"])
                for row in csv.DictReader(f)
            )

    def __getitem__(self, digits: str) -> SupplierPrefix:
        try:
            return self._by_digits[digits]
        except KeyError:
            raise UnknownSupplier(f"no supplier registered for prefix {digits!r}") from None

    def __iter__(self):
        return iter(self._by_digits.values())

    def __len__(self) -> int:
        return len(self._by_digits)

    def match(self, numeral: str) -> SupplierPrefix:
        """Return the supplier whose prefix starts ``numeral``.

        The registry is prefix-free, so at most one entry can match.
        """
        for digits, supplier in self._by_digits.items():
            if numeral.startswith(digits):
                return supplier
        raise UnknownSupplier(f"numeral {numeral!r} starts with no registered prefix")


@lru_cache(maxsize=1)
def default_table() -> LookupTable:
    with resources.files("ocindex.data").joinpath("lookup.csv").open(
        newline="", encoding="utf-8"
    ) as f:
        return LookupTable._from_rows(csv.DictReader(f))


@lru_cache(maxsize=1)
def default_registry() -> SupplierRegistry:
    with resources.files("ocindex.data").joinpath("suppliers.csv").open(
        newline="", encoding="utf-8"
    ) as f:
        return SupplierRegistry(
            SupplierPrefix(row["prefix"], row["name"], row["scheme"])
            for row in csv.DictReader(f)
        )


def crossref() -> SupplierPrefix:
    return default_registry()["020"]


def normalize_doi(doi: str) -> str:
    """Lowercase and trim; reject anything that is not ``10.`` + suffix."""
    if not isinstance(doi, str):
        raise MalformedDoi(f"DOI must be a string, got {type(doi).__name__}")
    norm = doi.strip().lower()
    if not norm.startswith(DOI_LEAD) or len(norm) == len(DOI_LEAD):
        raise MalformedDoi(f"not a DOI: {doi!r}")
    return norm


def encode_doi(
    doi: str,
    supplier: SupplierPrefix | str = "020",
    table: LookupTable | None = None,
) -> str:
    table = table or default_table()
    if isinstance(supplier, str):
        supplier = default_registry()[supplier]
    norm = normalize_doi(doi)
    parts = [supplier.digits]
    for char in norm[len(DOI_LEAD):]:
        try:
            parts.append(table.entries[char])
        except KeyError:
            raise UnmappedCharacter(char, norm) from None
    return "".join(parts)


def decode_numeral(
    numeral: str,
    registry: SupplierRegistry | None = None,
    table: LookupTable | None = None,
) -> tuple[SupplierPrefix, str]:
    """Split off the supplier prefix and decode the rest.

    Numerals of non-DOI suppliers (e.g. the OpenCitations Corpus) carry
    dataset-local identifiers, which come back verbatim.
    """
    registry = registry or default_registry()
    table = table or default_table()
    if not _DIGITS.match(numeral or ""):
        raise MalformedOci(f"numeral must be decimal digits: {numeral!r}")
    supplier = registry.match(numeral)
    body = numeral[len(supplier.digits):]
    if not supplier.decodable:
        return supplier, body
    if not body:
        raise MalformedDoi(f"numeral {numeral!r} has an empty identifier body")
    if len(body) % 2:
        raise OddLengthBody(f"identifier body of {numeral!r} has odd length {len(body)}")
    rev = table.reverse
    chars = []
    for i in range(0, len(body), 2):
        code = body[i:i + 2]
        try:
            chars.append(rev[code])
        except KeyError:
            raise UnmappedCode(code) from None
    return supplier, DOI_LEAD + "".join(chars)


@dataclass(frozen=True, order=True)
class Oci:
    citing_numeral: str
    cited_numeral: str

    def __post_init__(self):
        for side, value in (("citing", self.citing_numeral), ("cited", self.cited_numeral)):
            if not isinstance(value, str) or not _DIGITS.match(value):
                raise MalformedOci(f"{side} numeral must be non-empty decimal digits: {value!r}")

    def __str__(self) -> str:
        return format_oci(self, with_scheme=True)

    @property
    def bare(self) -> str:
        return format_oci(self, with_scheme=False)


def build_oci(
    citing_doi: str,
    cited_doi: str,
    supplier: SupplierPrefix | str = "020",
    table: LookupTable | None = None,
) -> Oci:
    numerals = []
    for role, doi in (("citing", citing_doi), ("cited", cited_doi)):
        try:
            numerals.append(encode_doi(doi, supplier, table))
        except OciError as exc:
            exc.role = role
            exc.args = (f"{role} DOI: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
    return Oci(*numerals)


def parse_oci(text: str) -> Oci:
    if not isinstance(text, str):
        raise MalformedOci(f"OCI must be a string, got {type(text).__name__}")
    body = text.strip()
    if body.lower().startswith(OCI_SCHEME):
        body = body[len(OCI_SCHEME):]
    pieces = body.split("-")
    if len(pieces) != 2:
        raise MalformedOci(f"OCI needs exactly one dash: {text!r}")
    citing, cited = pieces
    if not _DIGITS.match(citing) or not _DIGITS.match(cited):
        raise MalformedOci(f"OCI numerals must be non-empty digit strings: {text!r}")
    return Oci(citing, cited)


def format_oci(oci: Oci, with_scheme: bool = True) -> str:
    bare = f"{oci.citing_numeral}-{oci.cited_numeral}"
    return OCI_SCHEME + bare if with_scheme else bare
