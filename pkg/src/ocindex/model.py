"""Citation-as-entity data model: partial dates, timespans and records."""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import IntEnum
from typing import Iterable, Sequence
from urllib.parse import urlsplit

from .oci import Oci


class InvalidDate(ValueError):
    pass


class MalformedDuration(ValueError):
    pass


class Precision(IntEnum):
    YEAR = 1
    MONTH = 2
    DAY = 3


@dataclass(frozen=True)
class PartialDate:
    """A publication date known to year, month or day precision."""

    year: int
    month: int | None = None
    day: int | None = None

    def __post_init__(self):
        if not isinstance(self.year, int) or not 1 <= self.year <= 9999:
            raise InvalidDate(f"year out of range: {self.year!r}")
        if self.day is not None and self.month is None:
            raise InvalidDate("day given without month")
        if self.month is not None and not 1 <= self.month <= 12:
            raise InvalidDate(f"month out of range: {self.month!r}")
        if self.day is not None:
            last = calendar.monthrange(self.year, self.month)[1]
            if not 1 <= self.day <= last:
                raise InvalidDate(f"day out of range: {self.year}-{self.month}-{self.day}")

    @property
    def precision(self) -> Precision:
        if self.day is not None:
            return Precision.DAY
        if self.month is not None:
            return Precision.MONTH
        return Precision.YEAR

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (self.year, self.month or 0, self.day or 0)

    def truncate(self, precision: Precision) -> "PartialDate":
        if precision >= self.precision:
            return self
        if precision == Precision.MONTH:
            return PartialDate(self.year, self.month)
        return PartialDate(self.year)

    def isoformat(self) -> str:
        text = f"{self.year:04d}"
        if self.month is not None:
            text += f"-{self.month:02d}"
        if self.day is not None:
            text += f"-{self.day:02d}"
        return text

    __str__ = isoformat

    def to_date(self) -> date:
        if self.precision != Precision.DAY:
            raise InvalidDate(f"{self} is not a full date")
        return date(self.year, self.month, self.day)


_ISO_DATE = re.compile(r"^(\d{4})(?:-(\d{1,2})(?:-(\d{1,2}))?)?")


def parse_partial_date(value) -> PartialDate:
    """Build a PartialDate from Crossref ``date-parts`` or an ISO prefix string.

    Parts after the first invalid one (month 0, day 0, day 31 in April...)
    are dropped, so ``[2018, 0]`` yields year precision. The year itself
    must be valid.
    """
    if isinstance(value, PartialDate):
        return value
    if isinstance(value, str):
        m = _ISO_DATE.match(value.strip())
        if not m:
            raise InvalidDate(f"not an ISO date: {value!r}")
        parts: list = [int(g) for g in m.groups() if g is not None]
    elif isinstance(value, Sequence) and not isinstance(value, (bytes, bytearray)):
        parts = list(value)
    else:
        raise InvalidDate(f"unsupported date input: {value!r}")
    if not 1 <= len(parts) <= 3:
        raise InvalidDate(f"expected 1-3 date parts, got {len(parts)}")
    try:
        nums = [int(p) for p in parts]
    except (TypeError, ValueError):
        # Crossref occasionally ships null/str parts; keep the valid leading run.
        nums = []
        for p in parts:
            try:
                nums.append(int(p))
            except (TypeError, ValueError):
                break
    if not nums:
        raise InvalidDate(f"no valid year in {value!r}")
    year = nums[0]
    result = PartialDate(year)
    if len(nums) > 1:
        try:
            result = PartialDate(year, nums[1])
        except InvalidDate:
            return result
    if len(nums) > 2:
        try:
            result = PartialDate(year, nums[1], nums[2])
        except InvalidDate:
            pass
    return result


@dataclass(frozen=True)
class Timespan:
    """Signed calendar interval.

    ``precision`` records how the interval was computed; it is not carried by
    the ISO text form and does not take part in equality.
    """

    negative: bool = False
    years: int = 0
    months: int = 0
    days: int = 0
    precision: Precision = field(default=Precision.DAY, compare=False)

    def __post_init__(self):
        if min(self.years, self.months, self.days) < 0:
            raise MalformedDuration("timespan components must be non-negative")
        if self.months > 11:
            raise MalformedDuration(f"months must be 0-11, got {self.months}")
        if self.precision < Precision.DAY and self.days:
            raise MalformedDuration("days set on a coarser-than-day timespan")
        if self.precision < Precision.MONTH and self.months:
            raise MalformedDuration("months set on a year-precision timespan")
        if self.is_zero and self.negative:
            object.__setattr__(self, "negative", False)

    @property
    def is_zero(self) -> bool:
        return not (self.years or self.months or self.days)

    def __neg__(self) -> "Timespan":
        return Timespan(not self.negative, self.years, self.months, self.days, self.precision)

    def __str__(self) -> str:
        return format_duration(self)


def compute_timespan(citing: PartialDate, cited: PartialDate) -> Timespan:
    """Signed interval from ``cited`` to ``citing`` at their common precision.

    The earlier day-of-month is clamped to the length of the month it is
    compared against. When days have to be borrowed, the borrowed month is
    the one preceding the later date's month.
    """
    precision = min(citing.precision, cited.precision)
    a = citing.truncate(precision)
    b = cited.truncate(precision)
    negative = a.sort_key < b.sort_key
    later, earlier = (b, a) if negative else (a, b)

    if precision == Precision.YEAR:
        return Timespan(negative, later.year - earlier.year, precision=precision)

    months = (later.year - earlier.year) * 12 + (later.month - earlier.month)
    days = 0
    if precision == Precision.DAY:
        this_len = calendar.monthrange(later.year, later.month)[1]
        if later.day >= min(earlier.day, this_len):
            days = later.day - min(earlier.day, this_len)
        else:
            months -= 1
            py, pm = (later.year, later.month - 1) if later.month > 1 else (later.year - 1, 12)
            prev_len = calendar.monthrange(py, pm)[1]
            days = later.day + prev_len - min(earlier.day, prev_len)
    return Timespan(negative, months // 12, months % 12, days, precision)


_DURATION = re.compile(r"^(-)?P(?:(\d+)Y)?(?:(\d+)M)?(?:(\d+)D)?$")


def format_duration(t: Timespan) -> str:
    if t.is_zero:
        return "P0Y"
    text = "-P" if t.negative else "P"
    if t.years:
        text += f"{t.years}Y"
    if t.months:
        text += f"{t.months}M"
    if t.days:
        text += f"{t.days}D"
    return text


def parse_duration(text: str) -> Timespan:
    m = _DURATION.match(text.strip()) if isinstance(text, str) else None
    if not m or m.groups()[1:] == (None, None, None):
        raise MalformedDuration(f"not a Y/M/D ISO-8601 duration: {text!r}")
    sign, y, mo, d = m.groups()
    years, months, days = int(y or 0), int(mo or 0), int(d or 0)
    if months > 11:
        raise MalformedDuration(f"months must be 0-11 in canonical form: {text!r}")
    if d is not None:
        precision = Precision.DAY
    elif mo is not None:
        precision = Precision.MONTH
    else:
        precision = Precision.YEAR
    return Timespan(bool(sign), years, months, days, precision)


_ISSN = re.compile(r"^(\d{4})-?(\d{3}[\dX])$")
_ORCID = re.compile(r"(\d{4})-?(\d{4})-?(\d{4})-?(\d{3}[\dX])$")


def normalize_issn(value: str) -> str | None:
    """Return ``NNNN-NNNC`` when the check digit is right, else None."""
    m = _ISSN.match(value.strip().upper()) if isinstance(value, str) else None
    if not m:
        return None
    digits = m.group(1) + m.group(2)
    total = sum(int(c) * w for c, w in zip(digits[:7], range(8, 1, -1)))
    check = (11 - total % 11) % 11
    if digits[7] != ("X" if check == 10 else str(check)):
        return None
    return f"{m.group(1)}-{m.group(2)}"


def normalize_orcid(value: str) -> str | None:
    """Return the bare 19-character ORCID (URL prefix stripped) or None."""
    if not isinstance(value, str):
        return None
    m = _ORCID.search(value.strip().upper())
    if not m:
        return None
    digits = "".join(m.groups())
    total = 0
    for c in digits[:-1]:
        total = (total + int(c)) * 2
    check = (12 - total % 11) % 11
    if digits[-1] != ("X" if check == 10 else str(check)):
        return None
    return "-".join(m.groups())


@dataclass(frozen=True)
class EntityAux:
    doi: str
    pub_date: PartialDate | None = None
    issns: frozenset[str] = frozenset()
    orcids: frozenset[str] = frozenset()
    pub_type: str | None = None


@dataclass(frozen=True)
class CitationRecord:
    oci: Oci
    citing: str
    cited: str
    creation: PartialDate | None = None
    timespan: Timespan | None = None
    journal_sc: bool = False
    author_sc: bool = False

    @property
    def is_self_reference(self) -> bool:
        return self.citing == self.cited


def _utc_seconds(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return _utc_seconds(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return _utc_seconds(datetime.fromisoformat(text))


@dataclass(frozen=True)
class ProvenanceRecord:
    oci: Oci
    agent: str
    source: str
    created_at: datetime

    def __post_init__(self):
        parts = urlsplit(self.source)
        if not parts.scheme or not parts.netloc:
            raise ValueError(f"provenance source must be an absolute URL: {self.source!r}")
        object.__setattr__(self, "created_at", _utc_seconds(self.created_at))


def intersects(a: Iterable[str], b: Iterable[str]) -> bool:
    return not set(a).isdisjoint(b)
