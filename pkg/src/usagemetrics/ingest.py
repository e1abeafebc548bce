"""Loading and validating download and citation CSV files.

Downloads arrive in long format, one row per (paper, calendar month)::

    paper_id,access,pub_year,pub_month,year,month,downloads

Citations arrive as annual counts::

    paper_id,year,citations

Both loaders build an immutable :class:`Corpus`. Missing months inside a
paper's history and after its last row (up to the corpus observation end)
are zero-filled, so every paper is observed through the same final month.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

logger = logging.getLogger(__name__)

DOWNLOADS_HEADER = ("paper_id", "access", "pub_year", "pub_month", "year", "month", "downloads")
CITATIONS_HEADER = ("paper_id", "year", "citations")


class IngestError(ValueError):
    """Raised when an input file violates its schema."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class Access(str, enum.Enum):
    OA = "OA"
    NON_OA = "NON_OA"

    @classmethod
    def parse(cls, text: str) -> "Access":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown access class {text!r} (expected OA or NON_OA)") from None


def month_index(year: int, month: int) -> int:
    """Absolute month number, so that differences are ages in months."""
    return year * 12 + (month - 1)


def month_from_index(index: int) -> tuple[int, int]:
    return index // 12, index % 12 + 1


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    access: Access
    pub_year: int
    pub_month: int
    monthly_downloads: tuple[int, ...]

    def __post_init__(self):
        if not self.monthly_downloads:
            raise ValueError(f"paper {self.paper_id}: empty download history")
        if any(c < 0 for c in self.monthly_downloads):
            raise ValueError(f"paper {self.paper_id}: negative download count")
        if not 1 <= self.pub_month <= 12:
            raise ValueError(f"paper {self.paper_id}: pub_month {self.pub_month} out of range")

    @property
    def pub_index(self) -> int:
        return month_index(self.pub_year, self.pub_month)

    @property
    def age_span(self) -> int:
        """Number of observed months (age 0 through the last observed age)."""
        return len(self.monthly_downloads)

    @property
    def total_downloads(self) -> int:
        return sum(self.monthly_downloads)

    def downloads_at(self, index: int) -> int:
        """Downloads in absolute calendar month `index` (0 outside the history)."""
        age = index - self.pub_index
        if 0 <= age < len(self.monthly_downloads):
            return self.monthly_downloads[age]
        return 0

    def annual_downloads(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for age, count in enumerate(self.monthly_downloads):
            year, _ = month_from_index(self.pub_index + age)
            out[year] = out.get(year, 0) + count
        return out


@dataclass(frozen=True)
class CitationRecord:
    paper_id: str
    annual_citations: Mapping[int, int]

    def __post_init__(self):
        if any(c < 0 for c in self.annual_citations.values()):
            raise ValueError(f"paper {self.paper_id}: negative citation count")
        # freeze a sorted copy
        frozen = MappingProxyType(dict(sorted(self.annual_citations.items())))
        object.__setattr__(self, "annual_citations", frozen)

    def __eq__(self, other):
        if not isinstance(other, CitationRecord):
            return NotImplemented
        return self.paper_id == other.paper_id and dict(self.annual_citations) == dict(other.annual_citations)

    def __hash__(self):
        return hash((self.paper_id, tuple(self.annual_citations.items())))


@dataclass(frozen=True)
class Corpus:
    """Immutable collection of papers and (optionally) their citations.

    `papers` is sorted by paper_id. `citations` is ``None`` until a citation
    file has been attached; afterwards papers without a record are listed
    in :attr:`missing_citations`.
    """

    papers: tuple[PaperRecord, ...]
    observation_end: tuple[int, int]
    citations: Mapping[str, CitationRecord] | None = None
    _by_id: Mapping[str, PaperRecord] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        papers = tuple(sorted(self.papers, key=lambda p: p.paper_id))
        object.__setattr__(self, "papers", papers)
        by_id = {}
        for p in papers:
            if p.paper_id in by_id:
                raise ValueError(f"duplicate paper_id {p.paper_id!r}")
            by_id[p.paper_id] = p
        object.__setattr__(self, "_by_id", MappingProxyType(by_id))
        end = month_index(*self.observation_end)
        for p in papers:
            if p.pub_index + p.age_span - 1 > end:
                raise ValueError(f"paper {p.paper_id}: history extends past observation end")
        if self.citations is not None:
            object.__setattr__(self, "citations", MappingProxyType(dict(sorted(self.citations.items()))))

    def __len__(self):
        return len(self.papers)

    def __getitem__(self, paper_id: str) -> PaperRecord:
        return self._by_id[paper_id]

    @property
    def end_index(self) -> int:
        return month_index(*self.observation_end)

    @property
    def has_citations(self) -> bool:
        return self.citations is not None

    @property
    def missing_citations(self) -> tuple[str, ...]:
        """paper_ids with downloads but no citation record."""
        if self.citations is None:
            return tuple(p.paper_id for p in self.papers)
        return tuple(p.paper_id for p in self.papers if p.paper_id not in self.citations)

    def select(self, access: Access | str | None = None) -> tuple[PaperRecord, ...]:
        """Papers matching an access filter (None or "ALL" selects all)."""
        if access is None or access == "ALL":
            return self.papers
        access = Access.parse(access) if isinstance(access, str) else access
        return tuple(p for p in self.papers if p.access is access)

    def with_citations(self, citations: Mapping[str, CitationRecord]) -> "Corpus":
        return replace(self, citations=dict(citations), _by_id=None)


@dataclass(frozen=True)
class IngestConfig:
    delimiter: str = ","
    strict: bool = True


def _open_rows(path, delimiter, expected_header):
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path)
    fh = path.open(newline="", encoding="utf-8")
    reader = csv.reader(fh, delimiter=delimiter)
    header = next(reader, None)
    if header is None:
        fh.close()
        return path, fh, iter(())
    header = tuple(h.strip() for h in header)
    if header != expected_header:
        fh.close()
        raise IngestError(
            f"bad header {','.join(header)!r}, expected {','.join(expected_header)!r}", path, 1
        )
    return path, fh, reader


def _int_field(value: str, name: str) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise ValueError(f"{name} is not an integer: {value!r}") from None


def load_downloads(path, format_config: IngestConfig | None = None) -> Corpus:
    """Read a long-format downloads CSV into a :class:`Corpus`.

    In strict mode (default) the first bad row raises :class:`IngestError`
    carrying the line number. In lenient mode malformed rows are logged and
    skipped; duplicates and inconsistent metadata still raise.
    """
    cfg = format_config or IngestConfig()
    path, fh, reader = _open_rows(path, cfg.delimiter, DOWNLOADS_HEADER)
    meta: dict[str, tuple[Access, int, int]] = {}
    counts: dict[str, dict[int, int]] = {}
    last_index = None
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                if len(row) != len(DOWNLOADS_HEADER):
                    raise ValueError(f"expected {len(DOWNLOADS_HEADER)} fields, got {len(row)}")
                pid = row[0].strip()
                if not pid:
                    raise ValueError("empty paper_id")
                access = Access.parse(row[1])
                pub_year = _int_field(row[2], "pub_year")
                pub_month = _int_field(row[3], "pub_month")
                year = _int_field(row[4], "year")
                month = _int_field(row[5], "month")
                n = _int_field(row[6], "downloads")
                if not 1 <= pub_month <= 12 or not 1 <= month <= 12:
                    raise ValueError("month out of range 1-12")
                if n < 0:
                    raise ValueError(f"negative download count {n}")
                idx = month_index(year, month)
                if idx < month_index(pub_year, pub_month):
                    raise ValueError("download month precedes publication month")
            except ValueError as exc:
                if cfg.strict:
                    raise IngestError(str(exc), path, lineno) from None
                logger.warning("%s:%d: skipping row: %s", path, lineno, exc)
                continue
            if pid in meta and meta[pid] != (access, pub_year, pub_month):
                raise IngestError(f"inconsistent access/publication date for paper {pid}", path, lineno)
            meta[pid] = (access, pub_year, pub_month)
            series = counts.setdefault(pid, {})
            if idx in series:
                raise IngestError(f"duplicate row for paper {pid} at {year}-{month:02d}", path, lineno)
            series[idx] = n
            last_index = idx if last_index is None else max(last_index, idx)

    if last_index is None:
        raise IngestError("no download rows", path)
    papers = []
    for pid, (access, pub_year, pub_month) in meta.items():
        start = month_index(pub_year, pub_month)
        series = counts[pid]
        monthly = tuple(series.get(i, 0) for i in range(start, last_index + 1))
        papers.append(PaperRecord(pid, access, pub_year, pub_month, monthly))
    return Corpus(tuple(papers), month_from_index(last_index))


def read_citations(path, format_config: IngestConfig | None = None) -> dict[str, CitationRecord]:
    cfg = format_config or IngestConfig()
    path, fh, reader = _open_rows(path, cfg.delimiter, CITATIONS_HEADER)
    table: dict[str, dict[int, int]] = {}
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                if len(row) != len(CITATIONS_HEADER):
                    raise ValueError(f"expected {len(CITATIONS_HEADER)} fields, got {len(row)}")
                pid = row[0].strip()
                if not pid:
                    raise ValueError("empty paper_id")
                year = _int_field(row[1], "year")
                n = _int_field(row[2], "citations")
                if n < 0:
                    raise ValueError(f"negative citation count {n}")
            except ValueError as exc:
                if cfg.strict:
                    raise IngestError(str(exc), path, lineno) from None
                logger.warning("%s:%d: skipping row: %s", path, lineno, exc)
                continue
            years = table.setdefault(pid, {})
            if year in years:
                raise IngestError(f"duplicate citation row for paper {pid}, year {year}", path, lineno)
            years[year] = n
    return {pid: CitationRecord(pid, years) for pid, years in table.items()}


def load_citations(path, corpus: Corpus, format_config: IngestConfig | None = None) -> Corpus:
    """Attach annual citations to `corpus`.

    Citation records for papers absent from the downloads are dropped with
    a warning; papers without a record stay in the corpus and are reported
    by :attr:`Corpus.missing_citations`.
    """
    records = read_citations(path, format_config)
    known = {p.paper_id for p in corpus.papers}
    orphans = sorted(set(records) - known)
    if orphans:
        logger.warning("%d citation records have no download history (e.g. %s)", len(orphans), orphans[0])
    out = corpus.with_citations({pid: rec for pid, rec in records.items() if pid in known})
    missing = out.missing_citations
    if missing:
        logger.info("%d papers have no citation record", len(missing))
    return out


def download_rows(corpus: Corpus) -> Iterable[tuple]:
    for p in corpus.papers:
        for age, n in enumerate(p.monthly_downloads):
            year, month = month_from_index(p.pub_index + age)
            yield (p.paper_id, p.access.value, p.pub_year, p.pub_month, year, month, n)


def write_downloads(corpus: Corpus, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DOWNLOADS_HEADER)
        writer.writerows(download_rows(corpus))


def write_citations(corpus: Corpus, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CITATIONS_HEADER)
        for pid, rec in (corpus.citations or {}).items():
            for year, n in rec.annual_citations.items():
                writer.writerow((pid, year, n))
