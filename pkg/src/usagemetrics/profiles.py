"""Diachronous and synchronous download profiles.

Diachronous: each paper on its own clock (age in months since online
publication), summarised by per-age medians and percentiles over the papers
old enough to have reached that age.

Synchronous: a fixed calendar window, with downloads tallied by the age the
downloaded paper had at download time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import Access, Corpus, month_from_index, month_index


@dataclass(frozen=True)
class CumulativeCurve:
    paper_id: str
    access: Access
    values: np.ndarray  # int64, values[t] = downloads in ages 0..t

    @property
    def total(self) -> int:
        return int(self.values[-1])


@dataclass(frozen=True)
class CohortProfile:
    access: str
    median: np.ndarray
    p25: np.ndarray
    p75: np.ndarray
    support: np.ndarray
    median_monthly: np.ndarray  # per-age median of the monthly counts themselves

    @property
    def p50(self) -> np.ndarray:
        return self.median

    def __len__(self):
        return len(self.median)


@dataclass(frozen=True)
class Window:
    """Inclusive calendar month range."""

    start: tuple[int, int]
    end: tuple[int, int]

    def __post_init__(self):
        if month_index(*self.start) > month_index(*self.end):
            raise ValueError(f"window start {self.start} is after end {self.end}")

    @property
    def indices(self) -> range:
        return range(month_index(*self.start), month_index(*self.end) + 1)

    @classmethod
    def last_months(cls, corpus: Corpus, n: int = 3) -> "Window":
        end = corpus.end_index
        return cls(month_from_index(end - n + 1), month_from_index(end))

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Parse ``YYYY-MM:YYYY-MM`` (or a single ``YYYY-MM``)."""
        parts = text.split(":")
        if len(parts) not in (1, 2):
            raise ValueError(f"bad window {text!r}")
        months = []
        for part in parts:
            try:
                y, m = part.strip().split("-")
                months.append((int(y), int(m)))
            except ValueError:
                raise ValueError(f"bad window month {part!r} (expected YYYY-MM)") from None
        return cls(months[0], months[-1])

    def __str__(self):
        return f"{self.start[0]}-{self.start[1]:02d}:{self.end[0]}-{self.end[1]:02d}"


@dataclass(frozen=True)
class SynchronousDistribution:
    window: Window
    share: np.ndarray  # share[x] = fraction of window downloads to papers aged <= x
    downloads: np.ndarray  # raw per-age download counts


@dataclass(frozen=True)
class DensitySeries:
    window: Window
    ages: np.ndarray
    downloads: np.ndarray
    papers: np.ndarray

    @property
    def rho(self) -> np.ndarray:
        return self.downloads / self.papers

    def __len__(self):
        return len(self.ages)


def cumulative_curve(paper) -> CumulativeCurve:
    return CumulativeCurve(paper.paper_id, paper.access, np.cumsum(np.asarray(paper.monthly_downloads, dtype=np.int64)))


def cumulative_curves(corpus: Corpus, access_filter=None) -> list[CumulativeCurve]:
    papers = corpus.select(access_filter)
    if not papers:
        raise ValueError(f"no papers match access filter {access_filter!r}")
    return [cumulative_curve(p) for p in papers]


def _ragged_columns(rows):
    """Yield (age, values present at that age) over ragged sequences."""
    longest = max(len(r) for r in rows)
    for t in range(longest):
        yield t, np.array([r[t] for r in rows if len(r) > t])


def cohort_profile(curves, monthly=None, access: str = "ALL") -> CohortProfile:
    """Per-age median and quartiles of cumulative downloads.

    Each age uses only the curves long enough to reach it. Percentiles use
    linear interpolation between order statistics. `monthly` (the papers'
    raw monthly counts, aligned with `curves`) gives the per-age median
    monthly count; when omitted it is recovered from the curves.
    """
    if not curves:
        raise ValueError("cohort_profile needs at least one curve")
    values = [np.asarray(c.values if isinstance(c, CumulativeCurve) else c) for c in curves]
    if monthly is None:
        monthly = [np.diff(v, prepend=0) for v in values]
    n = max(len(v) for v in values)
    median = np.empty(n)
    p25 = np.empty(n)
    p75 = np.empty(n)
    support = np.empty(n, dtype=np.int64)
    for t, col in _ragged_columns(values):
        p25[t], median[t], p75[t] = np.percentile(col, [25, 50, 75])
        support[t] = len(col)
    med_monthly = np.empty(n)
    for t, col in _ragged_columns([np.asarray(m) for m in monthly]):
        med_monthly[t] = np.median(col)
    return CohortProfile(access, median, p25, p75, support, med_monthly)


def _age_tally(corpus: Corpus, window: Window, access_filter):
    first, last = window.indices[0], window.indices[-1]
    if first > corpus.end_index:
        raise ValueError(f"window {window} lies after the observation end")
    downloads: dict[int, int] = {}
    papers: dict[int, int] = {}
    for p in corpus.select(access_filter):
        for idx in range(max(first, p.pub_index), min(last, p.pub_index + p.age_span - 1) + 1):
            age = idx - p.pub_index
            downloads[age] = downloads.get(age, 0) + p.monthly_downloads[age]
            papers[age] = papers.get(age, 0) + 1
    return downloads, papers


def synchronous_distribution(corpus: Corpus, window: Window, access_filter=None) -> SynchronousDistribution:
    downloads, _ = _age_tally(corpus, window, access_filter)
    total = sum(downloads.values())
    if total == 0:
        raise ValueError(f"no downloads in window {window}")
    per_age = np.zeros(max(downloads) + 1, dtype=np.int64)
    for age, n in downloads.items():
        per_age[age] = n
    share = np.cumsum(per_age) / total
    return SynchronousDistribution(window, share, per_age)


def density_series(corpus: Corpus, window: Window, access_filter=None) -> DensitySeries:
    """Mean downloads per paper-month at each age within `window`.

    Ages with no paper alive in the window are omitted rather than zeroed.
    """
    downloads, papers = _age_tally(corpus, window, access_filter)
    if not papers:
        raise ValueError(f"no papers alive in window {window}")
    ages = np.array(sorted(papers), dtype=np.int64)
    return DensitySeries(
        window,
        ages,
        np.array([downloads[a] for a in ages], dtype=np.int64),
        np.array([papers[a] for a in ages], dtype=np.int64),
    )
