"""Downloads versus citations: Pearson correlation and zig-zag clustering.

Each paper gives an annual trajectory of cumulative (downloads, citations)
points. The direction of each yearly segment is measured as an angle to the
downloads axis; the spread of those angles (max - min, in degrees) sorts
papers into Slow, Medium and High zig-zag clusters.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import Corpus

MIN_GROUP = 3
ANGLE_MODES = ("normalized", "raw")


class CorrelationDataError(ValueError):
    """Raised when correlation analysis lacks the data it needs."""


class Cluster(str, enum.Enum):
    SLOW = "Slow"
    MEDIUM = "Medium"
    HIGH = "High"


UNCLUSTERABLE = "Unclusterable"


@dataclass(frozen=True)
class ZigZagConfig:
    delta_c1: float = 0.3
    delta_c2: float = 8.0
    angle_mode: str = "normalized"
    min_years: int = 3

    def __post_init__(self):
        if not 0 <= self.delta_c1 < self.delta_c2:
            raise ValueError("need 0 <= delta_c1 < delta_c2")
        if self.angle_mode not in ANGLE_MODES:
            raise ValueError(f"angle_mode must be one of {ANGLE_MODES}")
        if self.min_years < 2:
            raise ValueError("min_years must be at least 2")


@dataclass(frozen=True)
class AnnualTrajectory:
    paper_id: str
    pub_year: int
    years: tuple[int, ...]
    d: tuple[int, ...]
    c: tuple[int, ...]
    access: str = ""

    @property
    def points(self) -> list[tuple[int, int]]:
        return list(zip(self.d, self.c))

    def __len__(self):
        return len(self.d)


@dataclass(frozen=True)
class ZigZagStats:
    angles: tuple[float, ...]
    delta: float | None
    cluster: Cluster | None
    reason: str = ""

    @property
    def clusterable(self) -> bool:
        return self.cluster is not None


def pearson(xs, ys) -> float | None:
    """Product-moment correlation; None when undefined (zero variance)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("pearson needs equal-length inputs")
    if len(x) < 2:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def build_trajectories(corpus: Corpus, window: tuple[int, int], access_filter=None):
    """Annual cumulative trajectories for papers published inside `window`.

    Returns ``(trajectories, excluded_ids)``; papers without a citation
    record are excluded.
    """
    first, last = window
    if first > last:
        raise ValueError(f"empty year window {window}")
    if not corpus.citations:
        raise CorrelationDataError("no citation records loaded; correlation analysis impossible")
    trajectories, excluded = [], []
    for p in corpus.select(access_filter):
        if not first <= p.pub_year <= last:
            continue
        rec = corpus.citations.get(p.paper_id)
        if rec is None:
            excluded.append(p.paper_id)
            continue
        annual_d = p.annual_downloads()
        years = tuple(range(p.pub_year, last + 1))
        d = tuple(np.cumsum([annual_d.get(y, 0) for y in years]).tolist())
        prior = sum(n for y, n in rec.annual_citations.items() if y < p.pub_year)
        c = tuple((prior + np.cumsum([rec.annual_citations.get(y, 0) for y in years])).tolist())
        trajectories.append(AnnualTrajectory(p.paper_id, p.pub_year, years, d, c, p.access.value))
    if not trajectories and excluded:
        raise CorrelationDataError("none of the papers in the window has a citation record")
    return trajectories, excluded


def segment_angles(d, c, mode: str = "normalized") -> list[float | None]:
    """Angle (degrees) of each consecutive segment against the downloads axis.

    None marks a segment with no movement on either axis. In normalized mode
    each axis is divided by its final value first.
    """
    d = np.asarray(d, dtype=float)
    c = np.asarray(c, dtype=float)
    if mode == "normalized":
        if d[-1] > 0:
            d = d / d[-1]
        if c[-1] > 0:
            c = c / c[-1]
    elif mode != "raw":
        raise ValueError(f"unknown angle mode {mode!r}")
    out = []
    for dd, dc in zip(np.diff(d), np.diff(c)):
        if dd == 0 and dc == 0:
            out.append(None)
        else:
            out.append(math.degrees(math.atan2(dc, dd)))
    return out


def zigzag_stats(trajectory: AnnualTrajectory, config: ZigZagConfig | None = None) -> ZigZagStats:
    cfg = config or ZigZagConfig()
    if len(trajectory) < cfg.min_years:
        return ZigZagStats((), None, None, "short_history")
    angles = tuple(a for a in segment_angles(trajectory.d, trajectory.c, cfg.angle_mode) if a is not None)
    if len(angles) < 2:
        return ZigZagStats(angles, None, None, "too_few_angles")
    delta = max(angles) - min(angles)
    if delta <= cfg.delta_c1:
        cluster = Cluster.SLOW
    elif delta > cfg.delta_c2:
        cluster = Cluster.HIGH
    else:
        cluster = Cluster.MEDIUM
    return ZigZagStats(angles, delta, cluster)


@dataclass
class GroupCorrelation:
    n: int
    pcc: float | None
    flag: str = ""

    def to_dict(self):
        return {"n": self.n, "pcc": self.pcc, "flag": self.flag}


def group_pcc(xs, ys) -> GroupCorrelation:
    n = len(xs)
    if n < MIN_GROUP:
        return GroupCorrelation(n, None, "insufficient")
    r = pearson(xs, ys)
    return GroupCorrelation(n, r, "" if r is not None else "zero_variance")


@dataclass
class MembershipRow:
    paper_id: str
    pub_year: int
    delta_degrees: float | None
    cluster: str
    final_d: int
    final_c: int
    access: str = ""


@dataclass
class CorrelationReport:
    window: tuple[int, int]
    citation_shift: int
    overall: GroupCorrelation
    by_access: dict = field(default_factory=dict)
    by_pub_year: dict = field(default_factory=dict)
    by_cluster: dict = field(default_factory=dict)
    cluster_sizes: dict = field(default_factory=dict)
    excluded_no_citations: int = 0
    config: ZigZagConfig = field(default_factory=ZigZagConfig)
    members: list = field(default_factory=list)

    @property
    def overall_pcc(self):
        return self.overall.pcc

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "citation_shift": self.citation_shift,
            "overall_pcc": self.overall.pcc,
            "overall": self.overall.to_dict(),
            "pcc_by_access": {k: v.to_dict() for k, v in self.by_access.items()},
            "pcc_by_pub_year": {str(k): v.to_dict() for k, v in self.by_pub_year.items()},
            "pcc_by_cluster": {k: v.to_dict() for k, v in self.by_cluster.items()},
            "cluster_sizes": dict(self.cluster_sizes),
            "excluded_no_citations": self.excluded_no_citations,
            "zigzag": {
                "delta_c1": self.config.delta_c1,
                "delta_c2": self.config.delta_c2,
                "angle_mode": self.config.angle_mode,
                "min_years": self.config.min_years,
            },
        }


def cluster_report(corpus: Corpus, window: tuple[int, int], config: ZigZagConfig | None = None,
                   citation_shift: int = 0, access_filter=None) -> CorrelationReport:
    """Cluster papers by zig-zag spread and correlate final d with final c.

    With ``citation_shift=k`` the final citation count is taken k years after
    the window end (downloads still end at the window end).
    """
    cfg = config or ZigZagConfig()
    if citation_shift < 0:
        raise ValueError("citation_shift must be non-negative")
    trajectories, excluded = build_trajectories(corpus, window, access_filter)

    members = []
    for tr in trajectories:
        final_c = tr.c[-1]
        if citation_shift:
            rec = corpus.citations[tr.paper_id]
            final_c += sum(rec.annual_citations.get(window[1] + k, 0) for k in range(1, citation_shift + 1))
        zz = zigzag_stats(tr, cfg)
        members.append(MembershipRow(
            tr.paper_id, tr.pub_year, zz.delta,
            zz.cluster.value if zz.cluster is not None else UNCLUSTERABLE,
            int(tr.d[-1]), int(final_c), tr.access,
        ))

    def pcc_of(rows):
        return group_pcc([m.final_d for m in rows], [m.final_c for m in rows])

    report = CorrelationReport(window, citation_shift, pcc_of(members), excluded_no_citations=len(excluded),
                               config=cfg, members=members)
    for access in sorted({m.access for m in members}):
        report.by_access[access] = pcc_of([m for m in members if m.access == access])
    for year in sorted({m.pub_year for m in members}):
        report.by_pub_year[year] = pcc_of([m for m in members if m.pub_year == year])
    for name in [c.value for c in Cluster] + [UNCLUSTERABLE]:
        group = [m for m in members if m.cluster == name]
        report.cluster_sizes[name] = len(group)
        if name != UNCLUSTERABLE:
            report.by_cluster[name] = pcc_of(group)
    return report


MEMBERSHIP_HEADER = ("paper_id", "pub_year", "delta_degrees", "cluster", "final_d", "final_c")
