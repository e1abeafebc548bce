"""Per-paper labels along three axes: burstiness, overall attractiveness, ageing.

Burstiness compares the spread of a paper's monthly downloads with the
spread of the cohort's median monthly downloads over the same ages::

    delta_i = |std(paper months 0..T-1) - std(cohort median months 0..T-1)|

and flags the paper when delta_i exceeds `burst_ratio_threshold` times the
cohort mean of delta. Attractiveness and ageing are assigned to non-bursty
papers only.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import Access, Corpus, PaperRecord
from .profiles import CohortProfile, cohort_profile, cumulative_curve


class Burstiness(str, enum.Enum):
    NON_BURSTY = "NonBursty"
    BURSTY_EARLY = "BurstyEarly"
    SLEEPING_BEAUTY = "SleepingBeauty"


class Attractiveness(str, enum.Enum):
    TYPICAL = "Typical"
    MORE = "MoreAttractive"
    LESS = "LessAttractive"
    CROSSING = "Crossing"


class Ageing(str, enum.Enum):
    USUAL = "Usual"
    FLASH_IN_PAN = "FlashInPan"
    DELAYED = "Delayed"


class ExclusionReason(str, enum.Enum):
    SHORT_HISTORY = "short_history"
    ZERO_DOWNLOADS = "zero_downloads"
    SHORT_HISTORY_ZERO_DOWNLOADS = "short_history_zero_downloads"


AGEING_MODES = ("lifetime", "cohort")


@dataclass(frozen=True)
class ClassifyConfig:
    rmsd_critical_non_oa: float = 66.0
    rmsd_critical_oa: float = 105.0
    burst_ratio_threshold: float = 5.0
    sleeping_beauty_min_month: int = 6
    halflife_low_fraction: float = 0.25
    halflife_high_fraction: float = 0.50
    ageing_mode: str = "lifetime"

    def __post_init__(self):
        for name in ("rmsd_critical_non_oa", "rmsd_critical_oa", "burst_ratio_threshold", "sleeping_beauty_min_month"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.halflife_low_fraction < self.halflife_high_fraction < 1:
            raise ValueError("need 0 < halflife_low_fraction < halflife_high_fraction < 1")
        if self.ageing_mode not in AGEING_MODES:
            raise ValueError(f"ageing_mode must be one of {AGEING_MODES}")

    def rmsd_critical(self, access) -> float:
        return self.rmsd_critical_oa if Access(access) is Access.OA else self.rmsd_critical_non_oa


@dataclass(frozen=True)
class BurstStats:
    sigma_i: float
    sigma_ref: float
    delta: float
    ratio: float
    burst_month: int | None = None


@dataclass(frozen=True)
class PaperLabels:
    paper_id: str
    access: Access
    burstiness: Burstiness
    attractiveness: Attractiveness | None
    ageing: Ageing | None
    rmsd: float
    half_life: int | None
    delta_ratio: float | None
    burst_month: int | None = None


def burst_delta(monthly, median_monthly) -> tuple[float, float, float]:
    """(sigma_i, sigma_ref, delta) over the paper's full observed history."""
    x = np.asarray(monthly, dtype=float)
    t = len(x)
    if t < 2:
        raise ValueError("burst statistics need at least 2 months of history")
    sigma_i = float(np.std(x))
    sigma_ref = float(np.std(np.asarray(median_monthly, dtype=float)[:t]))
    return sigma_i, sigma_ref, abs(sigma_i - sigma_ref)


def burst_stats(paper, cohort_profile: CohortProfile, cohort_mean_delta: float, config: ClassifyConfig | None = None) -> BurstStats:
    """Burst statistic of one paper against its cohort.

    `paper` is a :class:`PaperRecord` or a plain monthly count sequence.
    The burst month (age of the largest excess over the cohort median
    monthly count) is only reported when the ratio exceeds the threshold.
    """
    cfg = config or ClassifyConfig()
    monthly = np.asarray(paper.monthly_downloads if isinstance(paper, PaperRecord) else paper, dtype=float)
    sigma_i, sigma_ref, delta = burst_delta(monthly, cohort_profile.median_monthly)
    if cohort_mean_delta > 0:
        ratio = delta / cohort_mean_delta
    else:
        ratio = 0.0 if delta == 0 else math.inf
    month = None
    if ratio > cfg.burst_ratio_threshold:
        excess = monthly - cohort_profile.median_monthly[: len(monthly)]
        month = int(np.argmax(excess))
    return BurstStats(sigma_i, sigma_ref, delta, ratio, month)


def classify_burstiness(stats: BurstStats, config: ClassifyConfig | None = None) -> Burstiness:
    cfg = config or ClassifyConfig()
    if stats.ratio <= cfg.burst_ratio_threshold:
        return Burstiness.NON_BURSTY
    if stats.burst_month is not None and stats.burst_month > cfg.sleeping_beauty_min_month:
        return Burstiness.SLEEPING_BEAUTY
    return Burstiness.BURSTY_EARLY


def rmsd(curve, median) -> float:
    values = np.asarray(getattr(curve, "values", curve), dtype=float)
    diff = values - np.asarray(median, dtype=float)[: len(values)]
    return float(np.sqrt(np.mean(diff * diff)))


def classify_attractiveness(curve, cohort_profile: CohortProfile, config: ClassifyConfig | None = None, access=None) -> Attractiveness:
    """Typical when close to the cohort median, otherwise by dominance.

    The critical RMSD depends on the access class, taken from `access`, the
    curve itself, or the profile (in that order).
    """
    cfg = config or ClassifyConfig()
    if access is None:
        access = getattr(curve, "access", None) or cohort_profile.access
    values = np.asarray(getattr(curve, "values", curve), dtype=float)
    median = cohort_profile.median[: len(values)]
    if rmsd(values, median) <= cfg.rmsd_critical(access):
        return Attractiveness.TYPICAL
    if np.all(values > median):
        return Attractiveness.MORE
    if np.all(values < median):
        return Attractiveness.LESS
    return Attractiveness.CROSSING


def half_life(curve) -> int:
    """Smallest age by which half of the current total has been downloaded."""
    values = np.asarray(getattr(curve, "values", curve))
    total = values[-1]
    if total <= 0:
        raise ValueError("half-life undefined for a paper without downloads")
    # integer comparison: 2 * cum >= total
    return int(np.argmax(2 * values >= total))


def classify_ageing(m50: float, paper_age: float, config: ClassifyConfig | None = None, bounds=None) -> Ageing:
    """Ageing label from a half-life.

    In lifetime mode the bounds are fractions of the paper's own observed
    age span. `bounds=(low, high)` overrides them (cohort mode passes the
    cohort half-life percentiles here).
    """
    cfg = config or ClassifyConfig()
    if bounds is None:
        low, high = cfg.halflife_low_fraction * paper_age, cfg.halflife_high_fraction * paper_age
    else:
        low, high = bounds
    if m50 < low:
        return Ageing.FLASH_IN_PAN
    if m50 > high:
        return Ageing.DELAYED
    return Ageing.USUAL


BLOCKS = {
    "burstiness": [b.value for b in Burstiness],
    "attractiveness": [a.value for a in Attractiveness],
    "ageing": [a.value for a in Ageing],
}


@dataclass
class Classification:
    labels: list[PaperLabels]
    exclusions: dict[str, ExclusionReason]
    config: ClassifyConfig
    profiles: dict = field(default_factory=dict)
    mean_delta: dict = field(default_factory=dict)

    def by_id(self) -> dict[str, PaperLabels]:
        return {lab.paper_id: lab for lab in self.labels}

    def counts(self) -> dict:
        """{access: {block: {category: count}}}, access classes present only."""
        out = {}
        for lab in self.labels:
            blocks = out.setdefault(lab.access.value, {b: {c: 0 for c in cats} for b, cats in BLOCKS.items()})
            blocks["burstiness"][lab.burstiness.value] += 1
            if lab.attractiveness is not None:
                blocks["attractiveness"][lab.attractiveness.value] += 1
            if lab.ageing is not None:
                blocks["ageing"][lab.ageing.value] += 1
        return dict(sorted(out.items()))

    def summary_rows(self):
        """(block, access, category, count, percent) rows, summary-table layout."""
        from .report import rounded_percentages

        for access, blocks in self.counts().items():
            for block, cats in blocks.items():
                pct = rounded_percentages(list(cats.values()))
                for (cat, n), p in zip(cats.items(), pct):
                    yield block, access, cat, n, p


def classify_corpus(corpus: Corpus, config: ClassifyConfig | None = None, access_filter=None) -> Classification:
    """Label every selected paper; cohorts are formed per access class."""
    cfg = config or ClassifyConfig()
    selected = corpus.select(access_filter)
    if not selected:
        raise ValueError("no papers to classify")
    labels: list[PaperLabels] = []
    exclusions: dict[str, ExclusionReason] = {}
    result = Classification(labels, exclusions, cfg)

    for access in (Access.NON_OA, Access.OA):
        papers = [p for p in selected if p.access is access]
        if not papers:
            continue
        curves = [cumulative_curve(p) for p in papers]
        profile = cohort_profile(curves, [p.monthly_downloads for p in papers], access.value)
        result.profiles[access.value] = profile

        deltas = {}
        for p in papers:
            if p.age_span >= 2:
                deltas[p.paper_id] = burst_delta(p.monthly_downloads, profile.median_monthly)[2]
        mean_delta = float(np.mean(list(deltas.values()))) if deltas else 0.0
        result.mean_delta[access.value] = mean_delta

        pending = []
        for p, curve in zip(papers, curves):
            short = p.age_span < 2
            zero = curve.total == 0
            if short or zero:
                exclusions[p.paper_id] = (
                    ExclusionReason.SHORT_HISTORY_ZERO_DOWNLOADS if short and zero
                    else ExclusionReason.SHORT_HISTORY if short
                    else ExclusionReason.ZERO_DOWNLOADS
                )
            ratio, month = None, None
            burst = Burstiness.NON_BURSTY
            if not short:
                stats = burst_stats(p, profile, mean_delta, cfg)
                ratio, month = stats.ratio, stats.burst_month
                burst = classify_burstiness(stats, cfg)
            m50 = None if zero else half_life(curve)
            pending.append((p, curve, burst, ratio, month, m50))

        bounds = None
        if cfg.ageing_mode == "cohort":
            m50s = [m for _, _, b, _, _, m in pending if b is Burstiness.NON_BURSTY and m is not None]
            if m50s:
                bounds = tuple(np.percentile(m50s, [100 * cfg.halflife_low_fraction, 100 * cfg.halflife_high_fraction]))

        for p, curve, burst, ratio, month, m50 in pending:
            attract = ageing = None
            if burst is Burstiness.NON_BURSTY:
                attract = classify_attractiveness(curve, profile, cfg, access)
                if m50 is not None:
                    ageing = classify_ageing(m50, p.age_span, cfg, bounds)
            labels.append(PaperLabels(
                p.paper_id, access, burst, attract, ageing,
                rmsd(curve, profile.median), m50, ratio, month,
            ))

    labels.sort(key=lambda lab: lab.paper_id)
    return result
