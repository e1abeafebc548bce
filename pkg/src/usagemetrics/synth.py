"""Synthetic corpora with known ground truth.

Monthly downloads follow the two-factor decay law with multiplicative
log-normal noise; selected papers receive a single-month download spike.
Annual citations are proportional to annual downloads, with a per-year
modulation that controls how much each paper's downloads/citations
trajectory zig-zags.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ingest import Access, CitationRecord, Corpus, PaperRecord, month_from_index, month_index
from .model import DecayModelParams, eval_model

INTENTS = ("Slow", "Medium", "High")
# half-width ranges of the alternating annual citation modulation per intent
_MODULATION = {"Slow": (0.0, 0.0), "Medium": (0.03, 0.08), "High": (0.5, 0.8)}


def _default_params():
    return {
        Access.NON_OA: DecayModelParams(30.0, 0.84, 0.86, 0.02),
        Access.OA: DecayModelParams(40.0, 0.71, 0.50, 0.03),
    }


@dataclass(frozen=True)
class SynthSpec:
    paper_count: int = 1000
    months: int = 78
    start: tuple[int, int] = (2007, 1)
    oa_fraction: float = 0.07
    params: dict = field(default_factory=_default_params)
    noise_spread: float = 0.2
    scale_spread: float = 0.0
    min_history: int = 1
    burst_fraction: float = 0.0
    burst_amplitude: float = 20.0
    burst_months: tuple[int, int] | None = None  # inclusive age range; None = whole history
    min_burst_history: int = 3
    citation_coupling: float = 1.0
    citation_noise: float = 0.0
    cluster_mix: tuple[float, float, float] = (1.0, 0.0, 0.0)
    citation_extra_years: int = 2
    seed: int = 0

    def validate(self):
        if self.paper_count < 1:
            raise ValueError("paper_count must be at least 1")
        if self.months < 1:
            raise ValueError("months must be at least 1")
        if not 1 <= self.min_history <= self.months:
            raise ValueError("min_history must lie in [1, months]")
        for name in ("oa_fraction", "burst_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.burst_amplitude <= 1:
            raise ValueError("burst_amplitude must exceed 1")
        if min(self.noise_spread, self.scale_spread, self.citation_noise) < 0:
            raise ValueError("spreads must be non-negative")
        if len(self.cluster_mix) != 3 or min(self.cluster_mix) < 0 or sum(self.cluster_mix) <= 0:
            raise ValueError("cluster_mix needs three non-negative weights")
        if self.citation_coupling <= 0:
            raise ValueError("citation_coupling must be positive")


@dataclass(frozen=True)
class PaperTruth:
    paper_id: str
    access: str
    bursty: bool
    burst_month: int | None
    burst_size: int
    scale: float
    cluster_intent: str
    params: dict

    @property
    def burstiness(self) -> str:
        if not self.bursty:
            return "NonBursty"
        return "SleepingBeauty" if self.burst_month > 6 else "BurstyEarly"


@dataclass(frozen=True)
class GroundTruth:
    papers: dict  # paper_id -> PaperTruth
    seed: int

    def __getitem__(self, paper_id):
        return self.papers[paper_id]

    def __len__(self):
        return len(self.papers)

    @property
    def bursty_ids(self) -> set[str]:
        return {pid for pid, t in self.papers.items() if t.bursty}

    def to_json(self) -> str:
        body = {
            "seed": self.seed,
            "papers": [
                {
                    "paper_id": t.paper_id,
                    "access": t.access,
                    "bursty": t.bursty,
                    "burstiness": t.burstiness,
                    "burst_month": t.burst_month,
                    "burst_size": t.burst_size,
                    "scale": t.scale,
                    "cluster_intent": t.cluster_intent,
                    "params": t.params,
                }
                for t in self.papers.values()
            ],
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def monthly_level(params: DecayModelParams, months: int) -> float:
    """Median expected monthly count over ages 0..months-1."""
    return float(np.median(eval_model(params, np.arange(months))))


def generate(spec: SynthSpec) -> tuple[Corpus, GroundTruth]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    params = {Access(k) if not isinstance(k, Access) else k: v for k, v in spec.params.items()}
    start = month_index(*spec.start)
    end = start + spec.months - 1
    n = spec.paper_count
    width = len(str(n - 1))

    is_oa = rng.random(n) < spec.oa_fraction
    offsets = rng.integers(0, spec.months - spec.min_history + 1, size=n)
    scales = np.exp(rng.normal(0.0, spec.scale_spread, size=n) - 0.5 * spec.scale_spread**2)
    mix = np.asarray(spec.cluster_mix, dtype=float)
    intents = rng.choice(len(INTENTS), size=n, p=mix / mix.sum())
    kappas = spec.citation_coupling * np.exp(rng.normal(0.0, spec.citation_noise, size=n))

    spans = spec.months - offsets
    eligible = np.flatnonzero(spans >= spec.min_burst_history)
    n_bursts = min(int(round(spec.burst_fraction * len(eligible))), len(eligible))
    bursty = set(rng.choice(eligible, size=n_bursts, replace=False).tolist()) if n_bursts else set()
    levels = {acc: monthly_level(p, spec.months) for acc, p in params.items()}

    papers, citations, truth = [], {}, {}
    for i in range(n):
        pid = f"P{i:0{width}d}"
        access = Access.OA if is_oa[i] else Access.NON_OA
        p = params[access]
        span = int(spans[i])
        pub = start + int(offsets[i])
        expected = scales[i] * eval_model(p, np.arange(span))
        noise = np.exp(rng.normal(0.0, spec.noise_spread, size=span) - 0.5 * spec.noise_spread**2)
        counts = np.rint(expected * noise).astype(np.int64)

        burst_month, burst_size = None, 0
        if i in bursty:
            lo, hi = spec.burst_months or (0, span - 1)
            lo, hi = max(lo, 0), min(hi, span - 1)
            if lo > hi:
                lo, hi = 0, span - 1
            burst_month = int(rng.integers(lo, hi + 1))
            burst_size = int(round(spec.burst_amplitude * levels[access]))
            counts[burst_month] += burst_size

        year, month = month_from_index(pub)
        papers.append(PaperRecord(pid, access, year, month, tuple(int(c) for c in counts)))

        intent = INTENTS[intents[i]]
        citations[pid] = CitationRecord(
            pid, _citations(rng, counts, pub, end, p, scales[i], kappas[i], intent, spec.citation_extra_years)
        )
        truth[pid] = PaperTruth(
            pid, access.value, i in bursty, burst_month, burst_size, float(scales[i]), intent,
            {"rho0": p.rho0, "weight_a": p.weight_a, "decay_fast": p.decay_fast, "decay_slow": p.decay_slow},
        )

    corpus = Corpus(tuple(papers), month_from_index(end), citations)
    return corpus, GroundTruth(truth, spec.seed)


def _citations(rng, counts, pub, end, params, scale, kappa, intent, extra_years):
    annual: dict[int, float] = {}
    for age, c in enumerate(counts):
        y = month_from_index(pub + age)[0]
        annual[y] = annual.get(y, 0) + int(c)
    # years past the observation end use the expected (noise-free) downloads
    last_year = month_from_index(end)[0]
    for idx in range(end + 1, month_index(last_year + extra_years, 12) + 1):
        y = month_from_index(idx)[0]
        annual[y] = annual.get(y, 0) + float(scale * eval_model(params, idx - pub))

    lo, hi = _MODULATION[intent]
    amp = rng.uniform(lo, hi) if hi > 0 else 0.0
    sign = 1.0 if rng.random() < 0.5 else -1.0
    out = {}
    for k, year in enumerate(sorted(annual)):
        m = 1.0 + amp * sign * (-1) ** k
        out[year] = int(np.rint(kappa * m * annual[year]))
    return out


def write_corpus(corpus: Corpus, truth: GroundTruth, out_dir) -> dict:
    """Write downloads.csv, citations.csv and ground_truth.json into `out_dir`."""
    from pathlib import Path

    from .ingest import write_citations, write_downloads

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "downloads": out / "downloads.csv",
        "citations": out / "citations.csv",
        "ground_truth": out / "ground_truth.json",
    }
    write_downloads(corpus, paths["downloads"])
    write_citations(corpus, paths["citations"])
    paths["ground_truth"].write_text(truth.to_json(), encoding="utf-8")
    return paths
