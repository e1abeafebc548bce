import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usagemetrics.classify import (
    Ageing,
    Attractiveness,
    Burstiness,
    BurstStats,
    ClassifyConfig,
    ExclusionReason,
    burst_stats,
    classify_ageing,
    classify_attractiveness,
    classify_burstiness,
    classify_corpus,
    half_life,
    rmsd,
)
from usagemetrics.ingest import Access
from usagemetrics.profiles import cohort_profile
from usagemetrics.synth import SynthSpec, generate, monthly_level

from conftest import make_corpus

CFG = ClassifyConfig()


def _profile_from_monthly(monthly_rows):
    return cohort_profile([np.cumsum(m) for m in monthly_rows], monthly_rows)


def test_self_comparison_gives_zero_delta():
    rows = [[10, 6, 4, 3, 2], [12, 6, 3, 3, 2], [9, 7, 5, 3, 2]]
    prof = _profile_from_monthly(rows)
    stats = burst_stats(prof.median_monthly.tolist(), prof, 1.0)
    assert stats.delta == 0 and stats.ratio == 0 and stats.burst_month is None


def test_flat_series_zero_variance():
    prof = _profile_from_monthly([[5, 5, 5, 5]])
    stats = burst_stats([5, 5, 5, 5], prof, 0.0)
    assert stats.sigma_i == stats.sigma_ref == 0 == stats.delta == stats.ratio


def test_short_history_rejected():
    prof = _profile_from_monthly([[5, 5]])
    with pytest.raises(ValueError):
        burst_stats([5], prof, 1.0)


def test_injected_spike_detected_by_recomputation():
    rng = np.random.default_rng(0)
    base = [np.rint(20 * np.exp(-0.1 * np.arange(30)) * np.exp(rng.normal(0, 0.05, 30))) for _ in range(50)]
    prof = _profile_from_monthly(base)
    level = float(np.median(prof.median_monthly))
    spiked = base[0].copy()
    spiked[17] += 50 * level
    deltas = [abs(np.std(b) - np.std(prof.median_monthly)) for b in base[1:]] + [
        abs(np.std(spiked) - np.std(prof.median_monthly))
    ]
    stats = burst_stats(spiked, prof, float(np.mean(deltas)))
    assert stats.delta == pytest.approx(deltas[-1])
    assert stats.ratio > 5
    assert stats.burst_month == 17


@pytest.mark.parametrize(
    "ratio, month, label",
    [
        (0.5, None, Burstiness.NON_BURSTY),
        (5.0, 3, Burstiness.NON_BURSTY),
        (12, 10, Burstiness.SLEEPING_BEAUTY),
        (12, 2, Burstiness.BURSTY_EARLY),
        (12, 6, Burstiness.BURSTY_EARLY),
        (12, 7, Burstiness.SLEEPING_BEAUTY),
    ],
)
def test_classify_burstiness(ratio, month, label):
    assert classify_burstiness(BurstStats(0, 0, 0, ratio, month), CFG) is label


@settings(max_examples=100)
@given(st.floats(0, 100), st.floats(0, 100), st.integers(0, 80))
def test_burstiness_monotone_in_ratio(r1, r2, month):
    lo, hi = sorted((r1, r2))
    if classify_burstiness(BurstStats(0, 0, 0, lo, month), CFG) is not Burstiness.NON_BURSTY:
        assert classify_burstiness(BurstStats(0, 0, 0, hi, month), CFG) is not Burstiness.NON_BURSTY


def test_attractiveness_identity_and_dominance():
    prof = cohort_profile([[10, 20, 30], [12, 22, 32], [8, 18, 28]])
    assert classify_attractiveness(prof.median, prof, CFG, Access.NON_OA) is Attractiveness.TYPICAL
    assert classify_attractiveness(prof.median + 1000, prof, CFG, Access.NON_OA) is Attractiveness.MORE
    assert classify_attractiveness(prof.median - 1000, prof, CFG, Access.NON_OA) is Attractiveness.LESS


def test_attractiveness_crossing_by_pointwise_oracle():
    median_curve = np.array([100, 200, 300, 400, 500, 600])
    prof = cohort_profile([median_curve])
    curve = median_curve + np.array([300, 300, 300, -300, -300, -300])
    # oracle: RMSD 300 > 66, and neither strictly above nor below everywhere
    above = [c > m for c, m in zip(curve, median_curve)]
    assert any(above) and not all(above)
    assert rmsd(curve, median_curve) == 300
    assert classify_attractiveness(curve, prof, CFG, Access.NON_OA) is Attractiveness.CROSSING


def test_attractiveness_threshold_depends_on_access():
    prof = cohort_profile([[0, 0, 0]])
    curve = np.array([80, 80, 80])
    assert classify_attractiveness(curve, prof, CFG, Access.NON_OA) is Attractiveness.MORE
    assert classify_attractiveness(curve, prof, CFG, Access.OA) is Attractiveness.TYPICAL


@settings(max_examples=50)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=20), st.floats(1e-6, 1e6))
def test_median_curve_always_typical(monthly, crit):
    prof = cohort_profile([np.cumsum(monthly)])
    cfg = ClassifyConfig(rmsd_critical_non_oa=crit, rmsd_critical_oa=crit)
    assert classify_attractiveness(prof.median, prof, cfg, Access.OA) is Attractiveness.TYPICAL


def test_half_life_examples():
    assert half_life([10, 15, 18]) == 0
    assert half_life([1, 2, 3, 4, 100]) == 4
    with pytest.raises(ValueError):
        half_life([0, 0, 0])


def _scan_half_life(cum):
    for t, v in enumerate(cum):
        if v >= 0.5 * cum[-1]:
            return t


@settings(max_examples=200)
@given(st.lists(st.integers(0, 500), min_size=1, max_size=40).filter(lambda xs: sum(xs) > 0), st.integers(1, 50))
def test_half_life_scan_oracle_and_scale_invariance(monthly, k):
    cum = np.cumsum(monthly)
    assert half_life(cum) == _scan_half_life(list(cum))
    assert half_life(np.cumsum(np.array(monthly) * k)) == half_life(cum)


@pytest.mark.parametrize("m50, label", [(2, Ageing.FLASH_IN_PAN), (30, Ageing.DELAYED), (15, Ageing.USUAL),
                                        (10, Ageing.USUAL), (20, Ageing.USUAL)])
def test_classify_ageing(m50, label):
    assert classify_ageing(m50, 40, CFG) is label


def test_classify_ageing_explicit_bounds():
    assert classify_ageing(5, 40, CFG, bounds=(6, 9)) is Ageing.FLASH_IN_PAN
    assert classify_ageing(7, 40, CFG, bounds=(6, 9)) is Ageing.USUAL


def test_config_validation():
    with pytest.raises(ValueError):
        ClassifyConfig(halflife_low_fraction=0.6)
    with pytest.raises(ValueError):
        ClassifyConfig(burst_ratio_threshold=0)
    with pytest.raises(ValueError):
        ClassifyConfig(ageing_mode="other")


def test_homogeneous_cohort():
    corpus = make_corpus({f"P{i}": [5] * 40 for i in range(20)})
    res = classify_corpus(corpus)
    assert {l.burstiness for l in res.labels} == {Burstiness.NON_BURSTY}
    assert {l.attractiveness for l in res.labels} == {Attractiveness.TYPICAL}
    assert {l.ageing for l in res.labels} == {Ageing.USUAL}
    cohort = classify_corpus(corpus, ClassifyConfig(ageing_mode="cohort"))
    assert {l.ageing for l in cohort.labels} == {Ageing.USUAL}


def test_exclusions_and_label_fields():
    corpus = make_corpus({"A": [5, 4, 3, 2], "B": [6, 4, 3, 1], "Z": [0, 0, 0, 0], "S": [3], "S0": [0]})
    res = classify_corpus(corpus)
    assert res.exclusions == {
        "Z": ExclusionReason.ZERO_DOWNLOADS,
        "S": ExclusionReason.SHORT_HISTORY,
        "S0": ExclusionReason.SHORT_HISTORY_ZERO_DOWNLOADS,
    }
    labels = res.by_id()
    assert labels["S"].burstiness is Burstiness.NON_BURSTY and labels["S"].delta_ratio is None
    assert labels["Z"].half_life is None and labels["Z"].ageing is None
    assert labels["A"].half_life == 1


def test_bursty_papers_have_no_attractiveness_or_ageing():
    series = {f"P{i}": [10, 6, 4, 3, 3, 2, 2, 2, 2, 2] for i in range(30)}
    series["X"] = [10, 6, 4, 3, 3, 2, 2, 200, 2, 2]
    res = classify_corpus(make_corpus(series))
    x = res.by_id()["X"]
    assert x.burstiness is Burstiness.SLEEPING_BEAUTY and x.burst_month == 7
    assert x.attractiveness is None and x.ageing is None


def test_label_partition_and_summary_rows():
    corpus, _ = generate(SynthSpec(paper_count=400, noise_spread=0.3, scale_spread=0.5, burst_fraction=0.03, seed=3))
    res = classify_corpus(corpus)
    assert len(res.labels) == len(corpus)
    counts = res.counts()
    for access, blocks in counts.items():
        n_class = sum(1 for p in corpus.papers if p.access.value == access)
        assert sum(blocks["burstiness"].values()) == n_class
        non_bursty = blocks["burstiness"]["NonBursty"]
        assert sum(blocks["attractiveness"].values()) == non_bursty
        assert sum(blocks["ageing"].values()) <= non_bursty
    rows = list(res.summary_rows())
    assert all(len(r) == 5 for r in rows)
    for access in counts:
        for block in ("burstiness", "attractiveness", "ageing"):
            pct = [r[4] for r in rows if r[0] == block and r[1] == access]
            assert sum(pct) == pytest.approx(100.0, abs=0.1) or sum(pct) == 0


def test_burst_fraction_matches_generator_truth():
    corpus, truth = generate(SynthSpec(paper_count=1000, burst_fraction=0.02, noise_spread=0.05, seed=21))
    res = classify_corpus(corpus)
    detected = sum(l.burstiness is not Burstiness.NON_BURSTY for l in res.labels) / len(corpus)
    assert abs(detected - len(truth.bursty_ids) / len(corpus)) <= 0.005


def test_spike_recall_over_trials():
    # spikes of 20x the cohort median monthly level are found in >= 95% of trials
    hits = trials = 0
    for seed in range(5):
        corpus, truth = generate(SynthSpec(paper_count=300, burst_fraction=0.02, burst_amplitude=20,
                                           noise_spread=0.05, oa_fraction=0.0, seed=100 + seed))
        labels = classify_corpus(corpus).by_id()
        for pid in truth.bursty_ids:
            trials += 1
            hits += labels[pid].burstiness is not Burstiness.NON_BURSTY
    assert trials >= 25
    assert hits / trials >= 0.95


def test_monthly_level_is_median_expected_count():
    p = SynthSpec().params[Access.NON_OA]
    assert monthly_level(p, 3) == pytest.approx(float(np.median([30.0, 30 * (0.84 * np.exp(-0.86) + 0.16 * np.exp(-0.02)),
                                                                  30 * (0.84 * np.exp(-1.72) + 0.16 * np.exp(-0.04))])))
