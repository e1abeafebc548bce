"""Plain-text and JSON run summaries."""
from __future__ import annotations

import json
import math
from dataclasses import asdict

from .classify import BLOCKS, Classification

NOT_COMPUTED = "not computed"

_BLOCK_TITLES = {
    "burstiness": "Categorisation by burstiness",
    "attractiveness": "Categorisation by overall attractiveness (non-bursty papers)",
    "ageing": "Categorisation by half-life (non-bursty papers)",
}


class MissingArtifactError(ValueError):
    pass


def rounded_percentages(counts, decimals: int = 1) -> list[float]:
    """Percentages rounded so that they still sum to exactly 100.

    Largest-remainder rounding; all zeros when the counts are all zero.
    """
    total = sum(counts)
    if total == 0:
        return [0.0] * len(counts)
    unit = 10**decimals
    raw = [100 * unit * c / total for c in counts]
    floors = [math.floor(r) for r in raw]
    short = 100 * unit - sum(floors)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - floors[i]), i))
    for i in order[:short]:
        floors[i] += 1
    return [f / unit for f in floors]


def _value(x):
    return getattr(x, "value", x)


def _label_counts(labels) -> dict:
    if isinstance(labels, Classification):
        return labels.counts()
    out = {}
    for row in labels:
        get = row.get if isinstance(row, dict) else (lambda k, r=row: getattr(r, k))
        access = _value(get("access"))
        blocks = out.setdefault(access, {b: {c: 0 for c in cats} for b, cats in BLOCKS.items()})
        for block in BLOCKS:
            cat = _value(get(block))
            if cat:
                blocks[block][cat] += 1
    return dict(sorted(out.items()))


def category_table(labels) -> dict:
    out = {}
    for access, blocks in _label_counts(labels).items():
        out[access] = {}
        for block, cats in blocks.items():
            pct = rounded_percentages(list(cats.values()))
            out[access][block] = {
                "total": sum(cats.values()),
                "categories": {c: {"count": n, "percent": p} for (c, n), p in zip(cats.items(), pct)},
            }
    return out


def _params_section(params):
    if not params:
        return NOT_COMPUTED
    out = {}
    for access, entry in sorted(params.items()):
        if hasattr(entry, "to_dict"):
            entry = entry.to_dict()
        out[access] = dict(entry)
    return out


def _correlation_section(corr):
    if corr is None:
        return NOT_COMPUTED
    return corr.to_dict() if hasattr(corr, "to_dict") else dict(corr)


def render_summary(labels, params=None, correlation=None, *, exclusions=None, corpus=None, thresholds=None):
    """Build ``(text, data)`` for a run.

    `labels` is required (a :class:`Classification` or label rows). Absent
    fit or correlation sections render as "not computed".
    """
    if labels is None:
        raise MissingArtifactError("classification labels are missing")
    if isinstance(labels, Classification):
        thresholds = thresholds or asdict(labels.config)
        exclusions = exclusions if exclusions is not None else {pid: r.value for pid, r in labels.exclusions.items()}

    data = {}
    if corpus is not None:
        counts = {}
        for p in corpus.papers:
            counts[p.access.value] = counts.get(p.access.value, 0) + 1
        first = min(p.pub_index for p in corpus.papers)
        data["corpus"] = {
            "papers": dict(sorted(counts.items())),
            "first_publication": "%d-%02d" % divmod_month(first),
            "observation_end": "%d-%02d" % corpus.observation_end,
        }
    data["thresholds"] = dict(thresholds or {})
    data["categories"] = category_table(labels)
    data["fit"] = _params_section(params)
    data["correlation"] = _correlation_section(correlation)
    buckets = {}
    for pid, reason in sorted((exclusions or {}).items()):
        buckets.setdefault(_value(reason), []).append(pid)
    data["exclusions"] = dict(sorted(buckets.items()))
    return render_text(data), data


def divmod_month(index: int) -> tuple[int, int]:
    return index // 12, index % 12 + 1


def _fmt(x, digits=4):
    if x is None:
        return "n/a"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.{digits}g}"
    return str(x)


def render_text(data: dict) -> str:
    lines = ["Usage-metrics run summary", "=" * 25, ""]
    if "corpus" in data:
        c = data["corpus"]
        papers = ", ".join(f"{k}={v}" for k, v in c["papers"].items())
        lines += [f"Corpus: {papers}; published from {c['first_publication']}, observed to {c['observation_end']}", ""]
    if data["thresholds"]:
        lines.append("Thresholds: " + " ".join(f"{k}={_fmt(v)}" for k, v in data["thresholds"].items()))
        lines.append("")

    for access, blocks in data["categories"].items():
        for block, body in blocks.items():
            lines.append(f"[{access}] {_BLOCK_TITLES[block]} (n={body['total']})")
            for cat, cell in body["categories"].items():
                lines.append(f"  {cat:<16} {cell['count']:>7}  {cell['percent']:5.1f}%")
        lines.append("")

    lines.append("Decay-model fit")
    if data["fit"] == NOT_COMPUTED:
        lines.append(f"  {NOT_COMPUTED}")
    else:
        for access, p in data["fit"].items():
            lines.append(
                f"  [{access}] rho0={_fmt(p['rho0'])} A={_fmt(p['weight_a'])} b1={_fmt(p['decay_fast'])} "
                f"b2={_fmt(p['decay_slow'])} rss={_fmt(p['residual_ss'])} converged={_fmt(p['converged'])}"
            )
            for horizon, age in p.get("half_share_age", {}).items():
                lines.append(f"    half of downloads to papers aged <= {age} months (horizon {horizon})")
    lines.append("")

    lines.append("Downloads vs citations")
    corr = data["correlation"]
    if corr == NOT_COMPUTED:
        lines.append(f"  {NOT_COMPUTED}")
    else:
        lines.append(f"  overall PCC={_fmt(corr['overall']['pcc'])} (n={corr['overall']['n']})")
        for group in ("pcc_by_access", "pcc_by_pub_year", "pcc_by_cluster"):
            for key, g in corr[group].items():
                flag = f" [{g['flag']}]" if g["flag"] else ""
                lines.append(f"  {group[7:]:<8} {key:<14} PCC={_fmt(g['pcc'])} (n={g['n']}){flag}")
        sizes = ", ".join(f"{k}={v}" for k, v in corr["cluster_sizes"].items())
        lines.append(f"  cluster sizes: {sizes}")
        lines.append(f"  papers without citation record: {corr['excluded_no_citations']}")
    lines.append("")

    lines.append("Exclusions")
    if not data["exclusions"]:
        lines.append("  none")
    for reason, ids in data["exclusions"].items():
        lines.append(f"  {reason}: {len(ids)} ({', '.join(ids)})")
    return "\n".join(lines) + "\n"


def write_summary(out_dir, text: str, data: dict):
    from pathlib import Path

    out = Path(out_dir)
    (out / "summary.txt").write_text(text, encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
