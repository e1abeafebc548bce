"""Command-line front end.

Subcommands and the files they write into ``--out``:

``synth``
    downloads.csv, citations.csv, ground_truth.json
``profile``
    curves.csv          paper_id,access,age,cumulative_downloads
    cohort_profile.csv  access,age,support,p25,median,p75,median_monthly
    synchronous.csv     access,age,downloads,share
    density.csv         access,age,papers,downloads,rho
``classify``
    labels.csv          paper_id,access,burstiness,attractiveness,ageing,rmsd,half_life,delta_ratio
    exclusions.csv      paper_id,access,reason
    categories.csv      block,access,category,count,percent
    thresholds.json
``fit``
    params.json, fit_report_<ACCESS>.csv (age,observed_rho,fitted_rho,residual),
    fit_curve_<ACCESS>.csv (age,fitted_rho)
``correlate``
    correlation.json, clusters.csv (paper_id,pub_year,delta_degrees,cluster,final_d,final_c),
    trajectories.csv (paper_id,year,d,c)
``report``
    summary.txt, summary.json (also refreshed by classify, fit and correlate)
``schema-check``
    validates the headers of every known file present in ``--out``

Exit codes: 0 success, 1 input or validation error, 2 internal invariant
violation. A ``--config`` file of ``key=value`` lines supplies defaults for
any long option of the subcommand; explicit flags win.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .classify import ClassifyConfig, classify_corpus
from .correlate import MEMBERSHIP_HEADER, CorrelationDataError, ZigZagConfig, cluster_report, build_trajectories
from .ingest import Access, IngestConfig, IngestError, load_citations, load_downloads
from .model import REPORT_HEADER, FitConfig, fit, model_report
from .profiles import Window, cohort_profile, cumulative_curve, density_series, synchronous_distribution
from .report import MissingArtifactError, render_summary, write_summary
from .synth import SynthSpec, generate, write_corpus

logger = logging.getLogger("usagemetrics")

SCHEMAS = {
    "downloads.csv": ("paper_id", "access", "pub_year", "pub_month", "year", "month", "downloads"),
    "citations.csv": ("paper_id", "year", "citations"),
    "curves.csv": ("paper_id", "access", "age", "cumulative_downloads"),
    "cohort_profile.csv": ("access", "age", "support", "p25", "median", "p75", "median_monthly"),
    "synchronous.csv": ("access", "age", "downloads", "share"),
    "density.csv": ("access", "age", "papers", "downloads", "rho"),
    "labels.csv": ("paper_id", "access", "burstiness", "attractiveness", "ageing", "rmsd", "half_life", "delta_ratio"),
    "exclusions.csv": ("paper_id", "access", "reason"),
    "categories.csv": ("block", "access", "category", "count", "percent"),
    "clusters.csv": MEMBERSHIP_HEADER,
    "trajectories.csv": ("paper_id", "year", "d", "c"),
    "fit_report_*.csv": REPORT_HEADER,
    "fit_curve_*.csv": ("age", "fitted_rho"),
}
JSON_KEYS = {
    "params.json": None,
    "correlation.json": ("overall_pcc", "pcc_by_pub_year", "pcc_by_cluster", "cluster_sizes"),
    "ground_truth.json": ("seed", "papers"),
    "thresholds.json": tuple(f for f in ClassifyConfig.__dataclass_fields__),
    "summary.json": ("categories", "fit", "correlation", "exclusions"),
}


class InvariantError(RuntimeError):
    pass


def _check(condition, message):
    if not condition:
        raise InvariantError(message)


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return getattr(x, "value", x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValueError(f"cannot create output directory {out}: {exc}") from None
    return out


def _load(args, citations=False):
    if not args.downloads:
        raise ValueError("--downloads is required")
    corpus = load_downloads(args.downloads, IngestConfig(strict=not args.lenient))
    if citations:
        if not args.citations:
            raise ValueError("--citations is required")
        corpus = load_citations(args.citations, corpus, IngestConfig(strict=not args.lenient))
    return corpus


def _access_classes(corpus, access):
    papers = corpus.select(access)
    if not papers:
        raise ValueError(f"no papers with access {access}")
    return [a for a in (Access.NON_OA, Access.OA) if any(p.access is a for p in papers)]


# ---------------------------------------------------------------- profile

def cmd_profile(args) -> int:
    corpus = _load(args)
    out = _out_dir(args)
    window = Window.parse(args.window) if args.window else Window.last_months(corpus, args.window_months)
    curve_rows, profile_rows, sync_rows, dens_rows = [], [], [], []
    for access in _access_classes(corpus, args.access):
        papers = corpus.select(access)
        curves = [cumulative_curve(p) for p in papers]
        for c in curves:
            _check(np.all(np.diff(c.values) >= 0), f"cumulative curve of {c.paper_id} decreases")
            curve_rows.extend((c.paper_id, access.value, t, int(v)) for t, v in enumerate(c.values))
        prof = cohort_profile(curves, [p.monthly_downloads for p in papers], access.value)
        _check(np.all(np.diff(prof.support) <= 0), "support count increases with age")
        profile_rows.extend(
            (access.value, t, int(prof.support[t]), prof.p25[t], prof.median[t], prof.p75[t], prof.median_monthly[t])
            for t in range(len(prof))
        )
        try:
            sync = synchronous_distribution(corpus, window, access)
            _check(abs(sync.share[-1] - 1.0) <= 1e-9, "synchronous share does not end at 1")
            sync_rows.extend((access.value, x, int(n), s) for x, (n, s) in enumerate(zip(sync.downloads, sync.share)))
            dens = density_series(corpus, window, access)
            dens_rows.extend((access.value, int(a), int(k), int(n), r)
                             for a, k, n, r in zip(dens.ages, dens.papers, dens.downloads, dens.rho))
        except ValueError as exc:
            logger.warning("%s: %s", access.value, exc)
    curve_rows.sort(key=lambda r: (r[0], r[2]))
    _write_csv(out / "curves.csv", SCHEMAS["curves.csv"], curve_rows)
    _write_csv(out / "cohort_profile.csv", SCHEMAS["cohort_profile.csv"], profile_rows)
    _write_csv(out / "synchronous.csv", SCHEMAS["synchronous.csv"], sync_rows)
    _write_csv(out / "density.csv", SCHEMAS["density.csv"], dens_rows)
    n = len(corpus.select(args.access))
    print(f"profile: {n} papers, window {window}, wrote curves/cohort_profile/synchronous/density to {out}")
    return 0


# ---------------------------------------------------------------- classify

def _classify_config(args) -> ClassifyConfig:
    non_oa = args.rmsd_critical_non_oa
    oa = args.rmsd_critical_oa
    if args.rmsd_critical is not None:
        non_oa = oa = args.rmsd_critical
    return ClassifyConfig(
        rmsd_critical_non_oa=non_oa,
        rmsd_critical_oa=oa,
        burst_ratio_threshold=args.burst_ratio,
        sleeping_beauty_min_month=args.sleeping_beauty_month,
        halflife_low_fraction=args.halflife_low,
        halflife_high_fraction=args.halflife_high,
        ageing_mode=args.ageing_mode,
    )


def _threshold_line(cfg: ClassifyConfig) -> str:
    def fmt(v):
        return f"{v:g}" if isinstance(v, float) else str(v)

    return "thresholds: " + " ".join(f"{k}={fmt(v)}" for k, v in asdict(cfg).items())


def cmd_classify(args) -> int:
    corpus = _load(args)
    out = _out_dir(args)
    cfg = _classify_config(args)
    result = classify_corpus(corpus, cfg, args.access)
    _write_csv(out / "labels.csv", SCHEMAS["labels.csv"], (
        (l.paper_id, l.access, l.burstiness, l.attractiveness, l.ageing, l.rmsd, l.half_life, l.delta_ratio)
        for l in result.labels
    ))
    _write_csv(out / "exclusions.csv", SCHEMAS["exclusions.csv"], (
        (pid, corpus[pid].access, reason) for pid, reason in sorted(result.exclusions.items())
    ))
    rows = list(result.summary_rows())
    _write_csv(out / "categories.csv", SCHEMAS["categories.csv"], rows)
    _write_json(out / "thresholds.json", asdict(cfg))
    print(_threshold_line(cfg))
    for block, access, cat, n, pct in rows:
        print(f"  {block:<15} {access:<7} {cat:<16} {n:>7} {pct:5.1f}%")
    _refresh_summary(out, corpus)
    return 0


# ---------------------------------------------------------------- fit

def cmd_fit(args) -> int:
    corpus = _load(args)
    out = _out_dir(args)
    window = Window.parse(args.window) if args.window else Window.last_months(corpus, args.window_months)
    cfg = FitConfig(max_iterations=args.max_iterations, convergence_tol=args.tol)
    params_out = {}
    for access in _access_classes(corpus, args.access):
        dens = density_series(corpus, window, access)
        params = fit(dens, cfg)
        _check(0 <= params.weight_a <= 1 and params.decay_fast >= params.decay_slow > 0,
               "fit returned parameters outside the feasible region")
        horizon = args.horizon if args.horizon is not None else int(dens.ages.max()) + 1
        rep = model_report(params, dens, horizons=(horizon, None))
        _check(abs(float(np.sum(rep.residuals**2)) - params.residual_ss) <= 1e-9 * max(1.0, params.residual_ss),
               "residual_ss disagrees with the per-age residuals")
        entry = params.to_dict()
        entry["half_share_age"] = {str(k): v for k, v in rep.half_share.items()}
        entry["window"] = str(window)
        entry["n_points"] = len(dens)
        params_out[access.value] = entry
        _write_csv(out / f"fit_report_{access.value}.csv", REPORT_HEADER, rep.rows())
        _write_csv(out / f"fit_curve_{access.value}.csv", SCHEMAS["fit_curve_*.csv"],
                   zip(rep.curve_ages, rep.curve_values))
        print(
            f"fit[{access.value}]: rho0={params.rho0:.4g} A={params.weight_a:.4g} b1={params.decay_fast:.4g} "
            f"b2={params.decay_slow:.4g} converged={str(params.converged).lower()} "
            f"half-share age {rep.half_share[horizon]} (horizon {horizon}) / {rep.half_share['unbounded']} (unbounded)"
        )
    _write_json(out / "params.json", params_out)
    _refresh_summary(out, corpus)
    return 0


# ---------------------------------------------------------------- correlate

def _default_years(corpus):
    first = min(p.pub_year for p in corpus.papers)
    end_year, end_month = corpus.observation_end
    return first, end_year if end_month == 12 else end_year - 1


def _parse_years(text):
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise ValueError(f"bad year window {text!r} (expected YYYY:YYYY)") from None


def cmd_correlate(args) -> int:
    corpus = _load(args, citations=True)
    out = _out_dir(args)
    years = _parse_years(args.years) if args.years else _default_years(corpus)
    cfg = ZigZagConfig(delta_c1=args.delta_c1, delta_c2=args.delta_c2, angle_mode=args.angle_mode, min_years=args.min_years)
    report = cluster_report(corpus, years, cfg, citation_shift=args.citation_shift, access_filter=args.access)
    _check(sum(report.cluster_sizes.values()) == len(report.members), "cluster sizes do not partition the papers")
    _write_csv(out / "clusters.csv", MEMBERSHIP_HEADER, (
        (m.paper_id, m.pub_year, m.delta_degrees, m.cluster, m.final_d, m.final_c) for m in report.members
    ))
    trajectories, _ = build_trajectories(corpus, years, args.access)
    _write_csv(out / "trajectories.csv", SCHEMAS["trajectories.csv"], (
        (t.paper_id, y, d, c) for t in trajectories for y, d, c in zip(t.years, t.d, t.c)
    ))
    _write_json(out / "correlation.json", report.to_dict())
    sizes = ", ".join(f"{k}={v}" for k, v in report.cluster_sizes.items())
    pcc = "n/a" if report.overall_pcc is None else f"{report.overall_pcc:.4f}"
    print(f"correlate: years {years[0]}-{years[1]}, shift {args.citation_shift}, overall PCC {pcc}, clusters {sizes}")
    _refresh_summary(out, corpus)
    return 0


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    try:
        mix = tuple(float(x) for x in args.cluster_mix.split(","))
        start = tuple(int(x) for x in args.start.split("-"))
    except ValueError:
        raise ValueError("bad --cluster-mix or --start value") from None
    spec = SynthSpec(
        paper_count=args.papers, months=args.months, start=start, oa_fraction=args.oa_fraction,
        noise_spread=args.noise, scale_spread=args.scale_spread, burst_fraction=args.burst_fraction,
        burst_amplitude=args.burst_amplitude, citation_coupling=args.coupling,
        citation_noise=args.citation_noise, cluster_mix=mix, seed=args.seed,
    )
    spec.validate()
    out = _out_dir(args)
    corpus, truth = generate(spec)
    paths = write_corpus(corpus, truth, out)
    end = "%d-%02d" % corpus.observation_end
    print(f"synth: {len(corpus)} papers through {end}, {len(truth.bursty_ids)} bursty, seed {args.seed} -> "
          + ", ".join(p.name for p in paths.values()))
    return 0


# ---------------------------------------------------------------- report / schema-check

def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _refresh_summary(out: Path, corpus=None, required=False):
    labels_path = out / "labels.csv"
    if not labels_path.exists():
        if required:
            raise MissingArtifactError(f"missing upstream artifact {labels_path} (run classify first)")
        return None
    labels = _read_csv(labels_path)
    exclusions = {}
    if (out / "exclusions.csv").exists():
        exclusions = {r["paper_id"]: r["reason"] for r in _read_csv(out / "exclusions.csv")}
    thresholds = json.loads((out / "thresholds.json").read_text()) if (out / "thresholds.json").exists() else None
    params = json.loads((out / "params.json").read_text()) if (out / "params.json").exists() else None
    corr = json.loads((out / "correlation.json").read_text()) if (out / "correlation.json").exists() else None
    text, data = render_summary(labels, params, corr, exclusions=exclusions, corpus=corpus, thresholds=thresholds)
    write_summary(out, text, data)
    return text


def cmd_report(args) -> int:
    out = Path(args.out)
    corpus = _load(args) if args.downloads else None
    text = _refresh_summary(out, corpus, required=True)
    sys.stdout.write(text)
    return 0


def schema_problems(out: Path) -> list[tuple[str, str]]:
    """(file, problem) for every known artifact in `out` with a bad layout."""
    results = []
    for pattern, header in SCHEMAS.items():
        for path in sorted(out.glob(pattern)):
            with open(path, newline="", encoding="utf-8") as fh:
                got = tuple(next(csv.reader(fh), ()))
            results.append((path.name, "" if got == header else f"header {','.join(got)!r} != {','.join(header)!r}"))
    for name, keys in JSON_KEYS.items():
        path = out / name
        if not path.exists():
            continue
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            results.append((name, f"invalid JSON: {exc}"))
            continue
        missing = [k for k in (keys or ()) if k not in data]
        results.append((name, f"missing keys {missing}" if missing else ""))
    return results


def cmd_schema_check(args) -> int:
    out = Path(args.out)
    if not out.is_dir():
        raise ValueError(f"output directory {out} does not exist")
    results = schema_problems(out)
    if not results:
        raise ValueError(f"no known artifacts in {out}")
    bad = 0
    for name, problem in results:
        print(f"{'FAIL' if problem else 'ok  '} {name}{': ' + problem if problem else ''}")
        bad += bool(problem)
    return 1 if bad else 0


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1), not argparse's default 2
    def error(self, message):
        raise ValueError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--downloads", metavar="PATH", help="long-format downloads CSV")
    common.add_argument("--citations", metavar="PATH", help="annual citations CSV")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    common.add_argument("--access", choices=("OA", "NON_OA", "ALL"), default="ALL")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", metavar="PATH", help="key=value defaults file")
    common.add_argument("--lenient", action="store_true", help="skip malformed input rows instead of failing")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="usagemetrics", description="Download and citation analytics for journal papers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def window_flags(p):
        p.add_argument("--window", metavar="YYYY-MM:YYYY-MM", help="calendar window (default: last --window-months months)")
        p.add_argument("--window-months", type=int, default=3)

    p = sub.add_parser("profile", parents=[common], help="cumulative curves, cohort medians, synchronous distributions")
    window_flags(p)
    p.set_defaults(func=cmd_profile)

    d = ClassifyConfig()
    p = sub.add_parser("classify", parents=[common], help="burstiness / attractiveness / ageing labels")
    p.add_argument("--rmsd-critical", type=float, help="critical RMSD for both access classes")
    p.add_argument("--rmsd-critical-non-oa", type=float, default=d.rmsd_critical_non_oa)
    p.add_argument("--rmsd-critical-oa", type=float, default=d.rmsd_critical_oa)
    p.add_argument("--burst-ratio", type=float, default=d.burst_ratio_threshold)
    p.add_argument("--sleeping-beauty-month", type=int, default=d.sleeping_beauty_min_month)
    p.add_argument("--halflife-low", type=float, default=d.halflife_low_fraction)
    p.add_argument("--halflife-high", type=float, default=d.halflife_high_fraction)
    p.add_argument("--ageing-mode", choices=("lifetime", "cohort"), default=d.ageing_mode)
    p.set_defaults(func=cmd_classify)

    f = FitConfig()
    p = sub.add_parser("fit", parents=[common], help="two-factor decay model fit")
    window_flags(p)
    p.add_argument("--horizon", type=int, help="oldest age for the half-share prediction (default: observed span)")
    p.add_argument("--max-iterations", type=int, default=f.max_iterations)
    p.add_argument("--tol", type=float, default=f.convergence_tol)
    p.set_defaults(func=cmd_fit)

    z = ZigZagConfig()
    p = sub.add_parser("correlate", parents=[common], help="downloads/citations PCC and zig-zag clusters")
    p.add_argument("--years", metavar="YYYY:YYYY", help="publication/citation year window")
    p.add_argument("--citation-shift", type=int, default=0, help="take final citations this many years later")
    p.add_argument("--angle-mode", choices=("normalized", "raw"), default=z.angle_mode)
    p.add_argument("--delta-c1", type=float, default=z.delta_c1)
    p.add_argument("--delta-c2", type=float, default=z.delta_c2)
    p.add_argument("--min-years", type=int, default=z.min_years)
    p.set_defaults(func=cmd_correlate)

    s = SynthSpec()
    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus with ground truth")
    p.add_argument("--papers", type=int, default=s.paper_count)
    p.add_argument("--months", type=int, default=s.months)
    p.add_argument("--start", default="%d-%02d" % s.start, metavar="YYYY-MM")
    p.add_argument("--oa-fraction", type=float, default=s.oa_fraction)
    p.add_argument("--noise", type=float, default=s.noise_spread)
    p.add_argument("--scale-spread", type=float, default=s.scale_spread)
    p.add_argument("--burst-fraction", type=float, default=0.02)
    p.add_argument("--burst-amplitude", type=float, default=s.burst_amplitude)
    p.add_argument("--coupling", type=float, default=s.citation_coupling)
    p.add_argument("--citation-noise", type=float, default=s.citation_noise)
    p.add_argument("--cluster-mix", default="0.2,0.6,0.2", metavar="SLOW,MEDIUM,HIGH")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", parents=[common], help="render summary.txt/summary.json from artifacts in --out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("schema-check", parents=[common], help="validate headers of emitted files in --out")
    p.set_defaults(func=cmd_schema_check)
    return parser


def _config_tokens(path) -> list[str]:
    tokens = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            tokens.append(flag)
        elif value.lower() not in ("false", "no", "off"):
            tokens += [flag, value]
    return tokens


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    tokens = _config_tokens(args.config)
    sub_parser = parser._subparsers._group_actions[0].choices[args.command]
    known = {opt for action in sub_parser._actions for opt in action.option_strings}
    unknown = [t for t in tokens if t.startswith("--") and t not in known]
    if unknown:
        raise ValueError(f"config file {args.config}: unknown keys {', '.join(unknown)}")
    # flags after the config tokens win
    return parser.parse_args([args.command] + tokens + list(argv[1:]))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
        return args.func(args)
    except InvariantError as exc:
        print(f"error: internal invariant violated: {exc}", file=sys.stderr)
        return 2
    except (IngestError, CorrelationDataError, MissingArtifactError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
