"""
Command-line entry point.

Subcommands: fetch, decompose, report, scan, grid, simulate. Settings come
from built-in defaults, then an optional JSON config file (``--config``),
then command-line flags. ``SESSION_SPLIT_OFFLINE=1`` forces offline mode
regardless of either.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional

from . import __version__
from .decompose import DividendPolicy, decompose_series, wealth_curves
from .exceptions import DataError, DegenerateError, InsufficientDataError, SessionSplitError
from .ingest import (
    DEFAULT_ENDPOINT_TEMPLATE,
    FATAL_RULES,
    PriceSeries,
    back_adjust_splits,
    fetch_history,
    offline_requested,
    parse_events_csv,
    parse_price_csv,
    validate_series,
)
from .nullmodel import GbmParams, calibration_metrics
from .report import (
    PanelSpec,
    ReportBundle,
    ReportMetadata,
    emit_report_json,
    emit_series_csv,
    render_grid_svg,
    render_histogram_svg,
    render_wealth_panel_svg,
)
from .stats import DEFAULT_EDGES, Thresholds, build_histogram, classify_suspicion, variance_split

logger = logging.getLogger("session_split")

CONFIG_KEYS = {
    "instruments", "start", "end", "policy", "alpha", "min_straightness", "n_permutations",
    "seed", "data_dir", "output_dir", "endpoint_template", "offline", "jobs", "timeout",
    "raw_splits",
}
DEFAULTS = dict(
    instruments=[], start=None, end=None, policy="reinvest", alpha=0.01, min_straightness=0.8,
    n_permutations=10000, seed=0, data_dir="data", output_dir="output",
    endpoint_template=DEFAULT_ENDPOINT_TEMPLATE, offline=False, jobs=1, timeout=30.0,
    raw_splits=False,
)
SUMMARY_HEADER = ["rank", "symbol", "pValue", "logWealthGap", "cumIntraday", "cumOvernight",
                  "straightnessOvernight", "straightnessIntraday", "flagged", "error"]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    instruments: list[str] = field(default_factory=list)
    start: Optional[date] = None
    end: Optional[date] = None
    policy: DividendPolicy = DividendPolicy.REINVEST
    thresholds: Thresholds = Thresholds()
    data_dir: Path = Path("data")
    output_dir: Path = Path("output")
    endpoint_template: str = DEFAULT_ENDPOINT_TEMPLATE
    offline: bool = False
    jobs: int = 1
    timeout: float = 30.0
    raw_splits: bool = False


def _iso_day(text):
    try:
        return date.fromisoformat(str(text))
    except ValueError:
        raise UsageError(f"invalid date {text!r}; expected YYYY-MM-DD") from None


def _symbol(text: str) -> str:
    if not text or "/" in text or "\\" in text or text in (".", ".."):
        raise argparse.ArgumentTypeError(f"invalid symbol {text!r}")
    return text


def build_config(args) -> RunConfig:
    values = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config}: {exc}") from None
        unknown = set(loaded) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    start = _iso_day(values["start"]) if values["start"] else None
    end = _iso_day(values["end"]) if values["end"] else None
    if start and end and not start < end:
        raise UsageError(f"start {start} must be before end {end}")
    try:
        thresholds = Thresholds(alpha=float(values["alpha"]),
                                min_straightness=float(values["min_straightness"]),
                                n_permutations=int(values["n_permutations"]),
                                seed=int(values["seed"]))
        policy = DividendPolicy.parse(values["policy"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return RunConfig(
        instruments=[_symbol(s) for s in values["instruments"]],
        start=start,
        end=end,
        policy=policy,
        thresholds=thresholds,
        data_dir=Path(values["data_dir"]),
        output_dir=Path(values["output_dir"]),
        endpoint_template=values["endpoint_template"],
        offline=bool(values["offline"]) or offline_requested(),
        jobs=max(1, int(values["jobs"])),
        timeout=float(values["timeout"]),
        raw_splits=bool(values["raw_splits"]),
    )


def _sha256(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def fetch_symbol(symbol: str, cfg: RunConfig) -> Path:
    start = cfg.start or date(1900, 1, 1)
    end = cfg.end or date.today()
    docs = fetch_history(symbol, start, end, cfg.endpoint_template, cfg.timeout, cfg.offline)
    target = cfg.data_dir / symbol
    target.mkdir(parents=True, exist_ok=True)
    (target / "prices.csv").write_bytes(docs.prices)
    (target / "dividends.csv").write_bytes(docs.dividends)
    (target / "splits.csv").write_bytes(docs.splits)
    logger.info("%s: wrote raw documents to %s (retrieved %s)", symbol, target,
                docs.retrieved_at.isoformat(timespec="seconds"))
    return target


def load_series(symbol: str, cfg: RunConfig) -> tuple[PriceSeries, dict]:
    """Read, validate and date-filter one instrument from ``data_dir/<symbol>/``.

    Missing data is fetched first unless running offline.
    """
    folder = cfg.data_dir / symbol
    prices_path = folder / "prices.csv"
    if not prices_path.exists():
        if cfg.offline:
            raise DataError(f"{symbol}: no data at {prices_path} (offline)")
        fetch_symbol(symbol, cfg)
    raw = {"prices": prices_path.read_bytes()}
    for name in ("dividends", "splits"):
        path = folder / f"{name}.csv"
        if path.exists():
            raw[name] = path.read_bytes()
    series, skipped = parse_price_csv(raw["prices"].decode("utf-8"), instrument_id=symbol)
    events = parse_events_csv(raw.get("dividends", b"").decode("utf-8"),
                              raw.get("splits", b"").decode("utf-8"))
    series = series.with_events(events)
    if cfg.raw_splits:
        series = back_adjust_splits(series)
    series = series.between(cfg.start, cfg.end)
    violations = validate_series(series)
    fatal = [v for v in violations if v.rule in FATAL_RULES]
    for v in violations:
        if v.rule not in FATAL_RULES:
            logger.warning("%s: %s %s %s", symbol, v.date, v.rule, v.message)
    if fatal:
        v = fatal[0]
        raise DataError(f"{symbol}: {len(fatal)} invalid records, first {v.date} {v.rule} {v.message}")
    provenance = {name: _sha256(data) for name, data in raw.items()}
    provenance["source"] = f"{symbol}/prices.csv"
    provenance["skippedRows"] = skipped
    provenance["rawSplits"] = cfg.raw_splits
    return series, provenance


def analyse(symbol: str, cfg: RunConfig):
    """Full single-instrument pipeline; returns ``(srs, curves, bundle)``."""
    series, provenance = load_series(symbol, cfg)
    srs = decompose_series(series, cfg.policy)
    curves = wealth_curves(srs)
    metrics = classify_suspicion(srs, cfg.thresholds, curves)
    try:
        variance = variance_split(srs)
    except (DegenerateError, InsufficientDataError):
        variance = None
    hists = (build_histogram(srs.overnight, DEFAULT_EDGES), build_histogram(srs.intraday, DEFAULT_EDGES))
    bundle = ReportBundle(
        metadata=ReportMetadata(instrument_id=symbol, policy=cfg.policy.value,
                                date_range=(srs.dates[0], srs.dates[-1]),
                                data_provenance=provenance, tool_version=__version__,
                                seed=cfg.thresholds.seed),
        curves=curves, metrics=metrics, histograms=hists,
        thresholds=cfg.thresholds, variance=variance,
    )
    return srs, curves, bundle


def write_report(symbol: str, cfg: RunConfig, scale: str = "log"):
    srs, curves, bundle = analyse(symbol, cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    spec = PanelSpec(title=symbol, scale=scale, y_floor=-1.0 if scale == "linear" else None)
    _write(out / f"{symbol}.report.json", emit_report_json(bundle))
    _write(out / f"{symbol}.panel.svg", render_wealth_panel_svg(curves, spec))
    _write(out / f"{symbol}.hist.svg", render_histogram_svg(*bundle.histograms, title=symbol))
    _write(out / f"{symbol}.series.csv", emit_series_csv(srs, curves))
    return bundle


def _write(path: Path, text: str):
    path.write_bytes(text.encode("utf-8"))


def _summary_key(row):
    if row["error"]:
        return (1, 0.0, 0.0, row["symbol"])
    return (0, row["p"], -row["gap"], row["symbol"])


def scan_summary_csv(rows: list[dict]) -> str:
    """Rank rows by p-value, then larger log-wealth gap, then symbol; failures last."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for rank, row in enumerate(sorted(rows, key=_summary_key), start=1):
        m = row.get("metrics")
        if m is None:
            w.writerow([rank, row["symbol"], "", "", "", "", "", "", "", row["error"]])
            continue
        w.writerow([rank, row["symbol"], f"{m.p_value:.12g}", f"{m.log_wealth_gap:.12g}",
                    f"{m.cum_intraday:.12g}", f"{m.cum_overnight:.12g}",
                    "" if m.straightness_overnight is None else f"{m.straightness_overnight:.12g}",
                    "" if m.straightness_intraday is None else f"{m.straightness_intraday:.12g}",
                    str(m.flagged).lower(), ""])
    return out.getvalue()


def _scan_one(symbol, cfg, scale):
    try:
        m = write_report(symbol, cfg, scale).metrics
        return {"symbol": symbol, "metrics": m, "p": m.p_value, "gap": m.log_wealth_gap, "error": ""}
    except SessionSplitError as exc:
        logger.error("%s: %s", symbol, exc)
        return {"symbol": symbol, "metrics": None, "error": f"{type(exc).__name__}: {exc}"}


def _instruments(args, cfg):
    symbols = list(getattr(args, "symbol", None) or []) or cfg.instruments
    if not symbols:
        raise UsageError("no instruments given (use --symbol or the config 'instruments' key)")
    return symbols


def cmd_fetch(args, cfg):
    if cfg.offline:
        raise DataError("fetch requires network access but offline mode is active")
    for symbol in _instruments(args, cfg):
        fetch_symbol(symbol, cfg)
    return 0


def cmd_decompose(args, cfg):
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    for symbol in _instruments(args, cfg):
        series, _ = load_series(symbol, cfg)
        srs = decompose_series(series, cfg.policy)
        _write(cfg.output_dir / f"{symbol}.series.csv", emit_series_csv(srs, wealth_curves(srs)))
    return 0


def cmd_report(args, cfg):
    for symbol in _instruments(args, cfg):
        m = write_report(symbol, cfg, args.scale).metrics
        print(f"{symbol}: cumIntraday={m.cum_intraday:.4f} cumOvernight={m.cum_overnight:.4f} "
              f"p={m.p_value:.4g} flagged={str(m.flagged).lower()}")
    return 0


def cmd_scan(args, cfg):
    symbols = _instruments(args, cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        rows = list(pool.map(lambda s: _scan_one(s, cfg, args.scale), symbols))
    _write(cfg.output_dir / "scan_summary.csv", scan_summary_csv(rows))
    failed = sum(1 for r in rows if r["error"])
    print(f"scanned {len(rows)} instruments, {failed} failed, "
          f"{sum(1 for r in rows if r['metrics'] and r['metrics'].flagged)} flagged")
    return 0


def cmd_grid(args, cfg):
    symbols = _instruments(args, cfg)
    panels = []
    for symbol in symbols:
        path = cfg.output_dir / f"{symbol}.panel.svg"
        if not path.exists():
            raise DataError(f"{symbol}: no panel at {path}; run 'report' or 'scan' first")
        panels.append(path.read_text(encoding="utf-8"))
    target = cfg.output_dir / args.output
    _write(target, render_grid_svg(panels, columns=args.columns))
    print(f"wrote {target}")
    return 0


def cmd_simulate(args, cfg):
    params = GbmParams(n_days=args.n_days, start_price=100.0,
                       sigma_overnight=args.sigma_overnight,
                       sigma_intraday=args.sigma_intraday if args.sigma_intraday is not None
                       else args.sigma_overnight * 2 ** 0.5,
                       seed=cfg.thresholds.seed)
    if args.trials < 100:
        raise UsageError("--trials must be at least 100")
    metrics = list(calibration_metrics(params, args.trials, cfg.thresholds))
    flagged = sum(m.flagged for m in metrics)
    fraction = flagged / args.trials
    doc = {
        "trials": args.trials,
        "flagged": flagged,
        "flaggedFraction": float(f"{fraction:.12g}"),
        "alpha": cfg.thresholds.alpha,
        "minStraightness": cfg.thresholds.min_straightness,
        "nPermutations": cfg.thresholds.n_permutations,
        "seed": cfg.thresholds.seed,
        "nDays": params.n_days,
        "sigmaOvernight": params.sigma_overnight,
        "sigmaIntraday": float(f"{params.sigma_intraday:.12g}"),
        "toolVersion": __version__,
    }
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write(cfg.output_dir / "simulate.json", json.dumps(doc, indent=2) + "\n")
    print(f"flagged fraction: {fraction:.4f} ({flagged}/{args.trials})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file providing defaults")
    common.add_argument("--data-dir", dest="data_dir", help="raw data root: <dir>/<symbol>/prices.csv ...")
    common.add_argument("--output-dir", dest="output_dir", help="where reports are written")
    common.add_argument("--offline", action="store_true", default=None,
                        help="never touch the network (also SESSION_SPLIT_OFFLINE=1)")
    common.add_argument("--start", help="first day, YYYY-MM-DD, inclusive")
    common.add_argument("--end", help="last day, YYYY-MM-DD, inclusive")
    common.add_argument("--policy", choices=["reinvest", "drop"], help="dividend policy")
    common.add_argument("--endpoint-template", dest="endpoint_template",
                        help="download URL with {symbol} {period1} {period2} {events}")
    common.add_argument("--timeout", type=float, help="per-request timeout in seconds")
    common.add_argument("--raw-splits", dest="raw_splits", action="store_true", default=None,
                        help="prices are not split-adjusted; back-adjust using splits.csv")
    common.add_argument("-v", "--verbose", action="count", default=0)

    stats = argparse.ArgumentParser(add_help=False)
    stats.add_argument("--alpha", type=float, help="permutation test significance level")
    stats.add_argument("--min-straightness", dest="min_straightness", type=float,
                       help="minimum log-wealth R^2 for flagging")
    stats.add_argument("--n-permutations", dest="n_permutations", type=int)
    stats.add_argument("--seed", type=int, help="permutation / simulation seed")

    symbols = argparse.ArgumentParser(add_help=False)
    symbols.add_argument("--symbol", "-s", action="append", type=_symbol,
                         help="instrument symbol (repeatable)")

    parser = argparse.ArgumentParser(prog="session-split", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("fetch", parents=[common, symbols], help="download raw documents into the data dir")
    sub.add_parser("decompose", parents=[common, symbols],
                   help="write <symbol>.series.csv with per-day session returns and wealth")
    for name, helptext in (("report", "full pipeline for each symbol: JSON, SVG panel, histogram"),
                           ("scan", "report every instrument and write a ranked scan_summary.csv")):
        p = sub.add_parser(name, parents=[common, stats, symbols], help=helptext)
        p.add_argument("--scale", choices=["log", "linear"], default="log", help="panel y-axis")
        if name == "scan":
            p.add_argument("--jobs", type=int, help="instruments processed in parallel")
    p = sub.add_parser("grid", parents=[common, symbols], help="assemble panels into one grid SVG")
    p.add_argument("--columns", type=int, default=3)
    p.add_argument("--output", default="grid.svg", help="file name inside the output dir")
    p = sub.add_parser("simulate", parents=[common, stats],
                       help="false-positive calibration on zero-drift random walks")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--n-days", dest="n_days", type=int, default=252)
    p.add_argument("--sigma-overnight", dest="sigma_overnight", type=float, default=0.005)
    p.add_argument("--sigma-intraday", dest="sigma_intraday", type=float, default=None,
                   help="defaults to sqrt(2) x the overnight sigma")
    return parser


COMMANDS = dict(fetch=cmd_fetch, decompose=cmd_decompose, report=cmd_report, scan=cmd_scan,
                grid=cmd_grid, simulate=cmd_simulate)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"session-split: error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"session-split: {exc}", file=sys.stderr)
        return 1
    except SessionSplitError as exc:
        print(f"session-split: {exc}", file=sys.stderr)
        return 1
