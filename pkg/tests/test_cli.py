import csv
import io
import json
import shutil
import xml.etree.ElementTree as ET

import pytest
from conftest import FIXTURES, STUB_DOCS, stub_template

from session_split.cli import main, scan_summary_csv
from session_split.stats import SuspicionMetrics

NS = {"svg": "http://www.w3.org/2000/svg"}


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("SESSION_SPLIT_OFFLINE", raising=False)


def run(*argv):
    return main([str(a) for a in argv])


def offline(out, *extra):
    return ("--offline", "--data-dir", FIXTURES, "--output-dir", out, *extra)


def test_report_on_fixture(tmp_path, no_network, capsys):
    code = run("report", "--symbol", "SPX", "--policy", "reinvest", *offline(tmp_path))
    assert code == 0
    assert no_network == []
    data = json.loads((tmp_path / "SPX.report.json").read_text())
    assert data["metadata"]["instrumentId"] == "SPX"
    assert data["metadata"]["dataProvenance"]["skippedRows"] == 2
    assert data["finalOvernightWealth"] > 1 > data["finalIntradayWealth"]
    root = ET.fromstring((tmp_path / "SPX.panel.svg").read_text())
    assert [p.get("class") for p in root.findall(".//svg:polyline", NS)] == ["overnight", "intraday"]
    assert (tmp_path / "SPX.hist.svg").exists() and (tmp_path / "SPX.series.csv").exists()
    assert "SPX: cumIntraday=" in capsys.readouterr().out


def test_report_missing_data_offline(tmp_path, no_network):
    assert run("report", "--symbol", "NOPE", *offline(tmp_path)) == 1
    assert no_network == []


def test_offline_env_var(tmp_path, monkeypatch, no_network):
    monkeypatch.setenv("SESSION_SPLIT_OFFLINE", "1")
    assert run("report", "--symbol", "NOPE", "--data-dir", tmp_path, "--output-dir", tmp_path) == 1
    assert run("fetch", "--symbol", "SPX", "--data-dir", tmp_path) == 1
    assert no_network == []


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    [],
    ["report", "--symbol", "SPX", "--bogus"],
    ["report", "--symbol", "SPX", "--policy", "keep"],
    ["report", "--offline"],
    ["report", "--symbol", "SPX", "--start", "2021-13-01"],
    ["report", "--symbol", "SPX", "--start", "2021-06-30", "--end", "2021-01-01"],
    ["report", "--symbol", "../etc"],
    ["report", "--symbol", "SPX", "--alpha", "0"],
    ["simulate", "--trials", "10"],
])
def test_usage_errors(argv, tmp_path):
    assert run(*argv, *(["--data-dir", tmp_path] if argv and argv[0] == "report" else [])) == 2


def test_help_lists_subcommands(capsys):
    assert run("--help") == 0
    out = capsys.readouterr().out
    for name in ("fetch", "decompose", "report", "scan", "grid", "simulate"):
        assert name in out
    assert run("report", "--help") == 0
    assert "--policy" in capsys.readouterr().out


def test_simulate_calibration(tmp_path, capsys):
    assert run("simulate", "--trials", 1000, "--alpha", 0.01, "--seed", 7, "--output-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "simulate.json").read_text())
    assert doc["trials"] == 1000 and doc["seed"] == 7
    assert doc["flaggedFraction"] <= 0.03
    assert f"flagged fraction: {doc['flaggedFraction']:.4f}" in capsys.readouterr().out


def test_decompose_writes_series(tmp_path, no_network):
    assert run("decompose", "--symbol", "RW", *offline(tmp_path)) == 0
    rows = list(csv.reader(io.StringIO((tmp_path / "RW.series.csv").read_text())))
    assert rows[0][0] == "Date" and len(rows) == 1 + 1500
    assert rows[1][1] == ""


def test_date_filter_inclusive(tmp_path):
    assert run("report", "--symbol", "SPX", "--start", "2000-01-03", "--end", "2000-12-29",
               "--n-permutations", 200, *offline(tmp_path)) == 0
    data = json.loads((tmp_path / "SPX.report.json").read_text())
    assert data["metadata"]["dateRange"] == ["2000-01-03", "2000-12-29"]


def test_scan_ranks_and_survives_failures(tmp_path, no_network):
    code = run("scan", "-s", "RW", "-s", "NOPE", "-s", "NDX", "-s", "SPX", "--jobs", 2,
               "--n-permutations", 2000, *offline(tmp_path))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "scan_summary.csv").read_text())))
    assert [r["rank"] for r in rows] == ["1", "2", "3", "4"]
    assert rows[-1]["symbol"] == "NOPE" and rows[-1]["error"].startswith("DataError")
    ok = rows[:-1]
    keys = [(float(r["pValue"]), -float(r["logWealthGap"]), r["symbol"]) for r in ok]
    assert keys == sorted(keys)
    assert {r["symbol"]: r["flagged"] for r in ok}["NDX"] == "true"
    for sym in ("RW", "NDX", "SPX"):
        assert (tmp_path / f"{sym}.report.json").exists()


def _metrics(p, gap):
    return SuspicionMetrics(0.0, 0.0, gap, None, None, 0.0, p, False)


def test_summary_tie_breaks():
    rows = [
        {"symbol": s, "metrics": _metrics(p, g), "p": p, "gap": g, "error": ""}
        for s, p, g in [("B", 0.01, 1.0), ("A", 0.01, 1.0), ("C", 0.01, 2.0), ("D", 0.001, 0.1)]
    ] + [{"symbol": "AA", "metrics": None, "error": "DataError: x"}]
    text = scan_summary_csv(rows)
    assert [r["symbol"] for r in csv.DictReader(io.StringIO(text))] == ["D", "C", "A", "B", "AA"]
    assert text == scan_summary_csv(list(reversed(rows)))


def test_grid_after_scan(tmp_path):
    syms = ["RW", "NDX", "SPX", "SPLT"]
    args = [x for s in syms for x in ("-s", s)]
    assert run("scan", *args, "--n-permutations", 200, *offline(tmp_path)) == 0
    assert run("grid", *args, "--output-dir", tmp_path, "--columns", 3) == 0
    root = ET.fromstring((tmp_path / "grid.svg").read_text())
    assert root.get("data-rows") == "2" and root.get("data-columns") == "3"
    assert [c.find("svg:title", NS).text for c in root.findall("svg:svg", NS)] == syms


def test_grid_missing_panel(tmp_path):
    assert run("grid", "-s", "SPX", "--output-dir", tmp_path) == 1


def test_outputs_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("scan", "-s", "SPX", "-s", "NDX", "--jobs", 2, "--seed", 3,
                   "--n-permutations", 500, *offline(out)) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert files == sorted(p.name for p in outs[1].iterdir())
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instruments": ["RW"], "policy": "drop", "seed": 5,
                               "n_permutations": 300, "data_dir": str(FIXTURES),
                               "output_dir": str(tmp_path), "offline": True}))
    assert run("report", "--config", cfg, "--seed", 9) == 0
    data = json.loads((tmp_path / "RW.report.json").read_text())
    assert data["metadata"]["policy"] == "drop"
    assert data["metadata"]["seed"] == 9
    assert data["thresholds"]["nPermutations"] == 300


def test_config_errors(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instrumentz": ["RW"]}))
    assert run("report", "--config", cfg) == 2
    assert run("report", "--config", tmp_path / "missing.json") == 2
    cfg.write_text("{not json")
    assert run("report", "--config", cfg) == 2


def test_fetch_writes_documents(tmp_path, stub_server):
    code = run("fetch", "-s", "^GSPC", "--data-dir", tmp_path, "--start", "1990-01-01",
               "--end", "2021-06-30", "--endpoint-template", stub_template(stub_server))
    assert code == 0
    folder = tmp_path / "^GSPC"
    assert (folder / "prices.csv").read_bytes() == STUB_DOCS["history"]
    assert (folder / "dividends.csv").read_bytes() == STUB_DOCS["div"]
    assert (folder / "splits.csv").read_bytes() == STUB_DOCS["split"]
    assert len(stub_server.seen) == 3


def test_fetch_http_error_is_data_error(tmp_path, stub_server):
    stub_server.mode = "404"
    assert run("fetch", "-s", "X", "--data-dir", tmp_path,
               "--endpoint-template", stub_template(stub_server)) == 1


def test_report_fetches_missing_data(tmp_path, stub_server):
    # a single-bar document cannot be decomposed, so fetch succeeds and analysis fails cleanly
    code = run("report", "-s", "X", "--data-dir", tmp_path, "--output-dir", tmp_path,
               "--endpoint-template", stub_template(stub_server))
    assert code == 1
    assert (tmp_path / "X" / "prices.csv").exists()


def test_raw_splits_flag(tmp_path):
    data = tmp_path / "data"
    shutil.copytree(FIXTURES / "SPLT", data / "SPLT")
    base = ("report", "-s", "SPLT", "--offline", "--data-dir", data, "--n-permutations", 200)
    assert run(*base, "--output-dir", tmp_path / "raw") == 0
    assert run(*base, "--raw-splits", "--output-dir", tmp_path / "adj") == 0
    raw = json.loads((tmp_path / "raw" / "SPLT.report.json").read_text())
    adj = json.loads((tmp_path / "adj" / "SPLT.report.json").read_text())
    # unadjusted, the split day reads as a 75% overnight crash
    assert raw["finalOvernightWealth"] < 0.5 * adj["finalOvernightWealth"]
    assert adj["metadata"]["dataProvenance"]["rawSplits"] is True
    assert raw["finalIntradayWealth"] == adj["finalIntradayWealth"]


def test_invalid_data_is_exit_one(tmp_path):
    folder = tmp_path / "BAD"
    folder.mkdir()
    (folder / "prices.csv").write_text("Date,Open,High,Low,Close,Adj Close,Volume\n"
                                       "2021-01-05,1,1,1,1,1,0\n2021-01-05,1,1,1,1,1,0\n")
    assert run("report", "-s", "BAD", "--offline", "--data-dir", tmp_path, "--output-dir", tmp_path) == 1
    (folder / "prices.csv").write_text("garbage\n")
    assert run("report", "-s", "BAD", "--offline", "--data-dir", tmp_path, "--output-dir", tmp_path) == 1


def test_shipped_index_manifest_loads():
    from session_split.cli import build_config, build_parser
    args = build_parser().parse_args(["scan", "--config", str(FIXTURES.parent / "config" / "indices.json")])
    cfg = build_config(args)
    assert len(cfg.instruments) == 21 and cfg.instruments[0] == "^GSPC"
    assert cfg.thresholds.alpha == 0.01 and cfg.jobs == 4
