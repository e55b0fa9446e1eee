"""
Test suite for the command-line surface and the message sequence chart.
"""

import argparse
import io

import pytest

from src.cli.commands import (
    EXIT_BLOCKED,
    EXIT_ENGINE,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    WatcherMode,
    combined_exit,
    execute_run,
    main,
    parse_override,
    run_many,
)
from src.cli.msc import render_msc, select_records
from src.protocol.messages import FeaturesRequest, Frame, Hello, Output, PacketOut, host_mac
from src.protocol.trace import TraceRecord, render_message, render_note, write_trace
from src.simkit.catalog import CATALOG

SCENARIO_FILE = """
[scenario lan]
duration = 300ms

[switch s1]
dpid = 1

[host k1]
mac = 00:00:00:00:00:01
switch = s1
port = 1

[host k2]
mac = 00:00:00:00:00:02
switch = s1
port = 2

[workload k2]
kind = announce
start = 10ms

[workload k1]
kind = ping
dst = k2
start = 50ms
count = 2
"""

POLICY_FILE = """
[host k2]
mac = 00:00:00:00:00:02
switch = s2
port = 1
zone = right
"""


def _cli(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


@pytest.fixture
def handshake_trace(tmp_path):
    """A two-record control trace between s1 and c0 plus a note."""
    path = tmp_path / "handshake.log"
    write_trace([
        TraceRecord(0, "s1", "c0", "control", render_message(Hello(), 0), 8),
        TraceRecord(500_000, "c0", "s1", "control", render_message(FeaturesRequest(), 1, 0), 8),
        TraceRecord(600_000, "s1", "-", "note", render_note("idle", 2), 0),
    ], path)
    return path


@pytest.fixture
def orphan_trace(tmp_path):
    """A PacketOut that no PacketIn asked for."""
    frame = Frame(src=host_mac(1), dst=host_mac(2), payload=b"x")
    path = tmp_path / "orphan.log"
    write_trace([
        TraceRecord(0, "c0", "s2", "control", render_message(PacketOut(actions=(Output(1),), frame=frame), 0), 109),
    ], path)
    return path


def test_list_prints_the_catalog():
    code, out = _cli("list")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert len(lines) == len(CATALOG) == 11
    assert lines[0].split("\t")[0] == "firewall_bypass"
    assert all(len(line.split("\t")) == 3 for line in lines)


def test_list_all_adds_the_baseline():
    _, out = _cli("list", "--all")
    assert out.splitlines()[-1].startswith("benign_baseline\tbaseline\t")


def test_unknown_command_is_usage_error():
    assert _cli("frobnicate")[0] == EXIT_USAGE
    assert _cli("run")[0] == EXIT_USAGE


def test_run_writes_results(tmp_path):
    out_dir = tmp_path / "baseline"
    code, out = _cli("run", "benign_baseline", "--out", str(out_dir), "--watcher", "observe")
    assert code == EXIT_OK
    assert out == f"benign_baseline\tok\t{out_dir}\n"
    assert (out_dir / "trace.log").read_text().count("\n") > 0
    assert (out_dir / "metrics.kv").read_text().startswith("duration_ns=")
    assert (out_dir / "watcher.kv").exists()


def test_run_without_watcher_skips_watcher_file(tmp_path):
    code, _ = _cli("run", "benign_baseline", "--out", str(tmp_path), "--duration", "200ms")
    assert code == EXIT_OK
    assert not (tmp_path / "watcher.kv").exists()
    assert "duration_ns=200000000\n" in (tmp_path / "metrics.kv").read_text()


def test_run_several_names_uses_subdirectories(tmp_path):
    code, out = _cli("run", "benign_baseline", "nids_portscan", "--out", str(tmp_path), "--jobs", "2")
    assert code == EXIT_OK
    assert [line.split("\t")[0] for line in out.splitlines()] == ["benign_baseline", "nids_portscan"]
    assert (tmp_path / "benign_baseline" / "trace.log").exists()
    assert (tmp_path / "nids_portscan" / "trace.log").exists()


@pytest.mark.parametrize("argv", [
    ("run", "benign_baseline", "--duration", "0"),
    ("run", "benign_baseline", "--duration", "soon"),
    ("run", "no_such_scenario"),
    ("run", "benign_baseline", "--seed", "-1"),
    ("run", "firewall_bypass", "--set", "warp=9"),
])
def test_invalid_runs_exit_64(argv, tmp_path):
    assert _cli(*argv, "--out", str(tmp_path))[0] == EXIT_USAGE


def test_run_scenario_file(tmp_path):
    path = tmp_path / "lan.scn"
    path.write_text(SCENARIO_FILE)
    code, out = _cli("run", str(path), "--out", str(tmp_path / "out"))
    assert code == EXIT_OK
    assert out.startswith("lan\tok\t")


def test_missing_scenario_file_exits_64(tmp_path):
    assert _cli("run", str(tmp_path / "missing.scn"), "--out", str(tmp_path))[0] == EXIT_USAGE


def test_engine_failure_exits_1(monkeypatch):
    def explode(self, until=None):
        raise RuntimeError("boom")

    monkeypatch.setattr("src.cli.commands.Simulation.run", explode)
    outcome = execute_run(RunConfig(scenario="benign_baseline"))
    assert outcome.exit_code == EXIT_ENGINE
    assert outcome.status == "error"
    assert outcome.error == "boom"


def test_run_config():
    assert RunConfig(scenario="x.scn").is_file
    assert RunConfig(scenario="dir/x").is_file
    assert not RunConfig(scenario="firewall_bypass").is_file
    assert RunConfig(scenario="x", duration="1s").duration == 1_000_000_000
    assert RunConfig(scenario="x", watcher="enforce").watcher is WatcherMode.ENFORCE
    with pytest.raises(ValueError):
        RunConfig(scenario="x", seed=2**64)


def test_run_many_keeps_order():
    configs = [RunConfig(scenario=name, duration="100ms") for name in ("nids_portscan", "benign_baseline")]
    assert [o.name for o in run_many(configs, jobs=2)] == ["nids_portscan", "benign_baseline"]


@pytest.mark.parametrize("codes,expected", [
    ([], EXIT_OK),
    ([EXIT_OK, EXIT_BLOCKED], EXIT_BLOCKED),
    ([EXIT_BLOCKED, EXIT_ENGINE], EXIT_ENGINE),
    ([EXIT_ENGINE, EXIT_USAGE, EXIT_OK], EXIT_USAGE),
])
def test_combined_exit(codes, expected):
    assert combined_exit(codes) == expected


@pytest.mark.parametrize("text,expected", [
    ("m=3", ("m", 3)),
    ("cookie=0xbad", ("cookie", 0xBAD)),
    ("masquerade=False", ("masquerade", False)),
    ("rate_pps=2009.6", ("rate_pps", 2009.6)),
    ("slot=50ms", ("slot", "50ms")),
    ("bits=", ("bits", "")),
])
def test_parse_override(text, expected):
    assert parse_override(text) == expected


def test_parse_override_needs_a_key():
    with pytest.raises(argparse.ArgumentTypeError):
        parse_override("=3")
    with pytest.raises(argparse.ArgumentTypeError):
        parse_override("m")


def test_detect_reports_alerts(orphan_trace):
    code, out = _cli("detect", "--trace", str(orphan_trace))
    assert code == EXIT_OK
    assert "alerts.total=1\n" in out
    assert "alerts.UncorrelatedPacketOut=1\n" in out


def test_detect_enforce_exits_2_on_deny(orphan_trace, tmp_path):
    policy = tmp_path / "policy.scn"
    policy.write_text(POLICY_FILE)
    code, out = _cli("detect", "--trace", str(orphan_trace), "--policy", str(policy), "--enforce")
    assert code == EXIT_BLOCKED
    assert "verdicts.deny=1\n" in out
    assert _cli("detect", "--trace", str(orphan_trace), "--policy", str(policy))[0] == EXIT_OK


def test_detect_bad_trace_exits_64(tmp_path):
    bad = tmp_path / "bad.log"
    bad.write_text("not a trace line\n")
    assert _cli("detect", "--trace", str(bad))[0] == EXIT_USAGE
    assert _cli("detect", "--trace", str(tmp_path / "missing.log"))[0] == EXIT_USAGE


def test_msc_of_empty_trace_is_header_only(tmp_path):
    empty = tmp_path / "empty.log"
    empty.write_text("")
    code, out = _cli("msc", "--trace", str(empty))
    assert code == EXIT_OK
    assert out == "     t(ms)\n"


def test_msc_draws_arrows(handshake_trace):
    code, out = _cli("msc", "--trace", str(handshake_trace))
    assert code == EXIT_OK
    header, hello, request = out.splitlines()
    assert header.split() == ["t(ms)", "s1", "c0"]
    assert "|------------>|" in hello and hello.endswith("Hello seq=0")
    assert "|<------------|" in request and request.endswith("FeaturesRequest seq=1")
    assert request.startswith("     0.500")


def test_msc_filters(handshake_trace):
    _, out = _cli("msc", "--trace", str(handshake_trace), "--kind", "Hello")
    assert len(out.splitlines()) == 2
    _, out = _cli("msc", "--trace", str(handshake_trace), "--node", "s9")
    assert out == "     t(ms)\n"


def test_select_records_skips_notes_and_data():
    records = [
        TraceRecord(0, "s1", "c0", "control", render_message(Hello(), 0)),
        TraceRecord(1, "s1", "-", "note", render_note("x", 1)),
    ]
    assert select_records(records) == records[:1]
    assert render_msc([]) == "     t(ms)\n"
