"""
Test suite for scenarios, scenario files, links, metrics and the event engine.
"""

import pytest
from pydantic import ValidationError

from src.protocol.messages import Output, Resubmit, SetDlDst, host_mac
from src.protocol.trace import encode_record
from src.simkit.catalog import CATALOG, EXTRA, build_scenario, catalog_entries
from src.simkit.engine import Simulation
from src.simkit.links import TokenBucket, control_bucket
from src.simkit.metrics import FlowStats, Metrics, format_kv, jitter_mad, metrics_summary
from src.simkit.scenario import FirewallSpec, Scenario, parse_actions
from src.simkit.scenario_file import dump_scenario, parse_policy, parse_scenario, parse_sections
from src.utils.durations import MS, SECOND, US, parse_duration
from src.utils.errors import ConfigError, EventOverflow, ParseError, UnknownScenario

SMALL = """
# one switch, two hosts
[scenario lan]
duration = 500ms

[switch s1]
dpid = 0x1

[host k1]
mac = 00:00:00:00:00:01
switch = s1
port = 1
zone = office

[host k2]
mac = 00:00:00:00:00:02
switch = s1
port = 2

[zone office]
members = k2

[workload k1]
kind = announce
start = 10ms

[workload k2]
kind = announce
start = 11ms

[workload k1]
kind = ping
dst = k2
start = 50ms
count = 3
"""


@pytest.mark.parametrize("text,expected", [
    ("100ms", 100 * MS),
    ("1.5s", 1500 * MS),
    ("250us", 250 * US),
    ("42", 42),
    (7, 7),
])
def test_parse_duration(text, expected):
    assert parse_duration(text) == expected


@pytest.mark.parametrize("bad", ["fast", "-1ms", -5, True, "10 minutes"])
def test_parse_duration_rejects(bad):
    with pytest.raises(ConfigError):
        parse_duration(bad)


def test_scenario_rejects_dangling_references():
    with pytest.raises(ValidationError):
        Scenario(name="x", hosts=[{"name": "k1", "mac": "00:00:00:00:00:01", "switch": "s9", "port": 1}])
    with pytest.raises(ValidationError):
        Scenario(name="x", switches=[{"name": "s1", "dpid": 1}, {"name": "s1", "dpid": 2}])
    with pytest.raises(ValidationError):
        Scenario(name="x", controller={"distributed": True, "names": "c0"})
    with pytest.raises(ValidationError):
        Scenario(name="x", switches=[{"name": "s1", "dpid": 0}])


def test_agent_index_must_fit_matrix():
    with pytest.raises(ValidationError):
        Scenario(
            name="x",
            switches=[{"name": "s1", "dpid": 1}],
            agents=[{"node": "s1", "technique": "PathUpdate", "id": 3, "m": 2}],
        )
    with pytest.raises(ValidationError):
        Scenario(
            name="x",
            switches=[{"name": "s1", "dpid": 1}],
            agents=[{"node": "s1", "technique": "Teleport"}],
        )


def test_firewall_rule_text():
    fw = FirewallSpec(name="fw1", rules="ethertype 0x88cc accept; src 00:00:00:00:00:01 drop")
    rules = fw.firewall_rules()
    assert rules[0].ethertype == 0x88CC
    assert rules[1].src == host_mac(1)
    with pytest.raises(ValidationError):
        FirewallSpec(name="fw1", rules="port 80 drop")


def test_parse_actions():
    assert parse_actions("mod_dl_dst:00:00:00:00:00:02,resubmit") == (SetDlDst(host_mac(2)), Resubmit())
    assert parse_actions("output:3") == (Output(3),)
    with pytest.raises(ValueError):
        parse_actions("flood")


def test_build_scenario_merges_knobs_and_fields():
    scn = build_scenario("rendezvous_path_update", m=3, seed=9, duration="2s")
    assert scn.seed == 9
    assert scn.duration == 2 * SECOND
    assert len(scn.agents) == 3
    assert scn.family == "rendezvous"
    with pytest.raises(UnknownScenario):
        build_scenario("no_such_scenario")
    with pytest.raises(ConfigError):
        build_scenario("firewall_bypass", warp_factor=9)


def test_every_catalog_scenario_validates():
    for name in list(CATALOG) + list(EXTRA):
        assert build_scenario(name).name == name


def test_catalog_entries_list_baseline_last_on_request():
    assert [e.name for e in catalog_entries()] == list(CATALOG)
    assert [e.name for e in catalog_entries(include_extra=True)][-1] == "benign_baseline"


def test_switch_id_catalog_grants_its_claims():
    scn = build_scenario("switch_id_distributed")
    s2 = next(spec for spec in scn.switches if spec.name == "s2")
    agent = next(spec for spec in scn.agents if spec.node == "s2")
    assert s2.claim_dpid == agent.claims
    assert 1 in s2.claim_dpid


def test_parse_scenario_file():
    scn = parse_scenario(SMALL)
    assert scn.name == "lan"
    assert scn.duration == 500 * MS
    assert scn.switches[0].dpid == 1
    assert [h.name for h in scn.hosts] == ["k1", "k2"]
    assert [w.kind for w in scn.workload] == ["announce", "announce", "ping"]
    assert scn.zone_of(scn.host("k2")) == "office"


@pytest.mark.parametrize("text,line", [
    ("[scenario x]\nduration\n", 2),
    ("duration=1s\n", 1),
    ("[bogus]\n", 1),
    ("[switch s1]\ndpid=1\ndpid=2\n", 3),
    ("[switch s1\n", 1),
])
def test_scenario_file_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as e:
        parse_scenario(text)
    assert e.value.line_number == line


def test_invalid_scenario_file_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_scenario("[host k1]\nmac=00:00:00:00:00:01\nswitch=s9\nport=1\n")


def test_sections_repeat_in_order():
    sections = parse_sections(["[link]", "a=s1", "[link]", "a=s2"])
    assert [(kind, body["a"]) for kind, _, body, _ in sections] == [("link", "s1"), ("link", "s2")]


@pytest.mark.parametrize("name", ["mitm_good_evil", "switch_id_distributed", "nids_portscan"])
def test_dumped_scenario_reads_back(name):
    scn = build_scenario(name)
    assert parse_scenario(dump_scenario(scn)) == scn


def test_parse_policy_fills_zones_from_members():
    policy = parse_policy(
        "[host k1]\nmac=00:00:00:00:00:01\nswitch=s1\nport=1\n"
        "[host k2]\nmac=00:00:00:00:00:02\nswitch=s2\nport=1\nzone=right\n"
        "[zone left]\nmembers=k1\n"
        "[waypoint]\nbetween=left,right\nvia=fw1\n"
    )
    assert policy.zones == {"k1": "left", "k2": "right"}
    assert policy.required("left", "right") == ["fw1"]
    with pytest.raises(ParseError):
        parse_policy("[host k1]\nmac=00:00:00:00:00:01\n")


def test_token_bucket_refills_with_sim_time():
    bucket = TokenBucket(tokens=1000, rate=1000)
    assert bucket.consume(600, 0)
    assert not bucket.consume(600, 0)
    assert bucket.consume(600, SECOND // 2)
    assert bucket.tokens_at(10 * SECOND) == 1000


def test_control_bucket():
    assert control_bucket(None) is None
    assert control_bucket(10e6).tokens_at(0) == pytest.approx(12_500)
    assert control_bucket(8.0).tokens_at(0) >= 9000 + 110


def test_jitter_is_mean_absolute_deviation():
    assert jitter_mad([0, 10, 20, 40]) == pytest.approx(40 / 9)
    assert jitter_mad([0, 10, 20]) == 0.0
    assert jitter_mad([5]) == 0.0


def test_metrics_summary_and_kv():
    m = Metrics()
    flow = m.flow("t")
    flow.record_offer(0)
    flow.record_offer(1)
    m.duration = SECOND
    summary = metrics_summary(m)
    assert summary["frames_offered"] == 2
    assert summary["frames_lost"] == 2
    assert summary["loss"] == 1.0
    assert summary["flow.t.offered"] == 2
    text = format_kv(summary)
    assert "loss=1.000\n" in text
    assert text.splitlines()[0] == f"duration_ns={SECOND}"


def test_flow_span():
    stats = FlowStats("x")
    assert stats.span == 0
    stats.record_offer(10)
    stats.arrivals.append(50)
    assert stats.span == 40


def test_engine_runs_scenario_file():
    sim = Simulation(parse_scenario(SMALL))
    records, metrics = sim.run()
    assert [r.t for r in records] == sorted(r.t for r in records)
    assert metrics.flows["ping-2"].delivered == 3
    assert len(sim.agents) == 0
    assert metrics_summary(metrics)["duration_ns"] == 500 * MS


def test_engine_is_deterministic():
    first = Simulation(build_scenario("benign_baseline", seed=5)).run()[0]
    second = Simulation(build_scenario("benign_baseline", seed=5)).run()[0]
    assert [encode_record(r) for r in first] == [encode_record(r) for r in second]


def test_records_number_consecutively():
    records, _ = Simulation(build_scenario("benign_baseline")).run()
    assert [r.parsed.seq for r in records] == list(range(len(records)))
    assert all(r.parsed.cause < r.parsed.seq for r in records)


def test_engine_configuration_errors():
    with pytest.raises(ConfigError):
        Simulation(build_scenario("benign_baseline"), enforce=True)
    with pytest.raises(ConfigError):
        Simulation(build_scenario("benign_baseline")).run(until=0)
    clash = parse_scenario(SMALL.replace("port = 2", "port = 1"))
    with pytest.raises(ConfigError):
        Simulation(clash)


def test_event_limit_overflows():
    with pytest.raises(EventOverflow):
        Simulation(build_scenario("benign_baseline"), event_limit=2).run()


def test_run_can_be_resumed():
    sim = Simulation(build_scenario("benign_baseline"))
    early, _ = sim.run(until=40 * MS)
    count = len(early)
    records, _ = sim.run()
    assert len(records) > count
