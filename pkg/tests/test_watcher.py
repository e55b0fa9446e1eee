"""
Test suite for the PacketIn/PacketOut watcher, waypoint policy and audit report.
"""

import pytest

from src.protocol.messages import (
    FeaturesReply,
    FlowMod,
    FlowModOp,
    FlowRemoved,
    FlowRemovedReason,
    FlowRule,
    Frame,
    MatchFields,
    Output,
    PacketIn,
    PacketOut,
    host_mac,
)
from src.protocol.trace import NO_CAUSE, TraceRecord, render_message, render_note
from src.utils.durations import MS
from src.utils.errors import OutOfOrder
from src.watcher.audit import audit_report
from src.watcher.policy import (
    Decision,
    PacketOutContext,
    PolicyHost,
    Waypoint,
    WaypointPolicy,
    enforce_waypoint,
)
from src.watcher.watcher import Alert, AlertKind, Watcher

K1, K2, K3 = host_mac(1), host_mac(2), host_mac(3)


class TraceBuilder:
    """Builds control records with consecutive sequence numbers."""

    def __init__(self):
        self.records = []

    def control(self, t, src, dst, msg, cause=NO_CAUSE):
        seq = len(self.records)
        self.records.append(TraceRecord(t, src, dst, "control", render_message(msg, seq, cause)))
        return seq

    def note(self, t, src="s1", text="tick"):
        seq = len(self.records)
        self.records.append(TraceRecord(t, src, "-", "note", render_note(text, seq)))
        return seq


@pytest.fixture
def trace():
    return TraceBuilder()


@pytest.fixture
def policy():
    """k1, k3 in zone left on s1; k2 in zone right on s2; left<->right must cross fw1."""
    return WaypointPolicy(
        hosts=[
            PolicyHost(name="k1", mac=str(K1), switch="s1", port=1, zone="left"),
            PolicyHost(name="k3", mac=str(K3), switch="s1", port=2, zone="left"),
            PolicyHost(name="k2", mac=str(K2), switch="s2", port=1, zone="right"),
        ],
        waypoints=[Waypoint(between="left,right", via="fw1")],
    )


def _kinds(alerts):
    return [a.kind for a in alerts]


def _teleport(trace, t, frame=None, out_frame=None, egress="s2", port=1):
    frame = frame or Frame(src=K1, dst=K2, payload=b"ping")
    pin = trace.control(t, "s1", "c0", PacketIn(in_port=1, frame=frame))
    pout = trace.control(t + MS, "c0", egress, PacketOut(actions=(Output(port),), frame=out_frame or frame), pin)
    return pin, pout


def test_packet_out_without_flow_mod_is_stealth(trace):
    pin, pout = _teleport(trace, 0)
    trace.note(20 * MS)
    watcher = Watcher()
    alerts = watcher.observe_all(trace.records)
    assert _kinds(alerts) == [AlertKind.STEALTH_OOB]
    assert alerts[0].evidence == (pin, pout)
    assert alerts[0].t == MS + watcher.window


def test_flow_mod_within_window_clears_pending(trace):
    pin, _ = _teleport(trace, 0)
    rule = FlowRule(cookie=1, priority=100, match=MatchFields(dl_dst=K2), actions=(Output(3),))
    trace.control(3 * MS, "c0", "s1", FlowMod(FlowModOp.ADD, rule), pin)
    trace.note(20 * MS)
    assert Watcher().observe_all(trace.records) == []


def test_pending_pair_is_flushed_at_end_of_trace(trace):
    _teleport(trace, 0)
    watcher = Watcher()
    for rec in trace.records:
        assert watcher.observe(rec) == []
    assert _kinds(watcher.finish()) == [AlertKind.STEALTH_OOB]


def test_packet_out_without_packet_in(trace):
    trace.control(0, "c0", "s2", PacketOut(actions=(Output(1),), frame=Frame(src=K1, dst=K2)))
    alerts = Watcher().observe_all(trace.records)
    assert _kinds(alerts) == [AlertKind.UNCORRELATED_PACKET_OUT]


def test_rewritten_payload_is_uncorrelated(trace):
    pin, pout = _teleport(trace, 0, out_frame=Frame(src=K1, dst=K2, payload=b"evil"))
    alerts = Watcher().observe_all(trace.records)
    uncorrelated = [a for a in alerts if a.kind is AlertKind.UNCORRELATED_PACKET_OUT]
    assert uncorrelated[0].evidence == (pout, pin)


def test_rewritten_destination_is_still_correlated(trace):
    _teleport(trace, 0, out_frame=Frame(src=K1, dst=K3, payload=b"ping"))
    assert AlertKind.UNCORRELATED_PACKET_OUT not in _kinds(Watcher().observe_all(trace.records))


def test_moving_mac(trace):
    trace.control(0, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    moved = trace.control(MS, "s2", "c0", PacketIn(in_port=2, frame=Frame(src=K1, dst=K2)))
    alerts = [a for a in Watcher().observe_all(trace.records) if a.kind is AlertKind.MOVING_MAC]
    assert len(alerts) == 1
    assert alerts[0].subjects == (str(K1), "s1:1", "s2:2")
    assert alerts[0].evidence == (moved,)
    assert not alerts[0].blocking


def test_strict_mobility_blocks_the_move(trace):
    trace.control(0, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    moved = trace.control(MS, "s2", "c0", PacketIn(in_port=2, frame=Frame(src=K1, dst=K2)))
    watcher = Watcher(strict_mobility=True)
    watcher.observe_all(trace.records)
    assert moved in watcher.blocked


def test_packet_in_despite_live_rule(trace):
    """A miss for traffic a settled rule should match is reported once."""
    rule = FlowRule(cookie=9, priority=100, match=MatchFields(dl_dst=K2), actions=(Output(3),))
    trace.control(0, "c0", "s1", FlowMod(FlowModOp.ADD, rule))
    trace.control(2 * MS, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    first = trace.control(10 * MS, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    trace.control(20 * MS, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    alerts = [a for a in Watcher().observe_all(trace.records) if a.kind is AlertKind.PACKET_IN_WITH_LIVE_FLOW]
    assert [a.evidence for a in alerts] == [(first,)]
    assert alerts[0].subjects == ("s1", "cookie:9")


def test_switch_deleted_rule_makes_next_miss_a_live_flow(trace):
    rule = FlowRule(cookie=4, priority=100, match=MatchFields(dl_src=K1, dl_dst=K2), actions=(Output(3),))
    trace.control(0, "c0", "s1", FlowMod(FlowModOp.ADD, rule))
    removed = trace.control(
        50 * MS, "s1", "c0", FlowRemoved(rule.cookie, rule.match, FlowRemovedReason.DELETE, rule.priority)
    )
    miss = trace.control(50 * MS + 100_000, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    trace.control(50 * MS + 200_000, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    trace.control(50 * MS + 500_000, "c0", "s1", FlowMod(FlowModOp.ADD, rule))
    trace.control(50 * MS + 600_000, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))

    alerts = [a for a in Watcher().observe_all(trace.records) if a.kind is AlertKind.PACKET_IN_WITH_LIVE_FLOW]
    assert [a.evidence for a in alerts] == [(miss, removed)]
    assert alerts[0].detail == "rule deleted by the switch"


def test_controller_deleted_rule_is_gone(trace):
    rule = FlowRule(cookie=4, priority=100, match=MatchFields(dl_src=K1, dl_dst=K2), actions=(Output(3),))
    trace.control(0, "c0", "s1", FlowMod(FlowModOp.ADD, rule))
    trace.control(50 * MS, "c0", "s1", FlowMod(FlowModOp.DELETE_STRICT, rule))
    trace.control(51 * MS, "s1", "c0", FlowRemoved(rule.cookie, rule.match, FlowRemovedReason.DELETE, rule.priority))
    trace.control(52 * MS, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    assert AlertKind.PACKET_IN_WITH_LIVE_FLOW not in _kinds(Watcher().observe_all(trace.records))


def test_idle_expiry_is_not_a_live_flow(trace):
    rule = FlowRule(cookie=4, priority=100, match=MatchFields(dl_src=K1, dl_dst=K2), actions=(Output(3),))
    trace.control(0, "c0", "s1", FlowMod(FlowModOp.ADD, rule))
    trace.control(50 * MS, "s1", "c0", FlowRemoved(rule.cookie, rule.match, FlowRemovedReason.IDLE_TIMEOUT, rule.priority))
    trace.control(52 * MS, "s1", "c0", PacketIn(in_port=1, frame=Frame(src=K1, dst=K2)))
    assert AlertKind.PACKET_IN_WITH_LIVE_FLOW not in _kinds(Watcher().observe_all(trace.records))


def test_dpid_collision_reported_once_per_claimant(trace):
    trace.control(0, "s1", "c0", FeaturesReply(7))
    clash = trace.control(MS, "s2", "c0", FeaturesReply(7))
    trace.control(2 * MS, "s2", "c0", FeaturesReply(7))
    trace.control(3 * MS, "s1", "c0", FeaturesReply(7))
    alerts = Watcher().observe_all(trace.records)
    assert _kinds(alerts) == [AlertKind.DPID_COLLISION]
    assert alerts[0].subjects == ("7", "s1", "s2")
    assert alerts[0].evidence == (clash,)


def test_waypoint_violation_blocks_cross_zone_packet_out(trace, policy):
    pin, pout = _teleport(trace, 0)
    watcher = Watcher(policy=policy)
    alerts = [a for a in watcher.observe_all(trace.records) if a.kind is AlertKind.WAYPOINT_VIOLATION]
    assert len(alerts) == 1
    assert alerts[0].blocking
    assert alerts[0].evidence == (pout, pin)
    assert "bypasses fw1" in alerts[0].detail
    assert pout in watcher.blocked


def test_same_zone_packet_out_is_allowed(trace, policy):
    _teleport(trace, 0, frame=Frame(src=K1, dst=K3), egress="s1", port=2)
    alerts = Watcher(policy=policy).observe_all(trace.records)
    assert AlertKind.WAYPOINT_VIOLATION not in _kinds(alerts)


def test_watcher_rejects_out_of_order_records(trace):
    trace.note(5 * MS)
    trace.note(MS)
    watcher = Watcher()
    watcher.observe(trace.records[0])
    with pytest.raises(OutOfOrder):
        watcher.observe(trace.records[1])


def test_alert_needs_evidence():
    with pytest.raises(ValueError):
        Alert(0, AlertKind.STEALTH_OOB, (), ())


@pytest.mark.parametrize("origin,egress,expected", [
    (None, ("s2", 1), "no causal PacketIn"),
    (("s1", 9), ("s2", 1), "unresolvable"),
    (("s1", 1), ("s2", 7), "egress s2:7 unresolvable"),
])
def test_enforce_waypoint_fails_closed(policy, origin, egress, expected):
    frame = Frame(src=K1, dst=K2).summary()
    decision, reason = enforce_waypoint(policy, PacketOutContext(origin, egress[0], (egress[1],), frame))
    assert decision is Decision.DENY
    assert expected in reason


def test_enforce_waypoint_allows_traversed_path(policy):
    frame = Frame(src=K1, dst=K2).summary()
    ctx = PacketOutContext(("s1", 1), "s2", (1,), frame, path=("fw1",))
    assert enforce_waypoint(policy, ctx) == (Decision.ALLOW, "ok")
    assert enforce_waypoint(policy, PacketOutContext(("s1", 1), "s2", (), frame))[0] is Decision.DENY


def test_directed_waypoint_applies_one_way():
    policy = WaypointPolicy(waypoints=[Waypoint(between="a,b", via="fw1", directed=True)])
    assert policy.required("a", "b") == ["fw1"]
    assert policy.required("b", "a") == []
    assert policy.required("a", "a") == []


def test_policy_rejects_duplicate_hosts():
    host = PolicyHost(name="k1", mac=str(K1), switch="s1", port=1)
    with pytest.raises(ValueError):
        WaypointPolicy(hosts=[host, host])


def test_empty_audit_report():
    assert audit_report([]).to_lines() == ["alerts.total=0"]


def test_audit_report_names_techniques(trace, policy):
    _teleport(trace, 0)
    trace.control(10 * MS, "s1", "c0", FeaturesReply(7))
    trace.control(11 * MS, "s2", "c0", FeaturesReply(7))
    report = audit_report(Watcher(policy=policy).observe_all(trace.records))
    lines = report.to_lines()
    assert lines[0] == f"alerts.total={len(report.alerts)}"
    assert "technique.SwitchId=DpidCollision" in lines
    assert "technique.OobForward=StealthOob+WaypointViolation" in lines
    assert "verdicts.deny=1" in lines
    assert "residual.steganography=undetectable" in lines
    assert report.denied == 1
    assert [a.t for a in report.alerts] == sorted(a.t for a in report.alerts)
