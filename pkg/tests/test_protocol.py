"""
Test suite for the control-plane vocabulary, flow tables and trace records.
"""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.protocol.flowtable import apply_actions, match_rule, validate_actions
from src.protocol.messages import (
    ETH_JUMBO,
    Disconnect,
    Drop,
    FeaturesReply,
    FlowMod,
    FlowModOp,
    FlowRemoved,
    FlowRemovedReason,
    FlowRule,
    Frame,
    Hello,
    MacAddr,
    MatchFields,
    Output,
    PacketIn,
    PacketOut,
    Resubmit,
    SetDlDst,
    host_mac,
    message_kind,
    wire_bytes,
)
from src.protocol.trace import (
    TraceRecord,
    decode_record,
    encode_record,
    frame_summary,
    match_from_fields,
    output_ports,
    parse_msg,
    read_trace,
    render_message,
    write_trace,
)
from src.utils.errors import FrameError, ParseError, ResubmitLoop

K1, K2, K3 = host_mac(1), host_mac(2), host_mac(3)


def _rule(priority, match, actions=(Output(1),), install_time=0, cookie=0):
    return FlowRule(cookie=cookie, priority=priority, match=match, actions=actions, install_time=install_time)


def test_mac_parse_and_render():
    """MAC addresses parse case-insensitively and render lowercase."""
    mac = MacAddr.parse("AA:bb:0C:00:00:01")
    assert str(mac) == "aa:bb:0c:00:00:01"
    assert MacAddr.from_int(mac.to_int()) == mac
    assert MacAddr.parse("ff:ff:ff:ff:ff:ff").is_multicast


def test_mac_parse_rejects_garbage():
    with pytest.raises(ParseError):
        MacAddr.parse("00:11:22")
    with pytest.raises(ParseError):
        MacAddr.parse("zz:00:00:00:00:00")


def test_wire_bytes_for_512_byte_payload():
    """A 512-byte payload costs 622 bytes in a PacketIn and 620 in a PacketOut."""
    frame = Frame(src=K1, dst=K2, payload=b"\x00" * 512)
    assert wire_bytes(PacketIn(in_port=1, frame=frame)) == 622
    assert wire_bytes(PacketOut(actions=(Output(1),), frame=frame)) == 620


def test_fixed_message_sizes():
    assert wire_bytes(Hello()) == 8
    assert wire_bytes(FeaturesReply(dpid=7)) == 32
    add = FlowMod(FlowModOp.ADD, _rule(10, MatchFields(dl_dst=K2), (SetDlDst(K3), Output(2))))
    assert wire_bytes(add) == 56 + 16
    assert wire_bytes(FlowRemoved(1, MatchFields(), FlowRemovedReason.DELETE)) == 88
    assert wire_bytes(Disconnect("dup")) == 11


def test_message_kind_splits_flow_mods():
    rule = _rule(1, MatchFields())
    assert message_kind(FlowMod(FlowModOp.ADD, rule)) == "FlowAdd"
    assert message_kind(FlowMod(FlowModOp.DELETE_STRICT, rule)) == "FlowDelete"


def test_frame_size_limits():
    """Jumbo payloads are allowed only for the jumbo ethertype."""
    Frame(src=K1, dst=K2, ethertype=ETH_JUMBO, payload=b"\x00" * 9000)
    with pytest.raises(FrameError):
        Frame(src=K1, dst=K2, payload=b"\x00" * 1501)
    with pytest.raises(FrameError):
        Frame(src=K1, dst=K2, ethertype=ETH_JUMBO, payload=b"\x00" * 9001)


def test_frame_bookkeeping_is_invisible_to_equality():
    a = Frame(src=K1, dst=K2, payload=b"x", tag="one", born=5)
    b = Frame(src=K1, dst=K2, payload=b"x", tag="two", born=9)
    assert a == b


def test_match_rule_prefers_priority_then_install_time():
    frame = Frame(src=K1, dst=K2)
    low = _rule(10, MatchFields(dl_dst=K2), cookie=1)
    old = _rule(20, MatchFields(), cookie=2, install_time=1)
    new = _rule(20, MatchFields(dl_src=K1), cookie=3, install_time=5)
    assert match_rule(frame, 1, [low, new, old]).cookie == 2
    assert match_rule(Frame(src=K3, dst=K3), 1, [low]) is None


def test_tcp_flag_match_is_subset():
    rule = MatchFields(tcp_flags=frozenset({"psh", "ack"}))
    assert rule.matches(Frame(src=K1, dst=K2, tcp_flags=frozenset({"psh", "ack", "fin"})), 1)
    assert not rule.matches(Frame(src=K1, dst=K2, tcp_flags=frozenset({"ack"})), 1)


def test_apply_actions_rewrites_copy():
    frame = Frame(src=K1, dst=K2)
    result = apply_actions(frame, (SetDlDst(K3), Output(4), Resubmit()))
    assert result.outputs == [(4, frame.with_dst(K3))]
    assert result.resubmit
    assert frame.dst == K2


def test_drop_stands_alone_and_resubmit_once():
    with pytest.raises(ValueError):
        validate_actions((Drop(), Output(1)))
    with pytest.raises(ValueError):
        validate_actions((Resubmit(), Resubmit()))
    assert apply_actions(Frame(src=K1, dst=K2), (Drop(),)).outputs == []


def test_second_resubmit_raises():
    with pytest.raises(ResubmitLoop):
        apply_actions(Frame(src=K1, dst=K2), (Resubmit(),), resubmitted=True)


def test_render_and_parse_packet_in():
    frame = Frame(src=K1, dst=K2, payload=b"hello", tp_proto="tcp", tp_src=80, tp_dst=40000,
                  tcp_flags=frozenset({"psh", "ack"}))
    text = render_message(PacketIn(in_port=3, frame=frame), seq=7, cause=4)
    parsed = parse_msg(text)
    assert parsed.name == "PacketIn"
    assert (parsed.seq, parsed.cause) == (7, 4)
    summary = frame_summary(parsed)
    assert summary == frame.summary()


def test_render_flow_mod_match_and_actions():
    rule = _rule(100, MatchFields(in_port=1, dl_dst=K2, ethertype=0x0800), (SetDlDst(K3), Output(2)))
    parsed = parse_msg(render_message(FlowMod(FlowModOp.ADD, rule), seq=1))
    assert parsed.cause == -1
    assert match_from_fields(parsed) == rule.match
    assert output_ports(parsed) == [2]


def test_decode_rejects_bad_lines():
    with pytest.raises(ParseError) as e:
        decode_record("1\ts1\tc0\tcontrol\t8", line_number=3)
    assert e.value.line_number == 3
    with pytest.raises(ParseError):
        decode_record("x\ts1\tc0\tcontrol\t8\tHello seq=1 cause=-")
    with pytest.raises(ParseError):
        decode_record("1\ts1\tc0\tbogus\t8\tHello seq=1 cause=-")


def test_encode_rejects_tabs():
    with pytest.raises(ValueError):
        encode_record(TraceRecord(t=0, src="s\t1", dst="c0", kind="control", msg="Hello seq=0 cause=-"))


def test_trace_file_round_trip(tmp_path):
    records = [
        TraceRecord(0, "s1", "c0", "control", "Hello seq=0 cause=-", 8),
        TraceRecord(500_000, "c0", "s1", "control", "FeaturesRequest seq=1 cause=0", 8),
    ]
    path = tmp_path / "trace.log"
    write_trace(records, path)
    assert read_trace(path) == records
    assert path.read_text().count("\n") == 2


names = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-", min_size=1, max_size=8)


@given(
    t=st.integers(min_value=0, max_value=2**62),
    src=names,
    dst=names,
    kind=st.sampled_from(["control", "data", "note"]),
    wire=st.integers(min_value=0, max_value=10_000),
    seq=st.integers(min_value=0, max_value=10**9),
)
def test_record_round_trip_property(t, src, dst, kind, wire, seq):
    rec = TraceRecord(t=t, src=src, dst=dst, kind=kind, msg=f"Hello seq={seq} cause=-", wire_bytes=wire)
    assert decode_record(encode_record(rec)) == rec


@given(priorities=st.lists(st.integers(min_value=0, max_value=0xFFFF), min_size=1, max_size=12))
def test_highest_priority_always_wins(priorities):
    table = [_rule(p, MatchFields(), cookie=i, install_time=i) for i, p in enumerate(priorities)]
    chosen = match_rule(Frame(src=K1, dst=K2), 1, table)
    top = max(priorities)
    assert chosen.priority == top
    assert chosen.cookie == priorities.index(top)
