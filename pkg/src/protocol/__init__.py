"""Control-plane message vocabulary, flow-table semantics and trace records."""

from .flowtable import ActionResult, apply_actions, match_rule, validate_actions
from .messages import (
    BROADCAST,
    DEFAULT_RECOGNIZED_ETHERTYPES,
    ETH_ARP,
    ETH_IPV4,
    ETH_JUMBO,
    ETH_LLDP,
    JUMBO_ETHERTYPES,
    PACKET_IN_OVERHEAD,
    PACKET_OUT_OVERHEAD,
    Action,
    ControlMessage,
    Disconnect,
    Drop,
    FeaturesReply,
    FeaturesRequest,
    FlowMod,
    FlowModOp,
    FlowRemoved,
    FlowRemovedReason,
    FlowRule,
    Frame,
    FrameSummary,
    Hello,
    MacAddr,
    MatchFields,
    Output,
    PacketIn,
    PacketInReason,
    PacketOut,
    Resubmit,
    Role,
    RoleReply,
    RoleRequest,
    SetDlDst,
    ToController,
    host_mac,
    message_kind,
    wire_bytes,
)
from .trace import TraceRecord, decode_record, encode_record, parse_msg, read_trace, write_trace
