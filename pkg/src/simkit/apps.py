"""Workload host applications: pings, HTTP, scans, streams and the MITM rewriter."""

import random
from dataclasses import replace
from typing import List, Optional, Sequence

from ..dataplane.effects import Effect, StartTimer
from ..dataplane.host import HostApp, HostState, host_send
from ..protocol.messages import BROADCAST, ETH_ARP, ETH_IPV4, Frame, MacAddr
from ..utils.errors import FrameError
from ..utils.logger import get_logger

logger = get_logger(__name__)

ECHO_REQUEST = 8
ECHO_REPLY = 0
HTTP_PORT = 80
CLIENT_PORT = 40000


def _send(host: HostState, frame: Frame) -> List[Effect]:
    try:
        return host_send(host, frame)
    except FrameError as e:
        logger.warning(f"{host.name}: {e}")
        return []


class Announce(HostApp):
    """One gratuitous ARP so the controller learns the host."""

    def __init__(self, name: str, start_at: int):
        self.name = name
        self.start_at = start_at

    def on_start(self, host: HostState, now: int) -> List[Effect]:
        return [StartTimer(max(self.start_at - now, 0), self.name)]

    def on_timer(self, host: HostState, name: str, data, now: int) -> List[Effect]:
        if name != self.name:
            return []
        return _send(host, Frame(src=host.mac, dst=BROADCAST, ethertype=ETH_ARP, born=now))


class Ping(HostApp):
    """
    Periodic ICMP-like echo requests.

    With ``masquerade`` each request uses a fresh source MAC derived from
    ``base_src``, which the host then accepts replies for. Replies are kept
    in ``replies`` as (time, frame).
    """

    def __init__(
        self,
        name: str,
        dst_mac: MacAddr,
        start_at: int,
        interval: int,
        count: int,
        payload_size: int = 56,
        tag: Optional[str] = None,
        masquerade: bool = False,
        base_src: Optional[MacAddr] = None,
    ):
        self.name = name
        self.dst_mac = dst_mac
        self.start_at = start_at
        self.interval = interval
        self.count = count
        self.payload_size = payload_size
        self.tag = tag or name
        self.masquerade = masquerade
        self.base_src = base_src
        self.sent = 0
        self.replies: List[tuple] = []

    def on_start(self, host: HostState, now: int) -> List[Effect]:
        if self.count <= 0:
            return []
        return [StartTimer(max(self.start_at - now, 0), self.name, 0)]

    def _source(self, host: HostState, seq: int) -> MacAddr:
        if not self.masquerade:
            return host.mac
        base = (self.base_src or host.mac).to_int()
        src = MacAddr.from_int((base + seq + 1) & 0xFFFF_FFFF_FFFF)
        host.accept_macs.add(src)
        return src

    def on_timer(self, host: HostState, name: str, data, now: int) -> List[Effect]:
        if name != self.name or data >= self.count:
            return []
        payload = data.to_bytes(4, "big") + bytes(max(self.payload_size - 4, 0))
        frame = Frame(
            src=self._source(host, data),
            dst=self.dst_mac,
            ethertype=ETH_IPV4,
            payload=payload[: max(self.payload_size, 4)],
            tp_proto="icmp",
            tp_src=data & 0xFFFF,
            tp_dst=ECHO_REQUEST,
            tag=self.tag,
            born=now,
        )
        effects = _send(host, frame)
        self.sent += 1
        if data + 1 < self.count:
            effects.append(StartTimer(self.interval, self.name, data + 1))
        return effects

    def on_receive(self, host: HostState, frame: Frame, now: int) -> List[Effect]:
        if frame.tp_proto == "icmp" and frame.tp_dst == ECHO_REPLY and frame.src == self.dst_mac:
            self.replies.append((now, frame))
        return []


class EchoResponder(HostApp):
    def on_receive(self, host: HostState, frame: Frame, now: int) -> List[Effect]:
        if frame.tp_proto != "icmp" or frame.tp_dst != ECHO_REQUEST or frame.dst != host.mac:
            return []
        reply = Frame(
            src=host.mac,
            dst=frame.src,
            ethertype=frame.ethertype,
            payload=frame.payload,
            tp_proto="icmp",
            tp_src=frame.tp_src,
            tp_dst=ECHO_REPLY,
            tag=f"{frame.tag}-reply" if frame.tag else "",
            born=now,
        )
        return _send(host, reply)


class HttpServer(HostApp):
    """Answers any PSH segment to port 80 with a single response segment."""

    def __init__(self, body: bytes):
        self.body = body
        self.requests = 0

    def on_receive(self, host: HostState, frame: Frame, now: int) -> List[Effect]:
        if frame.tp_proto != "tcp" or frame.tp_dst != HTTP_PORT or "psh" not in frame.tcp_flags:
            return []
        if frame.dst != host.mac:
            return []
        self.requests += 1
        response = Frame(
            src=host.mac,
            dst=frame.src,
            ethertype=ETH_IPV4,
            payload=self.body,
            tp_proto="tcp",
            tp_src=HTTP_PORT,
            tp_dst=frame.tp_src,
            tcp_flags=frozenset({"psh", "ack"}),
            tag="http-response",
            born=now,
        )
        return _send(host, response)


class HttpClient(HostApp):
    def __init__(self, name: str, server_mac: MacAddr, start_at: int):
        self.name = name
        self.server_mac = server_mac
        self.start_at = start_at
        self.responses: List[bytes] = []

    def on_start(self, host: HostState, now: int) -> List[Effect]:
        return [StartTimer(max(self.start_at - now, 0), self.name)]

    def on_timer(self, host: HostState, name: str, data, now: int) -> List[Effect]:
        if name != self.name:
            return []
        request = Frame(
            src=host.mac,
            dst=self.server_mac,
            ethertype=ETH_IPV4,
            payload=b"GET / HTTP/1.1\r\n\r\n",
            tp_proto="tcp",
            tp_src=CLIENT_PORT,
            tp_dst=HTTP_PORT,
            tcp_flags=frozenset({"psh", "ack"}),
            tag="http-request",
            born=now,
        )
        return _send(host, request)

    def on_receive(self, host: HostState, frame: Frame, now: int) -> List[Effect]:
        # The segment is accepted on its transport ports, whoever sent it.
        if frame.tp_proto == "tcp" and frame.tp_src == HTTP_PORT and frame.tp_dst == CLIENT_PORT:
            self.responses.append(frame.payload)
        return []


class FinScan(HostApp):
    """TCP FIN probes to a list of destination ports."""

    def __init__(
        self,
        name: str,
        dst_mac: MacAddr,
        ports: Sequence[int],
        start_at: int,
        interval: int,
        masquerade: bool = False,
        base_src: Optional[MacAddr] = None,
    ):
        self.name = name
        self.dst_mac = dst_mac
        self.ports = list(ports)
        self.start_at = start_at
        self.interval = interval
        self.masquerade = masquerade
        self.base_src = base_src

    def on_start(self, host: HostState, now: int) -> List[Effect]:
        if not self.ports:
            return []
        return [StartTimer(max(self.start_at - now, 0), self.name, 0)]

    def on_timer(self, host: HostState, name: str, data, now: int) -> List[Effect]:
        if name != self.name or data >= len(self.ports):
            return []
        src = host.mac
        if self.masquerade:
            src = MacAddr.from_int(((self.base_src or host.mac).to_int() + data + 1) & 0xFFFF_FFFF_FFFF)
        probe = Frame(
            src=src,
            dst=self.dst_mac,
            ethertype=ETH_IPV4,
            tp_proto="tcp",
            tp_src=CLIENT_PORT + data,
            tp_dst=self.ports[data],
            tcp_flags=frozenset({"fin"}),
            tag=self.name,
            born=now,
        )
        effects = _send(host, probe)
        if data + 1 < len(self.ports):
            effects.append(StartTimer(self.interval, self.name, data + 1))
        return effects


class Stream(HostApp):
    """
    Constant-rate datagram stream (iperf-like).

    Args:
        rate_pps: Frames per second; the gap is rounded to whole nanoseconds
        count: Number of frames to send
        identical: Repeat one payload instead of fresh random bytes per frame
        seed: Seed of the payload generator
    """

    def __init__(
        self,
        name: str,
        dst_mac: MacAddr,
        start_at: int,
        rate_pps: float,
        count: int,
        payload_size: int,
        ethertype: int = ETH_IPV4,
        masquerade: bool = False,
        base_src: Optional[MacAddr] = None,
        identical: bool = False,
        seed: int = 1,
    ):
        self.name = name
        self.dst_mac = dst_mac
        self.start_at = start_at
        self.gap = max(int(round(1_000_000_000 / rate_pps)), 1)
        self.count = count
        self.payload_size = payload_size
        self.ethertype = ethertype
        self.masquerade = masquerade
        self.base_src = base_src
        self.identical = identical
        self._rng = random.Random(seed)
        self._fixed: Optional[bytes] = None

    def on_start(self, host: HostState, now: int) -> List[Effect]:
        if self.count <= 0:
            return []
        return [StartTimer(max(self.start_at - now, 0), self.name, 0)]

    def _payload(self) -> bytes:
        if self.identical:
            if self._fixed is None:
                self._fixed = self._rng.randbytes(self.payload_size)
            return self._fixed
        return self._rng.randbytes(self.payload_size)

    def on_timer(self, host: HostState, name: str, data, now: int) -> List[Effect]:
        if name != self.name or data >= self.count:
            return []
        src = host.mac
        if self.masquerade:
            src = MacAddr.from_int(((self.base_src or host.mac).to_int() + data + 1) & 0xFFFF_FFFF_FFFF)
        frame = Frame(
            src=src, dst=self.dst_mac, ethertype=self.ethertype, payload=self._payload(), tag=self.name, born=now
        )
        effects = _send(host, frame)
        if data + 1 < self.count:
            effects.append(StartTimer(self.gap, self.name, data + 1))
        return effects


class MitmRewriter(HostApp):
    """Rewrites diverted segments and forwards them to the victim under its own MAC."""

    def __init__(self, victim_mac: MacAddr, find: bytes = b"good", replace_with: bytes = b"evil"):
        self.victim_mac = victim_mac
        self.find = find
        self.replace_with = replace_with
        self.rewritten = 0

    def on_receive(self, host: HostState, frame: Frame, now: int) -> List[Effect]:
        if frame.dst != host.mac or frame.src == self.victim_mac or self.find not in frame.payload:
            return []
        self.rewritten += 1
        forged = replace(
            frame,
            src=host.mac,
            dst=self.victim_mac,
            payload=frame.payload.replace(self.find, self.replace_with),
            tag="mitm",
            born=now,
        )
        return _send(host, forged)
