"""
Scenario catalog.

Every builder returns a validated ``Scenario``; keyword overrides tune the
knobs a scenario exposes (``seed``, ``duration``, ``m``, ``policy``,
``bits``, ``mode``, ``masquerade``, ``mitm_rule``, ``rate_pps``...).
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

from ..controller.admission import AdmissionPolicy
from ..protocol.messages import ETH_JUMBO, host_mac
from ..teleport.secrets import SecretMatrix, secret_dpid
from ..utils.durations import MS, SECOND, parse_duration
from ..utils.errors import ConfigError, UnknownScenario
from ..utils.logger import get_logger
from .scenario import Scenario

logger = get_logger(__name__)

FIREWALL_RULES = "ethertype 0x88cc accept; src {k1} drop; src {k3} drop"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    family: str
    description: str
    builder: Callable[..., Dict[str, Any]]


def _mac(i: int) -> str:
    return str(host_mac(i))


def _host(name: str, index: int, switch: str, port: int, **extra) -> Dict[str, Any]:
    return {"name": name, "mac": _mac(index), "switch": switch, "port": port, **extra}


def _announce(hosts: List[Dict[str, Any]], start: int = 10 * MS) -> List[Dict[str, Any]]:
    return [{"kind": "announce", "src": h["name"], "start": start + k * MS} for k, h in enumerate(hosts)]


def _split_switches() -> Dict[str, Any]:
    """s1 and s2 with fw1 on the only link between them."""
    return {
        "switches": [{"name": "s1", "dpid": 1}, {"name": "s2", "dpid": 2}],
        "firewalls": [{
            "name": "fw1",
            "rules": FIREWALL_RULES.format(k1=_mac(1), k3=_mac(3)),
            "default": "Drop",
        }],
        "links": [
            {"a": "s1", "a_port": 3, "b": "fw1", "b_port": 1},
            {"a": "fw1", "a_port": 2, "b": "s2", "b_port": 3},
        ],
    }


def _four_switches(agent_switches: Dict[str, Dict[str, Any]]) -> Dict[str, Any]:
    """s1 - s3 - s2 with s4 hanging off s3; one host per switch."""
    switches = []
    for index, name in enumerate(("s1", "s2", "s3", "s4"), start=1):
        switches.append({"name": name, "dpid": index, **agent_switches.get(name, {})})
    hosts = [
        _host("k1", 1, "s1", 1),
        _host("k2", 2, "s2", 1),
        _host("k3", 3, "s3", 4),
        _host("k4", 4, "s4", 1),
    ]
    links = [
        {"a": "s1", "a_port": 3, "b": "s3", "b_port": 1},
        {"a": "s3", "a_port": 2, "b": "s2", "b_port": 3},
        {"a": "s3", "a_port": 3, "b": "s4", "b_port": 3},
    ]
    return {"switches": switches, "hosts": hosts, "links": links}


# Switch order for rendezvous agents: s1, s2, s4, then s3 on the shared path.
RENDEZVOUS_ORDER = ("s1", "s2", "s4", "s3")


def firewall_bypass(masquerade: bool = True, count: int = 5) -> Dict[str, Any]:
    hosts = [
        _host("k1", 1, "s1", 1, zone="left", masquerade_macs=True),
        _host("k3", 3, "s1", 2, zone="left"),
        _host("k2", 2, "s2", 1, zone="right"),
        _host("k4", 4, "s2", 2, zone="right"),
    ]
    return {
        **_split_switches(),
        "hosts": hosts,
        "workload": _announce(hosts) + [{
            "kind": "ping", "src": "k1", "dst": "k2", "start": 50 * MS, "interval": 100 * MS,
            "count": count, "masquerade": masquerade, "tag": "bypass",
        }],
        "waypoints": [{"between": "left,right", "via": "fw1"}],
    }


def nids_portscan(masquerade: bool = True) -> Dict[str, Any]:
    hosts = [_host("k1", 1, "s1", 1, masquerade_macs=True), _host("k2", 2, "s2", 1)]
    return {
        "switches": [{"name": "s1", "dpid": 1}, {"name": "s2", "dpid": 2}],
        "nids": [{"name": "ids1"}],
        "hosts": hosts,
        "links": [
            {"a": "s1", "a_port": 3, "b": "ids1", "b_port": 1},
            {"a": "ids1", "a_port": 2, "b": "s2", "b_port": 3},
        ],
        "workload": _announce(hosts) + [{
            "kind": "finscan", "src": "k1", "dst": "k2", "start": 50 * MS, "interval": 10 * MS,
            "ports": "20,21,22,23,25,53,80,110,143,443", "masquerade": masquerade, "tag": "finscan",
        }],
    }


def rendezvous_path_update(m: int = 2) -> Dict[str, Any]:
    if not 1 <= m <= len(RENDEZVOUS_ORDER):
        raise ValueError(f"path update rendezvous supports 1..{len(RENDEZVOUS_ORDER)} agents, got {m}")
    malicious = {name: {"inject_packet_in": True} for name in RENDEZVOUS_ORDER[:m]}
    base = _four_switches(malicious)
    agents = [
        {"node": name, "technique": "PathUpdate", "id": i, "m": m, "start": 100 * MS + (i - 1) * 20 * MS}
        for i, name in enumerate(RENDEZVOUS_ORDER[:m], start=1)
    ]
    return {**base, "agents": agents, "workload": _announce(base["hosts"])}


def rendezvous_path_reset(bits: Optional[str] = None, mode: str = "delete", slot: Any = "100ms") -> Dict[str, Any]:
    slot_ns = parse_duration(slot)
    n_bits = len(bits) if bits else 32
    start = 200 * MS
    base = _four_switches({"s1": {"ignore_rules": True}})
    flow = {"flow_src": _mac(1), "flow_dst": _mac(2)}
    agents = [
        {"node": "s1", "technique": "PathReset", "role": "sender", "start": start, "slot": slot_ns,
         "bits": bits, "mode": mode, **flow},
        {"node": "s2", "technique": "PathReset", "role": "receiver", "start": start, "slot": slot_ns, **flow},
    ]
    pings = int((start + (n_bits + 1) * slot_ns - 20 * MS) // (100 * 1000))
    return {
        **base,
        "duration": start + (n_bits + 1) * slot_ns,
        "agents": agents,
        "workload": _announce(base["hosts"]) + [{
            "kind": "probe", "src": "k1", "dst": "k2", "start": 20 * MS, "interval": "100us",
            "count": pings, "payload_size": 56, "tag": "background",
        }],
    }


def _switch_id(m: int, policy: AdmissionPolicy, distributed: bool) -> Dict[str, Any]:
    controller_names = ["c1", "c2"] if distributed else ["c0"]
    homes = {"s1": controller_names[0], "s2": controller_names[-1]}
    matrix = SecretMatrix(m)
    base = _four_switches({
        name: {"claim_dpid": [secret_dpid(matrix, r, c) for r, c in matrix.row_and_column(i)]}
        for i, name in enumerate(RENDEZVOUS_ORDER[:m], start=1)
    })
    for sw in base["switches"]:
        sw["controller"] = homes.get(sw["name"], controller_names[0])
    agents = []
    for i, name in enumerate(RENDEZVOUS_ORDER[:m], start=1):
        agents.append({
            "node": name, "technique": "SwitchId", "id": i, "m": m,
            "start": 100 * MS + (i - 1) * 2 * MS,
            "controller": homes.get(name, controller_names[0]),
        })
    return {
        **base,
        "controller": {"policy": policy, "distributed": distributed, "names": controller_names},
        "agents": agents,
        "workload": _announce(base["hosts"]),
    }


def rendezvous_switch_id(m: int = 2, policy: Any = AdmissionPolicy.DENY_SECOND) -> Dict[str, Any]:
    return _switch_id(m, AdmissionPolicy(policy), distributed=False)


def switch_id_distributed(m: int = 2) -> Dict[str, Any]:
    scn = _switch_id(m, AdmissionPolicy.COEXIST_ROLES, distributed=True)
    # s2 first claims s1's own identity at c2, then runs its rendezvous claims.
    matrix = SecretMatrix(m)
    claims = [1] + [secret_dpid(matrix, i, j) for i, j in matrix.row_and_column(2)]
    scn["agents"][1]["claims"] = claims
    scn["switches"][1]["claim_dpid"] = claims
    return scn


def exfiltration_disconnected(size: int = 4096, chunk: int = 1024) -> Dict[str, Any]:
    hosts = [
        _host("k1", 1, "s1", 1, zone="internal"),
        _host("k3", 3, "s3", 1, zone="internal"),
        _host("k2", 2, "s2", 1, zone="isolated", masquerade_macs=True),
    ]
    return {
        "switches": [{"name": "s1", "dpid": 1}, {"name": "s2", "dpid": 2}, {"name": "s3", "dpid": 3}],
        "firewalls": [{"name": "fw1", "rules": "ethertype 0x88cc accept", "default": "Accept"}],
        "hosts": hosts,
        "links": [
            {"a": "s1", "a_port": 3, "b": "fw1", "b_port": 1},
            {"a": "fw1", "a_port": 2, "b": "s3", "b_port": 3},
        ],
        "agents": [
            {"node": "k2", "technique": "OobForward", "role": "sender", "dst": _mac(1), "start": 50 * MS,
             "payload_size": size, "chunk": chunk},
            {"node": "k1", "technique": "OobForward", "role": "receiver"},
        ],
        "workload": _announce(hosts),
        "waypoints": [{"between": "internal,isolated", "via": "fw1"}],
    }


def evade_policy_conflicts(size: int = 2024, chunk: int = 506) -> Dict[str, Any]:
    hosts = [
        _host("k1", 1, "s1", 1, zone="left"),
        _host("k3", 3, "s1", 2, zone="left", masquerade_macs=True, arbitrary_ethertype=True),
        _host("k2", 2, "s2", 1, zone="right"),
        _host("k4", 4, "s2", 2, zone="right"),
    ]
    return {
        **_split_switches(),
        "hosts": hosts,
        "agents": [
            {"node": "k3", "technique": "OobForward", "role": "sender", "stealth": True, "dst": _mac(2),
             "start": 50 * MS, "payload_size": size, "chunk": chunk},
            {"node": "k2", "technique": "OobForward", "role": "receiver"},
        ],
        "workload": _announce(hosts),
        "waypoints": [{"between": "left,right", "via": "fw1"}],
    }


def dos_regression(repeats: int = 100) -> Dict[str, Any]:
    hosts = [_host("k1", 1, "s1", 1, arbitrary_ethertype=True), _host("k2", 2, "s2", 1)]
    return {
        "switches": [{"name": "s1", "dpid": 1}, {"name": "s2", "dpid": 2}],
        "hosts": hosts,
        "links": [{"a": "s1", "a_port": 3, "b": "s2", "b_port": 3}],
        "workload": _announce(hosts) + [
            {"kind": "stream", "src": "k1", "dst": "k2", "start": 50 * MS, "interval": MS, "count": repeats,
             "payload_size": 9000, "ethertype": ETH_JUMBO, "identical": True, "tag": "jumbo"},
            {"kind": "ping", "src": "k1", "dst": "k2", "start": 300 * MS, "interval": 50 * MS, "count": 3,
             "tag": "after"},
        ],
    }


def mitm_good_evil(mitm_rule: bool = True) -> Dict[str, Any]:
    hosts = [
        _host("k1", 1, "s1", 1, zone="left"),
        _host("k3", 3, "s1", 2, zone="left"),
        _host("k2", 2, "s2", 1, zone="right"),
    ]
    scn = {
        **_split_switches(),
        "hosts": hosts,
        "workload": _announce(hosts) + [
            {"kind": "http", "src": "k1", "dst": "k3", "start": 50 * MS, "tag": "http"},
            {"kind": "mitm", "src": "k2", "dst": "k1", "find": "good", "replace": "evil"},
        ],
        "waypoints": [{"between": "left,right", "via": "fw1"}],
    }
    scn["firewalls"][0]["rules"] = f"ethertype 0x88cc accept; src {_mac(2)} drop"
    scn["firewalls"][0]["default"] = "Accept"
    if mitm_rule:
        scn["switches"][0]["local_rewrite_rules"] = True
        scn["rules"] = [{
            "switch": "s1", "priority": 50001, "cookie": 0xBAD, "in_port": 2,
            "dl_src": _mac(3), "dl_dst": _mac(1), "tp_src": 80, "tcp_flags": "psh+ack",
            "actions": f"mod_dl_dst:{_mac(2)},resubmit",
        }]
    return scn


def oob_throughput(rate_pps: float = 2009.6, payload_size: int = 512) -> Dict[str, Any]:
    hosts = [_host("k1", 1, "s1", 1, arbitrary_ethertype=True), _host("k2", 2, "s2", 1)]
    return {
        "switches": [{"name": "s1", "dpid": 1}, {"name": "s2", "dpid": 2}],
        "hosts": hosts,
        "links": [{"a": "s1", "a_port": 3, "b": "s2", "b_port": 3}],
        "duration": 1200 * MS,
        "workload": _announce(hosts) + [{
            "kind": "stream", "src": "k1", "dst": "k2", "start": 100 * MS, "rate_pps": rate_pps,
            "duration": SECOND, "payload_size": payload_size, "ethertype": ETH_JUMBO, "tag": "oob-stream",
        }],
    }


def benign_baseline(count: int = 5) -> Dict[str, Any]:
    hosts = [
        _host("k1", 1, "s1", 1),
        _host("k2", 2, "s2", 1),
        _host("k3", 3, "s1", 2),
        _host("k4", 4, "s2", 2),
    ]
    return {
        "switches": [{"name": "s1", "dpid": 1}, {"name": "s2", "dpid": 2}],
        "hosts": hosts,
        "links": [{"a": "s1", "a_port": 3, "b": "s2", "b_port": 3}],
        "workload": _announce(hosts) + [
            {"kind": "ping", "src": "k1", "dst": "k2", "start": 50 * MS, "interval": 100 * MS, "count": count},
            {"kind": "ping", "src": "k3", "dst": "k4", "start": 75 * MS, "interval": 100 * MS, "count": count},
        ],
    }


CATALOG: Dict[str, CatalogEntry] = {
    e.name: e
    for e in (
        CatalogEntry("firewall_bypass", "bypass",
                     "k1 reaches k2 across fw1 through PacketIn/PacketOut only", firewall_bypass),
        CatalogEntry("nids_portscan", "bypass",
                     "FIN scan delivered by the controller never crosses the NIDS tap", nids_portscan),
        CatalogEntry("rendezvous_path_update", "rendezvous",
                     "agents discover each other from Flow-deletes of secret MACs", rendezvous_path_update),
        CatalogEntry("rendezvous_path_reset", "rendezvous",
                     "bits keyed onto redundant FlowMod Adds of a shared path", rendezvous_path_reset),
        CatalogEntry("rendezvous_switch_id", "rendezvous",
                     "agents discover each other from DPID admission decisions", rendezvous_switch_id),
        CatalogEntry("switch_id_distributed", "rendezvous",
                     "two frontends with a shared store assign Equal to a second claimant", switch_id_distributed),
        CatalogEntry("exfiltration_disconnected", "exfiltration",
                     "a data-plane isolated switch leaks 4 KB to k1 via PacketOut", exfiltration_disconnected),
        CatalogEntry("evade_policy_conflicts", "evasion",
                     "stealth OOB over ethertype 0x8870 without a single FlowMod", evade_policy_conflicts),
        CatalogEntry("dos_regression", "dos",
                     "an identical jumbo frame 100 times leaves the switch connected", dos_regression),
        CatalogEntry("mitm_good_evil", "mitm",
                     "a rewrite rule on s1 diverts an HTTP response to k2, which answers evil", mitm_good_evil),
        CatalogEntry("oob_throughput", "capacity",
                     "512-byte frames at 2009.6 pps form a 10 Mbps teleportation channel", oob_throughput),
    )
}

EXTRA: Dict[str, CatalogEntry] = {
    "benign_baseline": CatalogEntry(
        "benign_baseline", "baseline", "ordinary pings between four hosts on two switches", benign_baseline
    ),
}

SCENARIO_KEYS = set(Scenario.model_fields)


def catalog_entries(include_extra: bool = False) -> List[CatalogEntry]:
    """Catalog entries in listing order; ``include_extra`` appends benign_baseline."""
    return list(CATALOG.values()) + (list(EXTRA.values()) if include_extra else [])


def build_scenario(name: str, **overrides) -> Scenario:
    """
    Build a catalog scenario.

    Args:
        name: Catalog name (or ``benign_baseline``)
        **overrides: Builder knobs, or top-level Scenario fields such as
            ``seed`` and ``duration``

    Returns:
        A validated Scenario
    """
    entry = CATALOG.get(name) or EXTRA.get(name)
    if entry is None:
        raise UnknownScenario(name)
    fields = {k: v for k, v in overrides.items() if k in SCENARIO_KEYS and k != "name"}
    knobs = {k: v for k, v in overrides.items() if k not in fields}
    try:
        data = entry.builder(**knobs)
    except TypeError as e:
        raise ConfigError(f"{name}: {e}") from e
    data.update(fields)
    data.setdefault("duration", SECOND)
    logger.debug(f"building {name} with {overrides}")
    return Scenario(name=name, family=entry.family, description=entry.description, **data)
