"""Scenario-declared switch topology and deterministic shortest paths."""

from typing import Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx

Endpoint = Tuple[int, int]


class Topology:
    """
    Undirected switch graph keyed by datapath id.

    Edges carry the port used on each side; path computation only crosses
    switches that are currently admitted.
    """

    def __init__(self):
        self.graph = nx.Graph()
        self.switches: Set[int] = set()

    def add_switch(self, dpid: int) -> None:
        self.switches.add(dpid)
        self.graph.add_node(dpid)

    def remove_switch(self, dpid: int) -> None:
        self.switches.discard(dpid)

    def add_link(self, a: int, a_port: int, b: int, b_port: int) -> None:
        if a == b:
            raise ValueError(f"self-link on dpid {a}")
        self.graph.add_edge(a, b, ports={a: a_port, b: b_port})

    def port_towards(self, dpid: int, neighbor: int) -> int:
        return self.graph.edges[dpid, neighbor]["ports"][dpid]

    def is_infrastructure(self, dpid: int, port: int) -> bool:
        """True when ``port`` on ``dpid`` faces another switch (hosts are never learned there)."""
        if dpid not in self.graph:
            return False
        return any(data["ports"][dpid] == port for _, _, data in self.graph.edges(dpid, data=True))

    def links(self) -> List[Tuple[int, int, int, int]]:
        out = []
        for a, b, data in self.graph.edges(data=True):
            lo, hi = sorted((a, b))
            out.append((lo, data["ports"][lo], hi, data["ports"][hi]))
        return sorted(out)

    @classmethod
    def from_links(cls, links: Iterable[Tuple[int, int, int, int]], switches: Iterable[int] = ()) -> "Topology":
        topo = cls()
        for dpid in switches:
            topo.graph.add_node(dpid)
        for a, a_port, b, b_port in links:
            topo.add_link(a, a_port, b, b_port)
        return topo


def compute_path(topo: Topology, src: Endpoint, dst: Endpoint) -> Optional[List[int]]:
    """
    Shortest hop-count path between two attachment points.

    Breadth-first search expands neighbours in ascending datapath-id order,
    which makes the result the lexicographically smallest shortest path.

    Returns:
        List of datapath ids from src to dst, or None if disconnected
    """
    src_dpid, dst_dpid = src[0], dst[0]
    if src_dpid not in topo.switches or dst_dpid not in topo.switches:
        return None
    if src_dpid == dst_dpid:
        return [src_dpid]
    view = topo.graph.subgraph(topo.switches)
    predecessors: Dict[int, int] = dict(nx.bfs_predecessors(view, src_dpid, sort_neighbors=sorted))
    if dst_dpid not in predecessors:
        return None
    path = [dst_dpid]
    while path[-1] != src_dpid:
        path.append(predecessors[path[-1]])
    path.reverse()
    return path
