"""Shared topology knowledge: ISL liveness, hop fields, grid diameter.

Topology changes are flooded instantly at detection boundaries, so every
satellite reads the same immutable ``TopologySnapshot``.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .constellation import ConstellationConfig, ContractViolation, neighbor_table, REVERSE_DIRECTION

UNREACHABLE = -1


def edge_list(config: ConstellationConfig) -> np.ndarray:
    """Undirected ISLs as (E, 2) flat ids, each edge once, ordered by (min, max).

    Only directions 0 (slot+1) and 2 (plane+1) are emitted per satellite, which
    enumerates every undirected edge exactly once on a torus with P, S >= 3.
    For P == 2 the two inter-plane directions reach the same satellite, so the
    resulting duplicate edge is folded.
    """
    nbr = neighbor_table(config)
    pairs = set()
    for u in range(config.n_sats):
        for j in range(4):
            v = int(nbr[u, j])
            pairs.add((min(u, v), max(u, v)))
    return np.array(sorted(pairs), dtype=np.int64)


class Topology:
    """Static grid structure plus the mapping between directed slots and edges."""

    def __init__(self, config: ConstellationConfig):
        self.config = config
        self.neighbors = neighbor_table(config)
        self.edges = edge_list(config)
        index = {tuple(e): k for k, e in enumerate(self.edges.tolist())}
        n = config.n_sats
        # edge_of[u, j] = undirected edge id behind direction j of satellite u
        self.edge_of = np.empty((n, 4), dtype=np.int64)
        for u in range(n):
            for j in range(4):
                v = int(self.neighbors[u, j])
                self.edge_of[u, j] = index[(min(u, v), max(u, v))]
        self._index = index

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_id(self, u: int, v: int) -> int:
        try:
            return self._index[(min(u, v), max(u, v))]
        except KeyError:
            raise ContractViolation(f"no ISL between {u} and {v}") from None

    def reverse_direction(self, u: int, j: int) -> int:
        """Direction index at the neighbour that points back to u."""
        v = int(self.neighbors[u, j])
        r = REVERSE_DIRECTION[j]
        if int(self.neighbors[v, r]) == u:
            return r
        for k in range(4):
            if int(self.neighbors[v, k]) == u:
                return k
        raise ContractViolation(f"asymmetric adjacency at {u}->{v}")


@dataclass(frozen=True)
class TopologySnapshot:
    topology: Topology
    live: np.ndarray  # per undirected edge, bool
    version: int = 0
    timestamp: float = 0.0

    @classmethod
    def fault_free(cls, topology: Topology, timestamp: float = 0.0) -> "TopologySnapshot":
        live = np.ones(topology.n_edges, dtype=bool)
        live.flags.writeable = False
        return cls(topology, live, 0, timestamp)

    def direction_live(self) -> np.ndarray:
        """(N, 4) bool liveness per directed slot; symmetric by construction."""
        return self.live[self.topology.edge_of]

    def to_json(self) -> str:
        return json.dumps({
            "version": self.version,
            "timestamp": self.timestamp,
            "edges": self.topology.edges.tolist(),
            "live": self.live.astype(int).tolist(),
        })


def apply_failure_events(snapshot: TopologySnapshot, events, timestamp: float | None = None) -> TopologySnapshot:
    """Apply (edge_id, up) events. ``edge_id`` may also be a (u, v) pair."""
    if not events:
        return snapshot
    live = snapshot.live.copy()
    topo = snapshot.topology
    for edge, up in events:
        if isinstance(edge, tuple):
            k = topo.edge_id(*edge)
        else:
            k = int(edge)
            if not 0 <= k < topo.n_edges:
                raise ContractViolation(f"edge {edge} does not exist")
        live[k] = bool(up)
    if np.array_equal(live, snapshot.live):
        return snapshot
    live.flags.writeable = False
    ts = snapshot.timestamp if timestamp is None else timestamp
    return TopologySnapshot(topo, live, snapshot.version + 1, ts)


@dataclass(frozen=True)
class HopField:
    destination: int
    hops: np.ndarray  # UNREACHABLE == -1
    version: int


def hop_field(snapshot: TopologySnapshot, destination: int) -> HopField:
    topo = snapshot.topology
    n = topo.config.n_sats
    if not 0 <= destination < n:
        raise ContractViolation(f"destination {destination} does not exist")
    hops = np.full(n, UNREACHABLE, dtype=np.int64)
    hops[destination] = 0
    live = snapshot.direction_live()
    nbr = topo.neighbors
    queue = deque([destination])
    while queue:
        u = queue.popleft()
        nxt = hops[u] + 1
        for j in range(4):
            if live[u, j]:
                v = nbr[u, j]
                if hops[v] == UNREACHABLE:
                    hops[v] = nxt
                    queue.append(v)
    hops.flags.writeable = False
    return HopField(destination, hops, snapshot.version)


def diameter(config: ConstellationConfig) -> int:
    return config.plane_count // 2 + config.sats_per_plane // 2


class HopFieldCache:
    """Per-destination hop fields, invalidated whenever the snapshot version moves."""

    def __init__(self):
        self._version = None
        self._fields: dict[int, HopField] = {}

    def get(self, snapshot: TopologySnapshot, destination: int) -> HopField:
        if snapshot.version != self._version:
            self._fields.clear()
            self._version = snapshot.version
        hf = self._fields.get(destination)
        if hf is None:
            hf = self._fields[destination] = hop_field(snapshot, destination)
        if hf.version != snapshot.version:
            raise ContractViolation("stale hop field")
        return hf
