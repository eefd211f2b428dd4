"""Shifted-feature-aggregation graph embedding.

A graph representation is a 12-vector laid out as three 4-wide areas:
the node's own feature, the 1-hop aggregate and the 2-hop aggregate.
Feature order inside an area is (p, m_r, q_c, q_t).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constellation import ContractViolation

FEATURE_DIM = 4
REP_DIM = 12
DEFAULT_K = 4

IDLE_FEATURE = np.array([0.0, 1.0, 0.0, 0.0])
IDLE_REP = np.tile(IDLE_FEATURE, 3)
IDLE_REP.flags.writeable = False


@dataclass(frozen=True)
class NodeFeature:
    p: float
    m_r: float
    q_c: float
    q_t: float

    def __post_init__(self):
        if self.p not in (0, 1) or not 0.0 <= self.m_r <= 1.0 or self.q_c < 0 or self.q_t < 0:
            raise ContractViolation(f"invalid node feature {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.m_r, self.q_c, self.q_t], dtype=float)


@dataclass(frozen=True)
class GraphRep:
    vector: np.ndarray
    produced_at: float = 0.0

    def __post_init__(self):
        if np.shape(self.vector) != (REP_DIM,):
            raise ContractViolation("graph representation must have exactly 12 entries")

    @property
    def area1(self):
        return self.vector[0:4]

    @property
    def area2(self):
        return self.vector[4:8]

    @property
    def area3(self):
        return self.vector[8:12]


def _as_vec(x) -> np.ndarray:
    if isinstance(x, GraphRep):
        return x.vector
    if isinstance(x, NodeFeature):
        return x.as_array()
    return np.asarray(x, dtype=float)


def aggregate(self_feature, neighbor_reps, K: int = DEFAULT_K, live_count: int | None = None) -> np.ndarray:
    """Corrected shifted aggregation of neighbour reps into this node's rep.

    ``neighbor_reps`` holds every entry that takes part in the 1/K sum,
    fault-padding included. ``live_count`` is the number of entries whose
    2nd area genuinely contains this node's feature (defaults to all of them).
    """
    if K < 2:
        raise ZeroDivisionError("aggregation needs K >= 2")
    reps = [_as_vec(r) for r in neighbor_reps]
    if len(reps) > K:
        raise ContractViolation(f"{len(reps)} neighbour entries exceed K={K}")
    I = len(reps) if live_count is None else live_count
    h1 = _as_vec(self_feature)
    out = np.zeros(REP_DIM)
    out[0:4] = h1
    if reps:
        stacked = np.stack(reps)
        out[4:8] = stacked[:, 0:4].sum(axis=0) / K
        out[8:12] = stacked[:, 4:8].sum(axis=0) / (K - 1)
    out[8:12] -= I / (K * (K - 1)) * h1
    return out


def shift(rep) -> np.ndarray:
    v = _as_vec(rep)
    out = np.zeros(REP_DIM)
    out[4:12] = v[0:8]
    return out


def initial_padding() -> np.ndarray:
    return IDLE_REP.copy()


FAULT_MARK = np.array([1.0, 0.0, 0.0, 0.0] * 3)


def fault_padding(other_live_reps) -> np.ndarray:
    """Stand-in rep for an unreachable neighbour, built from the live ones."""
    out = FAULT_MARK.copy()
    reps = [_as_vec(r) for r in other_live_reps]
    if reps:
        mean = np.mean(np.stack(reps), axis=0)
        for base in (0, 4, 8):
            out[base + 2] = 2.0 * mean[base + 2]
            out[base + 3] = 2.0 * mean[base + 3]
    return out


def fault_padding_batch(reps: np.ndarray, live: np.ndarray) -> np.ndarray:
    """Replace dead entries of (N, 4, 12) reps with fault padding.

    ``live`` is (N, 4) bool. Satellites with no live neighbour get the bare
    fault mark.
    """
    out = reps.copy()
    dead = ~live
    if not dead.any():
        return out
    n_live = live.sum(axis=1)
    sums = (reps * live[:, :, None]).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(n_live[:, None] > 0, sums / np.maximum(n_live, 1)[:, None], 0.0)
    pad = np.broadcast_to(FAULT_MARK, mean.shape).copy()
    for base in (0, 4, 8):
        pad[:, base + 2:base + 4] = 2.0 * mean[:, base + 2:base + 4]
    rows, cols = np.nonzero(dead)
    out[rows, cols] = pad[rows]
    return out


def aggregate_batch(features: np.ndarray, reps: np.ndarray, live_count: np.ndarray, K: int = DEFAULT_K) -> np.ndarray:
    """Vectorised ``aggregate`` for all nodes at once; reps is (N, K, 12)."""
    n = features.shape[0]
    out = np.empty((n, REP_DIM))
    out[:, 0:4] = features
    out[:, 4:8] = reps[:, :, 0:4].sum(axis=1) / K
    out[:, 8:12] = reps[:, :, 4:8].sum(axis=1) / (K - 1) - (live_count / (K * (K - 1)))[:, None] * features
    return out


@dataclass
class NeighborInbox:
    """Latest rep per neighbour direction; a later message replaces the earlier one."""

    K: int = DEFAULT_K
    reps: list = field(default_factory=list)
    received_at: list = field(default_factory=list)

    def __post_init__(self):
        if not self.reps:
            self.reps = [initial_padding() for _ in range(self.K)]
            self.received_at = [None] * self.K

    def receive(self, direction: int, rep, t: float):
        self.reps[direction] = _as_vec(rep).copy()
        self.received_at[direction] = t

    def entries(self, live) -> tuple[list, int]:
        """Reps for the aggregation sum (dead directions fault-padded) and the live count."""
        live_reps = [self.reps[j] for j in range(self.K) if live[j]]
        pad = fault_padding(live_reps)
        return [self.reps[j] if live[j] else pad for j in range(self.K)], len(live_reps)


def synchronous_rounds(adjacency: list[list[int]], features: np.ndarray, rounds: int = 2, K: int = DEFAULT_K) -> np.ndarray:
    """Barrier-synchronised message passing on an arbitrary graph (no padding).

    Round 0 publishes each node's bare feature; ``rounds`` aggregation rounds
    follow. Returns the (N, 12) reps after the last round.
    """
    n = len(adjacency)
    reps = np.array([aggregate(features[i], [], K, live_count=0) for i in range(n)])
    for _ in range(rounds):
        reps = np.array([aggregate(features[i], [reps[j] for j in adjacency[i]], K) for i in range(n)])
    return reps
