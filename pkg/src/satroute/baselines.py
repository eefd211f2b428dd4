"""Comparison policies: neighbour-only DRL variants, shortest-hop heuristic, centralised planner."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .agent.core import LOCAL_STATE_DIM, encode_local_state, min_hop_direction, neighbor_hops
from .agent.network import QNetwork
from .constellation import SPEED_OF_LIGHT_KM_S
from .simcore.engine import COMPUTE, DROP, WAIT, Policy

POLICY_KINDS = ("isatcr", "d3qn_local", "ddqn_local", "shortest_path", "ics", "random")


def d3qn_local_state(sim, sat, task) -> np.ndarray:
    return encode_local_state(sim, sat, task)


def make_local_network(dueling: bool, rng=None, dtype=np.float32) -> QNetwork:
    return QNetwork(LOCAL_STATE_DIM, (256, 256), 5, dueling=dueling, rng=rng, dtype=dtype)


def ddqn_q(net: QNetwork, state) -> np.ndarray:
    if net.dueling:
        raise ValueError("DDQN baseline uses a single Q head")
    return net.forward(state)


class ShortestPathPolicy(Policy):
    """Compute locally when the local queue drains fast enough, else forward on the min-hop link."""

    name = "shortest_path"

    def __init__(self, threshold: float = 2.0):
        self.threshold = threshold

    def decide(self, sim, u, task):
        return shortest_path_policy(sim, u, task, sim.compute_drain(u), self.threshold)


def shortest_path_policy(sim, sat, task, local_load: float, threshold: float = 2.0) -> int:
    if not task.x_c and local_load <= threshold:
        return COMPUTE
    j = min_hop_direction(neighbor_hops(sim, sat, task.destination), sim.live_dir[sat])
    if j is not None:
        return j
    if not task.x_c:
        return COMPUTE
    return WAIT


# ------------------------------------------------------------------ ICS
@dataclass
class GlobalView:
    """Instantaneous network state as the centralised planner sees it."""

    neighbors: np.ndarray       # (N, 4)
    live: np.ndarray            # (N, 4) bool
    txq_bytes: np.ndarray       # (N, 4)
    prop: np.ndarray            # (N, 4) seconds
    used: np.ndarray            # (N,) bytes, reservations included
    drain: np.ndarray           # (N,) seconds of queued compute, reservations included
    storage: float
    isl_rate: float
    compute_capacity: float

    @classmethod
    def from_sim(cls, sim) -> "GlobalView":
        from .constellation import all_positions
        pos = all_positions(sim.config, sim.now)
        prop = np.linalg.norm(pos[sim.neighbors] - pos[:, None, :], axis=2) / SPEED_OF_LIGHT_KM_S
        drain = np.array([sim.compute_drain(u) for u in range(sim.n)])
        drain = drain + sim.reserved_flop / sim.params.compute_capacity
        return cls(sim.neighbors, sim.live_dir, sim.txq_bytes, prop, sim.used + sim.reserved, drain,
                   sim.params.storage, sim.params.isl_rate, sim.params.compute_capacity)

    def edge_cost(self, u, j, size) -> float:
        return self.prop[u, j] + size * 8.0 / self.isl_rate + self.txq_bytes[u, j] * 8.0 / self.isl_rate

    def node_cost(self, v, demand) -> float:
        return self.drain[v] + demand / self.compute_capacity

    def fits(self, v, size) -> bool:
        return self.used[v] + size <= self.storage


@dataclass
class Plan:
    compute_at: int
    leg1: list
    leg2: list
    cost: float
    reservations: dict = field(default_factory=dict)
    flop_reserved_at: int | None = None
    destination: int = -1

    @property
    def route(self) -> list:
        return self.leg1 + self.leg2[1:]


def _dijkstra_forward(view: GlobalView, source, size, feasible):
    n = len(view.used)
    dist = np.full(n, np.inf)
    prev = np.full(n, -1)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for j in range(4):
            if not view.live[u, j]:
                continue
            v = int(view.neighbors[u, j])
            if not feasible[v] or done[v]:
                continue
            nd = d + view.edge_cost(u, j, size)
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, prev


def _dijkstra_reverse(view: GlobalView, target, size, feasible):
    """Shortest u -> target distances; only feasible nodes may be passed through."""
    n = len(view.used)
    dist = np.full(n, np.inf)
    nxt = np.full(n, -1)
    dist[target] = 0.0
    heap = [(0.0, target)]
    done = np.zeros(n, dtype=bool)
    # incoming[v] = [(u, j)] with neighbors[u, j] == v
    incoming = [[] for _ in range(n)]
    for u in range(n):
        for j in range(4):
            incoming[int(view.neighbors[u, j])].append((u, j))
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        if not feasible[v]:
            continue
        for u, j in incoming[v]:
            if not view.live[u, j] or done[u]:
                continue
            nd = d + view.edge_cost(u, j, size)
            if nd < dist[u]:
                dist[u] = nd
                nxt[u] = v
                heapq.heappush(heap, (nd, u))
    return dist, nxt


def path_cost(view: GlobalView, path, size) -> float:
    cost = 0.0
    for a, b in zip(path[:-1], path[1:]):
        j = int(np.flatnonzero(view.neighbors[a] == b)[0])
        cost += view.edge_cost(a, j, size)
    return cost


def plan_cost(view: GlobalView, leg1, compute_at, leg2, s, d, s_prime) -> float:
    return path_cost(view, leg1, s) + view.node_cost(compute_at, d) + path_cost(view, leg2, s_prime)


def ics_plan(view: GlobalView, source: int, destination: int, s: float, d: float, s_prime: float) -> Plan | None:
    """Cheapest (compute node, source->node path, node->destination path) at plan time.

    Every candidate compute node is scored with a shortest path on each leg;
    the minimum total wins, ties to the lowest node id.
    """
    n = len(view.used)
    feas1 = np.array([view.fits(v, s) for v in range(n)])
    feas1[source] = True
    feas2 = np.array([view.fits(v, s_prime) for v in range(n)])
    dist1, prev1 = _dijkstra_forward(view, source, s, feas1)
    dist2, nxt2 = _dijkstra_reverse(view, destination, s_prime, feas2)
    best, best_cost = None, np.inf
    for v in range(n):
        if v == destination or not np.isfinite(dist1[v]) or not np.isfinite(dist2[v]):
            continue
        total = dist1[v] + view.node_cost(v, d) + dist2[v]
        if total < best_cost:
            best, best_cost = v, total
    if best is None:
        return None
    leg1 = [best]
    while leg1[-1] != source:
        leg1.append(int(prev1[leg1[-1]]))
    leg1.reverse()
    leg2 = [best]
    while leg2[-1] != destination:
        leg2.append(int(nxt2[leg2[-1]]))
    cost = plan_cost(view, leg1, best, leg2, s, d, s_prime)
    return Plan(best, leg1, leg2, cost, destination=destination)


def ics_route_only(view: GlobalView, source: int, destination: int, size: float) -> list | None:
    feas = np.array([view.fits(v, size) for v in range(len(view.used))])
    feas[source] = True
    dist, prev = _dijkstra_forward(view, source, size, feas)
    if not np.isfinite(dist[destination]):
        return None
    path = [destination]
    while path[-1] != source:
        path.append(int(prev[path[-1]]))
    return path[::-1]


class ICSPolicy(Policy):
    """Plans once with zero-latency global state, reserves resources, then follows the plan."""

    name = "ics"

    def __init__(self, retry_window: float = 2.0):
        self.retry_window = retry_window
        self.plans = 0

    def _make_plan(self, sim, u, task) -> Plan | None:
        view = GlobalView.from_sim(sim)
        if task.x_c:
            route = ics_route_only(view, u, task.destination, task.s_prime)
            if route is None:
                return None
            plan = Plan(-1, [u], route, path_cost(view, route, task.s_prime), destination=task.destination)
        else:
            plan = ics_plan(view, u, task.destination, task.s, task.d, task.s_prime)
            if plan is None:
                return None
            for v in plan.leg1[1:]:
                plan.reservations[v] = plan.reservations.get(v, 0.0) + task.s
            sim.reserved_flop[plan.compute_at] += task.d
            plan.flop_reserved_at = plan.compute_at
        for v in plan.leg2[1:]:
            plan.reservations[v] = plan.reservations.get(v, 0.0) + task.s_prime
        for v, b in plan.reservations.items():
            sim.reserved[v] += b
        self.plans += 1
        return plan

    def _release(self, sim, task):
        plan = task.plan
        if plan is None:
            return
        for v, b in plan.reservations.items():
            sim.reserved[v] -= b
        plan.reservations.clear()
        if plan.flop_reserved_at is not None:
            sim.reserved_flop[plan.flop_reserved_at] -= task.d
            plan.flop_reserved_at = None

    def decide(self, sim, u, task):
        plan = task.plan
        if plan is not None and plan.destination != task.destination:
            self._release(sim, task)
            task.plan = plan = None
        if plan is None:
            plan = task.plan = self._make_plan(sim, u, task)
            if plan is None:
                return WAIT
        if not task.x_c and u == plan.compute_at:
            return COMPUTE
        # the two legs may share satellites, so look u up in the leg the task is on
        leg = plan.leg2 if task.x_c else plan.leg1
        if u not in leg[:-1]:
            # off-plan (should not happen); re-plan from here
            self._release(sim, task)
            task.plan = None
            return self.decide(sim, u, task)
        nxt = leg[leg.index(u) + 1]
        j = int(np.flatnonzero(sim.neighbors[u] == nxt)[0])
        if sim.live_dir[u, j]:
            return j
        if task.wait_since is not None and sim.now - task.wait_since >= self.retry_window:
            return DROP
        return WAIT

    def on_terminal(self, sim, task, kind):
        self._release(sim, task)
