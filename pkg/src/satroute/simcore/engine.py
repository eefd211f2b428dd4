"""Single-threaded discrete-event engine for the constellation.

Events at equal timestamps run in (time, priority, sequence) order. All
randomness comes from named child streams of one master seed so that traffic
and failures are identical whichever policy is plugged in.
"""
from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..constellation import (
    SPEED_OF_LIGHT_KM_S, ConstellationConfig, DEFAULT_GROUND_STATIONS,
    all_positions, compute_d_max, slant_ranges, subsatellite_latlon,
)
from ..embedding import IDLE_REP, aggregate_batch, fault_padding_batch
from ..netview import HopFieldCache, Topology, TopologySnapshot, apply_failure_events, diameter
from .params import SimParams
from .tasks import COMPUTING, PROPAGATION, QUEUEING, TRANSMISSION, Task
from .traffic import FailureProcess, ObservationSchedule, TrafficGenerator, is_over_land

COMPUTE = 4
WAIT = -1
DROP = -2  # policy gives up on the task (centralised plan timed out)

# event priorities at equal timestamps
_TICK, _BCAST, _TX_DONE, _ARRIVE, _COMP_DONE, _DL_DONE, _GROUND, _BIRTH, _RETRY, _ONOFF = range(10)

STREAMS = ("traffic", "failures", "observation", "policy")


def spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


class Policy:
    """Decision hook. Return a direction 0..3, COMPUTE, or WAIT."""

    name = "policy"

    def decide(self, sim: "Simulation", sat: int, task: Task) -> int:
        raise NotImplementedError

    def on_terminal(self, sim: "Simulation", task: Task, kind: str):
        pass

    def on_birth(self, sim: "Simulation", task: Task):
        pass


@dataclass
class Counters:
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    decisions: int = 0
    broadcasts: int = 0
    messages: int = 0
    message_payload: set = field(default_factory=set)
    state_sizes: set = field(default_factory=set)


class Simulation:
    def __init__(self, constellation: ConstellationConfig, params: SimParams, policy: Policy,
                 seed: int = 0, ground_stations=DEFAULT_GROUND_STATIONS, t_start: float = 0.0,
                 trace=None, keep_tasks: bool = True, record_from: float = 0.0):
        self.config = constellation
        self.params = params
        self.policy = policy
        self.stations = tuple(ground_stations)
        self.rngs = spawn_streams(seed)
        self.trace = trace
        self.keep_tasks = keep_tasks
        self.record_from = record_from

        n = constellation.n_sats
        self.n = n
        self.topology = Topology(constellation)
        self.neighbors = self.topology.neighbors
        self.snapshot = TopologySnapshot.fault_free(self.topology, t_start)
        self.hop_cache = HopFieldCache()
        self.diameter = diameter(constellation)
        self.d_max = compute_d_max(constellation)

        self.now = t_start
        self.t_start = t_start
        self._heap: list = []
        self._seq = 0

        M = params.storage
        self.used = np.zeros(n)
        self.reserved = np.zeros(n)
        self.reserved_flop = np.zeros(n)
        self.txq = [[deque() for _ in range(4)] for _ in range(n)]
        self.txq_bytes = np.zeros((n, 4))
        self.tx_busy = np.zeros((n, 4), dtype=bool)
        self.tx_token = np.zeros((n, 4), dtype=np.int64)
        self.compq = [deque() for _ in range(n)]
        self.comp_backlog = np.zeros(n)  # FLOP queued or in service
        self.comp_busy_since = np.full(n, np.nan)
        self.comp_busy_task: list = [None] * n
        self.dlq = [deque() for _ in range(n)]
        self.dl_busy = np.zeros(n, dtype=bool)
        self.dl_bytes = np.zeros(n)
        self.compute_time = np.zeros(n)  # accumulated busy seconds, for the CDF
        self.live_dir = self.snapshot.direction_live().copy()
        self.visible = np.zeros(n, dtype=bool)
        self.slant = np.full(n, np.inf)

        # graph representations: current inbox and in-flight messages
        self.inbox = np.broadcast_to(IDLE_REP, (n, 4, 12)).copy()
        self.pending_rep = np.zeros((n, 4, 12))
        self.pending_at = np.full((n, 4), np.inf)
        self.last_rep = np.broadcast_to(IDLE_REP, (n, 12)).copy()

        self.traffic = TrafficGenerator(params, self.rngs["traffic"])
        self.failures = FailureProcess.from_target(
            self.topology.n_edges, params.failure_rate, params.mean_repair,
            self.rngs["failures"], params.detection_period)
        self.observation = ObservationSchedule(n, params, self.rngs["observation"])
        self.policy_rng = self.rngs["policy"]

        self.counters = Counters()
        self.tasks: list[Task] = []
        self.records: list[Task] = []
        self.in_flight: dict[int, Task] = {}
        self._next_id = 0
        self._reverse = np.array([[self.topology.reverse_direction(u, j) for j in range(4)] for u in range(n)])

        # orbital element caches for fast scalar positions
        flat = np.arange(n)
        plane, slot = np.divmod(flat, constellation.sats_per_plane)
        self._raan = 2.0 * np.pi * plane / constellation.plane_count
        self._u0 = (2.0 * np.pi * slot / constellation.sats_per_plane
                    + np.radians(constellation.phasing_offset) * plane)
        self._ci = math.cos(math.radians(constellation.inclination))
        self._si = math.sin(math.radians(constellation.inclination))

        # initial failure state comes from the stationary draw
        init = [(int(k), False) for k in np.flatnonzero(self.failures.faulty)]
        self.snapshot = apply_failure_events(self.snapshot, init, t_start)
        self.live_dir = self.snapshot.direction_live().copy()
        self._update_visibility()

        self._schedule(t_start + params.detection_period, _TICK, ("tick", 1))
        if params.rep_period:
            self._schedule(t_start, _BCAST, ("bcast", 0))
        self._schedule(t_start + self.traffic.next_interarrival(), _BIRTH, ("birth",))
        if not self.observation.always_on:
            for u in range(n):
                d = self.observation.next_duration(bool(self.observation.active[u]))
                self._schedule(t_start + d, _ONOFF, ("onoff", u))

    # ------------------------------------------------------------------ util
    def _schedule(self, t, prio, payload):
        self._seq += 1
        heapq.heappush(self._heap, (t, prio, self._seq, payload))

    def _emit(self, kind, task=None, sat=None, **detail):
        if self.trace is not None:
            self.trace.write(json.dumps({
                "time": self.now, "event_type": kind,
                "task_id": None if task is None else task.id,
                "sat": sat, "detail": detail}) + "\n")

    def position(self, u: int, t: float):
        a = self.config.semi_major_axis
        uu = self._u0[u] + self.config.angular_rate * t
        co, so = math.cos(self._raan[u]), math.sin(self._raan[u])
        cu, su = math.cos(uu), math.sin(uu)
        return (a * (co * cu - so * su * self._ci),
                a * (so * cu + co * su * self._ci),
                a * su * self._si)

    def link_distance(self, u: int, v: int, t: float) -> float:
        return math.dist(self.position(u, t), self.position(v, t))

    def hop_field(self, destination: int):
        return self.hop_cache.get(self.snapshot, destination)

    # ------------------------------------------------------------- features
    def features(self) -> np.ndarray:
        """(N, 4) current node features (p, m_r, q_c, q_t)."""
        p = self.params
        f = np.empty((self.n, 4))
        f[:, 0] = self.observation.active
        f[:, 1] = np.clip(1.0 - self.used / p.storage, 0.0, 1.0)
        f[:, 2] = np.minimum(self._comp_remaining() / p.compute_capacity, p.q_c_cap)
        f[:, 3] = self.txq_bytes.sum(axis=1) / p.storage
        return f

    def feature(self, u: int) -> np.ndarray:
        p = self.params
        rem = self.comp_backlog[u]
        if self.comp_busy_task[u] is not None:
            rem -= (self.now - self.comp_busy_since[u]) * p.compute_capacity
        return np.array([float(self.observation.active[u]),
                         min(max(1.0 - self.used[u] / p.storage, 0.0), 1.0),
                         min(max(rem, 0.0) / p.compute_capacity, p.q_c_cap),
                         self.txq_bytes[u].sum() / p.storage])

    def _comp_remaining(self) -> np.ndarray:
        busy = ~np.isnan(self.comp_busy_since)
        elapsed = np.where(busy, self.now - np.nan_to_num(self.comp_busy_since), 0.0)
        return np.maximum(self.comp_backlog - elapsed * self.params.compute_capacity, 0.0)

    def compute_drain(self, u: int) -> float:
        rem = self.comp_backlog[u]
        if self.comp_busy_task[u] is not None:
            rem -= (self.now - self.comp_busy_since[u]) * self.params.compute_capacity
        return max(rem, 0.0) / self.params.compute_capacity

    def _promote_inbox(self, u=None):
        if u is None:
            arrived = self.pending_at <= self.now
            if arrived.any():
                self.inbox[arrived] = self.pending_rep[arrived]
                self.pending_at[arrived] = np.inf
        else:
            arrived = self.pending_at[u] <= self.now
            if arrived.any():
                self.inbox[u, arrived] = self.pending_rep[u, arrived]
                self.pending_at[u, arrived] = np.inf

    def neighbor_reps(self, u: int) -> np.ndarray:
        """(4, 12) latest received reps with fault padding on dead directions."""
        self._promote_inbox(u)
        return fault_padding_batch(self.inbox[u][None], self.live_dir[u][None])[0]

    def neighbor_features(self, u: int) -> np.ndarray:
        """(4, 4) area-1 of the latest received reps (fault-padded)."""
        return self.neighbor_reps(u)[:, 0:4]

    # ---------------------------------------------------------------- run
    def run(self, until: float):
        heap = self._heap
        while heap and heap[0][0] <= until:
            t, _, _, payload = heapq.heappop(heap)
            self.now = t
            kind = payload[0]
            if kind == "tx_done":
                self._on_tx_done(*payload[1:])
            elif kind == "arrive":
                self._on_arrive(*payload[1:])
            elif kind == "bcast":
                self._on_broadcast(payload[1])
            elif kind == "comp_done":
                self._on_compute_done(*payload[1:])
            elif kind == "birth":
                self._on_birth()
            elif kind == "dl_done":
                self._on_downlink_done(*payload[1:])
            elif kind == "ground":
                self._on_ground(payload[1])
            elif kind == "tick":
                self._on_tick(payload[1])
            elif kind == "retry":
                self._on_retry(*payload[1:])
            elif kind == "onoff":
                self._on_onoff(payload[1])
        self.now = until
        return self

    # --------------------------------------------------------------- ticks
    def _on_tick(self, k):
        p = self.params
        events = self.failures.step()
        if events:
            old_live = self.live_dir
            self.snapshot = apply_failure_events(self.snapshot, events, self.now)
            self.live_dir = self.snapshot.direction_live().copy()
            for edge, up in events:
                a, b = (int(x) for x in self.topology.edges[edge])
                for u, v in ((a, b), (b, a)):
                    for j in range(4):
                        if self.neighbors[u, j] == v and old_live[u, j] != self.live_dir[u, j]:
                            if up:
                                self._try_start_tx(u, j)
                            else:
                                self._interrupt_tx(u, j)
            self._emit("topology", version=self.snapshot.version, changes=len(events))
        self._update_visibility()
        self._schedule(self.t_start + (k + 1) * p.detection_period, _TICK, ("tick", k + 1))

    def _update_visibility(self):
        pos = all_positions(self.config, self.now)
        sr = slant_ranges(pos, self.stations, self.now)
        self.slant = sr.min(axis=1)
        self.visible = self.slant <= self.d_max
        any_visible = bool(self.visible.any())
        for u in range(self.n):
            if not self.dlq[u]:
                continue
            if self.visible[u]:
                self._try_start_downlink(u)
            elif any_visible and not self.dl_busy[u]:
                tasks = list(self.dlq[u])
                self.dlq[u].clear()
                self.dl_bytes[u] = 0.0
                for task in tasks:
                    self._select_destination(task, u)
                    self._emit("reinject", task, u)
                    self._dispatch(task, u)

    def _on_onoff(self, u):
        self.observation.active[u] = not self.observation.active[u]
        d = self.observation.next_duration(bool(self.observation.active[u]))
        self._schedule(self.now + d, _ONOFF, ("onoff", u))

    # ----------------------------------------------------------- broadcast
    def _on_broadcast(self, k):
        self._promote_inbox()
        reps_in = fault_padding_batch(self.inbox, self.live_dir)
        live_count = self.live_dir.sum(axis=1)
        reps = aggregate_batch(self.features(), reps_in, live_count)
        self.last_rep = reps
        nbr, rev, live = self.neighbors, self._reverse, self.live_dir
        pos = all_positions(self.config, self.now)
        delay = np.linalg.norm(pos[nbr] - pos[:, None, :], axis=2) / SPEED_OF_LIGHT_KM_S
        senders, dirs = np.nonzero(live)
        recv, slot = nbr[senders, dirs], rev[senders, dirs]
        self.pending_rep[recv, slot] = reps[senders]
        self.pending_at[recv, slot] = self.now + delay[senders, dirs]
        sent = len(senders)
        c = self.counters
        c.broadcasts += self.n
        c.messages += sent
        c.message_payload.add(reps.shape[1])
        if self.trace is not None:
            for u in range(self.n):
                self._emit("broadcast", sat=u, rep=reps[u].tolist())
        self._schedule(self.t_start + (k + 1) * self.params.rep_period, _BCAST, ("bcast", k + 1))

    # ---------------------------------------------------------------- births
    def _on_birth(self):
        p = self.params
        self._schedule(self.now + self.traffic.next_interarrival(), _BIRTH, ("birth",))
        pos = all_positions(self.config, self.now)
        lat, lon = subsatellite_latlon(pos, self.now)
        land = is_over_land(lat, lon, p.land_boxes)
        active = self.observation.active
        weights = np.where(land, p.land_weight, 1.0) * (active if active.any() else 1.0)
        src = self.traffic.pick_source(weights)
        kind, s, d, s_prime = self.traffic.draw_task_attributes()
        task = Task(self._next_id, kind, s, d, s_prime, self.now, src, src)
        self._next_id += 1
        self.counters.generated += 1
        if self.keep_tasks and self.now >= self.record_from:
            self.tasks.append(task)
        self._emit("birth", task, src, size=s)
        if not self._admit(task, src):
            self._drop(task, src, "storage")
            return
        self.in_flight[task.id] = task
        self._select_destination(task, src)
        self.policy.on_birth(self, task)
        self._dispatch(task, src)

    def _select_destination(self, task: Task, u: int):
        if self.visible[u]:
            task.destination = u
            return
        vis = np.flatnonzero(self.visible)
        if len(vis) == 0:
            task.destination = int(np.argmin(self.slant))
            return
        hops = self.hop_field(u).hops  # symmetric graph: distance from u
        h = hops[vis].astype(float)
        h[h < 0] = np.inf
        if np.isinf(h).all():
            task.destination = int(vis[0])
        else:
            task.destination = int(vis[np.argmin(h)])

    # ------------------------------------------------------------- storage
    def _admit(self, task: Task, u: int) -> bool:
        own = 0.0
        plan = task.plan
        if plan is not None and u in getattr(plan, "reservations", {}):
            own = plan.reservations.pop(u)
            self.reserved[u] -= own
        if self.used[u] + self.reserved[u] + task.size > self.params.storage:
            return False
        self.used[u] += task.size
        task.location = u
        return True

    def _release(self, task: Task, u: int):
        self.used[u] -= task.size
        if self.used[u] < 1e-6:
            self.used[u] = max(self.used[u], 0.0)
        task.location = None

    # ------------------------------------------------------------- decisions
    def _dispatch(self, task: Task, u: int):
        """Route a resident task: downlink at its destination, else ask the policy."""
        if not self.visible[task.destination] and self.visible.any():
            self._select_destination(task, u)
        if u == task.destination:
            self._enqueue_downlink(task, u)
            return
        action = self.policy.decide(self, u, task)
        self.counters.decisions += 1
        task.t_last_decision = self.now
        if action == WAIT:
            if task.wait_since is None:
                task.wait_since = self.now
            self._schedule(self.now + self.params.detection_period, _RETRY, ("retry", task, u))
            return
        if action == DROP:
            self._release(task, u)
            self._drop(task, u, "plan_timeout")
            return
        task.wait_since = None
        if action == COMPUTE:
            if task.x_c:
                raise RuntimeError("computed task sent to a compute queue")
            self._enqueue_compute(task, u)
        else:
            self._enqueue_tx(task, u, int(action))

    def _on_retry(self, task: Task, u: int):
        if task.outcome is None:
            self._dispatch(task, u)

    # -------------------------------------------------------- transmission
    def _enqueue_tx(self, task, u, j):
        self.txq[u][j].append(task)
        self.txq_bytes[u, j] += task.size
        self._emit("tx_enqueue", task, u, direction=j)
        self._try_start_tx(u, j)

    def _try_start_tx(self, u, j):
        if self.tx_busy[u, j] or not self.live_dir[u, j] or not self.txq[u][j]:
            return
        task = self.txq[u][j][0]
        task.close_segment(self.now, QUEUEING)
        self.tx_busy[u, j] = True
        self.tx_token[u, j] += 1
        dt = task.size * 8.0 / self.params.isl_rate
        self._schedule(self.now + dt, _TX_DONE, ("tx_done", u, j, int(self.tx_token[u, j])))

    def _interrupt_tx(self, u, j):
        if not self.tx_busy[u, j]:
            return
        self.tx_busy[u, j] = False
        self.tx_token[u, j] += 1
        if self.params.drop_on_link_failure:
            task = self.txq[u][j].popleft()
            self.txq_bytes[u, j] -= task.size
            self._release(task, u)
            self._drop(task, u, "link_failure")

    def _on_tx_done(self, u, j, token):
        if token != self.tx_token[u, j]:
            return
        task = self.txq[u][j].popleft()
        self.txq_bytes[u, j] -= task.size
        if abs(self.txq_bytes[u, j]) < 1e-6:
            self.txq_bytes[u, j] = 0.0
        self.tx_busy[u, j] = False
        task.close_segment(self.now, TRANSMISSION)
        self._release(task, u)
        v = int(self.neighbors[u, j])
        delay = self.link_distance(u, v, self.now) / SPEED_OF_LIGHT_KM_S
        task.hops += 1
        self._schedule(self.now + delay, _ARRIVE, ("arrive", task, v, u))
        self._try_start_tx(u, j)

    def _on_arrive(self, task, v, u):
        task.close_segment(self.now, PROPAGATION)
        task.hop_trace.append((v, self.now))
        if not self._admit(task, v):
            self._drop(task, v, "storage")
            return
        self._emit("arrive", task, v, sender=u)
        self._dispatch(task, v)

    # ------------------------------------------------------------- compute
    def _enqueue_compute(self, task, u):
        self.compq[u].append(task)
        self.comp_backlog[u] += task.d
        self._emit("compute_enqueue", task, u)
        self._try_start_compute(u)

    def _try_start_compute(self, u):
        if self.comp_busy_task[u] is not None or not self.compq[u]:
            return
        task = self.compq[u].popleft()
        task.close_segment(self.now, QUEUEING)
        self.comp_busy_task[u] = task
        self.comp_busy_since[u] = self.now
        if task.plan is not None and getattr(task.plan, "flop_reserved_at", None) == u:
            self.reserved_flop[u] -= task.d
            task.plan.flop_reserved_at = None
        self._schedule(self.now + task.d / self.params.compute_capacity, _COMP_DONE, ("comp_done", u))

    def _on_compute_done(self, u):
        task = self.comp_busy_task[u]
        self.comp_busy_task[u] = None
        self.compute_time[u] += self.now - self.comp_busy_since[u]
        self.comp_busy_since[u] = np.nan
        self.comp_backlog[u] -= task.d
        if abs(self.comp_backlog[u]) < 1.0:
            self.comp_backlog[u] = max(self.comp_backlog[u], 0.0) if self.compq[u] else 0.0
        task.close_segment(self.now, COMPUTING)
        self.used[u] += task.s_prime - task.s
        task.x_c = 1
        task.computed_at = u
        self._emit("compute_done", task, u)
        self._try_start_compute(u)
        self._dispatch(task, u)

    # ------------------------------------------------------------ downlink
    def _enqueue_downlink(self, task, u):
        self.dlq[u].append(task)
        self.dl_bytes[u] += task.size
        self._emit("downlink_enqueue", task, u)
        self._try_start_downlink(u)

    def _try_start_downlink(self, u):
        if self.dl_busy[u] or not self.visible[u] or not self.dlq[u]:
            return
        task = self.dlq[u][0]
        task.close_segment(self.now, QUEUEING)
        self.dl_busy[u] = True
        dt = task.size * 8.0 / self.params.downlink_rate
        self._schedule(self.now + dt, _DL_DONE, ("dl_done", u, float(self.slant[u])))

    def _on_downlink_done(self, u, slant):
        task = self.dlq[u].popleft()
        self.dl_bytes[u] -= task.size
        self.dl_busy[u] = False
        task.close_segment(self.now, TRANSMISSION)
        self._release(task, u)
        self._schedule(self.now + slant / SPEED_OF_LIGHT_KM_S, _GROUND, ("ground", task))
        self._try_start_downlink(u)

    def _on_ground(self, task):
        task.close_segment(self.now, PROPAGATION)
        task.outcome = "delivered"
        task.t_end = self.now
        self.counters.delivered += 1
        self.in_flight.pop(task.id, None)
        self._emit("delivered", task, task.destination)
        self.policy.on_terminal(self, task, "delivered")
        if self.keep_tasks and task.t_b >= self.record_from:
            self.records.append(task)

    def _drop(self, task, u, reason):
        task.outcome = "dropped"
        task.t_end = self.now
        self.counters.dropped += 1
        self.in_flight.pop(task.id, None)
        self._emit("dropped", task, u, reason=reason)
        self.policy.on_terminal(self, task, "dropped")
        if self.keep_tasks and task.t_b >= self.record_from:
            self.records.append(task)

    # ------------------------------------------------------------ checks
    def storage_consistent(self) -> bool:
        resident = np.zeros(self.n)
        for u in range(self.n):
            for j in range(4):
                resident[u] += sum(t.size for t in self.txq[u][j])
            resident[u] += sum(t.size for t in self.compq[u]) + sum(t.size for t in self.dlq[u])
            if self.comp_busy_task[u] is not None:
                resident[u] += self.comp_busy_task[u].s
        for task in self.in_flight.values():
            if task.location is not None and task.wait_since is not None:
                resident[task.location] += task.size
        return bool(np.allclose(resident, self.used, atol=1e-3) and (self.used >= -1e-6).all())
