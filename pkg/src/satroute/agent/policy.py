"""DRL decision policy plugged into the simulator.

Each decision closes the task's previous (S, A) with a one-step reward;
delivery and loss close it with a terminal reward. Transitions are handed to
``sink`` (usually a replay buffer) as they complete.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..simcore.engine import COMPUTE, WAIT, Policy
from .core import (
    ExplorationSchedule, encode_local_state, encode_state, neighbor_hops, reward, select_action,
)
from .network import QNetwork


@dataclass
class _Pending:
    state: np.ndarray
    action: int
    t: float


class DRLPolicy(Policy):
    def __init__(self, net: QNetwork, name: str = "isatcr", local_state: bool = False,
                 epsilon: float = 0.0, schedule: ExplorationSchedule = ExplorationSchedule(),
                 sink=None, gamma: float = 0.99):
        self.net = net
        self.name = name
        self.encode = encode_local_state if local_state else encode_state
        self.epsilon = epsilon
        self.schedule = schedule
        self.sink = sink
        self.gamma = gamma
        self.rewards: list[float] = []

    def decide(self, sim, u, task):
        live = sim.live_dir[u]
        state = self.encode(sim, u, task)
        sim.counters.state_sizes.add(state.shape[0])
        if self.sink is not None and task.pending is not None:
            prev = task.pending
            exceeded = sim.used[u] >= sim.params.storage_reserve * sim.params.storage
            r = reward("step", task.x_c, task.t_b, sim.now, prev.t, exceeded)
            self._store(prev.state, prev.action, r, state, task.x_c, False)
        hops = neighbor_hops(sim, u, task.destination)
        action = select_action(lambda: self.net.forward(state), task.x_c, self.epsilon,
                               self.schedule.heuristic, hops, live, sim.policy_rng,
                               self.schedule.compute_prob)
        if action != WAIT:
            task.pending = _Pending(state, action, sim.now)
        return action

    def on_terminal(self, sim, task, kind):
        prev = task.pending
        if self.sink is None or prev is None:
            return
        r = reward("delivered" if kind == "delivered" else "lost", task.x_c, task.t_b, sim.now)
        self._store(prev.state, prev.action, r, np.zeros_like(prev.state), 0, True)
        task.pending = None

    def _store(self, s, a, r, s2, xc2, done):
        self.rewards.append(r)
        self.sink.add(s, a, r, s2, xc2, done)


class RandomPolicy(Policy):
    """Uniformly random valid action."""

    name = "random"

    def decide(self, sim, u, task):
        acts = [j for j in range(4) if sim.live_dir[u, j]]
        if not task.x_c:
            acts.append(COMPUTE)
        if not acts:
            return WAIT
        return int(acts[sim.policy_rng.integers(len(acts))])
