"""State assembly, masked action selection, rewards, TD targets and replay."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..simcore.engine import COMPUTE, WAIT
from .network import Adam, QNetwork

STATE_DIM = 64
LOCAL_STATE_DIM = 32
EDGE_FILL = 1.0
HOP_FILL = 2.0

BETA_S, BETA_D, BETA_L, BETA_M = 1.0, 0.05, 1.0, 0.25


class ContractViolation(RuntimeError):
    pass


# ------------------------------------------------------------------ state
def task_state(sim, task) -> np.ndarray:
    M = sim.params.storage
    return np.array([task.size / M, task.d / sim.params.demand_norm, task.s_prime / M, float(task.x_c)])


def edge_info(sim, u) -> np.ndarray:
    live = sim.live_dir[u]
    return np.where(live, sim.txq_bytes[u] / sim.params.storage, EDGE_FILL)


def neighbor_hops(sim, u, destination) -> np.ndarray:
    """Raw hop counts from each neighbour to the destination; -1 if dead or unreachable."""
    hops = sim.hop_field(destination).hops[sim.neighbors[u]]
    return np.where(sim.live_dir[u], hops, -1)


def destination_direction(sim, u, destination) -> np.ndarray:
    h = neighbor_hops(sim, u, destination)
    return np.where(h >= 0, h / sim.diameter, HOP_FILL)


def encode_state(sim, u, task) -> np.ndarray:
    """64 numbers: own feature, four neighbour reps, edge queues, destination direction, task."""
    s = np.empty(STATE_DIM)
    s[0:4] = sim.feature(u)
    s[4:52] = sim.neighbor_reps(u).reshape(-1)
    s[52:56] = edge_info(sim, u)
    s[56:60] = destination_direction(sim, u, task.destination)
    s[60:64] = task_state(sim, task)
    return s


def encode_local_state(sim, u, task) -> np.ndarray:
    """32 numbers: like encode_state but each neighbour contributes only its own 4-feature."""
    s = np.empty(LOCAL_STATE_DIM)
    s[0:4] = sim.feature(u)
    s[4:20] = sim.neighbor_features(u).reshape(-1)
    s[20:24] = edge_info(sim, u)
    s[24:28] = destination_direction(sim, u, task.destination)
    s[28:32] = task_state(sim, task)
    return s


# ------------------------------------------------------------ exploration
@dataclass(frozen=True)
class ExplorationSchedule:
    start: float = 0.9
    decay: float = 0.999
    floor: float = 0.02
    heuristic: float = 0.5
    compute_prob: float = 0.3

    def epsilon(self, epoch: int) -> float:
        return max(self.floor, self.start * self.decay ** epoch)


def valid_actions(live_dirs, x_c) -> list[int]:
    acts = [j for j in range(4) if live_dirs[j]]
    if not x_c:
        acts.append(COMPUTE)
    return acts


def masked_argmax(q, allowed) -> int:
    """Argmax restricted to ``allowed``; ties go to the lowest index."""
    allowed = sorted(allowed)
    vals = np.asarray(q)[allowed]
    return int(allowed[int(np.argmax(vals))])


def min_hop_direction(hops, live_dirs) -> int | None:
    best, best_h = None, None
    for j in range(4):
        if live_dirs[j] and hops[j] >= 0 and (best_h is None or hops[j] < best_h):
            best, best_h = j, hops[j]
    return best


def select_action(q, x_c, epsilon, p_h, neighbor_hops, live_dirs, rng, compute_prob=0.3) -> int:
    """Epsilon-greedy with heuristic exploration; computed tasks never pick COMPUTE.

    ``q`` may be a Q-vector or a zero-argument callable producing one (so the
    network is only evaluated on the greedy branch).
    """
    acts = valid_actions(live_dirs, x_c)
    if not acts:
        return WAIT
    if epsilon > 0 and rng.random() < epsilon:
        if rng.random() < p_h:
            if not x_c and rng.random() < compute_prob:
                return COMPUTE
            j = min_hop_direction(neighbor_hops, live_dirs)
            if j is not None:
                return j
        return int(acts[rng.integers(len(acts))])
    qv = q() if callable(q) else q
    return masked_argmax(qv, acts)


# ----------------------------------------------------------------- reward
def reward(kind: str, x_c: int, t_b: float, t_tau: float, t_L: float | None = None,
           storage_exceeded: bool = False, betas=(BETA_S, BETA_D, BETA_L, BETA_M)) -> float:
    b_s, b_d, b_l, b_m = betas
    if kind == "delivered":
        return (b_s if x_c else 0.0) + b_d * (t_b - t_tau)
    if kind == "lost":
        return -b_l + b_d * (t_b - t_tau)
    if kind == "step":
        if storage_exceeded:
            return -b_m + b_d * (t_b - t_tau)
        if t_L is None:
            raise ContractViolation("step reward needs the previous decision time")
        return b_d * (t_L - t_tau)
    raise ContractViolation(f"unknown transition kind {kind!r}")


# ------------------------------------------------------------- TD targets
def td_targets(target_net: QNetwork, rewards, next_states, next_xc, terminal, gamma=0.99) -> np.ndarray:
    """Batched masked targets: max over all actions, or over transmissions only when x'_c = 1."""
    q_next = np.asarray(target_net.forward(next_states), dtype=np.float64)
    full = q_next.max(axis=1)
    trans = q_next[:, :4].max(axis=1)
    boot = np.where(np.asarray(next_xc) > 0, trans, full)
    return np.asarray(rewards, dtype=np.float64) + gamma * boot * (1.0 - np.asarray(terminal, dtype=np.float64))


def td_target(target_net: QNetwork, R, next_state, next_xc, terminal, gamma=0.99) -> float:
    if terminal:
        return float(R)
    return float(td_targets(target_net, [R], np.atleast_2d(next_state), [next_xc], [False], gamma)[0])


# ----------------------------------------------------------------- replay
class ReplayBuffer:
    def __init__(self, capacity=200_000, state_dim=STATE_DIM, dtype=np.float32):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim), dtype=dtype)
        self.s2 = np.zeros((capacity, state_dim), dtype=dtype)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.xc2 = np.zeros(capacity, dtype=np.int8)
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.head = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s2, xc2, done):
        i = self.head
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.xc2[i] = xc2
        self.done[i] = done
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        if batch > self.size:
            raise ValueError("not enough transitions for a batch")
        idx = rng.choice(self.size, size=batch, replace=False)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.xc2[idx], self.done[idx]


# --------------------------------------------------------------- training
def train_step(online: QNetwork, target: QNetwork, optimizer: Adam, batch, gamma=0.99) -> float:
    s, a, r, s2, xc2, done = batch
    y = td_targets(target, r, s2, xc2, done, gamma)
    loss, grads = online.loss_and_grads(s, a, y)
    optimizer.step(online.params, grads)
    return loss


def sync_target(online: QNetwork, target: QNetwork, epoch: int | None = None, period_epochs: int = 10) -> bool:
    if epoch is None or epoch % period_epochs == 0:
        target.copy_from(online)
        return True
    return False
