"""Epoch-based training loop: roll out, learn from replay, decay epsilon, sync target."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import ExplorationSchedule, ReplayBuffer, sync_target, train_step
from .network import Adam, NumericFault, QNetwork, save_checkpoint
from .policy import DRLPolicy

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 6000
    epoch_duration: float = 30.0      # simulated seconds per epoch
    grad_iters: int = 64
    batch_size: int = 1024
    buffer_size: int = 200_000
    lr: float = 2e-4
    gamma: float = 0.99
    target_period: int = 10
    seed: int = 0
    schedule: ExplorationSchedule = field(default_factory=ExplorationSchedule)


@dataclass
class EpochStats:
    epoch: int
    mean_reward: float
    loss: float
    epsilon: float
    transitions: int


@dataclass
class TrainResult:
    net: QNetwork
    optimizer: Adam
    curve: list
    epochs_done: int


def train(env_factory: Callable, net: QNetwork, cfg: TrainConfig, name: str = "isatcr",
          local_state: bool = False, optimizer: Adam | None = None, start_epoch: int = 0,
          checkpoint_path: str | Path | None = None, on_epoch: Callable | None = None) -> TrainResult:
    """``env_factory(epoch, policy)`` must return a fresh simulation wired to ``policy``."""
    target = net.clone()
    optimizer = optimizer or Adam(net.params, lr=cfg.lr)
    buffer = ReplayBuffer(cfg.buffer_size, net.input_dim, dtype=net.dtype)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7919]))
    curve: list[EpochStats] = []
    for epoch in range(start_epoch, start_epoch + cfg.epochs):
        eps = cfg.schedule.epsilon(epoch)
        policy = DRLPolicy(net, name, local_state, eps, cfg.schedule, sink=buffer, gamma=cfg.gamma)
        sim = env_factory(epoch, policy)
        sim.run(sim.t_start + cfg.epoch_duration)
        losses = []
        if len(buffer) >= cfg.batch_size:
            for _ in range(cfg.grad_iters):
                batch = buffer.sample(cfg.batch_size, rng)
                try:
                    losses.append(train_step(net, target, optimizer, batch, cfg.gamma))
                except NumericFault:
                    if checkpoint_path is not None:
                        save_checkpoint(Path(checkpoint_path).with_suffix(".diverged.npz"),
                                        net, optimizer, epoch, eps)
                    raise
        stats = EpochStats(epoch, float(np.mean(policy.rewards)) if policy.rewards else 0.0,
                           float(np.mean(losses)) if losses else float("nan"), eps, len(policy.rewards))
        curve.append(stats)
        if (epoch + 1) % cfg.target_period == 0:
            sync_target(net, target)
        log.info("epoch %d reward %.4f loss %.4g eps %.3f n=%d", epoch, stats.mean_reward,
                 stats.loss, eps, stats.transitions)
        if on_epoch is not None:
            on_epoch(stats)
    return TrainResult(net, optimizer, curve, start_epoch + cfg.epochs)
