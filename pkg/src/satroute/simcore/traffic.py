"""Task arrivals, observation on/off periods, and link failure process."""
from __future__ import annotations

import numpy as np

from .params import SimParams
from .tasks import TaskType


def per_satellite_rates(aggregate_rate: float, is_land, land_weight: float = 2.0) -> np.ndarray:
    """Split an aggregate rate so land satellites run ``land_weight`` times faster than ocean ones."""
    if aggregate_rate <= 0:
        raise ValueError("aggregate rate must be > 0")
    w = np.where(np.asarray(is_land, dtype=bool), land_weight, 1.0)
    return aggregate_rate * w / w.sum()


def is_over_land(lat, lon, boxes) -> np.ndarray:
    lat = np.asarray(lat)
    lon = np.asarray(lon)
    out = np.zeros(lat.shape, dtype=bool)
    for la0, la1, lo0, lo1 in boxes:
        out |= (lat >= la0) & (lat <= la1) & (lon >= lo0) & (lon <= lo1)
    return out


class TrafficGenerator:
    """Network-level Poisson stream split over active satellites.

    Superposing independent per-satellite Poisson processes is the same as one
    stream of rate Λ whose arrivals are assigned to satellite i with
    probability λ_i / Λ, which is what this draws.
    """

    def __init__(self, params: SimParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng

    def next_interarrival(self) -> float:
        return float(self.rng.exponential(1.0 / self.params.aggregate_rate))

    def pick_source(self, weights: np.ndarray) -> int:
        total = weights.sum()
        u = self.rng.random() * total
        idx = int(np.searchsorted(np.cumsum(weights), u, side="right"))
        return min(idx, len(weights) - 1)

    def draw_task_attributes(self):
        p = self.params
        rng = self.rng
        kind = TaskType.COMPRESSION if rng.random() < p.compression_fraction else TaskType.INFERENCE
        s = float(rng.uniform(*p.task_size))
        if kind is TaskType.COMPRESSION:
            ratio = rng.uniform(*p.compression_ratio)
            s_prime = float(s / ratio)
            d = float(s * rng.uniform(*p.compression_demand))
        else:
            s_prime = float(p.inference_output)
            d = float(s * rng.uniform(*p.inference_demand))
        return kind, s, d, s_prime


class ObservationSchedule:
    """Alternating exponential on/off periods per satellite.

    On periods have the configured mean; off periods are stretched so the
    expected active fraction is Λ / (N · per-satellite rate), capped at 1.
    """

    def __init__(self, n_sats: int, params: SimParams, rng: np.random.Generator):
        self.rng = rng
        self.on_mean = params.observation_on_mean
        frac = min(1.0, params.aggregate_rate / (n_sats * params.per_sat_rate))
        self.active_fraction = frac
        self.off_mean = self.on_mean * (1.0 - frac) / frac if frac < 1.0 else 0.0
        self.active = rng.random(n_sats) < frac if frac < 1.0 else np.ones(n_sats, dtype=bool)

    def next_duration(self, currently_active: bool) -> float:
        mean = self.on_mean if currently_active else self.off_mean
        return float(self.rng.exponential(mean))

    @property
    def always_on(self) -> bool:
        return self.active_fraction >= 1.0


def failure_probability(target_fraction: float, recovery_probability: float) -> float:
    """Per-step failure probability giving the requested steady-state faulty fraction."""
    if target_fraction <= 0:
        return 0.0
    return target_fraction * recovery_probability / (1.0 - target_fraction)


class FailureProcess:
    """Independent two-state Markov chain per undirected ISL, stepped every detection period."""

    def __init__(self, n_edges: int, p: float, q: float, rng: np.random.Generator,
                 step: float = 0.25, start_stationary: bool = True):
        if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
            raise ValueError("p and q must be probabilities")
        self.p, self.q, self.step_length = p, q, step
        self.rng = rng
        if start_stationary and p > 0:
            self.faulty = rng.random(n_edges) < p / (p + q)
        else:
            self.faulty = np.zeros(n_edges, dtype=bool)

    @classmethod
    def from_target(cls, n_edges: int, target_fraction: float, mean_repair: float,
                    rng: np.random.Generator, step: float = 0.25, **kw) -> "FailureProcess":
        q = min(1.0, step / mean_repair)
        return cls(n_edges, failure_probability(target_fraction, q), q, rng, step, **kw)

    @property
    def steady_state(self) -> float:
        return self.p / (self.p + self.q) if self.p > 0 else 0.0

    def step(self) -> list[tuple[int, bool]]:
        """Advance one period; returns (edge, up) for every edge that changed state."""
        u = self.rng.random(self.faulty.shape[0])
        fail = ~self.faulty & (u < self.p)
        recover = self.faulty & (u < self.q)
        self.faulty = (self.faulty | fail) & ~recover
        events = [(int(k), False) for k in np.flatnonzero(fail)]
        events += [(int(k), True) for k in np.flatnonzero(recover)]
        events.sort()
        return events


def step_failures(proc: FailureProcess, rng=None) -> list[tuple[int, bool]]:
    if rng is not None:
        proc.rng = rng
    return proc.step()
