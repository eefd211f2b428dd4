"""Small policies and scenario builders shared by the tests."""
import numpy as np

from satroute.constellation import ConstellationConfig
from satroute.simcore.engine import COMPUTE, WAIT, Policy

DESK = ConstellationConfig(6, 8, 500.0, 60.0, 65.0)


class ComputeThenHop(Policy):
    """Compute at the first satellite, then walk the hop field to the destination."""

    name = "compute_then_hop"

    def decide(self, sim, u, task):
        if not task.x_c:
            return COMPUTE
        hops = sim.hop_field(task.destination).hops
        best = None
        for j in range(4):
            v = sim.neighbors[u, j]
            if sim.live_dir[u, j] and hops[v] >= 0 and (best is None or hops[v] < hops[sim.neighbors[u, best]]):
                best = j
        return WAIT if best is None else best


def tiled(log, t_b):
    cursor = t_b
    for start, end, _ in log:
        assert start == cursor
        cursor = end
    return cursor
