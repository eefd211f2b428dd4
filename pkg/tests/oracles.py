"""Independent brute-force references used by the unit and acceptance tests."""
import numpy as np

from satroute.baselines import GlobalView, path_cost, plan_cost
from satroute.constellation import ConstellationConfig, neighbor_table


def random_graph(rng, max_nodes=50, max_degree=4):
    n = int(rng.integers(2, max_nodes + 1))
    adj = [[] for _ in range(n)]
    for _ in range(int(rng.integers(0, 3 * n))):
        a, b = (int(x) for x in rng.integers(n, size=2))
        if a != b and b not in adj[a] and len(adj[a]) < max_degree and len(adj[b]) < max_degree:
            adj[a].append(b)
            adj[b].append(a)
    return adj


def embedding_closed_form(adj, feats, K=4):
    """area2 and area3 by explicit walks of length one and two."""
    n = len(adj)
    a2 = np.zeros((n, 4))
    a3 = np.zeros((n, 4))
    for i in range(n):
        for j in adj[i]:
            a2[i] += feats[j] / K
            for u in adj[j]:
                if u != i:
                    a3[i] += feats[u] / (K * (K - 1))
    return a2, a3


def random_view(rng, P=3, S=4, storage=1e9):
    cfg = ConstellationConfig(P, S, 500.0, 60.0)
    nbr = neighbor_table(cfg)
    n = cfg.n_sats
    live = np.ones((n, 4), dtype=bool)
    for _ in range(int(rng.integers(0, 4))):
        u, j = int(rng.integers(n)), int(rng.integers(4))
        v = nbr[u, j]
        live[u, j] = False
        live[v, list(nbr[v]).index(u)] = False
    txq = np.zeros((n, 4))
    drain = np.zeros(n)
    # at most three queued tasks spread over links and compute queues
    for _ in range(int(rng.integers(0, 4))):
        if rng.random() < 0.5:
            txq[int(rng.integers(n)), int(rng.integers(4))] += rng.uniform(25e6, 75e6)
        else:
            drain[int(rng.integers(n))] += rng.uniform(1.0, 4.0)
    used = rng.uniform(0, 0.5, n) * storage
    for v in rng.choice(n, size=int(rng.integers(0, 3)), replace=False):
        used[v] = storage  # full node
    prop = rng.uniform(0.004, 0.008, (n, 4))
    # make the propagation matrix symmetric per link
    for u in range(n):
        for j in range(4):
            v = nbr[u, j]
            k = list(nbr[v]).index(u)
            prop[v, k] = prop[u, j]
    return GlobalView(nbr, live, txq, prop, used, drain, storage, 1.2e9, 50e9)


def simple_paths(view, start, end, size):
    """All simple paths start -> end whose nodes after ``start`` can store ``size`` bytes."""
    out = []

    def walk(path):
        u = path[-1]
        if u == end:
            out.append(list(path))
            return
        for j in range(4):
            v = int(view.neighbors[u, j])
            if view.live[u, j] and v not in path and view.fits(v, size):
                path.append(v)
                walk(path)
                path.pop()

    walk([start])
    return out


def exhaustive_plan(view, source, destination, s, d, s_prime):
    """Minimum plan-time delay over every (compute node, simple path, simple path).

    The cost is a sum of a leg-1 term, a node term and a leg-2 term with no
    coupling, so scanning each leg's simple paths separately covers the full
    product without materialising it.
    """
    best = None
    n = len(view.used)
    for v in range(n):
        if v == destination:
            continue
        legs1 = simple_paths(view, source, v, s)
        legs2 = simple_paths(view, v, destination, s_prime)
        if not legs1 or not legs2:
            continue
        l1 = min(legs1, key=lambda p: path_cost(view, p, s))
        l2 = min(legs2, key=lambda p: path_cost(view, p, s_prime))
        c = plan_cost(view, l1, v, l2, s, d, s_prime)
        if best is None or c < best[0]:
            best = (c, v, l1, l2)
    return best
