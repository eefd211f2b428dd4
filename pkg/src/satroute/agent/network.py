"""Feed-forward Q-networks with hand-written backprop and Adam."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1
N_ACTIONS = 5


class NumericFault(FloatingPointError):
    pass


def leaky_relu(x, slope):
    return np.where(x > 0, x, slope * x)


class QNetwork:
    """in -> hidden -> hidden (leaky ReLU) -> Q heads.

    With ``dueling=True`` the trunk feeds a scalar value head and an
    advantage head, combined as V + (A - mean A). Otherwise a single linear
    head produces Q directly.
    """

    def __init__(self, input_dim=64, hidden=(256, 256), n_actions=N_ACTIONS, dueling=True,
                 slope=0.01, rng=None, dtype=np.float32):
        self.input_dim = input_dim
        self.hidden = tuple(hidden)
        self.n_actions = n_actions
        self.dueling = dueling
        self.slope = slope
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng() if rng is None else rng
        self.params: dict[str, np.ndarray] = {}
        dims = (input_dim,) + self.hidden
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self._init_layer(f"h{i}", a, b, rng)
        if dueling:
            self._init_layer("value", dims[-1], 1, rng)
            self._init_layer("adv", dims[-1], n_actions, rng)
        else:
            self._init_layer("q", dims[-1], n_actions, rng)

    def _init_layer(self, name, fan_in, fan_out, rng):
        bound = 1.0 / np.sqrt(fan_in)
        self.params[f"{name}.W"] = rng.uniform(-bound, bound, (fan_in, fan_out)).astype(self.dtype)
        self.params[f"{name}.b"] = rng.uniform(-bound, bound, fan_out).astype(self.dtype)

    # ---------------------------------------------------------------- forward
    def forward(self, x, keep=False):
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 1
        if single:
            x = x[None]
        p = self.params
        cache = {"x": x, "pre": [], "act": [x]}
        h = x
        for i in range(len(self.hidden)):
            z = h @ p[f"h{i}.W"] + p[f"h{i}.b"]
            h = np.where(z > 0, z, self.slope * z)
            if keep:
                cache["pre"].append(z)
                cache["act"].append(h)
        if self.dueling:
            v = h @ p["value.W"] + p["value.b"]
            a = h @ p["adv.W"] + p["adv.b"]
            q = v + (a - a.mean(axis=1, keepdims=True))
            if keep:
                cache["v"], cache["a"] = v, a
        else:
            q = h @ p["q.W"] + p["q.b"]
        if not np.all(np.isfinite(q)):
            raise NumericFault("non-finite Q values")
        out = q[0] if single else q
        return (out, cache) if keep else out

    def heads(self, x):
        """(V, A) for a dueling net; used by tests."""
        if not self.dueling:
            raise ValueError("not a dueling network")
        _, cache = self.forward(np.atleast_2d(x), keep=True)
        return cache["v"], cache["a"]

    def backward(self, cache, dq):
        """Gradients of a scalar loss given dLoss/dQ of shape (B, n_actions)."""
        p = self.params
        grads = {}
        h = cache["act"][-1]
        if self.dueling:
            dv = dq.sum(axis=1, keepdims=True)
            da = dq - dq.mean(axis=1, keepdims=True)
            grads["value.W"] = h.T @ dv
            grads["value.b"] = dv.sum(axis=0)
            grads["adv.W"] = h.T @ da
            grads["adv.b"] = da.sum(axis=0)
            dh = dv @ p["value.W"].T + da @ p["adv.W"].T
        else:
            grads["q.W"] = h.T @ dq
            grads["q.b"] = dq.sum(axis=0)
            dh = dq @ p["q.W"].T
        for i in reversed(range(len(self.hidden))):
            z = cache["pre"][i]
            dz = dh * np.where(z > 0, 1.0, self.slope).astype(dh.dtype)
            a_prev = cache["act"][i]
            grads[f"h{i}.W"] = a_prev.T @ dz
            grads[f"h{i}.b"] = dz.sum(axis=0)
            if i > 0:
                dh = dz @ p[f"h{i}.W"].T
        return grads

    def loss_and_grads(self, states, actions, targets):
        """Mean squared TD error over the batch and its parameter gradients."""
        q, cache = self.forward(states, keep=True)
        B = q.shape[0]
        idx = np.arange(B)
        resid = targets.astype(self.dtype) - q[idx, actions]
        loss = float(np.mean(resid.astype(np.float64) ** 2))
        if not np.isfinite(loss):
            raise NumericFault("non-finite loss")
        dq = np.zeros_like(q)
        dq[idx, actions] = -2.0 * resid / B
        return loss, self.backward(cache, dq)

    # ------------------------------------------------------------- plumbing
    def copy_from(self, other: "QNetwork"):
        for k, v in other.params.items():
            self.params[k] = v.copy()

    def clone(self) -> "QNetwork":
        net = QNetwork.__new__(QNetwork)
        net.__dict__.update({k: v for k, v in self.__dict__.items() if k != "params"})
        net.params = {k: v.copy() for k, v in self.params.items()}
        return net

    def describe(self) -> dict:
        return {"input_dim": self.input_dim, "hidden": list(self.hidden), "n_actions": self.n_actions,
                "dueling": self.dueling, "slope": self.slope, "dtype": self.dtype.name}


class Adam:
    """Adam without the AMSGrad max-of-second-moment variant."""

    def __init__(self, params: dict, lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            params[k] -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)


def save_checkpoint(path, net: QNetwork, optimizer: Adam | None = None, epoch: int = 0,
                    epsilon: float | None = None, extra: dict | None = None):
    path = Path(path)
    meta = {"version": CHECKPOINT_VERSION, "network": net.describe(), "epoch": epoch,
            "epsilon": epsilon, "adam_t": optimizer.t if optimizer else 0,
            "layers": {k: list(v.shape) for k, v in net.params.items()}}
    if extra:
        meta.update(extra)
    arrays = {f"param/{k}": v for k, v in net.params.items()}
    if optimizer is not None:
        arrays.update({f"m/{k}": v for k, v in optimizer.m.items()})
        arrays.update({f"v/{k}": v for k, v in optimizer.v.items()})
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path, lr: float = 2e-4):
    """Returns (network, optimizer, meta)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        cfg = meta["network"]
        net = QNetwork(cfg["input_dim"], cfg["hidden"], cfg["n_actions"], cfg["dueling"], cfg["slope"],
                       rng=np.random.default_rng(0), dtype=cfg["dtype"])
        for k in net.params:
            net.params[k] = data[f"param/{k}"].copy()
        opt = Adam(net.params, lr=lr)
        if f"m/{next(iter(net.params))}" in data:
            for k in net.params:
                opt.m[k] = data[f"m/{k}"].copy()
                opt.v[k] = data[f"v/{k}"].copy()
            opt.t = meta.get("adam_t", 0)
    return net, opt, meta
