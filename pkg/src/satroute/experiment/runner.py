"""Run, sweep and train entry points plus metric aggregation."""
from __future__ import annotations

import copy
import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..agent.core import ExplorationSchedule
from ..agent.network import Adam, QNetwork, load_checkpoint, save_checkpoint
from ..agent.policy import DRLPolicy, RandomPolicy
from ..agent.train import train
from ..baselines import ICSPolicy, ShortestPathPolicy, make_local_network
from ..constellation import PRESETS
from ..simcore.engine import Simulation
from ..simcore.tasks import account_delay
from .config import ConfigError, ExperimentConfig, PolicySpec

log = logging.getLogger(__name__)

DRL_KINDS = {"isatcr": (64, True, False), "d3qn_local": (32, True, True), "ddqn_local": (32, False, True)}

TASK_COLUMNS = ["task_id", "type", "s", "d", "s_prime", "t_b", "t_end", "T_p", "T_t", "T_q", "T_c",
                "hops", "computed_at", "outcome"]


class StartupError(RuntimeError):
    pass


def new_network(kind: str, seed: int = 0) -> QNetwork:
    dim, dueling, local = DRL_KINDS[kind]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 31337]))
    if local:
        return make_local_network(dueling, rng=rng)
    return QNetwork(dim, (256, 256), 5, dueling=dueling, rng=rng)


def build_policy(spec: PolicySpec, net: QNetwork | None = None):
    kind = spec.kind
    if kind in DRL_KINDS:
        if net is None:
            if not spec.checkpoint:
                raise StartupError(f"policy {kind!r} needs a checkpoint")
            try:
                net, _, _ = load_checkpoint(spec.checkpoint)
            except FileNotFoundError as exc:
                raise StartupError(str(exc)) from None
        return DRLPolicy(net, kind, local_state=DRL_KINDS[kind][2], epsilon=0.0)
    if kind == "shortest_path":
        return ShortestPathPolicy(spec.threshold)
    if kind == "ics":
        return ICSPolicy(spec.retry_window)
    if kind == "random":
        return RandomPolicy()
    raise ConfigError(f"policy.kind: unknown policy {kind!r}")


# ------------------------------------------------------------------ metrics
@dataclass
class MetricsSummary:
    policy: str
    generated: int
    delivered: int
    dropped: int
    in_flight: int
    loss_rate: float
    mean_delay: float | None
    p50_delay: float | None
    p95_delay: float | None
    p99_delay: float | None
    mean_T_p: float | None
    mean_T_t: float | None
    mean_T_q: float | None
    mean_T_c: float | None
    mean_hops: float | None
    computed_fraction: float | None
    compute_time_per_sat: list = field(default_factory=list)
    instrumentation: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(sim: Simulation, policy_name: str, measured: list, compute_time: np.ndarray) -> MetricsSummary:
    delivered = [t for t in measured if t.outcome == "delivered"]
    dropped = sum(1 for t in measured if t.outcome == "dropped")
    in_flight = sum(1 for t in measured if t.outcome is None)
    n_done = len(delivered) + dropped

    def mean(xs):
        return float(np.mean(xs)) if len(xs) else None

    delays = np.array([t.t_end - t.t_b for t in delivered])
    pct = (lambda q: float(np.percentile(delays, q))) if len(delays) else (lambda q: None)
    c = sim.counters
    instr = {
        "decisions": c.decisions,
        "state_dims": sorted(c.state_sizes),
        "broadcasts": c.broadcasts,
        "messages": c.messages,
        "message_payload": sorted(c.message_payload),
        "messages_per_broadcast": c.messages / c.broadcasts if c.broadcasts else 0.0,
        "n_sats": sim.n,
    }
    return MetricsSummary(
        policy=policy_name, generated=len(measured), delivered=len(delivered), dropped=dropped,
        in_flight=in_flight, loss_rate=dropped / n_done if n_done else 0.0,
        mean_delay=mean(delays), p50_delay=pct(50), p95_delay=pct(95), p99_delay=pct(99),
        mean_T_p=mean([t.T_p for t in delivered]), mean_T_t=mean([t.T_t for t in delivered]),
        mean_T_q=mean([t.T_q for t in delivered]), mean_T_c=mean([t.T_c for t in delivered]),
        mean_hops=mean([t.hops for t in delivered]),
        computed_fraction=mean([t.x_c for t in delivered]),
        compute_time_per_sat=[float(x) for x in compute_time],
        instrumentation=instr,
    )


def empirical_cdf(values) -> list[tuple[float, float]]:
    xs = np.sort(np.asarray(values, dtype=float))
    n = len(xs)
    out = []
    for i, x in enumerate(xs):
        if i + 1 < n and xs[i + 1] == x:
            continue
        out.append((float(x), (i + 1) / n))
    return out


# ---------------------------------------------------------------------- run
def simulate(cfg: ExperimentConfig, spec: PolicySpec | None = None, net: QNetwork | None = None,
             trace=None):
    """Run one simulation; returns (sim, summary, measured tasks)."""
    spec = spec or cfg.policy
    policy = build_policy(spec, net)
    t0 = cfg.start_time
    sim = Simulation(cfg.constellation, cfg.sim, policy, seed=cfg.seed, ground_stations=cfg.ground_stations,
                     t_start=t0, trace=trace, record_from=t0 + cfg.warmup)
    sim.run(t0 + cfg.warmup)
    ct0 = sim.compute_time.copy()
    sim.run(t0 + cfg.horizon)
    measured = [t for t in sim.tasks if t.t_b >= t0 + cfg.warmup]
    summary = summarize(sim, spec.kind, measured, sim.compute_time - ct0)
    return sim, summary, measured


def write_tasks_csv(path, tasks):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TASK_COLUMNS)
        for t in tasks:
            if t.outcome is None:
                continue
            if t.outcome == "delivered":
                rec = account_delay(t)
                parts = [rec.T_p, rec.T_t, rec.T_q, rec.T_c]
            else:
                parts = [t.T_p, t.T_t, t.T_q, t.T_c]
            w.writerow([t.id, t.type.value, repr(t.s), repr(t.d), repr(t.s_prime), repr(t.t_b),
                        repr(t.t_end), *map(repr, parts), t.hops,
                        "" if t.computed_at is None else t.computed_at, t.outcome])


def write_cdf_csv(path, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "cumulative_fraction"])
        for x, f in empirical_cdf(values):
            w.writerow([repr(x), repr(f)])


def write_summary(path, summary: MetricsSummary):
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")


def run(cfg: ExperimentConfig, out_dir=None, spec: PolicySpec | None = None, net=None,
        trace_path=None) -> MetricsSummary:
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = open(trace_path, "w") if trace_path else None
    try:
        sim, summary, measured = simulate(cfg, spec, net, trace)
    finally:
        if trace:
            trace.close()
    write_summary(out / "summary.json", summary)
    write_tasks_csv(out / "tasks.csv", measured)
    write_cdf_csv(out / "cdf.csv", summary.compute_time_per_sat)
    return summary


# -------------------------------------------------------------------- sweep
AXES = ("load", "failure_rate", "constellation")
SWEEP_COLUMNS = ["axis_value", "policy", "delay", "loss", "hops", "status"]


def point_config(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    new = copy.deepcopy(cfg)
    if axis == "load":
        new.sim.aggregate_rate = float(value)
    elif axis == "failure_rate":
        new.sim.failure_rate = float(value)
    elif axis == "constellation":
        if value not in PRESETS:
            raise ConfigError(f"sweep.values: unknown constellation preset {value!r}")
        new.constellation = PRESETS[value]
    else:
        raise ConfigError(f"sweep.axis: unknown axis {axis!r}")
    return new


def _sweep_point(args):
    cfg, axis, value, spec, out = args
    try:
        summary = run(point_config(cfg, axis, value), out, spec)
        return value, spec.kind, summary, None
    except Exception as exc:  # one failed point must not sink the sweep
        return value, spec.kind, None, f"{type(exc).__name__}: {exc}"


def sweep(cfg: ExperimentConfig, axis: str | None = None, values=None, out_dir=None, jobs: int = 1):
    """One run per (value, policy) with the shared seed; returns (rows, failed_count)."""
    axis = axis or cfg.sweep_axis
    values = list(values if values is not None else cfg.sweep_values)
    if axis not in AXES:
        raise ConfigError(f"sweep.axis: expected one of {AXES}")
    if not values:
        raise ConfigError("sweep.values: need at least one value")
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs_list = []
    for value in values:
        for spec in cfg.policy_list():
            jobs_list.append((cfg, axis, value, spec, out / f"{axis}={value}" / spec.kind))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, jobs_list))
    else:
        results = [_sweep_point(j) for j in jobs_list]
    rows, failed = [], 0
    for value, kind, summary, err in results:
        if summary is None:
            failed += 1
            log.error("sweep point %s=%s policy %s failed: %s", axis, value, kind, err)
            rows.append({"axis_value": value, "policy": kind, "delay": "", "loss": "", "hops": "",
                         "status": f"failed: {err}"})
        else:
            rows.append({"axis_value": value, "policy": kind,
                         "delay": "" if summary.mean_delay is None else repr(summary.mean_delay),
                         "loss": repr(summary.loss_rate),
                         "hops": "" if summary.mean_hops is None else repr(summary.mean_hops),
                         "status": "ok"})
    with open(out / f"sweep_{axis}.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    return rows, failed


# -------------------------------------------------------------------- train
def make_env_factory(cfg: ExperimentConfig):
    def factory(epoch, policy):
        ss = np.random.SeedSequence([cfg.seed, epoch])
        seed = int(ss.generate_state(1)[0])
        start = float(np.random.default_rng(ss).uniform(0.0, 86400.0))
        return Simulation(cfg.constellation, cfg.sim, policy, seed=seed,
                          ground_stations=cfg.ground_stations, t_start=start, keep_tasks=False)
    return factory


def train_cli(cfg: ExperimentConfig, out_dir=None, checkpoint=None, kind: str | None = None,
              on_epoch=None):
    """Train (or resume) a DRL policy; writes checkpoint.npz and curve.csv."""
    kind = kind or cfg.policy.kind
    if kind not in DRL_KINDS:
        raise ConfigError(f"policy.kind: {kind!r} is not trainable")
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start_epoch = 0
    opt = None
    if checkpoint:
        net, opt, meta = load_checkpoint(checkpoint, lr=cfg.train.lr)
        start_epoch = int(meta.get("epoch", 0))
    else:
        net = new_network(kind, cfg.seed)
    ckpt = out / "checkpoint.npz"
    result = train(make_env_factory(cfg), net, cfg.train, name=kind, local_state=DRL_KINDS[kind][2],
                   optimizer=opt, start_epoch=start_epoch, checkpoint_path=ckpt, on_epoch=on_epoch)
    eps = cfg.train.schedule.epsilon(result.epochs_done)
    save_checkpoint(ckpt, result.net, result.optimizer, result.epochs_done, eps, {"kind": kind})
    write_curve(out / "curve.csv", result.curve)
    return result


def write_curve(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_reward", "loss", "epsilon"])
        for s in curve:
            w.writerow([s.epoch, repr(s.mean_reward), repr(s.loss), repr(s.epsilon)])
