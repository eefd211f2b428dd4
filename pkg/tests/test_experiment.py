import csv
import json

import pytest

from satroute.experiment.cli import main
from satroute.experiment.config import SCHEMA, ConfigError, config_from_dict, load_config
from satroute.experiment.report import report
from satroute.experiment.runner import (
    StartupError, build_policy, empirical_cdf, run, simulate, sweep, train_cli,
)
from satroute.experiment.config import PolicySpec

DESK = {"constellation": {"plane_count": 6, "sats_per_plane": 8, "beam_half_angle": 65}}


def cfg_dict(**kw):
    base = {**DESK, "policy": {"kind": "shortest_path"}, "traffic": {"aggregate_rate": 20},
            "durations": {"warmup": 5, "measure": 15}, "seed": 3}
    base.update(kw)
    return base


def test_cdf_examples():
    assert empirical_cdf([1, 2, 2, 5]) == [(1.0, 0.25), (2.0, 0.75), (5.0, 1.0)]
    pts = empirical_cdf([3.0, 0.5, 7.0, 0.5, 2.0])
    assert all(a[1] <= b[1] and a[0] < b[0] for a, b in zip(pts, pts[1:]))
    assert pts[-1][1] == 1.0


def test_schema_errors_have_paths():
    with pytest.raises(ConfigError, match="traffic/aggregate_rate"):
        config_from_dict(cfg_dict(traffic={"aggregate_rate": -1}))
    with pytest.raises(ConfigError, match="policy/kind"):
        config_from_dict(cfg_dict(policy={"kind": "nope"}))
    with pytest.raises(ConfigError, match="durations"):
        config_from_dict(cfg_dict(durations={"warmup": 10, "measure": 0.0}))
    with pytest.raises(ConfigError):
        config_from_dict(cfg_dict(bogus=1))


def test_presets_and_overrides():
    cfg = config_from_dict({"constellation": {"preset": "iridium", "beam_half_angle": 50}})
    assert cfg.constellation.plane_count == 6 and cfg.constellation.beam_half_angle == 50
    assert cfg.warmup == 120 and cfg.measure == 600


def test_missing_checkpoint_is_startup_error():
    with pytest.raises(StartupError):
        build_policy(PolicySpec("isatcr"))
    with pytest.raises(StartupError):
        build_policy(PolicySpec("isatcr", checkpoint="/nonexistent/x.npz"))


def test_run_outputs_and_determinism(tmp_path):
    cfg = config_from_dict(cfg_dict())
    s1 = run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes()
    assert (tmp_path / "a" / "tasks.csv").read_bytes() == (tmp_path / "b" / "tasks.csv").read_bytes()
    summary = json.loads(a)
    assert summary["generated"] == summary["delivered"] + summary["dropped"] + summary["in_flight"]
    done = summary["delivered"] + summary["dropped"]
    assert summary["loss_rate"] == pytest.approx(summary["dropped"] / done)
    with open(tmp_path / "a" / "tasks.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == done
    delivered = [r for r in rows if r["outcome"] == "delivered"]
    mean_hops = sum(int(r["hops"]) for r in delivered) / len(delivered)
    assert summary["mean_hops"] == pytest.approx(mean_hops, rel=1e-12)
    for r in delivered:
        parts = sum(float(r[k]) for k in ("T_p", "T_t", "T_q", "T_c"))
        assert parts == pytest.approx(float(r["t_end"]) - float(r["t_b"]), abs=1e-9)
    assert s1.instrumentation["message_payload"] == [12]


def test_zero_traffic_summary(tmp_path):
    cfg = config_from_dict(cfg_dict(traffic={"aggregate_rate": 1e-9}))
    s = run(cfg, tmp_path)
    assert s.generated == 0 and s.loss_rate == 0.0 and s.mean_delay is None


def test_sweep_marks_failed_points(tmp_path):
    cfg = config_from_dict(cfg_dict(policies=[{"kind": "random"}, {"kind": "shortest_path"}]))
    rows, failed = sweep(cfg, "constellation", ["iridium", "no-such-preset"], tmp_path)
    assert failed == 2
    assert [r["status"] for r in rows[:2]] == ["ok", "ok"]
    with open(tmp_path / "sweep_constellation.csv") as fh:
        header = next(csv.reader(fh))
    assert header[:5] == ["axis_value", "policy", "delay", "loss", "hops"]


def test_single_value_sweep_equals_run(tmp_path):
    cfg = config_from_dict(cfg_dict())
    rows, failed = sweep(cfg, "load", [20], tmp_path / "sw")
    s = run(cfg, tmp_path / "run")
    assert failed == 0 and float(rows[0]["delay"]) == s.mean_delay


def test_train_zero_epochs_and_resume(tmp_path):
    cfg = config_from_dict(cfg_dict(policy={"kind": "isatcr"},
                                    train={"epochs": 0, "epoch_duration": 5, "batch_size": 32, "grad_iters": 2}))
    train_cli(cfg, tmp_path / "t0")
    assert (tmp_path / "t0" / "checkpoint.npz").exists()
    cfg.train.epochs = 2
    res = train_cli(cfg, tmp_path / "t1", checkpoint=tmp_path / "t0" / "checkpoint.npz")
    assert [s.epoch for s in res.curve] == [0, 1]
    res2 = train_cli(cfg, tmp_path / "t2", checkpoint=tmp_path / "t1" / "checkpoint.npz")
    assert [s.epoch for s in res2.curve] == [2, 3]
    assert res2.curve[0].epsilon == cfg.train.schedule.epsilon(2)
    with open(tmp_path / "t2" / "curve.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2


def test_report_files(tmp_path):
    cfg = config_from_dict(cfg_dict())
    run(cfg, tmp_path / "r")
    sweep(cfg, "load", [10, 20], tmp_path / "s")
    files = report([tmp_path / "r", tmp_path / "s"], tmp_path / "rep")
    names = {f.name for f in files}
    assert {"compute_time_cdf.csv", "delay_vs_load.csv", "loss_vs_load.csv", "hops_vs_load.csv",
            "delay_vs_load.png"} <= names
    with open(tmp_path / "rep" / "compute_time_cdf.csv") as fh:
        by_run = {}
        for r in csv.DictReader(fh):
            by_run.setdefault(r["run"], []).append(float(r["cumulative_fraction"]))
    assert len(by_run) == 3  # the run plus one summary per sweep point
    for fr in by_run.values():
        assert fr == sorted(fr) and fr[-1] == 1.0


def test_cli_roundtrip(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg_dict()))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--seed", "4"]) == 0
    assert (tmp_path / "o" / "summary.json").exists()
    assert main(["run", "--config", str(path), "--policy", "isatcr", "--out", str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"traffic": {"aggregate_rate": "fast"}}))
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["schema", "--out", str(tmp_path / "s.json")]) == 0
    assert json.loads((tmp_path / "s.json").read_text()) == json.loads(json.dumps(SCHEMA))


def test_shipped_configs_validate():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1]
    for p in sorted((root / "configs").glob("*.json")):
        load_config(p)
    assert json.loads((root / "docs" / "config.schema.json").read_text()) == json.loads(json.dumps(SCHEMA))
