"""Plot-ready data series and matplotlib figures from run/sweep outputs."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .runner import empirical_cdf  # noqa: E402

METRICS = (("delay", "Average task delay (s)"), ("loss", "Packet loss rate"), ("hops", "Average hops"))
AXIS_LABELS = {"load": "Task load (tasks/s)", "failure_rate": "Link failure rate",
               "constellation": "Constellation"}


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def series_from_sweep(rows) -> dict:
    """{metric: {policy: [(axis_value, value), ...]}} from combined sweep rows."""
    out = {m: defaultdict(list) for m, _ in METRICS}
    for r in rows:
        if r.get("status", "ok") != "ok":
            continue
        for m, _ in METRICS:
            if r[m] != "":
                out[m][r["policy"]].append((r["axis_value"], float(r[m])))
    return out


def _plot_series(series, metric, label, axis, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    for policy, pts in sorted(series.items()):
        xs = [p[0] for p in pts]
        try:
            xs = [float(x) for x in xs]
        except ValueError:
            pass
        ax.plot(xs, [p[1] for p in pts], marker="o", label=policy)
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel(label)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def report(inputs, out_dir, figures: bool = True) -> list[Path]:
    """Turn summaries, sweep CSVs and reward curves into per-figure data files.

    ``inputs`` is a list of paths: summary.json files, sweep_<axis>.csv files,
    curve.csv files, or directories searched for those.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    paths: list[Path] = []
    for p in map(Path, inputs):
        if p.is_dir():
            paths += sorted(p.rglob("summary.json")) + sorted(p.rglob("sweep_*.csv")) + sorted(p.rglob("curve.csv"))
        else:
            paths.append(p)
    if not paths:
        raise FileNotFoundError("report: no summaries, sweep tables or curves found")

    summaries = [p for p in paths if p.name == "summary.json"]
    if summaries:
        rows, cdf_rows = [], []
        for i, p in enumerate(summaries):
            s = json.loads(p.read_text())
            label = str(p.parent)
            rows.append([label, s["policy"], s["mean_delay"], s["loss_rate"], s["mean_hops"]])
            for x, f in empirical_cdf(s["compute_time_per_sat"]):
                cdf_rows.append([label, s["policy"], repr(x), repr(f)])
        f1 = out / "summaries.csv"
        _write_rows(f1, ["run", "policy", "delay", "loss", "hops"], rows)
        f2 = out / "compute_time_cdf.csv"
        _write_rows(f2, ["run", "policy", "value", "cumulative_fraction"], cdf_rows)
        files += [f1, f2]
        if figures:
            fig, ax = plt.subplots(figsize=(4.5, 3.2))
            by_run = defaultdict(list)
            for run, policy, x, f in cdf_rows:
                by_run[(run, policy)].append((float(x), float(f)))
            for (run, policy), pts in by_run.items():
                ax.step([p[0] for p in pts], [p[1] for p in pts], where="post", label=policy)
            ax.set_xlabel("Satellite computing time (s)")
            ax.set_ylabel("CDF")
            ax.legend(fontsize=7)
            fig.tight_layout()
            fig.savefig(out / "compute_time_cdf.png", dpi=120)
            plt.close(fig)
            files.append(out / "compute_time_cdf.png")

    for p in (p for p in paths if p.name.startswith("sweep_")):
        axis = p.stem[len("sweep_"):]
        series = series_from_sweep(_read_csv(p))
        for metric, label in METRICS:
            f = out / f"{metric}_vs_{axis}.csv"
            _write_rows(f, [axis, "policy", metric],
                        [[x, pol, repr(v)] for pol, pts in sorted(series[metric].items()) for x, v in pts])
            files.append(f)
            if figures:
                png = f.with_suffix(".png")
                _plot_series(series[metric], metric, label, axis, png)
                files.append(png)

    for i, p in enumerate(p for p in paths if p.name == "curve.csv"):
        rows = _read_csv(p)
        f = out / (f"reward_vs_epoch_{i}.csv" if i else "reward_vs_epoch.csv")
        _write_rows(f, ["epoch", "mean_reward"], [[r["epoch"], r["mean_reward"]] for r in rows])
        files.append(f)
        if figures and rows:
            fig, ax = plt.subplots(figsize=(4.5, 3.2))
            ax.plot([int(r["epoch"]) for r in rows], [float(r["mean_reward"]) for r in rows], lw=0.8)
            ax.set_xlabel("Epoch")
            ax.set_ylabel("Average reward")
            fig.tight_layout()
            fig.savefig(f.with_suffix(".png"), dpi=120)
            plt.close(fig)
            files.append(f.with_suffix(".png"))
    return files
