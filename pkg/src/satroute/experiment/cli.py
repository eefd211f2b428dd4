"""Command line: ``satroute {train,run,sweep,report,schema}``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, PolicySpec, load_config, write_schema
from .report import report
from .runner import StartupError, run, sweep, train_cli


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    if getattr(args, "policy", None):
        cfg.policy = PolicySpec(args.policy, cfg.policy.checkpoint, cfg.policy.threshold, cfg.policy.retry_window)
    if getattr(args, "checkpoint", None):
        cfg.policy.checkpoint = args.checkpoint
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="satroute", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--policy")
        p.add_argument("--checkpoint")

    p_train = sub.add_parser("train", help="train a DRL policy")
    common(p_train)
    p_run = sub.add_parser("run", help="evaluate one policy")
    common(p_run)
    p_run.add_argument("--trace", help="write a JSON-lines event trace")
    p_sweep = sub.add_parser("sweep", help="sweep one axis for every configured policy")
    common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_report = sub.add_parser("report", help="build plot-ready data files and figures")
    p_report.add_argument("inputs", nargs="+")
    p_report.add_argument("--out", required=True)
    p_report.add_argument("--no-figures", action="store_true")
    p_schema = sub.add_parser("schema", help="write the config JSON schema")
    p_schema.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "train":
            cfg = _load(args)
            train_cli(cfg, checkpoint=args.checkpoint)
        elif args.cmd == "run":
            cfg = _load(args)
            s = run(cfg, trace_path=args.trace)
            print(f"{s.policy}: delivered={s.delivered} dropped={s.dropped} "
                  f"delay={s.mean_delay} loss={s.loss_rate:.4f} hops={s.mean_hops}")
        elif args.cmd == "sweep":
            cfg = _load(args)
            rows, failed = sweep(cfg, jobs=args.jobs)
            for r in rows:
                print(",".join(str(r[k]) for k in ("axis_value", "policy", "delay", "loss", "hops", "status")))
            if failed:
                return 1
        elif args.cmd == "report":
            for f in report(args.inputs, args.out, figures=not args.no_figures):
                print(f)
        elif args.cmd == "schema":
            write_schema(args.out)
    except (ConfigError, StartupError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
