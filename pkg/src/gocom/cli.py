"""Command line entry point.

Subcommands: pretrain, train, eval, sweep, baseline.  Every run reads a
flat [section]/key=value config file; individual flags override config
keys.  Outputs: metrics.csv, checkpoints/, run.log in the output dir.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, ExperimentConfig, default_config, load_config
from .runner import run, sweep


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="config file ([section], key = value)")
    p.add_argument("--seed", type=int, metavar="N", help="override experiment seed")
    p.add_argument("--out", metavar="DIR", default="runs/out", help="output directory")
    p.add_argument("--snr-db", type=float, metavar="X", help="override train SNR (fixed)")
    p.add_argument("--alpha", type=float, metavar="X", help="override blending weight")
    p.add_argument("--channel", choices=("awgn", "rayleigh"), help="override channel kind")
    p.add_argument("--task", choices=("classify", "rl"), help="override task")
    p.add_argument("--system", choices=("gocom", "jscc", "upper", "random"),
                   help="override system under test")


def _build_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.task is not None:
        cfg.set("experiment", "task", args.task)
    if args.system is not None:
        cfg.set("experiment", "system", args.system)
    if args.seed is not None:
        cfg.set("experiment", "seed", str(args.seed))
    if args.channel is not None:
        cfg.set("channel", "kind", args.channel)
    if args.snr_db is not None:
        cfg.set("channel", "train_snr", f"fixed:{args.snr_db:g}")
    if args.alpha is not None:
        section = "train" if cfg.task == "classify" else "rl"
        cfg.set(section, "alpha", str(args.alpha))
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gocom",
                                     description="goal-oriented communication experiments")
    subs = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("pretrain", "train the task head without any channel"),
                            ("train", "full pipeline: pretrain, train, evaluate"),
                            ("eval", "evaluate saved checkpoints over the SNR grid"),
                            ("baseline", "run the baseline system (jscc / random)")):
        sp = subs.add_parser(name, help=help_text)
        _add_common(sp)

    sp = subs.add_parser("sweep", help="run one experiment per axis value and merge metrics")
    _add_common(sp)
    sp.add_argument("--axis", choices=("alpha", "snr"), required=True)
    sp.add_argument("--values", help="comma separated axis values "
                                     "(default: alpha 0,0.01,0.1,1; snr 0,20)")

    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command == "sweep":
            raw = args.values or ("0,0.01,0.1,1" if args.axis == "alpha" else "0,20")
            values = [v.strip() for v in raw.split(",") if v.strip()]
            sweep(cfg, args.out, args.axis, values)
        elif args.command == "baseline":
            cfg.set("experiment", "system", "jscc" if cfg.task == "classify" else "random")
            run(cfg, args.out)
        else:
            run(cfg, args.out, mode=args.command if args.command != "train" else "train")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
