"""Command-line front end: train a policy, evaluate a checkpoint.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import argparse
import sys
from pathlib import Path

from .evaluate import evaluate, render_csv
from .protocol import BridgeError, ProtocolViolation
from .ppo import TrainingDiverged
from .train import TrainConfig, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="satrl", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    t = sub.add_parser("train", help="train a policy against the bridge")
    t.add_argument("--config", required=True, help="TrainConfig JSON path")
    t.add_argument("--out", default="run", help="output directory")

    e = sub.add_parser("eval", help="roll out a checkpoint over a suite")
    e.add_argument("--ckpt", required=True, help="checkpoint path")
    e.add_argument("--suite", default="mini", choices=("mini",))
    e.add_argument("--seeds", default="0,1,2,3,4",
                   help="comma-separated seed list")
    e.add_argument("--rollouts", type=int, default=5)
    e.add_argument("--catalog", help="catalog.json passed to the server")
    e.add_argument("--out", help="CSV path (default: stdout)")
    return p


def _cmd_train(args) -> int:
    cfg = TrainConfig.from_json(args.config)
    result = train(cfg, args.out, log=lambda m: print(m, file=sys.stderr))
    print(f"checkpoint: {result.checkpoint}")
    print(f"curve: {result.curve}")
    print(f"final_cost: {result.final_cost:.9g}")
    return 0


def _cmd_eval(args) -> int:
    seeds = tuple(int(s) for s in args.seeds.split(",") if s != "")
    rows = evaluate(args.ckpt, suite=args.suite, seeds=seeds,
                    rollouts=args.rollouts, catalog=args.catalog)
    text = render_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {"train": _cmd_train, "eval": _cmd_eval}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.cmd](args)
    except (BridgeError, ProtocolViolation, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
