"""Trainer CLI: train --model {lenet5,resnet20} --activation {relu,square}
--seed S --out DIR. Emits the manifest JSON on stdout and CSV weights in
the output directory."""

from __future__ import annotations

import argparse
import json
import sys

from .train import DatasetMissing, square_resnet_divergence, train_lenet5, train_resnet20


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fheact-train")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train")
    p.add_argument("--model", choices=["lenet5", "resnet20"], required=True)
    p.add_argument("--activation", choices=["relu", "square"], default="relu")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--data", help="dataset root (default: $FHEACT_DATA or ./data)")
    p.add_argument("--epochs", type=int)
    d = sub.add_parser("divergence-demo")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--epochs", type=int, default=5)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "divergence-demo":
            result = square_resnet_divergence(args.seed, args.epochs)
        elif args.model == "lenet5":
            kwargs = {"epochs": args.epochs} if args.epochs else {}
            result = train_lenet5(args.activation, args.seed, args.out, args.data, **kwargs)
        else:
            if args.activation == "square":
                print(
                    "error: square-activation ResNet-20 training diverges; "
                    "run the divergence-demo subcommand to see it",
                    file=sys.stderr,
                )
                return 2
            kwargs = {"epochs": args.epochs} if args.epochs else {}
            result = train_resnet20(args.seed, args.out, args.data, **kwargs)
    except DatasetMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
