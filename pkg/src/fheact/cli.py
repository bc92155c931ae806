"""Command-line front end.

Subcommands: infer, compare, plan, approx-analyze, gen-fixtures. Every flag
can also be supplied through a JSON config file (--config); explicit flags
win. Exit status: 0 success, 2 usage error, 3 data or validation error,
4 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cheb
from .activations import ActivationKind, identity, relu_approx, relu_switch, square
from .errors import ConfigError, FheactError
from .he_core import HeContext
from .netgraph import (
    BUILTINS,
    CompiledNetwork,
    NetworkSpec,
    plan_bootstraps,
    plaintext_reference,
)
from .params import SchemeParams, profile
from .weights import gen_fixtures, load_inputs, load_weights_csv

SCHEMA_VERSION = 1

_ACT_ALIASES = {
    "square": "square",
    "approx": "relu_approx",
    "relu_approx": "relu_approx",
    "switch": "relu_switch",
    "relu_switch": "relu_switch",
    "identity": "identity",
}


class UsageError(Exception):
    pass


def _parse_activation(name: str, beta: float, degree: int) -> ActivationKind:
    tag = _ACT_ALIASES.get(name)
    if tag is None:
        raise UsageError(f"unknown activation {name!r} (choose from {sorted(set(_ACT_ALIASES))})")
    if tag == "relu_approx":
        return relu_approx(beta, degree)
    return {"square": square, "relu_switch": relu_switch, "identity": identity}[tag]()


def _load_network(name: str, act: ActivationKind) -> NetworkSpec:
    if name in BUILTINS:
        return BUILTINS[name](act)
    path = Path(name)
    if not path.exists():
        raise UsageError(f"--network must be one of {sorted(BUILTINS)} or a JSON path, got {name!r}")
    return NetworkSpec.from_json(path)


def _load_params(net: NetworkSpec, params_arg: str | None, sigma: float | None) -> SchemeParams:
    if params_arg is None:
        params = net.params()
    elif Path(params_arg).exists():
        params = SchemeParams.from_json(params_arg)
    else:
        params = profile(params_arg)
    if sigma is not None:
        params = params.replace(noise_sigma=sigma)
    return params


def _parse_degrees(spec: str) -> list[int]:
    """'10..100' (step 10), '10..100:5', '10,20,30', or a single integer."""
    if ".." in spec:
        head, _, step = spec.partition(":")
        lo, hi = head.split("..")
        step = int(step) if step else 10
        return list(range(int(lo), int(hi) + 1, step))
    if "," in spec:
        return [int(tok) for tok in spec.split(",")]
    return [int(spec)]


def _emit(payload: dict, out: str | None):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _report_skeleton(args) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": {
            "network": args.network,
            "activation": getattr(args, "activation", None),
            "beta": getattr(args, "beta", None),
            "degree": getattr(args, "degree", None),
        },
    }


def _run_samples(compiled: CompiledNetwork, images, plan, seed, jobs: int):
    def one(i):
        ctx = HeContext(compiled.params, seed=None if seed is None else seed + i)
        logits, report = compiled.run(ctx, images[i], plan)
        return logits, report

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, range(len(images))))
    return [one(i) for i in range(len(images))]


def cmd_infer(args) -> int:
    act = _parse_activation(args.activation, args.beta, args.degree)
    net = _load_network(args.network, act)
    params = _load_params(net, args.params, args.sigma)
    if not args.weights:
        raise UsageError("infer requires --weights")
    weights = load_weights_csv(args.weights, net)
    images, labels = load_inputs(args.inputs, net, args.samples, args.seed)
    if args.labels:
        from .weights import load_idx

        labels = load_idx(args.labels).astype(np.int64)[: args.samples]
    plan = plan_bootstraps(net, params)
    compiled = CompiledNetwork(net, weights, params)
    results = _run_samples(compiled, images, plan, args.seed, args.jobs)
    records = []
    correct = 0
    total_cost = 0.0
    for i, (logits, report) in enumerate(results):
        pred = int(np.argmax(logits))
        rec = {
            "index": i,
            "predicted": pred,
            "cost_units": report.cost_units,
            "bootstraps": report.bootstrap_count,
        }
        if labels is not None:
            rec["true"] = int(labels[i])
            correct += pred == int(labels[i])
        total_cost += report.cost_units
        records.append(rec)
    payload = _report_skeleton(args)
    payload.update(
        {
            "plan": plan.to_dict(),
            "records": records,
            "aggregate_cost_units": total_cost,
        }
    )
    if labels is not None:
        payload["accuracy"] = correct / len(records)
    _emit(payload, args.out)
    return 0


def cmd_compare(args) -> int:
    variants = [v.strip() for v in args.activation.split(",") if v.strip()]
    if not variants:
        raise UsageError("compare requires --activation with one or more kinds")
    if not args.weights:
        raise UsageError("compare requires --weights")
    rows = []
    for name in variants:
        act = _parse_activation(name, args.beta, args.degree)
        net = _load_network(args.network, act)
        params = _load_params(net, args.params, args.sigma)
        weights = load_weights_csv(args.weights, net)
        images, labels = load_inputs(args.inputs, net, args.samples, args.seed)
        if args.labels:
            from .weights import load_idx

            labels = load_idx(args.labels).astype(np.int64)[: args.samples]
        plan = plan_bootstraps(net, params)
        compiled = CompiledNetwork(net, weights, params)
        results = _run_samples(compiled, images, plan, args.seed, args.jobs)
        plain_correct = enc_correct = 0
        cost = 0.0
        boots = 0
        for i, (logits, report) in enumerate(results):
            plain = plaintext_reference(net, weights, images[i], exact_relu=True)
            cost += report.cost_units
            boots = report.bootstrap_count
            if labels is not None:
                plain_correct += int(np.argmax(plain)) == int(labels[i])
                enc_correct += int(np.argmax(logits)) == int(labels[i])
        row = {
            "variant": name,
            "cost_units": cost / len(results),
            "bootstraps": boots,
        }
        if labels is not None:
            row["plaintext_acc"] = plain_correct / len(results)
            row["encrypted_acc"] = enc_correct / len(results)
        rows.append(row)
    payload = _report_skeleton(args)
    payload["comparison"] = rows
    _emit(payload, args.out)
    return 0


def cmd_plan(args) -> int:
    act = _parse_activation(args.activation, args.beta, args.degree)
    net = _load_network(args.network, act)
    params = _load_params(net, args.params, args.sigma)
    plan = plan_bootstraps(net, params)
    payload = _report_skeleton(args)
    payload["plan"] = plan.to_dict()
    _emit(payload, args.out)
    return 0


def cmd_approx_analyze(args) -> int:
    degrees = _parse_degrees(args.degree_range)
    rows = cheb.degree_sweep(lambda z: max(0.0, z), degrees)
    lines = ["degree,max_error,depth_cost"]
    lines += [f"{d},{err:.17g},{cost}" for d, err, cost in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen_fixtures(args) -> int:
    net = _load_network(args.network, identity())
    if not args.out:
        raise UsageError("gen-fixtures requires --out DIR")
    manifest = gen_fixtures(args.seed if args.seed is not None else 0, net, args.out)
    sys.stdout.write(json.dumps(manifest, indent=2) + "\n")
    return 0


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file supplying default flag values")
    p.add_argument("--network", help="builtin name (lenet5, resnet20) or JSON path")
    p.add_argument("--activation", default="square")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=50)
    p.add_argument("--params", help="profile name or SchemeParams JSON path")
    p.add_argument("--weights", help="weight CSV directory")
    p.add_argument("--inputs", help="image CSV file or IDX dataset directory")
    p.add_argument("--labels", help="IDX label file")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float, help="noise sigma override")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fheact",
        description="Encrypted-inference activation benchmark over an emulated leveled scheme",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("infer", cmd_infer),
        ("compare", cmd_compare),
        ("plan", cmd_plan),
        ("gen-fixtures", cmd_gen_fixtures),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("approx-analyze")
    _add_common(p)
    p.add_argument("--degree-range", default="10..100", help="e.g. 10..100, 10..100:5, or 10,20,30")
    p.set_defaults(func=cmd_approx_analyze)
    return parser


def _apply_config_file(args: argparse.Namespace, argv: list[str]):
    if not args.config:
        return
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    explicit = {tok.split("=")[0].lstrip("-").replace("-", "_") for tok in argv if tok.startswith("--")}
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"config {args.config}: unknown key {key!r}")
        if attr not in explicit:
            setattr(args, attr, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_config_file(args, argv)
        if args.command != "approx-analyze" and not args.network:
            raise UsageError("--network is required")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FheactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
