"""Command-line entry point.

Subcommands: train, evaluate, gradcheck, protocol, compare. Any config
key can be overridden with ``--section.key value`` (e.g.
``--train.epochs 80``). Failures print one machine-readable JSON line
to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .cost_adapt import load_history
from .errors import ConfigError, CostsenseError
from .experiment import build_splits, derive_seeds, load_config, run_experiment
from .gradcheck import loss_gradient_errors, network_gradient_errors
from .metrics import (
    compare_runs,
    dataset_fingerprint,
    evaluate,
    format_comparison,
    load_report,
    report_text,
    save_report,
)
from .network import load_checkpoint


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="costsense",
        description="cost-sensitive training for class-imbalanced data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one training experiment")
    train.add_argument("--config", help="INI config file")
    train.add_argument("--seed", type=int, required=True)
    train.add_argument("--out", help="output directory (shorthand for --output.dir)")

    ev = sub.add_parser("evaluate", help="score a checkpoint on the test split")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--config", help="INI config file (defines the data)")
    ev.add_argument("--seed", type=int, required=True,
                    help="seed of the original run (fixes the test split)")
    ev.add_argument("--out", help="also write report files here")

    gc = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    gc.add_argument("--trials", type=int, default=200,
                    help="loss-level random configurations")
    gc.add_argument("--network-configs", type=int, default=20,
                    help="end-to-end configurations per loss")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--tolerance", type=float, default=1e-5)

    proto = sub.add_parser("protocol", help="show the split the config produces")
    proto.add_argument("--config", help="INI config file")
    proto.add_argument("--seed", type=int, required=True)

    comp = sub.add_parser("compare", help="rank finished runs")
    comp.add_argument("runs", nargs="+", help="run output directories")

    return parser


def _collect_overrides(extra: list[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or "." not in token:
            raise ConfigError(f"unrecognized argument {token!r}")
        if i + 1 >= len(extra):
            raise ConfigError(f"override {token!r} is missing a value")
        overrides[token[2:]] = extra[i + 1]
        i += 2
    return overrides


def _cmd_train(args, overrides) -> int:
    cfg = load_config(args.config, overrides)
    cfg.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    report, history, _ = run_experiment(cfg)
    print(report_text(report), end="")
    print(f"artifacts: {cfg.output_dir}")
    return 0


def _cmd_evaluate(args, overrides) -> int:
    cfg = load_config(args.config, overrides)
    cfg.seed = args.seed
    _, _, test = build_splits(cfg, derive_seeds(cfg.seed))
    net, _ = load_checkpoint(args.checkpoint)
    report = evaluate(net, test, label=Path(args.checkpoint).stem)
    print(report_text(report), end="")
    if args.out:
        save_report(report, args.out)
    return 0


def _cmd_gradcheck(args, overrides) -> int:
    if overrides:
        raise ConfigError("gradcheck takes no config overrides")
    loss_report = loss_gradient_errors(trials=args.trials, seed=args.seed)
    net_report = network_gradient_errors(configs=args.network_configs,
                                         seed=args.seed)
    ok = True
    for name, rep in (("loss", loss_report), ("network", net_report)):
        for kind, err in rep.max_errors.items():
            status = "ok" if err < args.tolerance else "FAIL"
            ok &= err < args.tolerance
            print(f"{name:<8} {kind.value:<6} max relative error {err:.3e}  {status}")
        print(f"{name:<8} checked {rep.n_coordinates} coordinates over "
              f"{rep.n_configs} configurations")
    return 0 if ok else 1


def _cmd_protocol(args, overrides) -> int:
    cfg = load_config(args.config, overrides)
    cfg.seed = args.seed
    train, val, test = build_splits(cfg, derive_seeds(cfg.seed))
    print(f"{'class':<8}{'train':>8}{'val':>8}{'test':>8}")
    for c in range(train.n_classes):
        print(f"{c:<8}{train.class_histogram[c]:>8}"
              f"{val.class_histogram[c]:>8}{test.class_histogram[c]:>8}")
    print(f"{'total':<8}{train.n_samples:>8}{val.n_samples:>8}{test.n_samples:>8}")
    print(f"test_fingerprint: {dataset_fingerprint(test)}")
    return 0


def _cmd_compare(args, overrides) -> int:
    if overrides:
        raise ConfigError("compare takes no config overrides")
    reports = []
    for run in args.runs:
        report = load_report(Path(run))
        if not report.label:
            report = dataclasses.replace(report, label=Path(run).name)
        history_path = Path(run) / "history.jsonl"
        if history_path.exists():
            load_history(history_path)  # validates the sibling file
        reports.append(report)
    print(format_comparison(compare_runs(reports)))
    return 0


COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "gradcheck": _cmd_gradcheck,
    "protocol": _cmd_protocol,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _collect_overrides(extra)
        return COMMANDS[args.command](args, overrides)
    except CostsenseError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
