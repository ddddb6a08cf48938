"""Command line: ``run``, ``sweep``, ``grid`` and ``cost``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric divergence.
Output goes to ``--output-dir``, else ``$ZOWARMUP_OUTPUT_DIR``, else
``zowarmup-out/<config name>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import costmodel, harness
from .config import load_config
from .errors import ConfigError, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _cmd_run(args) -> int:
    run = load_config(args.config)
    out = harness.output_dir(args.output_dir, Path(args.config).stem)
    result = harness.run_to_directory(run, out)
    last = result.metrics[-1] if result.metrics else None
    if last is not None:
        print(f"{len(result.metrics)} rounds, final eval accuracy {last.eval_accuracy:.4f}, "
              f"loss {last.eval_loss:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    run = load_config(args.config)
    dataset = harness.load_dataset(run)
    rows = harness.sweep(run.experiment, dataset, args.axis, args.values, args.seeds, args.jobs)
    out = harness.output_dir(args.output_dir, Path(args.config).stem)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{args.axis}.csv"
    harness.write_sweep_csv(path, args.axis, rows)
    print(harness.format_table(args.axis, rows))
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_grid(args) -> int:
    run = load_config(args.config)
    dataset = harness.load_dataset(run)
    names = args.params.split(",") if args.params else None
    grid = harness.default_grid(run.experiment, names)
    scored = harness.grid_search(run.experiment, dataset, grid, args.seeds, args.jobs)
    out = harness.output_dir(args.output_dir, Path(args.config).stem)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "grid.csv"
    harness.write_grid_csv(path, scored)
    best, mean, std = scored[0]
    cell = ", ".join(f"{k}={v:g}" for k, v in best.items())
    print(f"best cell over {len(scored)}: {cell} -> {100 * mean:.1f}({100 * std:.1f})")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_cost(args) -> int:
    desc = harness.load_descriptor(args.descriptor)
    zo_bs = args.zo_batch_size or args.batch_size
    report = costmodel.comparison(desc, args.batch_size, zo_bs, args.seeds_per_client, args.participants,
                                  accounting=args.accounting)
    text = costmodel.dumps(report)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zowarmup", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train once and write metrics, cost report and final weights")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="final accuracy (mean, std over seeds) along one axis")
    p.add_argument("config")
    p.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    p.add_argument("--values", required=True, nargs="+")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("grid", help="learning-rate grid search; reports the best cell")
    p.add_argument("config")
    p.add_argument("--params", help="comma separated subset of eta_s,eta_c_hi,eta_s_zo,eta_c_zo")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("cost", help="per-client communication and memory for a model descriptor")
    p.add_argument("descriptor",
                   help='JSON: {"param_count", "layer_outputs"}, {"mlp": [...]} or {"resnet18": {...}}')
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--zo-batch-size", type=int)
    p.add_argument("--seeds-per-client", type=int, default=3)
    p.add_argument("--participants", type=int, default=1)
    p.add_argument("--accounting", choices=costmodel.ACCOUNTING_MODES, default="word32")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_cost)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"zowarmup: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"zowarmup: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError) as exc:
        print(f"zowarmup: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
