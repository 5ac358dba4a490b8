"""Command-line interface.

Subcommands: ``run`` executes an experiment config, ``compare`` ranks
mappers across result bundles, ``sweep`` measures mapping runtime across
cluster sizes. Exit codes: 0 success, 2 invalid config or inputs,
3 infeasible per-node cap, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys

from . import report
from .cluster import ClusterError
from .dag import DagError
from .dispatch import DispatchError
from .experiment import (
    ConfigError,
    InvariantError,
    compare_report,
    load_config,
    run_experiment,
    scaling_sweep,
)
from .heft import InfeasibleCapError
from .wave import WaveError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_INVARIANT = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispersim",
        description="Map task DAGs onto dispersed compute clusters and simulate dispatch.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config and write a result bundle")
    run_p.add_argument("config", help="experiment config file (INI)")
    run_p.add_argument("--out-dir", help="bundle directory (default: out_dir from the config)")
    run_p.add_argument("--seed", type=int, help="override the experiment seed")
    run_p.add_argument(
        "--verbose-events",
        action="store_true",
        help="also write per-repetition simulation event logs",
    )

    cmp_p = sub.add_parser("compare", help="rank mappers across result bundles")
    cmp_p.add_argument("bundles", nargs="+", help="two or more bundle directories")
    cmp_p.add_argument("--out-dir", default="comparison", help="where to write ranking.csv")

    sweep_p = sub.add_parser("sweep", help="mapping runtime across cluster sizes")
    sweep_p.add_argument("config", help="experiment config file (INI)")
    sweep_p.add_argument(
        "--nodes",
        required=True,
        help="comma-separated node counts, e.g. 30,60,90",
    )
    sweep_p.add_argument("--out-dir", default="sweep", help="where to write sweep.csv")
    sweep_p.add_argument("--seed", type=int, help="override the experiment seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
            if args.seed is not None:
                config.seed = args.seed
            if args.verbose_events:
                config.verbose_events = True
            bundle = run_experiment(config, args.out_dir)
            header, rows = report.read_csv(bundle / "summary.csv")
            print(f"bundle written to {bundle}")
            print(report.text_table(header, [tuple(r) for r in rows]))
        elif args.command == "compare":
            rows = compare_report(args.bundles, args.out_dir)
            print(
                report.text_table(
                    ["rank", "mapper", "makespan_mean", "makespan_std", "mapping_runtime_mean"],
                    rows,
                )
            )
        else:  # sweep
            try:
                counts = [int(tok) for tok in args.nodes.split(",") if tok.strip()]
            except ValueError:
                raise ConfigError(f"--nodes must be integers: {args.nodes!r}") from None
            config = load_config(args.config)
            if args.seed is not None:
                config.seed = args.seed
            rows = scaling_sweep(config, counts, args.out_dir)
            print(
                report.text_table(
                    ["mapper", "nodes", "runtime_mean", "runtime_std"],
                    rows,
                )
            )
    except InfeasibleCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, DagError, ClusterError, WaveError, DispatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
