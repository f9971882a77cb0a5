"""Command-line entry point.

Subcommands:
    generate   write jobs.csv for the configured workload
    run        run one scenario (both schedulers, flat + peak prices)
    sweep      repeat a scenario along one axis and aggregate sweep.csv
    report     re-aggregate comparison.csv / sweep.csv from existing outputs

Values come from defaults, then the --config file, then flags. Exit codes:
0 success, 2 configuration error, 3 infeasible scheduling window, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments
from .errors import ConfigurationError, InfeasibleWindowError
from .workload import generate_workload, write_jobs_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcflex",
        description="GPU data-center scheduling and demand-flexibility experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="flat key=value configuration file")
        p.add_argument("--seed", type=int, help="replace the configured seed list")
        p.add_argument("--out", type=Path, help="output directory")

    p_gen = sub.add_parser("generate", help="generate a workload and write jobs.csv")
    common(p_gen)

    p_run = sub.add_parser("run", help="run one scenario")
    common(p_run)
    p_run.add_argument("--scheduler", choices=["fifo", "milp", "both"], help="restrict schedulers")
    p_run.add_argument("--dump-lp", type=Path, help="dump each solved window in LP format here")

    p_sweep = sub.add_parser("sweep", help="run a one-axis sweep")
    common(p_sweep)
    p_sweep.add_argument(
        "--axis", choices=["peak_multiplier", "num_jobs", "util_mode", "gpu_mode"]
    )
    p_sweep.add_argument("--values", help="comma-separated axis values")

    p_rep = sub.add_parser("report", help="re-aggregate an existing output directory")
    p_rep.add_argument("--out", type=Path, required=True)
    return parser


def _load(args) -> tuple:
    mapping = experiments.load_config_file(args.config) if args.config else {}
    cfg = experiments.scenario_from_mapping(mapping)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if getattr(args, "scheduler", None):
        cfg = replace(cfg, scheduler=args.scheduler)
    out = args.out or Path(mapping.get("out", "results"))
    return cfg.validate(), mapping, out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "generate":
            cfg, _, out = _load(args)
            out.mkdir(parents=True, exist_ok=True)
            for seed in cfg.seeds:
                jobs = generate_workload(
                    replace(cfg.workload, seed=seed), cfg.facility.gpus_per_node
                )
                name = "jobs.csv" if len(cfg.seeds) == 1 else f"jobs_seed{seed:03d}.csv"
                write_jobs_csv(jobs, out / name)
                print(f"wrote {out / name} ({len(jobs)} jobs)")
        elif args.command == "run":
            cfg, _, out = _load(args)
            outcome = experiments.run_scenario(cfg, out, dump_lp=args.dump_lp)
            print(f"wrote {len(outcome.records)} runs under {out}")
        elif args.command == "sweep":
            cfg, mapping, out = _load(args)
            axis = args.axis or mapping.get("sweep_axis")
            raw = args.values or mapping.get("sweep_values")
            if not axis or not raw:
                raise ConfigurationError("sweep needs --axis and --values (or config keys)")
            values = tuple(v.strip() for v in raw.split(",") if v.strip())
            sweep = experiments.SweepSpec(axis, values, cfg)
            rows = experiments.run_sweep(sweep, out)
            print(f"wrote sweep.csv with {len(rows)} rows under {out}")
        elif args.command == "report":
            experiments.report(args.out)
            print(f"re-aggregated {args.out}")
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleWindowError as err:
        print(f"infeasible model: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
