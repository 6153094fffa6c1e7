"""Command line entry point.

Subcommands:

* ``run``     - execute one configured run
* ``compare`` - run dqn / qlearning / sleep on a shared seed and tabulate
* ``sweep``   - cartesian sweep over ``--vary key=v1,v2,...`` lists
* ``oracle``  - run a small instance and score it against exhaustive search

Exit codes: 0 on success, 1 for configuration problems (unreadable or
invalid config, bad sweep values), 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import sys

from .config import RunConfig, load_config
from .errors import InvalidConfig, ParseError, RanPowerError, ValidationError
from .runner import run, run_compare, run_oracle_check, run_sweep


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory (default: config out_dir)")
    parser.add_argument(
        "--quiet", action="store_true", help="suppress progress output"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ranpower",
        description="Multi-cell downlink power management simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one run")
    _add_common(p_run)
    p_run.add_argument("--agent", choices=("dqn", "qlearning", "sleep"))

    p_cmp = sub.add_parser("compare", help="run all agents on a shared seed")
    _add_common(p_cmp)

    p_sweep = sub.add_parser("sweep", help="cartesian sweep over config keys")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--vary",
        action="append",
        default=[],
        metavar="KEY=V1,V2",
        help="comma-separated values for one key; repeat for a grid",
    )
    p_sweep.add_argument(
        "--workers", type=int, default=1, help="parallel worker processes"
    )

    p_oracle = sub.add_parser("oracle", help="score a small run against exhaustive search")
    _add_common(p_oracle)
    p_oracle.add_argument("--agent", choices=("dqn", "qlearning", "sleep"))

    return parser


def _load(args: argparse.Namespace) -> RunConfig:
    overrides = {"seed": args.seed}
    if getattr(args, "agent", None) is not None:
        overrides["agent"] = args.agent
    return load_config(args.config, **overrides)


def _parse_vary(specs: list[str], base: RunConfig) -> dict[str, list]:
    from dataclasses import fields

    types = {f.name: f.type for f in fields(RunConfig)}
    vary: dict[str, list] = {}
    for entry in specs:
        if "=" not in entry:
            raise ValidationError(f"--vary expects KEY=V1,V2,..., got {entry!r}")
        key, _, raw = entry.partition("=")
        key = key.strip()
        if key not in types:
            raise ValidationError(f"unknown config key '{key}'")
        anno = types[key]
        kind = anno if isinstance(anno, str) else anno.__name__
        cast = {"int": int, "float": float}.get(kind, str)
        try:
            vary[key] = [cast(v.strip()) for v in raw.split(",") if v.strip()]
        except ValueError as exc:
            raise ValidationError(f"config key '{key}' expects {kind}") from exc
        if not vary[key]:
            raise ValidationError(f"--vary gave no values for '{key}'")
    if not vary:
        raise ValidationError("sweep needs at least one --vary KEY=V1,V2")
    return vary


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "sweep":
            vary = _parse_vary(args.vary, cfg)
    except (ParseError, ValidationError, InvalidConfig, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            run(cfg, args.out, quiet=args.quiet)
        elif args.command == "compare":
            table = run_compare(cfg, args.out, quiet=args.quiet)
            if not args.quiet:
                for entry in table:
                    print(
                        f"{entry['agent']:>10}: "
                        f"ee={entry['ee_overall_mbps_per_dbw']:.4f} Mbps/dBW"
                    )
        elif args.command == "sweep":
            run_sweep(cfg, vary, args.out, workers=args.workers, quiet=args.quiet)
        elif args.command == "oracle":
            run_oracle_check(cfg, args.out, quiet=args.quiet)
    except (RanPowerError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
