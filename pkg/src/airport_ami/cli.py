"""Command line: ``airport-ami run`` for batches, ``airport-ami map`` to print the layout."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    batch,
    config_from_pairs,
    dump_config,
    load_config,
    parse_overrides,
)
from .world import LayoutError, build_layout


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    pairs = parse_overrides(args.overrides)
    for key in ("runs", "seed", "out", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            pairs.append((key, str(value), None))
    for key in ("trace", "series", "svg"):
        if getattr(args, key, False):
            pairs.append((key, "true", None))
    return config_from_pairs(pairs, cfg)


def cmd_run(args) -> int:
    cfg = _config(args)
    start = time.perf_counter()
    result = batch(cfg)
    elapsed = time.perf_counter() - start
    print(f"{cfg.runs} runs in {elapsed:.1f}s, results in {cfg.out}")
    print(f"{'name':<24}{'average':>14}{'stddev':>14}")
    for row in result.summary:
        print(f"{row.name:<24}{row.average:>14.2f}{row.stddev:>14.2f}")
    if result.truncated:
        print("some runs hit the tick cap", file=sys.stderr)
        return 1
    return 0


def cmd_map(args) -> int:
    cfg = _config(args)
    sys.stdout.write(build_layout(cfg.params).to_text())
    return 0


def cmd_config(args) -> int:
    sys.stdout.write(dump_config(_config(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="airport-ami", description="Airport AmI agent simulation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("overrides", nargs="*", metavar="key=value", help="override any config key")

    r = sub.add_parser("run", help="run a batch of seeded simulations")
    common(r)
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int, help="base seed; runs use seed..seed+runs-1")
    r.add_argument("--out", help="output directory")
    r.add_argument("--workers", type=int, help="parallel processes (0 = all CPUs)")
    r.add_argument("--trace", action="store_true", help="write message traces")
    r.add_argument("--series", action="store_true", help="write per-tick satisfaction and queue series")
    r.add_argument("--svg", action="store_true", help="write the satisfaction plot")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("map", help="print the airport layout")
    common(m)
    m.set_defaults(func=cmd_map)

    c = sub.add_parser("config", help="print the effective config")
    common(c)
    c.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ExperimentError, LayoutError, OSError) as e:
        print(f"airport-ami: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
