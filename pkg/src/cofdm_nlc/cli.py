"""``simulate`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .errors import ConfigError
from .harness.config import PRESETS, load_config
from .harness.output import emit_results, summarize
from .harness.sweep import WORKERS_ENV, resolve_workers, run_sweep

log = logging.getLogger("cofdm_nlc")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Sweep launch power and distance for CO-OFDM superchannel nonlinearity compensation schemes.",
    )
    p.add_argument("--config", help="key = value config file, applied on top of --preset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--workers", type=int, help=f"parallel worker processes (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--preset", choices=PRESETS, help="start from a shipped preset")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.preset)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        workers = resolve_workers(args.workers)
    except (ConfigError, ValueError) as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return 2

    t0 = time.perf_counter()
    records = run_sweep(cfg, workers)
    try:
        paths = emit_results(records, cfg, args.out)
    except OSError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return 2
    log.info("sweep finished in %.1f s", time.perf_counter() - t0)
    print(summarize(records, cfg))
    print(f"results written to {paths.results.parent}")

    failed = [r for r in records if r.failed]
    for r in failed:
        print(f"failed: {r.scheme} {r.launch_power_dbm:g} dBm {r.distance_km:g} km: {r.failure}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
