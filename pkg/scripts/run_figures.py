#!/usr/bin/env python3
"""Regenerate every figure bundle (CSV + SVG) into one output directory.

The full set takes a few minutes single-threaded; ``--fast`` shrinks the
grids and loosens the solver tolerance for a quick smoke run, and
``--workers`` parallelises the solver sweeps across processes.
"""

from __future__ import annotations

import argparse
import sys
import time

from aoi_twoway.cli import main as cli_main


def run(argv: list[str]) -> None:
    print("  $ aoi-twoway " + " ".join(argv), flush=True)
    started = time.perf_counter()
    rc = cli_main(argv)
    if rc != 0:
        sys.exit(rc)
    print(f"    done in {time.perf_counter() - started:.1f}s", flush=True)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="figures", help="output directory")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel solver processes for the sweeps")
    parser.add_argument("--fast", action="store_true",
                        help="small grids and loose tolerances")
    args = parser.parse_args()

    if args.fast:
        grid, cap, eps, caps = "50", "25", "1e-4", "5:50:5"
    else:
        grid, cap, eps, caps = "200", "50", "5e-4", "5:100:5"
    out = ["--out", args.out]
    workers = ["--workers", str(args.workers)]

    run(["figure", "region", "--grid", grid] + out)
    run(["figure", "beta", "--gamma", "0.4", "--mu", "0.1"] + out)
    run(["figure", "structure-1p", "--gamma", "0.4", "--cap", cap,
         "--epsilon", eps] + out)
    run(["figure", "structure-2p", "--gamma", "0.4", "--cap", cap,
         "--epsilon", eps] + out)
    run(["figure", "cap-sweep", "--gamma", "0.4", "--mu", "0.2",
         "--caps", caps, "--epsilon", eps] + out + workers)
    run(["figure", "comparison", "--gamma", "0.4,0.7,1.0", "--cap", cap,
         "--epsilon", eps] + out + workers)
    print(f"all bundles written to {args.out}/")


if __name__ == "__main__":
    main()
