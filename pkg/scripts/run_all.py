#!/usr/bin/env python3
"""Run every experiment config in this directory.

Each config lands in its own subdirectory of --out-root (default
./proctomo_out/<config-name>).  Pass --only to run a subset.
"""

import argparse
import sys
import time
from pathlib import Path

from proctomo import cli

HERE = Path(__file__).parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-root", default="proctomo_out")
    parser.add_argument("--only", nargs="*", default=None,
                        help="config stems to run, e.g. rank_sweep")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    configs = sorted(HERE.glob("*.yaml"))
    if args.only:
        configs = [c for c in configs if c.stem in args.only]
    if not configs:
        print("no configs selected", file=sys.stderr)
        return 1

    for cfg in configs:
        out_dir = Path(args.out_root) / cfg.stem
        print(f"== {cfg.stem} -> {out_dir}")
        t0 = time.perf_counter()
        code = cli.main(["run", str(cfg), "--out-dir", str(out_dir),
                         "--threads", str(args.threads)])
        print(f"   done in {time.perf_counter() - t0:.1f}s (exit {code})")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
