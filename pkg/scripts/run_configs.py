#!/usr/bin/env python3
"""Train every config in a directory through the CLI and write per-config plot data.

    python scripts/run_configs.py configs/examples --out runs/examples
"""
import argparse
import sys
from pathlib import Path

from ctdelab.harness.cli import main as cli


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("directory", type=Path)
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)
    failed = []
    for cfg in sorted(args.directory.glob("*.yaml")):
        out = args.out / cfg.stem
        print(f"== {cfg.name}", flush=True)
        code = cli(["run", "--config", str(cfg), "--out", str(out), "--jobs", str(args.jobs)])
        if code == 0:
            code = cli(["plot-data", str(out), "--out", str(out / "plotdata.csv")])
        if code:
            failed.append(cfg.name)
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
