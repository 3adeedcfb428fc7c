"""Run the battery scenario in all three modes and summarize the series.

    python scripts/run_figures.py [--runs 10] [--out results]

Writes one run directory per mode (no-monitor, unordered, ordered) and a
combined summary.csv with mean/std of round trips per call index and of
buffer waits per channel.
"""

import argparse
import sys
from importlib import resources
from pathlib import Path

from pubsub_rv.cli import main as cli

MODES = {
    "no-monitor": ["--monitor", "off"],
    "unordered": ["--ordering", "off"],
    "ordered": ["--ordering", "on"],
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results")
    args = parser.parse_args()

    data = resources.files("pubsub_rv").joinpath("data")
    config, props = str(data / "case_study.config"), str(data / "case_study.properties")
    out = Path(args.out)
    dirs = []
    for mode, flags in MODES.items():
        target = out / mode
        print(f"[{mode}]", end=" ", flush=True)
        status = cli(["run", config, props, "--runs", str(args.runs), "--seed", str(args.seed), "--out", str(target), *flags])
        if status == 2:
            return status
        dirs.append(str(target))
    status = cli(["summarize", *dirs, "--out", str(out / "summary.csv")])
    print((out / "summary.csv").read_text(), end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
