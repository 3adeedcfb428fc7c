"""Count negative verdicts per property with and without ordering.

    python scripts/false_negatives.py [--runs 10] [--jitter-ns N]
"""

import argparse

from pubsub_rv.battery import run_case_study


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--jitter-ns", type=int, default=None)
    args = parser.parse_args()
    for ordering in (False, True):
        totals: dict[str, int] = {}
        for seed in range(args.runs):
            report = run_case_study(seed, ordering=ordering, jitter=args.jitter_ns)
            for pid in report.property_ids:
                totals[pid] = totals.get(pid, 0) + report.negatives(pid)
        label = "ordered  " if ordering else "unordered"
        print(label, " ".join(f"{pid}={n}" for pid, n in totals.items()))


if __name__ == "__main__":
    main()
