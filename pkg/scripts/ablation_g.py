"""Full method versus the variant with the decomposition indicator g fixed at zero."""
import argparse
import csv
import sys

from fairsel.experiments import ablation_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--fraction", type=float, default=0.10)
    ap.add_argument("--restarts", type=int, default=50)
    args = ap.parse_args()

    rows = ablation_study(range(args.seeds), fraction=args.fraction, restarts=args.restarts)
    writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)


if __name__ == "__main__":
    main()
