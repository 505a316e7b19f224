"""L1 mass of m and g as the sparsity weight beta grows."""
import argparse
import csv
import sys

from fairsel.experiments import beta_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--betas", default="0.001,0.01,0.1,1,10")
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows = beta_sweep([float(b) for b in args.betas.split(",")], alpha=args.alpha, seed=args.seed)
    writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)


if __name__ == "__main__":
    main()
