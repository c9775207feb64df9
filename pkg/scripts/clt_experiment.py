#!/usr/bin/env python3
"""End-to-end CLT experiment.

Runs the Hermite-functional sweep and the excursion-area sweep through the
CLI (so manifests and CSVs land on disk exactly as a user would get them),
then prints the headline numbers.
"""

import argparse
import csv
from pathlib import Path

from sphclt.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="clt_experiment_out")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--reps", type=int, default=2000)
    parser.add_argument("--threads", type=int, default=2)
    args = parser.parse_args()

    out = Path(args.out_dir)
    common = ["--out-dir", str(out), "--seed", str(args.seed),
              "--reps", str(args.reps), "--threads", str(args.threads)]

    rc1 = cli_main(["clt", "--kind", "h", "--d", "2", "--q", "3",
                    "--ell", "16,64,128"] + common)
    rc2 = cli_main(["excursion", "--d", "2", "--z", "1.0", "--ell", "16,64"] + common)

    for name in ("clt_h_d2_q3.csv", "excursion_d2_z1.csv"):
        print(f"\n{name}:")
        with open(out / name, newline="") as fh:
            for row in csv.DictReader(fh):
                print(f"  ell={row['ell']:>4}  dK={float(row['empirical_dK']):.4f}"
                      f"  dW={float(row['empirical_dW']):.4f}"
                      f"  rate={float(row['theoretical_rate']):.4f}"
                      + (f"  bound_dK={float(row['explicit_bound']):.4f}"
                         if row["explicit_bound"] else ""))
    print(f"\nexit codes: clt={rc1}, excursion={rc2} (0 = all checks passed)")
    return max(rc1, rc2)


if __name__ == "__main__":
    raise SystemExit(main())
