"""Average per-slot rate of every virtual network under each policy.

Usage: python scripts/slice_averages.py [--config PATH] [--replications N] [--out DIR]
"""

import argparse
import csv
import os

from rbaccess.cli import experiment_base
from rbaccess.config import RunConfig, load_config
from rbaccess.harness import slice_averages


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--replications", type=int)
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else RunConfig()
    reps = args.replications or cfg.replications
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    rows = slice_averages(experiment_base(cfg), cfg.policies, reps, cfg.seed)
    path = os.path.join(out, "slice_averages.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("slice", "policy", "mean_rate_bps"))
        for name, policy, rate in rows:
            w.writerow((name, policy, repr(rate)))
            print(f"{name:6s} {policy:18s} {rate / 1e6:10.3f} Mbit/s")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
