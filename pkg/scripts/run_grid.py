"""Full simulation grid (N x M x attribute) followed by the long-format report.

    python scripts/run_grid.py --out-dir runs/uniform --iterations 100 --jobs 8
"""

import argparse
import sys

from fairfeedback.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out-dir", default="runs/uniform")
    ap.add_argument("--iterations", type=int, default=100)
    ap.add_argument("--scenario", default="uniform_random")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    code = cli(["experiment", "--out-dir", args.out_dir, "--iterations", str(args.iterations),
                "--scenario", args.scenario, "--jobs", str(args.jobs), "--seed", str(args.seed)])
    if code == 0:
        code = cli(["report", args.out_dir, "--out", f"{args.out_dir}/convergence.csv"])
    sys.exit(code)


if __name__ == "__main__":
    main()
