"""Local against global selection cardinality over paired synthetic trials.

    python3 scripts/selection_cardinality.py --trials 50
"""
import argparse

import numpy as np

from fingergeo.dataset import synth_feature_matrix
from fingergeo.selection import SelectionConfig, foba


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--subjects", type=int, default=20)
    ap.add_argument("--ordering", choices=("rank", "random"), default="random")
    args = ap.parse_args()
    rows = []
    for t in range(args.trials):
        X, y = synth_feature_matrix(args.subjects, 3, 52, informative=range(0, 52, 2), seed=t)
        X = (X - X.min(0)) / (X.max(0) - X.min(0))
        local = foba(X, y, SelectionConfig(granularity="local", ordering=args.ordering, seed=t))
        glob = foba(X, y, SelectionConfig(granularity="global", ordering=args.ordering, seed=t))
        rows.append((local.cardinality, glob.cardinality, local.final_accuracy, glob.final_accuracy))
    rows = np.array(rows)
    wins = int(np.sum(rows[:, 0] <= rows[:, 1]))
    print(f"local <= global in {wins}/{args.trials} trials")
    print(f"mean cardinality: local {rows[:, 0].mean():.1f}, global {rows[:, 1].mean():.1f}")
    print(f"mean training accuracy: local {rows[:, 2].mean():.3f}, global {rows[:, 3].mean():.3f}")


if __name__ == "__main__":
    main()
