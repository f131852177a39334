"""Relative feature drift when the same noise-free hand is rendered at two rotations.

    python3 scripts/rotation_robustness.py --hands 8 --angle 20
"""
import argparse
from dataclasses import replace

import numpy as np

from fingergeo.dataset import draw_subject, synth_hand
from fingergeo.features import FEATURE_NAMES, extract_features


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hands", type=int, default=8)
    ap.add_argument("--angle", type=float, default=20.0)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    drift = []
    for _ in range(args.hands):
        p = replace(draw_subject(rng), noise=0.0)
        a = extract_features(synth_hand(replace(p, rotation=0.0), seed=1))
        b = extract_features(synth_hand(replace(p, rotation=args.angle), seed=2))
        drift.append(np.abs(a - b) / np.abs(a))
    drift = np.array(drift).reshape(args.hands, 4, -1)
    print(f"{'feature':<16} {'median':>8} {'max':>8}")
    for j, name in enumerate(FEATURE_NAMES):
        col = drift[:, :, j]
        print(f"{name:<16} {np.median(col):>8.3%} {col.max():>8.3%}")


if __name__ == "__main__":
    main()
