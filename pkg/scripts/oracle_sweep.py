"""Generator-noise oracle as a function of the assumed pixel-measurement floor.

    python3 scripts/oracle_sweep.py --floors 0 0.5 1 2 --trials 200
"""
import argparse

from fingergeo.oracle import PIXEL_FLOOR, generator_oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--floors", type=float, nargs="+", default=[0.0, 0.5, PIXEL_FLOOR, 2.0])
    ap.add_argument("--subjects", type=int, default=30)
    ap.add_argument("--noise", type=float, default=0.015)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=12345)
    args = ap.parse_args()
    print(f"{'floor':>6} {'accuracy':>9} {'sd':>7} {'EER':>7} {'sd':>7}")
    for floor in args.floors:
        r = generator_oracle(args.subjects, 2, args.noise, args.trials, args.seed, floor)
        print(f"{floor:>6.2f} {r.accuracy:>9.4f} {r.accuracy_se:>7.4f} {r.eer:>7.4f} {r.eer_se:>7.4f}")


if __name__ == "__main__":
    main()
