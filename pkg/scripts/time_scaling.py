"""Wall time of the order-3 forward pass as the state count grows.

The per-step cost is N**4, so doubling N should cost about 16x once the
transition term dominates the emission term (keep --dim small).
"""

import argparse

from hohmm.experiments import time_forward


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--states", type=int, nargs="+", default=[3, 6, 9, 12])
    parser.add_argument("--frames", type=int, default=200)
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    base = None
    print(f"{'N':>4}{'median ms':>12}{'vs first':>10}")
    for n in args.states:
        t = time_forward(n, args.frames, args.dim, args.repeats)
        base = base or t
        print(f"{n:>4}{1e3 * t:>12.3f}{t / base:>10.1f}")


if __name__ == "__main__":
    main()
