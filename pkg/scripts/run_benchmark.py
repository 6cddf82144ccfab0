"""Train order-1/2/3 models on the seeded synthetic benchmark and print accuracies.

    python scripts/run_benchmark.py [configs/benchmark.json] [--json out.json]
"""

import argparse
import json

from hohmm.experiments import DEFAULT_BENCHMARK, BenchmarkConfig, run_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("config", nargs="?", default=str(DEFAULT_BENCHMARK))
    parser.add_argument("--json", help="also write the results here")
    args = parser.parse_args()

    config = BenchmarkConfig.load(args.config)
    results = run_benchmark(config)
    envs = [e for e in next(iter(results.values())) if e != "seconds"]
    print(f"{'model':<8}" + "".join(f"{e:>12}" for e in envs) + f"{'seconds':>10}")
    for order, row in results.items():
        print(f"HMM{order:<5}" + "".join(f"{100 * row[e]:>11.1f}%" for e in envs) + f"{row['seconds']:>10.1f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({str(k): v for k, v in results.items()}, fh, indent=2)


if __name__ == "__main__":
    main()
