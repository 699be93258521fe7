"""Compiled vs pure-Python quantum-jump kernel on the readout model.

    python benchmarks/bench_kernels.py --trajectories 10000 --repeat 3
"""

import argparse
import time

from qdcavity import kernels
from qdcavity.readout import ReadoutConfig, sample_detection_times


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=10000)
    ap.add_argument("--window", type=float, default=1000.0, help="ps")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    cfg = ReadoutConfig(window=args.window, trajectories=args.trajectories, seed=args.seed)
    impls = kernels.backends()
    print(f"spin-up readout, {cfg.trajectories} trajectories, T = {cfg.window:g} ps")
    results = {}
    for name in sorted(impls):
        sec, rec = best_of(lambda: sample_detection_times("up", cfg, backend=name), args.repeat)
        results[name] = (sec, rec.to_csv())
        print(f"  {name:9s} {sec:8.3f} s   {cfg.trajectories / sec:10.0f} traj/s")
    if len(results) == 2:
        (tc, csv_c), (tp, csv_p) = results["compiled"], results["python"]
        print(f"  speedup   {tp / tc:8.1f}x   identical records: {csv_c == csv_p}")
    else:
        print("  compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
