"""Compare SDD double thresholds with the minimum-misclassification optimum.

Scans smoothing bandwidth and line-fit window over seeded trimodal
histograms and reports how many cases land within the tolerance, plus the
signed offsets of each threshold from the nearest optimal edge pair.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import misclassification_optima  # noqa: E402

from lvsdd.histogram_sdd import Histogram, SddError, compute_sdd, select_double_threshold, smooth_histogram  # noqa: E402
from lvsdd.phantom import trimodal_samples  # noqa: E402


def study(bandwidth, window, sets, tol):
    hits, lows, highs = 0, [], []
    for classes, optima in sets:
        h = Histogram(np.bincount(np.concatenate(classes), minlength=256), 0, 256)
        try:
            t = select_double_threshold(compute_sdd(smooth_histogram(h, bandwidth), window), h)
        except SddError:
            continue
        a, b = t.low_bin + 1, t.high_bin + 1
        oa, ob = min(optima, key=lambda p: max(abs(a - p[0]), abs(b - p[1])))
        hits += max(abs(a - oa), abs(b - ob)) <= tol
        lows.append(a - oa)
        highs.append(b - ob)
    return hits, lows, highs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--bandwidths", type=int, nargs="+", default=[10, 14, 20])
    ap.add_argument("--windows", type=int, nargs="+", default=[13, 25, 35])
    ap.add_argument("--tol", type=int, default=5)
    args = ap.parse_args()

    for seed in args.seeds:
        rng = np.random.default_rng(seed)
        sets = []
        for _ in range(args.count):
            classes = trimodal_samples(rng)
            sets.append((classes, misclassification_optima(classes)[1]))
        print(f"seed {seed}")
        print("  bw  window  hits   mean(low-opt)  mean(high-opt)")
        for bw in args.bandwidths:
            for n in args.windows:
                if 2 * n >= 256:
                    continue
                hits, lows, highs = study(bw, n, sets, args.tol)
                print(f"  {bw:2d}  {n:6d}  {hits:2d}/{args.count}  {np.mean(lows):13.2f}  {np.mean(highs):14.2f}")


if __name__ == "__main__":
    main()
