"""Compare the compiled kernels with their pure-Python fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the median wall time per call for each backend and the speed-up.
"""
import argparse
import statistics
import time

import numpy as np

from sleepguard import kernels


def _cases(rng):
    n, m = 300, 30
    xs, ys = rng.uniform(0, 90, n), rng.uniform(0, 90, n)
    heads = rng.choice(n, m, replace=False)
    eligible = np.ones(n, dtype=np.uint8)
    eligible[heads] = 0
    noise = rng.random((n, m, 2)) - 0.5
    assign = (xs, ys, eligible, xs[heads], ys[heads], noise, 1.0, 1 / 250**2, 1.0, 0.1, 250.0)

    k = 5000
    times = np.sort(rng.uniform(0, 1000, k))
    keys = rng.integers(0, 50, k)
    # generous thresholds so the whole trace is scanned
    scan = (times, keys, 50, 10**6, 0.0, 1.0)

    ptimes = np.sort(rng.uniform(0, 2, 400))
    accept = (rng.random(400) < 0.5).astype(np.uint8)
    starts = np.arange(0, 2, 1.0)
    wake = (ptimes, accept, starts, starts + 0.1, 0.5, 0.0, 2.0)
    return {"assign_members": assign, "scan_threshold": scan, "wake_scan": wake}


def bench(repeat: int = 20) -> list[tuple]:
    rng = np.random.default_rng(7)
    cases = _cases(rng)
    rows = []
    impls = kernels.backends()
    for name, args in cases.items():
        timings = {}
        for backend, impl in impls.items():
            fn = getattr(kernels, name)
            fn(*args, impl=impl)
            samples = []
            for _ in range(repeat):
                t = time.perf_counter()
                fn(*args, impl=impl)
                samples.append(time.perf_counter() - t)
            timings[backend] = statistics.median(samples)
        speedup = timings["python"] / timings["cython"] if "cython" in timings else float("nan")
        rows.append((name, timings.get("python"), timings.get("cython"), speedup))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<16}{'python (ms)':>14}{'cython (ms)':>14}{'speed-up':>10}")
    for name, py, cy, sp in bench(args.repeat):
        cy_txt = f"{cy * 1e3:14.3f}" if cy is not None else f"{'n/a':>14}"
        print(f"{name:<16}{py * 1e3:14.3f}{cy_txt}{sp:10.1f}")


if __name__ == "__main__":
    main()
