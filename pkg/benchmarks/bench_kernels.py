"""Benchmark the numba kernels against the pure-numpy fallbacks.

Usage:
    python3 benchmarks/bench_kernels.py [--quick]

Times the two hot paths, KDE log-density evaluation and the
energy-distance permutation statistics, on representative problem sizes.
The first numba call includes JIT compilation and is reported separately.
"""

import argparse
import time

import numpy as np

from sip_lab import _kernels


def _time(func, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        func(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_kde(n_points, n_data, dim, rng):
    points = rng.standard_normal((n_points, dim))
    data = rng.standard_normal((n_data, dim))
    bw = np.full(dim, 0.2)

    rows = []
    numpy_t = _time(_kernels.kde_log_pdf_numpy, points, data, bw)
    rows.append(("numpy", numpy_t))
    if _kernels.NUMBA_AVAILABLE:
        compile_t = _time(_kernels.kde_log_pdf_numba, points, data, bw, repeats=1)
        warm_t = _time(_kernels.kde_log_pdf_numba, points, data, bw)
        rows.append(("numba(first)", compile_t))
        rows.append(("numba(warm)", warm_t))
        check = np.allclose(
            _kernels.kde_log_pdf_numba(points, data, bw),
            _kernels.kde_log_pdf_numpy(points, data, bw),
            rtol=1e-12,
        )
    else:
        check = True
    label = f"kde_log_pdf  n={n_points} m={n_data} d={dim}"
    return label, rows, check


def bench_energy(group, dim, perms, rng):
    x = rng.standard_normal((group, dim))
    y = rng.standard_normal((group, dim)) + 0.1
    pooled = np.vstack([x, y])
    total = pooled.shape[0]
    dists = _kernels.pairwise_dists_numpy(pooled)
    groupings = np.vstack(
        [np.arange(total)] + [rng.permutation(total) for _ in range(perms)]
    ).astype(np.int64)

    rows = [("numpy", _time(_kernels.energy_stats_numpy, dists, groupings, group))]
    if _kernels.NUMBA_AVAILABLE:
        args = (np.ascontiguousarray(dists), np.ascontiguousarray(groupings), group)
        rows.append(("numba(first)", _time(_kernels._energy_stats_nb, *args,
                                           repeats=1)))
        rows.append(("numba(warm)", _time(_kernels._energy_stats_nb, *args)))
        check = np.allclose(
            _kernels._energy_stats_nb(*args),
            _kernels.energy_stats_numpy(dists, groupings, group),
            rtol=1e-12,
        )
    else:
        check = True
    label = f"energy_stats n={group}x2 d={dim} perms={perms}"
    return label, rows, check


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="smaller sizes for a fast smoke run")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    if args.quick:
        cases = [
            bench_kde(500, 2000, 1, rng),
            bench_kde(400, 2000, 2, rng),
            bench_energy(256, 2, 100, rng),
        ]
    else:
        cases = [
            bench_kde(4000, 10_000, 1, rng),
            bench_kde(3600, 10_000, 2, rng),
            bench_energy(1024, 2, 200, rng),
        ]

    print(f"numba available: {_kernels.NUMBA_AVAILABLE}; "
          f"active backend: {_kernels.backend()}")
    print(f"{'case':36s} {'variant':14s} {'seconds':>10s}")
    for label, rows, check in cases:
        for variant, seconds in rows:
            print(f"{label:36s} {variant:14s} {seconds:10.4f}")
        if not check:
            raise SystemExit(f"backend results disagree for {label}")
        base = dict(rows)
        if "numba(warm)" in base:
            speedup = base["numpy"] / base["numba(warm)"]
            print(f"{'':36s} {'speedup':14s} {speedup:9.2f}x")
    print("backends agree on all cases")


if __name__ == "__main__":
    main()
