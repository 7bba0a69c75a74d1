"""Compare the numpy and numba kernel backends on matched inputs.

Run:  python benchmarks/bench_kernels.py [n_panels ...]

Times the three hot paths (single-layer inner integrals, double-layer P1
inner integrals, scatter accumulation) for both backends and prints the
speedup.  The numba variants are compiled once before timing.
"""

import sys
import time

import numpy as np

from hvibem import _kernels_numba as knb
from hvibem import _kernels_numpy as knp


def make_panels(n, seed=0):
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * np.arange(n) / n
    radius = 0.4 + 0.02 * rng.standard_normal(n)
    vx = radius * np.cos(ang)
    vy = radius * np.sin(ang)
    ax, ay = vx, vy
    bx, by = np.roll(vx, -1), np.roll(vy, -1)
    lens = np.hypot(bx - ax, by - ay)
    px = 0.5 * (ax + bx) + 0.3
    py = 0.5 * (ay + by) - 0.2
    return px, py, ax, ay, bx, by, lens


def timed(fn, *args, repeats=5):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def bench(n):
    panels = make_panels(n)
    rng = np.random.default_rng(1)
    idx = rng.integers(0, n, size=(n, 3))
    vals = rng.standard_normal((n, 3))

    rows = []
    for name, args in (
        ("sl_inner", panels),
        ("dl_inner_p1", panels),
        ("scatter_vec", (idx, vals, n)),
    ):
        ref, t_np = timed(getattr(knp, name), *args)
        got, t_nb = timed(getattr(knb, name), *args)
        if name == "dl_inner_p1":
            err = max(np.abs(r - g).max() for r, g in zip(ref, got))
        else:
            err = np.abs(ref - got).max()
        rows.append((name, t_np, t_nb, t_np / t_nb, err))
    return rows


def main(argv):
    sizes = [int(a) for a in argv] or [128, 512, 2048]
    # compile outside the timers
    bench(8)
    header = f"{'kernel':<14}{'n':>6}{'numpy[ms]':>12}{'numba[ms]':>12}{'speedup':>9}{'max|diff|':>12}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        for name, t_np, t_nb, ratio, err in bench(n):
            print(
                f"{name:<14}{n:>6}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}"
                f"{ratio:>9.2f}{err:>12.2e}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
