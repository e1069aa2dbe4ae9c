"""Benchmark the compiled kernel core against the pure-NumPy fallback.

Run:  python benchmarks/bench_kernels.py [--repeats N]

Covers the hot shapes of the desk-scale training loop (conv/tconv forward and
backward, maxpool) plus the generator-side kernels (median filter, power
diagram rasterization).
"""

import argparse
import time

import numpy as np

from grainforge.kernels import _npkernels

try:
    from grainforge.kernels import _cykernels
except ImportError:
    _cykernels = None

CONV_SHAPES = [
    # (label, N, C, H, W, OC) -- the convs of net1 at desk scale, batch 16
    ("enc1  3->16 @64x128", 16, 3, 64, 128, 16),
    ("enc2 16->32 @32x64 ", 16, 16, 32, 64, 32),
    ("enc4 64->128 @8x16 ", 16, 64, 8, 16, 128),
    ("dec4 16->16 @64x128", 16, 16, 64, 128, 16),
]


def timeit(fn, repeats):
    fn()  # warmup
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_backend(impl, repeats, rng):
    rows = []
    for label, n, c, h, w, oc in CONV_SHAPES:
        x = rng.random((n, c, h, w))
        wt = rng.random((oc, c, 3, 3))
        b = rng.random(oc)
        y = impl.conv2d_forward(x, wt, b, 1, 1)
        dy = rng.random(y.shape)
        rows.append((f"conv fwd {label}", timeit(lambda: impl.conv2d_forward(x, wt, b, 1, 1), repeats)))
        rows.append((f"conv bwd {label}", timeit(lambda: impl.conv2d_backward(x, wt, dy, 1, 1), repeats)))

    x = rng.random((16, 128, 4, 8))
    wt = rng.random((128, 64, 2, 2))
    b = rng.random(64)
    dy = rng.random((16, 64, 8, 16))
    rows.append(("tconv fwd 128->64 @4x8", timeit(lambda: impl.tconv2d_forward(x, wt, b), repeats)))
    rows.append(("tconv bwd 128->64 @4x8", timeit(lambda: impl.tconv2d_backward(x, wt, dy), repeats)))

    x = rng.random((16, 16, 64, 128))
    _, idx = impl.maxpool2_forward(x)
    dy = rng.random((16, 16, 32, 64))
    rows.append(("maxpool fwd 16ch @64x128", timeit(lambda: impl.maxpool2_forward(x), repeats)))
    rows.append(("maxpool bwd 16ch @64x128", timeit(lambda: impl.maxpool2_backward(dy, idx), repeats)))

    img = rng.integers(0, 256, size=(96, 496), dtype=np.uint8)
    rows.append(("median 5x5 @96x496", timeit(lambda: impl.median_filter_u8(img, 5), repeats)))

    m = 150
    cx = rng.uniform(0, 496, m)
    cy = rng.uniform(0, 96, m)
    rsq = rng.uniform(9, 1600, m)
    rows.append(("power argmin 150 seeds @96x496",
                 timeit(lambda: impl.power_argmin(cx, cy, rsq, 496, 96), repeats)))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = [("numpy", _npkernels)]
    if _cykernels is not None:
        backends.insert(0, ("cython", _cykernels))
    else:
        print("compiled kernels not available; benchmarking the fallback only\n")

    results = {name: bench_backend(impl, args.repeats, np.random.default_rng(0))
               for name, impl in backends}

    names = [r[0] for r in results[backends[0][0]]]
    header = f"{'kernel':34s}" + "".join(f"{name:>12s}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for i, label in enumerate(names):
        line = f"{label:34s}"
        times = [results[name][i][1] for name, _ in backends]
        for t in times:
            line += f"{t * 1000:10.2f}ms"
        if len(times) == 2:
            line += f"{times[1] / times[0]:9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
